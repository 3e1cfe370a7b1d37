import math

import numpy as np
import pytest

from conftest import random_state
from sazig.errors import FormatError, InvalidMeanError, ValidationError
from sazig.model import (Link, ModelState, Side, SideParams, eta, eta_matrix, eta_vector, load_model,
                         mean_from_tau, prob, save_model, tau, tau_matrix, tau_vector)


def test_eta_examples():
    assert eta(np.zeros(4), np.zeros(4)) == 0.0
    assert eta(np.array([1.0, 0.0, 0.5, 0.0]), np.array([1.0, 0.0, 0.5, 0.0])) == 2.0
    with pytest.raises(ValidationError):
        eta(np.zeros(4), np.zeros(3))


def test_tau_examples():
    assert tau(np.zeros(3), np.zeros(3)) == 0.0
    theta = np.array([0.5, 0.5, 9.0, 0.1])
    assert tau(theta, theta) == pytest.approx(0.7, abs=1e-15)
    with pytest.raises(ValidationError):
        tau(np.zeros(4), np.zeros(5))


def test_prob():
    assert prob(0.0) == 0.5
    assert prob(math.log(3.0)) == pytest.approx(0.75, abs=1e-15)
    assert prob(-1000.0) == 0.0
    assert prob(1000.0) == 1.0
    etas = np.linspace(-30, 30, 101)
    assert np.all(np.diff(prob(etas)) >= 0)
    assert np.allclose(prob(-etas), 1.0 - prob(etas), atol=1e-15)


def test_mean_from_tau():
    assert mean_from_tau(Link.CANONICAL, -2.0) == 0.5
    assert mean_from_tau(Link.LOG, 0.0) == 1.0
    with pytest.raises(InvalidMeanError):
        mean_from_tau(Link.CANONICAL, 0.1)
    with pytest.raises(InvalidMeanError):
        mean_from_tau(Link.CANONICAL, 0.0)
    with pytest.raises(InvalidMeanError):
        mean_from_tau(Link.LOG, 1000.0)


def test_mean_from_tau_array_names_offender():
    with pytest.raises(InvalidMeanError) as info:
        mean_from_tau(Link.CANONICAL, np.array([-1.0, -0.5, 0.2, 0.3]))
    assert info.value.other == 2
    assert info.value.tau == 0.2


def test_bilinear_scaling_invariance(rng):
    state = random_state(rng, 4, 3, 3)
    scaled = state.copy()
    scaled.rows.vectors *= 2.0
    scaled.cols.vectors /= 2.0
    assert np.allclose(eta_matrix(state), eta_matrix(scaled), atol=1e-12)
    assert np.allclose(tau_matrix(state), tau_matrix(scaled), atol=1e-12)


def test_vector_forms_match_matrix(rng):
    state = random_state(rng, 5, 4, 2)
    assert np.allclose(eta_vector(state, Side.ROW, 3), eta_matrix(state)[3])
    assert np.allclose(tau_vector(state, Side.COL, 1), tau_matrix(state)[:, 1])
    theta = state.rows.theta(2)
    theta[-1] += 1.0
    assert np.allclose(tau_vector(state, Side.ROW, 2, theta), tau_matrix(state)[2] + 1.0)


def test_side_params_validation():
    with pytest.raises(ValidationError):
        SideParams(np.zeros((3, 2)), np.zeros(2), np.zeros(3))
    with pytest.raises(ValidationError):
        SideParams(np.array([[np.nan]]), np.zeros(1), np.zeros(1))
    with pytest.raises(ValidationError):
        ModelState(SideParams.zeros(2, 2), SideParams.zeros(2, 3))
    with pytest.raises(ValidationError):
        ModelState(SideParams.zeros(2, 2), SideParams.zeros(2, 2), shape=0.0)


def test_theta_round_trip():
    side = SideParams.zeros(3, 2)
    side.set_theta(1, [1.0, 2.0, 3.0, 4.0])
    assert list(side.vectors[1]) == [1.0, 2.0]
    assert side.bias_b[1] == 3.0
    assert side.bias_e[1] == 4.0
    assert list(side.theta(1)) == [1.0, 2.0, 3.0, 4.0]


def test_checkpoint_is_bit_exact(tmp_path, rng):
    state = random_state(rng, 4, 6, 3, link=Link.CANONICAL, shape=3.7)
    state.iteration = 12
    path = tmp_path / "state.model"
    save_model(state, str(path))

    back = load_model(str(path))
    assert back.link is Link.CANONICAL
    assert back.shape == 3.7
    assert back.iteration == 12
    assert back.rows.equals(state.rows)
    assert back.cols.equals(state.cols)
    assert path.read_text().splitlines()[0] == "#sazig-model-v1 4 6 3 canonical 3.7000000000000002 12"


def test_checkpoint_zero_dimension(tmp_path):
    state = ModelState(SideParams.zeros(1, 0), SideParams.zeros(1, 0))
    path = tmp_path / "d0.model"
    save_model(state, str(path))
    assert load_model(str(path)).d == 0


def test_checkpoint_truncated(tmp_path, rng):
    path = tmp_path / "state.model"
    save_model(random_state(rng, 3, 3, 2), str(path))
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(FormatError):
        load_model(str(path))
