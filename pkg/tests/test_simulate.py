import numpy as np
import pytest

from sazig.config import SimConfig, SimSeeds
from sazig.errors import InvalidMeanError, ValidationError
from sazig.model import Link, eta_matrix, prob, tau_matrix
from sazig.simulate import InitSetting, generate, make_init


def test_default_config():
    config = SimConfig()
    assert (config.n, config.d, config.shape) == (300, 50, 4.0)
    assert config.w_range == (-0.25, 0.25)
    assert config.e_range == (0.1, 0.35)
    assert config.tie_sides


def test_config_validation():
    with pytest.raises(ValidationError):
        SimConfig(shape=-1.0)
    with pytest.raises(ValidationError):
        SimConfig(n=0)
    with pytest.raises(ValidationError):
        SimConfig(b_range=(1.0, 0.0))


def test_generate_shapes_and_ties():
    Y, truth = generate(SimConfig(n=20, d=3))
    assert Y.shape == (20, 20)
    assert truth.d == 3
    assert truth.link is Link.LOG
    assert truth.shape == 4.0
    assert np.array_equal(truth.rows.vectors, truth.cols.vectors)
    assert not np.array_equal(truth.rows.bias_e, truth.cols.bias_e)
    assert np.all(Y.positive_values() > 0)


def test_generate_is_deterministic():
    Y1, truth1 = generate(SimConfig(n=15, d=2))
    Y2, truth2 = generate(SimConfig(n=15, d=2))
    assert Y1.triples() == Y2.triples()
    assert truth1.rows.equals(truth2.rows)
    Y3, _ = generate(SimConfig(n=15, d=2, seeds=SimSeeds().shifted(1)))
    assert Y3.triples() != Y1.triples()


def test_high_intercepts_fill_matrix():
    Y, _ = generate(SimConfig(n=5, d=2, b_range=(10.0, 10.05)))
    assert Y.nnz == 25


def test_low_intercepts_empty_matrix():
    Y, _ = generate(SimConfig(n=5, d=2, b_range=(-10.0, -9.95)))
    assert Y.nnz <= 1


def test_overflowing_means_abort():
    with pytest.raises(InvalidMeanError):
        generate(SimConfig(n=3, d=2, e_range=(400.0, 400.0)))


def test_positive_fraction_matches_probabilities():
    Y, truth = generate(SimConfig(n=100, d=5))
    p = prob(eta_matrix(truth))
    se = np.sqrt((p * (1 - p)).sum()) / p.size
    assert abs(Y.nnz / p.size - p.mean()) <= 3 * se


def test_positive_values_track_means():
    config = SimConfig(n=150, d=3, e_range=(-1.0, 1.0))
    Y, truth = generate(config)
    mu = np.exp(tau_matrix(truth))
    cells = np.array([(i, j, y) for i, j, y in Y.triples()])
    means = mu[cells[:, 0].astype(int), cells[:, 1].astype(int)]
    slope = (means @ cells[:, 2]) / (means @ means)
    assert len(cells) >= 10_000
    assert slope == pytest.approx(1.0, abs=0.1)


def test_setting_one_keeps_truth_except_column_vectors():
    config = SimConfig(n=10, d=3)
    _, truth = generate(config)
    init = make_init(InitSetting.TRUE_EXCEPT_WTILDE, truth, config)
    assert init.rows.equals(truth.rows)
    assert np.array_equal(init.cols.bias_b, truth.cols.bias_b)
    assert np.array_equal(init.cols.bias_e, truth.cols.bias_e)
    assert not np.array_equal(init.cols.vectors, truth.cols.vectors)
    assert np.all(np.abs(init.cols.vectors) <= 0.25)


def test_setting_two_is_random_and_reproducible():
    config = SimConfig(n=10, d=3)
    _, truth = generate(config)
    a = make_init(InitSetting.ALL_RANDOM, truth, config)
    b = make_init(2, truth, config)
    assert a.rows.equals(b.rows)
    assert a.cols.equals(b.cols)
    assert not a.rows.equals(truth.rows)
    assert np.all((a.rows.bias_e >= 0.1) & (a.rows.bias_e <= 0.35))
    assert np.all((a.cols.bias_e >= 0.1) & (a.cols.bias_e <= 0.35))
