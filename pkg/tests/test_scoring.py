import numpy as np
import pytest

from conftest import random_matrix, random_state
from sazig.config import FitConfig, Schedule
from sazig.errors import SingularInformationError, ValidationError
from sazig.likelihood import gamma_logpdf, index_loglik, total_loss, total_loss_by_columns
from sazig.model import Link, ModelState, Side, eta_vector, prob, tau_vector
from sazig.scoring import ScoreBlock, default_ridge, fisher_solve, score_col, score_index, score_row
from sazig.trainer import fisher_step


def _loglik_at(Y, state, side, index, theta):
    return index_loglik(Y, state, side, index, theta=theta).total


def _numeric_gradient(Y, state, side, index, h=1e-6):
    theta = state.side(side).theta(index)
    grad = np.zeros(len(theta))
    for a in range(len(theta)):
        step = np.zeros(len(theta))
        step[a] = h
        grad[a] = (_loglik_at(Y, state, side, index, theta + step)
                   - _loglik_at(Y, state, side, index, theta - step)) / (2 * h)
    return grad


def _random_instances(count, seed):
    rng = np.random.default_rng(seed)
    for k in range(count):
        n_rows, n_cols = (int(v) for v in rng.integers(5, 13, size=2))
        d = int(rng.integers(1, 5))
        link = Link.LOG if k % 2 == 0 else Link.CANONICAL
        Y = random_matrix(rng, n_rows, n_cols, density=rng.uniform(0.2, 0.8))
        state = random_state(rng, n_rows, n_cols, d, link=link, shape=float(rng.uniform(0.5, 5.0)))
        yield rng, Y, state


def test_score_matches_finite_differences():
    for rng, Y, state in _random_instances(50, seed=101):
        for side in (Side.ROW, Side.COL):
            n = Y.n_rows if side is Side.ROW else Y.n_cols
            index = int(rng.integers(n))
            analytic = score_index(Y, state, side, index).u
            numeric = _numeric_gradient(Y, state, side, index)
            err = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
            assert err.max() < 1e-6


@pytest.mark.parametrize("link", [Link.LOG, Link.CANONICAL])
def test_vector_score_matches_overall_loss(link):
    """A latent coordinate moves the overall loss by the score, summed by rows or by columns."""
    rng = np.random.default_rng(103)
    Y = random_matrix(rng, 7, 6)
    state = random_state(rng, 7, 6, 3, link=link)
    h = 1e-6
    for side, index, k in ((Side.ROW, 4, 1), (Side.COL, 2, 0)):
        analytic = score_index(Y, state, side, index).u[k]
        for loss in (total_loss, total_loss_by_columns):
            values = []
            for sign in (1.0, -1.0):
                moved = state.copy()
                moved.side(side).vectors[index, k] += sign * h
                values.append(loss(Y, moved))
            numeric = (values[1] - values[0]) / (2 * h)
            assert abs(numeric - analytic) / max(1.0, abs(analytic)) < 1e-6


def test_canonical_information_is_negative_hessian():
    for rng, Y, state in _random_instances(50, seed=202):
        if state.link is not Link.CANONICAL:
            continue
        for side in (Side.ROW, Side.COL):
            n = Y.n_rows if side is Side.ROW else Y.n_cols
            index = int(rng.integers(n))
            own = state.side(side)
            theta = own.theta(index)
            h = 1e-5
            hess = np.zeros((len(theta), len(theta)))
            for a in range(len(theta)):
                step = np.zeros(len(theta))
                step[a] = h
                up = score_index(Y, state, side, index, theta=theta + step).u
                down = score_index(Y, state, side, index, theta=theta - step).u
                hess[:, a] = (up - down) / (2 * h)
            s = score_index(Y, state, side, index).s
            err = np.abs(s + hess) / np.maximum(1.0, np.abs(s))
            assert err.max() < 1e-6


def test_log_link_gamma_block_is_expected_information():
    """Average observed Gamma information over resampled y matches nu * sum x x^T."""
    rng = np.random.default_rng(303)
    Y = random_matrix(rng, 4, 6, density=0.6)
    state = random_state(rng, 4, 6, 2, link=Link.LOG, shape=3.0)
    index = 1
    d = state.d
    positions, _ = Y.row(index)
    X = state.cols.vectors[positions]

    tau0 = tau_vector(state, Side.ROW, index)[positions]
    mu0 = np.exp(tau0)
    samples = rng.gamma(state.shape, mu0 / state.shape, size=(10_000, len(positions)))

    # coordinates (w, e) of the Gamma part only
    base = np.concatenate([state.rows.vectors[index], [state.rows.bias_e[index]]])
    aug = np.column_stack([X, np.ones(len(positions))])

    def gamma_ll(coords):
        mu = np.exp(tau0 + aug @ (coords - base))
        return gamma_logpdf(samples, mu[None, :], state.shape).sum(axis=1)

    h = 1e-3
    k = d + 1
    hessians = np.zeros((len(samples), k, k))
    for a in range(k):
        for b in range(k):
            ea, eb = np.eye(k)[a] * h, np.eye(k)[b] * h
            hessians[:, a, b] = (gamma_ll(base + ea + eb) - gamma_ll(base + ea - eb)
                                 - gamma_ll(base - ea + eb) + gamma_ll(base - ea - eb)) / (4 * h * h)
    observed = -hessians
    mean = observed.mean(axis=0)
    se = observed.std(axis=0, ddof=1) / np.sqrt(len(samples))

    block = score_row(Y, state, index).s
    p = prob(eta_vector(state, Side.ROW, index))
    Xall = state.cols.vectors
    bern_ww = (Xall.T * (p * (1 - p))) @ Xall
    expected = np.zeros((k, k))
    expected[:d, :d] = block[:d, :d] - bern_ww
    expected[:d, d] = expected[d, :d] = block[:d, d + 1]
    expected[d, d] = block[d + 1, d + 1]

    assert np.allclose(expected, state.shape * aug.T @ aug)
    assert np.all(np.abs(mean - expected) <= 4 * se)


def test_be_block_is_zero(small_instance):
    Y, state = small_instance
    block = score_col(Y, state, 2)
    d = state.d
    assert block.s[d, d + 1] == 0.0
    assert block.s[d + 1, d] == 0.0
    assert np.allclose(block.s, block.s.T)


def test_no_positives_freezes_e(rng):
    state = random_state(rng, 3, 4, 2)
    Y = random_matrix(rng, 3, 4, ensure_each=False, density=0.0)
    block = score_row(Y, state, 0)
    assert block.frozen_e
    assert block.u[-1] == 0.0
    delta = fisher_solve(block)
    assert delta[-1] == 0.0
    assert np.all(np.isfinite(delta))


def test_trial_theta_length_checked(small_instance):
    Y, state = small_instance
    with pytest.raises(ValidationError):
        score_index(Y, state, Side.ROW, 0, theta=np.zeros(2))


def test_solve_escalates_ridge():
    block = ScoreBlock(u=np.ones(3), s=np.zeros((3, 3)))
    with pytest.raises(SingularInformationError):
        fisher_solve(block, ridge=0.0, retries=0)
    delta = fisher_solve(block, ridge=0.0, retries=1)
    assert np.allclose(delta, 1e8)


def test_solve_non_finite_information():
    block = ScoreBlock(u=np.ones(2), s=np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(SingularInformationError):
        fisher_solve(block, ridge=1e-6, retries=2)
    with pytest.raises(ValidationError):
        fisher_solve(block, ridge=-1.0)


def test_default_ridge():
    block = ScoreBlock(u=np.zeros(4), s=np.diag([1.0, 2.0, 3.0, 6.0]))
    assert default_ridge(block, 1e-8) == pytest.approx(3e-8)


def _dense_oracle(Y, state, index):
    """Score and information for row ``index`` by explicit per-cell accumulation."""
    d = state.d
    y_row = Y.toarray()[index]
    u = np.zeros(d + 2)
    s = np.zeros((d + 2, d + 2))
    for j in range(state.cols.n):
        x = state.cols.vectors[j]
        eta_ij = state.rows.vectors[index] @ x + state.rows.bias_b[index] + state.cols.bias_b[j]
        p = 1.0 / (1.0 + np.exp(-eta_ij))
        zb = np.concatenate([x, [1.0, 0.0]])
        u += ((y_row[j] > 0) - p) * zb
        s += p * (1 - p) * np.outer(zb, zb)
        if y_row[j] > 0:
            tau_ij = state.rows.vectors[index] @ x + state.rows.bias_e[index] + state.cols.bias_e[j]
            mu = np.exp(tau_ij)
            ze = np.concatenate([x, [0.0, 1.0]])
            u += state.shape * (y_row[j] - mu) / mu * ze
            s += state.shape * np.outer(ze, ze)
    return u, s


def test_unit_step_is_fisher_update(small_instance):
    Y, state = small_instance
    config = FitConfig(ridge=0.0, lr_schedule=Schedule.NONE)
    theta = state.rows.theta(3)
    u, s = _dense_oracle(Y, state, 3)
    expected = theta + np.linalg.solve(s, u)

    result = fisher_step(Y, state, Side.ROW, 3, 1.0, config)
    assert result.accepted
    assert result.halvings == 0
    assert np.allclose(result.theta, expected, rtol=1e-9, atol=1e-12)
    assert np.allclose(state.rows.theta(3), expected, rtol=1e-9, atol=1e-12)
