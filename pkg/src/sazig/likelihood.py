"""Zero-inflated Gamma log density, per-index log likelihoods and the overall loss.

For a row i the log likelihood splits into a Bernoulli part over all n
columns (zero vs positive) and a Gamma part over the positive cells only:
l_i = l_i^(1) + l_i^(2). Columns are the mirror image. Zero cells are never
materialised; they enter through log(1 - p_ij) on the dense predictor vector.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvalidMeanError, ValidationError
from .model import ModelState, Side, eta_vector, mean_from_tau, prob, tau_vector
from .sparse import SparseCountMatrix

# Probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] before taking logs
PROB_EPS = 1e-12
SHAPE_BOUNDS = (0.1, 1e4)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossBreakdown:
    bern: float
    gamma: float

    @property
    def total(self) -> float:
        return self.bern + self.gamma


def gamma_logpdf(y, mu, nu):
    """Gamma log density with mean mu and shape nu, constants included."""
    y = np.asarray(y, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    return -gammaln(nu) + nu * np.log(nu * y / mu) - np.log(y) - nu * y / mu


def zig_logpdf(y: float, p: float, mu: float, nu: float) -> float:
    """Log density of one zero-inflated Gamma observation."""
    if y < 0:
        raise ValidationError(f"negative observation {y}")
    if not 0 < p < 1:
        raise ValidationError(f"probability must lie strictly inside (0, 1), got {p}")
    if mu <= 0 or nu <= 0:
        raise ValidationError(f"mean and shape must be positive, got mu={mu}, nu={nu}")
    if y == 0:
        return float(np.log1p(-p))
    return float(np.log(p) + gamma_logpdf(y, mu, nu))


def _entries(Y: SparseCountMatrix, side: Side, index: int):
    return Y.row(index) if Side(side) is Side.ROW else Y.col(index)


def positive_means(Y: SparseCountMatrix, state: ModelState, side: Side, index: int,
                   theta: np.ndarray = None):
    """Positions, observations and Gamma means of the positive cells of one index."""
    positions, y = _entries(Y, side, index)
    tau = tau_vector(state, side, index, theta)[positions]
    try:
        mu = mean_from_tau(state.link, tau)
    except InvalidMeanError as e:
        other = int(positions[e.other]) if e.other is not None else None
        raise InvalidMeanError(e.tau, state.link, Side(side).value, index, other) from e
    return positions, y, np.asarray(mu, dtype=np.float64)


def index_loglik(Y: SparseCountMatrix, state: ModelState, side: Side, index: int,
                 theta: np.ndarray = None) -> LossBreakdown:
    """Log likelihood of one row or column, optionally at trial parameters ``theta``."""
    positions, y, mu = positive_means(Y, state, side, index, theta)

    p = np.clip(prob(eta_vector(state, side, index, theta)), PROB_EPS, 1.0 - PROB_EPS)
    terms = np.log1p(-p)
    terms[positions] = np.log(p[positions])
    bern = float(terms.sum())

    gamma = float(gamma_logpdf(y, mu, state.shape).sum()) if len(y) else 0.0
    return LossBreakdown(bern=bern, gamma=gamma)


def row_loglik(Y: SparseCountMatrix, state: ModelState, i: int) -> LossBreakdown:
    return index_loglik(Y, state, Side.ROW, i)


def col_loglik(Y: SparseCountMatrix, state: ModelState, j: int) -> LossBreakdown:
    return index_loglik(Y, state, Side.COL, j)


def side_logliks(Y: SparseCountMatrix, state: ModelState, side: Side, workers: int = 1):
    """Per-index breakdowns in index order; ``workers`` > 1 evaluates them in a thread pool."""
    side = Side(side)
    n = Y.n_rows if side is Side.ROW else Y.n_cols

    def evaluate(k):
        return index_loglik(Y, state, side, k)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(evaluate, range(n)))
    return [evaluate(k) for k in range(n)]


def total_loss(Y: SparseCountMatrix, state: ModelState, workers: int = 1) -> float:
    """Overall loss: the negative log likelihood summed over rows in index order."""
    return -sum(b.total for b in side_logliks(Y, state, Side.ROW, workers))


def total_loss_by_columns(Y: SparseCountMatrix, state: ModelState, workers: int = 1) -> float:
    return -sum(b.total for b in side_logliks(Y, state, Side.COL, workers))


def estimate_shape(Y: SparseCountMatrix, state: ModelState = None) -> float:
    """Method-of-moments Gamma shape from the positive entries.

    Without a state each positive y is divided by its row's positive mean
    (rows with fewer than two positives carry no spread and are skipped).
    When no row has two positives, every positive is divided by the global
    positive mean instead. With a fitted state y is divided by its fitted
    mean mu_ij. The estimate mean^2 / variance of the ratios is clamped to
    ``SHAPE_BOUNDS``; with fewer than two positives or no spread at all the
    shape falls back to 1 (exponential) and a warning is logged.
    """
    ratios = []
    for i in range(Y.n_rows):
        positions, y = Y.row(i)
        if state is None:
            if len(y) < 2:
                continue
            ratios.append(y / y.mean())
        elif len(y):
            _, _, mu = positive_means(Y, state, Side.ROW, i)
            ratios.append(y / mu)

    pooled = np.concatenate(ratios) if ratios else np.empty(0)
    if state is None and len(pooled) < 2 and Y.nnz >= 2:
        logger.warning("No row has two positive entries; pooling all positives around their global mean")
        y = Y.positive_values()
        pooled = y / y.mean()

    if len(pooled) < 2:
        logger.warning(f"Shape estimation needs at least 2 positive entries, got {len(pooled)}; using shape 1")
        return 1.0
    var = pooled.var(ddof=1)
    if not var > 0:
        logger.warning("Positive entries have no spread; using shape 1")
        return 1.0

    nu = float(np.clip(pooled.mean() ** 2 / var, *SHAPE_BOUNDS))
    logger.info(f"Moment estimate of Gamma shape: {nu:.6g} from {len(pooled)} positives")
    return nu
