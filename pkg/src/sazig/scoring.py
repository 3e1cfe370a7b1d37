"""Score vectors and expected information for one row or column.

Coordinates are ordered (w, b, e). The Bernoulli part touches (w, b) and sums
over every index of the opposite side; the Gamma part touches (w, e) and sums
over the positive cells only, so the (b, e) block is identically zero.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import SingularInformationError, ValidationError
from .likelihood import positive_means
from .model import Link, ModelState, Side, eta_vector, prob, tau_vector
from .sparse import SparseCountMatrix

logger = logging.getLogger(__name__)


@dataclass
class ScoreBlock:
    u: np.ndarray
    s: np.ndarray
    # No positive cells: e never enters the likelihood and stays frozen
    frozen_e: bool = False

    @property
    def d(self) -> int:
        return len(self.u) - 2


def score_index(Y: SparseCountMatrix, state: ModelState, side: Side, index: int,
                theta: np.ndarray = None) -> ScoreBlock:
    """Score U and information S for one index, at its current or trial parameters."""
    side = Side(side)
    other = state.side(side.other)
    d = state.d
    if theta is not None and len(theta) != d + 2:
        raise ValidationError(f"theta must have length {d + 2}, got {len(theta)}")
    X = other.vectors
    nu = state.shape

    positions, y, mu = positive_means(Y, state, side, index, theta)

    p = prob(eta_vector(state, side, index, theta))
    g = np.zeros(len(p))
    g[positions] = 1.0
    resid_b = g - p
    weight_b = p * (1.0 - p)

    Xp = X[positions]
    if state.link is Link.CANONICAL:
        tau = tau_vector(state, side, index, theta)[positions]
        resid_e = nu * (1.0 / tau + y)
        weight_e = nu / tau ** 2
    else:
        resid_e = nu * (y - mu) / mu
        weight_e = np.full(len(y), nu)

    u = np.empty(d + 2)
    u[:d] = X.T @ resid_b + Xp.T @ resid_e
    u[d] = resid_b.sum()
    u[d + 1] = resid_e.sum()

    s = np.zeros((d + 2, d + 2))
    s[:d, :d] = (X.T * weight_b) @ X + (Xp.T * weight_e) @ Xp
    s[:d, d] = s[d, :d] = X.T @ weight_b
    s[:d, d + 1] = s[d + 1, :d] = Xp.T @ weight_e
    s[d, d] = weight_b.sum()
    s[d + 1, d + 1] = weight_e.sum()

    return ScoreBlock(u=u, s=s, frozen_e=len(positions) == 0)


def score_row(Y: SparseCountMatrix, state: ModelState, i: int) -> ScoreBlock:
    return score_index(Y, state, Side.ROW, i)


def score_col(Y: SparseCountMatrix, state: ModelState, j: int) -> ScoreBlock:
    return score_index(Y, state, Side.COL, j)


def default_ridge(block: ScoreBlock, relative: float) -> float:
    """relative * trace(S) / (d + 2)."""
    return relative * float(np.trace(block.s)) / len(block.u)


def fisher_solve(block: ScoreBlock, ridge: float = 0.0, retries: int = 4) -> np.ndarray:
    """Solves (S + ridge * I) delta = U by Cholesky.

    A failed factorization is retried with the ridge multiplied by ten (a zero
    ridge restarts from 1e-8 * trace / (d + 2), or 1e-8 for a zero trace), up
    to ``retries`` times. A frozen e coordinate is left out and gets delta 0.
    """
    if ridge < 0:
        raise ValidationError(f"ridge must be non-negative, got {ridge}")
    k = len(block.u)
    free = np.ones(k, dtype=bool)
    if block.frozen_e:
        free[-1] = False
    s = block.s[np.ix_(free, free)]
    u = block.u[free]
    fallback = default_ridge(block, 1e-8) or 1e-8

    current = ridge
    for attempt in range(retries + 1):
        try:
            factor = cho_factor(s + current * np.eye(len(u)), lower=True, check_finite=True)
            delta = np.zeros(k)
            delta[free] = cho_solve(factor, u)
            if attempt:
                logger.debug(f"Cholesky succeeded with ridge {current:.3g} after {attempt} retries")
            return delta
        except (LinAlgError, ValueError):
            current = current * 10.0 if current > 0 else fallback

    raise SingularInformationError(f"information matrix singular after {retries} ridge retries")
