"""Synthetic shared-parameter ZIG data under the log link.

Parameters are drawn from uniform ranges, p_ij = logistic(eta_ij),
mu_ij = exp(tau_ij), B_ij ~ Bernoulli(p_ij) and, where B_ij = 1,
Y_ij ~ Gamma(shape=nu, scale=mu_ij / nu).
"""
import logging
from enum import Enum
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from .config import SimConfig, SimSeeds
from .errors import InvalidMeanError
from .model import Link, ModelState, SideParams, eta_matrix, prob, tau_matrix
from .sparse import SparseCountMatrix

logger = logging.getLogger(__name__)


class InitSetting(int, Enum):
    # start at the truth except for the column vectors w~
    TRUE_EXCEPT_WTILDE = 1
    # every block drawn at random
    ALL_RANDOM = 2


def _uniform(seed: int, bounds, size):
    lo, hi = bounds
    return np.random.default_rng(seed).uniform(lo, hi, size)


def _random_side(config: SimConfig, seed_w: int, seed_b: int, seed_e: int) -> SideParams:
    n, d = config.n, config.d
    return SideParams(
        _uniform(seed_w, config.w_range, (n, d)),
        _uniform(seed_b, config.b_range, n),
        _uniform(seed_e, config.e_range, n),
    )


def generate(config: SimConfig) -> Tuple[SparseCountMatrix, ModelState]:
    """Draws a ground-truth state and an n x n observation matrix from it."""
    seeds = config.seeds
    rows = _random_side(config, seeds.w, seeds.b, seeds.e)
    cols = _random_side(config, seeds.wt, seeds.bt, seeds.et)
    if config.tie_sides:
        cols.vectors = rows.vectors.copy()
    truth = ModelState(rows, cols, link=Link.LOG, shape=config.shape)

    p = prob(eta_matrix(truth))
    tau = tau_matrix(truth)
    with np.errstate(over='ignore'):
        mu = np.exp(tau)
    if not np.all(np.isfinite(mu)):
        i, j = np.argwhere(~np.isfinite(mu))[0]
        raise InvalidMeanError(tau[i, j], Link.LOG, 'row', int(i), int(j))

    positive = np.random.default_rng(seeds.bernoulli).random(p.shape) < p
    i_idx, j_idx = np.nonzero(positive)
    y = np.random.default_rng(seeds.gamma).gamma(config.shape, mu[i_idx, j_idx] / config.shape)

    csr = sp.csr_matrix((y, (i_idx, j_idx)), shape=(config.n, config.n))
    csr.eliminate_zeros()
    Y = SparseCountMatrix(csr)
    logger.info(f"Simulated {config.n}x{config.n} matrix, d={config.d}, nu={config.shape}, "
                f"{Y.nnz} positives (mean p={p.mean():.4f})")
    return Y, truth


def make_init(setting: InitSetting, truth: ModelState, config: SimConfig,
              seeds: SimSeeds = None) -> ModelState:
    """Starting state for the two simulation settings."""
    setting = InitSetting(setting)
    seeds = seeds or config.seeds
    n, d = truth.rows.n, truth.d

    if setting is InitSetting.TRUE_EXCEPT_WTILDE:
        cols = truth.cols.copy()
        cols.vectors = _uniform(seeds.init_wt, config.w_range, (truth.cols.n, d))
        return ModelState(truth.rows.copy(), cols, link=truth.link, shape=truth.shape)

    rows = SideParams(
        _uniform(seeds.init_w, config.w_range, (n, d)),
        _uniform(seeds.init_b, config.b_range, n),
        _uniform(seeds.init_e, config.e_range, n),
    )
    cols = SideParams(
        _uniform(seeds.init_wt, config.w_range, (truth.cols.n, d)),
        _uniform(seeds.init_bt, config.b_range, truth.cols.n),
        _uniform(seeds.init_et, config.e_range, truth.cols.n),
    )
    return ModelState(rows, cols, link=truth.link, shape=truth.shape)
