"""Parameter containers and link functions.

Each row i carries theta_i = (w_i, b_i, e_i) and each column j carries
theta~_j = (w~_j, b~_j, e~_j). The logit of P(y_ij > 0) is
eta_ij = w_i.w~_j + b_i + b~_j; the Gamma mean is tied to
tau_ij = w_i.w~_j + e_i + e~_j through the chosen link.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy.special import expit

from .errors import FormatError, InvalidMeanError, ValidationError
from .utils import fmt17

MODEL_HEADER = '#sazig-model-v1'

logger = logging.getLogger(__name__)


class Link(str, Enum):
    CANONICAL = 'canonical'
    LOG = 'log'


class Side(str, Enum):
    ROW = 'row'
    COL = 'col'

    @property
    def other(self) -> 'Side':
        return Side.COL if self is Side.ROW else Side.ROW


@dataclass
class SideParams:
    """Latent vectors plus the two bias columns for one side of the matrix."""

    vectors: np.ndarray
    bias_b: np.ndarray
    bias_e: np.ndarray

    def __post_init__(self):
        self.vectors = np.array(self.vectors, dtype=np.float64)
        self.bias_b = np.array(self.bias_b, dtype=np.float64).reshape(-1)
        self.bias_e = np.array(self.bias_e, dtype=np.float64).reshape(-1)
        if self.vectors.ndim == 1 and self.vectors.size == 0:
            self.vectors = self.vectors.reshape(len(self.bias_b), 0)
        if self.vectors.ndim != 2:
            raise ValidationError("vectors must be an n x d matrix")
        n = self.vectors.shape[0]
        if len(self.bias_b) != n or len(self.bias_e) != n:
            raise ValidationError(
                f"inconsistent sizes: vectors {n}, bias_b {len(self.bias_b)}, bias_e {len(self.bias_e)}")
        for name in ('vectors', 'bias_b', 'bias_e'):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"{name} contains non-finite values")

    @classmethod
    def zeros(cls, n: int, d: int) -> 'SideParams':
        return cls(np.zeros((n, d)), np.zeros(n), np.zeros(n))

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def theta(self, i: int) -> np.ndarray:
        """Stacked (w_i, b_i, e_i) of length d + 2."""
        return np.concatenate([self.vectors[i], [self.bias_b[i], self.bias_e[i]]])

    def set_theta(self, i: int, theta: np.ndarray):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.d + 2,):
            raise ValidationError(f"theta must have length {self.d + 2}")
        self.vectors[i] = theta[:self.d]
        self.bias_b[i] = theta[self.d]
        self.bias_e[i] = theta[self.d + 1]

    def copy(self) -> 'SideParams':
        return SideParams(self.vectors.copy(), self.bias_b.copy(), self.bias_e.copy())

    def equals(self, other: 'SideParams') -> bool:
        return (np.array_equal(self.vectors, other.vectors)
                and np.array_equal(self.bias_b, other.bias_b)
                and np.array_equal(self.bias_e, other.bias_e))


@dataclass
class ModelState:
    rows: SideParams
    cols: SideParams
    link: Link = Link.LOG
    shape: float = 1.0
    iteration: int = 0

    def __post_init__(self):
        self.link = Link(self.link)
        if self.rows.d != self.cols.d:
            raise ValidationError(f"row dimension {self.rows.d} != column dimension {self.cols.d}")
        if not (np.isfinite(self.shape) and self.shape > 0):
            raise ValidationError(f"Gamma shape must be positive, got {self.shape}")

    @property
    def d(self) -> int:
        return self.rows.d

    def side(self, side: Side) -> SideParams:
        return self.rows if Side(side) is Side.ROW else self.cols

    def copy(self) -> 'ModelState':
        return ModelState(self.rows.copy(), self.cols.copy(), self.link, self.shape, self.iteration)


def _split(theta: np.ndarray):
    theta = np.asarray(theta, dtype=np.float64)
    d = len(theta) - 2
    return theta[:d], theta[d], theta[d + 1]


def eta(theta_i: np.ndarray, thetat_j: np.ndarray) -> float:
    """Bernoulli logit w_i.w~_j + b_i + b~_j for stacked parameter vectors."""
    if len(theta_i) != len(thetat_j):
        raise ValidationError(f"dimension mismatch: {len(theta_i)} vs {len(thetat_j)}")
    w, b, _ = _split(theta_i)
    wt, bt, _ = _split(thetat_j)
    return float(w @ wt + b + bt)


def tau(theta_i: np.ndarray, thetat_j: np.ndarray) -> float:
    """Gamma linear predictor w_i.w~_j + e_i + e~_j."""
    if len(theta_i) != len(thetat_j):
        raise ValidationError(f"dimension mismatch: {len(theta_i)} vs {len(thetat_j)}")
    w, _, e = _split(theta_i)
    wt, _, et = _split(thetat_j)
    return float(w @ wt + e + et)


def prob(eta_value):
    """Inverse logit; saturates to 0/1 instead of overflowing."""
    return expit(eta_value)


def mean_from_tau(link: Link, tau_value: Union[float, np.ndarray]):
    """Gamma mean for the link.

    Canonical: mu = -1/tau, defined only for tau < 0. Log: mu = exp(tau).
    Raises ``InvalidMeanError`` outside the natural parameter space; for
    arrays the error names the first offending position in ``other``.
    """
    link = Link(link)
    t = np.asarray(tau_value, dtype=np.float64)
    if link is Link.CANONICAL:
        bad = ~(t < 0)
        if np.any(bad):
            k = int(np.flatnonzero(bad.reshape(-1))[0])
            raise InvalidMeanError(t.reshape(-1)[k], link, other=k if t.ndim else None)
        mu = -1.0 / t
    else:
        with np.errstate(over='ignore'):
            mu = np.exp(t)
        bad = ~np.isfinite(mu)
        if np.any(bad):
            k = int(np.flatnonzero(bad.reshape(-1))[0])
            raise InvalidMeanError(t.reshape(-1)[k], link, other=k if t.ndim else None)
    return float(mu) if np.ndim(mu) == 0 else mu


def eta_vector(state: ModelState, side: Side, index: int, theta: np.ndarray = None) -> np.ndarray:
    """eta for one index against every index of the opposite side.

    ``theta`` overrides the index's own stacked parameters (trial steps).
    """
    own, other = state.side(side), state.side(Side(side).other)
    if theta is None:
        theta = own.theta(index)
    w, b, _ = _split(theta)
    return other.vectors @ w + b + other.bias_b


def tau_vector(state: ModelState, side: Side, index: int, theta: np.ndarray = None) -> np.ndarray:
    own, other = state.side(side), state.side(Side(side).other)
    if theta is None:
        theta = own.theta(index)
    w, _, e = _split(theta)
    return other.vectors @ w + e + other.bias_e


def eta_matrix(state: ModelState) -> np.ndarray:
    return state.rows.vectors @ state.cols.vectors.T + state.rows.bias_b[:, None] + state.cols.bias_b[None, :]


def tau_matrix(state: ModelState) -> np.ndarray:
    return state.rows.vectors @ state.cols.vectors.T + state.rows.bias_e[:, None] + state.cols.bias_e[None, :]


_BLOCKS = (
    ('rows.vectors', lambda s: s.rows.vectors),
    ('rows.bias_b', lambda s: s.rows.bias_b[:, None]),
    ('rows.bias_e', lambda s: s.rows.bias_e[:, None]),
    ('cols.vectors', lambda s: s.cols.vectors),
    ('cols.bias_b', lambda s: s.cols.bias_b[:, None]),
    ('cols.bias_e', lambda s: s.cols.bias_e[:, None]),
)


def save_model(state: ModelState, path: str):
    """Writes the ``sazig-model-v1`` checkpoint: header, then six decimal blocks."""
    lines = [f"{MODEL_HEADER} {state.rows.n} {state.cols.n} {state.d} "
             f"{state.link.value} {fmt17(state.shape)} {state.iteration}"]
    for name, getter in _BLOCKS:
        block = getter(state)
        lines.append(f"@{name} {block.shape[0]} {block.shape[1]}")
        lines.extend('\t'.join(fmt17(v) for v in row) for row in block)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write('\n'.join(lines) + '\n')
    logger.info(f"Saved model checkpoint to {path}")


def load_model(path: str) -> ModelState:
    with open(path, 'r', encoding='utf-8') as f:
        lines = f.read().split('\n')

    header = lines[0].split()
    if len(header) != 7 or header[0] != MODEL_HEADER:
        raise FormatError(f"{path}: missing '{MODEL_HEADER}' header")
    try:
        n_rows, n_cols, d = int(header[1]), int(header[2]), int(header[3])
        link = Link(header[4])
        shape = float(header[5])
        iteration = int(header[6])
    except ValueError as e:
        raise FormatError(f"{path}: bad header: {e}") from e

    blocks = {}
    pos = 1
    for name, _ in _BLOCKS:
        tag = lines[pos].split() if pos < len(lines) else []
        if len(tag) != 3 or tag[0] != f"@{name}":
            raise FormatError(f"{path}: expected block @{name} at line {pos + 1}")
        r, c = int(tag[1]), int(tag[2])
        body = lines[pos + 1:pos + 1 + r]
        if len(body) != r:
            raise FormatError(f"{path}: block @{name} is truncated")
        try:
            values = [[float(v) for v in line.split('\t')] if c else [] for line in body]
        except ValueError as e:
            raise FormatError(f"{path}: block @{name}: {e}") from e
        blocks[name] = np.array(values, dtype=np.float64).reshape(r, c)
        pos += 1 + r

    if blocks['rows.vectors'].shape != (n_rows, d) or blocks['cols.vectors'].shape != (n_cols, d):
        raise FormatError(f"{path}: block shapes disagree with header")

    rows = SideParams(blocks['rows.vectors'], blocks['rows.bias_b'][:, 0], blocks['rows.bias_e'][:, 0])
    cols = SideParams(blocks['cols.vectors'], blocks['cols.bias_b'][:, 0], blocks['cols.bias_e'][:, 0])
    return ModelState(rows, cols, link=link, shape=shape, iteration=iteration)
