"""Non-convergence diagnostics: probability saturation and (quasi-)separation.

When the positive and zero cells of an index can be split by a hyperplane
through the opposite side's augmented vectors (w~_j, 1), the logistic part
has no finite maximiser and p_ij runs to 0/1. The fit keeps going and these
checks only warn.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from .model import ModelState, Side, eta_matrix, prob
from .sparse import SparseCountMatrix

SATURATION_GAP = 1e-6
SATURATION_WINDOW = 5
GRID_DIRECTIONS = 3600
# Largest latent dimension for which the direction grid backs up the perceptron
GRID_MAX_DIM = 3

logger = logging.getLogger(__name__)


class SeparationFlag(str, Enum):
    NONE = 'none'
    SATURATION_WARNING = 'saturation-warning'
    SUSPECTED_SEPARATION = 'suspected-separation'


@dataclass
class SeparationReport:
    side: Side
    index: int
    max_p_history: List[float] = field(default_factory=list)
    flag: SeparationFlag = SeparationFlag.NONE
    direction_score: Optional[float] = None
    window: int = SATURATION_WINDOW
    gap: float = SATURATION_GAP

    @property
    def token(self) -> str:
        return f"sep:{Side(self.side).value}:{self.index}:{self.flag.value}"

    def to_dict(self) -> dict:
        return {
            'side': Side(self.side).value,
            'index': self.index,
            'flag': self.flag.value,
            'direction_score': self.direction_score,
            'max_p_history': list(self.max_p_history),
            'window': self.window,
            'gap': self.gap,
        }


def saturation_monitor(p_max_history: Sequence[float], window: int = SATURATION_WINDOW,
                       gap: float = SATURATION_GAP) -> SeparationFlag:
    """Warns when the last ``window`` maxima rise strictly and end within ``gap`` of 1."""
    tail = list(p_max_history)[-window:]
    if len(tail) < window:
        return SeparationFlag.NONE
    rising = all(b > a for a, b in zip(tail, tail[1:]))
    if rising and tail[-1] > 1.0 - gap:
        return SeparationFlag.SATURATION_WARNING
    return SeparationFlag.NONE


def _signed_fraction(Z: np.ndarray, labels: np.ndarray, c: np.ndarray) -> float:
    return float(np.mean(labels * (Z @ c) > 0))


def _perceptron_score(Z: np.ndarray, labels: np.ndarray, passes: int) -> float:
    c = np.zeros(Z.shape[1])
    best = 0.0
    for _ in range(passes):
        mistakes = 0
        for z, label in zip(Z, labels):
            if label * (z @ c) <= 0:
                c = c + label * z
                mistakes += 1
        best = max(best, _signed_fraction(Z, labels, c))
        if mistakes == 0 or best == 1.0:
            break
    return best


def _grid_directions(dim: int, count: int = GRID_DIRECTIONS) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        angles = np.arange(count) * (2.0 * math.pi / count)
        return np.column_stack([np.cos(angles), np.sin(angles)])
    rng = np.random.default_rng(0)
    directions = rng.standard_normal((count, dim))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def _grid_score(Z: np.ndarray, labels: np.ndarray) -> float:
    directions = _grid_directions(Z.shape[1])
    signed = labels[:, None] * (Z @ directions.T) > 0
    return float(signed.mean(axis=0).max())


def separation_probe(Y: SparseCountMatrix, state: ModelState, index: int, side: Side = Side.ROW) -> float:
    """Best fraction of cells correctly signed by a direction over (w~_j, 1).

    1.0 means a separating direction was found (suspected separation);
    anything lower is an overlap certificate for the directions tried. An
    index with no zero or no positive cell is trivially separated.
    """
    side = Side(side)
    other = state.side(side.other)
    positions, _ = Y.row(index) if side is Side.ROW else Y.col(index)
    m = other.n
    if len(positions) == 0 or len(positions) == m:
        logger.warning(f"{side.value} {index}: no {'positive' if len(positions) == 0 else 'zero'} cells, trivially separated")
        return 1.0

    labels = -np.ones(m)
    labels[positions] = 1.0
    Z = np.column_stack([other.vectors, np.ones(m)])
    Z = Z / np.linalg.norm(Z, axis=1, keepdims=True)

    score = _perceptron_score(Z, labels, passes=10 * m)
    if score < 1.0 and state.d <= GRID_MAX_DIM:
        score = max(score, _grid_score(Z, labels))
    return score


def max_probabilities(state: ModelState):
    """max_j p_ij per row and max_i p_ij per column."""
    p = prob(eta_matrix(state))
    return p.max(axis=1), p.max(axis=0)


def diagnose_index(Y: SparseCountMatrix, state: ModelState, side: Side, index: int,
                   history: Sequence[float], window: int = SATURATION_WINDOW,
                   gap: float = SATURATION_GAP) -> SeparationReport:
    """Saturation check, escalated to a separation probe when it fires."""
    report = SeparationReport(side=Side(side), index=index, max_p_history=list(history)[-window:],
                              window=window, gap=gap)
    report.flag = saturation_monitor(history, window, gap)
    if report.flag is SeparationFlag.SATURATION_WARNING:
        report.direction_score = separation_probe(Y, state, index, side)
        if report.direction_score == 1.0:
            report.flag = SeparationFlag.SUSPECTED_SEPARATION
        logger.warning(f"{report.token} (direction score {report.direction_score:.4f})")
    return report


def failure_signature(losses: Sequence[float], score_norms: Sequence[float],
                      run: int = 10, growth: float = 10.0) -> Optional[str]:
    """Names the divergence pattern of a trace, or None for a healthy one.

    Patterns: a non-finite loss, ``run`` consecutive loss increases, or the
    final stacked score norm at least ``growth`` times the first.
    """
    if any(not math.isfinite(v) for v in losses):
        return 'non-finite-loss'
    streak = 0
    for previous, current in zip(losses, losses[1:]):
        streak = streak + 1 if current > previous else 0
        if streak >= run:
            return 'loss-increasing'
    if score_norms and score_norms[0] > 0 and score_norms[-1] >= growth * score_norms[0]:
        return 'score-norm-growth'
    return None
