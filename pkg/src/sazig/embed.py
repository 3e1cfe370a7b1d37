"""Cosine-similarity queries and export over fitted latent vectors."""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import ValidationError
from .model import ModelState

logger = logging.getLogger(__name__)


class ViewSource(str, Enum):
    ROW = 'row'
    COL = 'col'
    SUM = 'sum'


@dataclass
class EmbeddingView:
    source: ViewSource
    matrix: np.ndarray

    @classmethod
    def from_state(cls, state: ModelState, source: ViewSource = ViewSource.ROW) -> 'EmbeddingView':
        source = ViewSource(source)
        if source is ViewSource.ROW:
            matrix = state.rows.vectors
        elif source is ViewSource.COL:
            matrix = state.cols.vectors
        else:
            if state.rows.n != state.cols.n:
                raise ValidationError(
                    f"sum view needs a square model, got {state.rows.n}x{state.cols.n}")
            matrix = state.rows.vectors + state.cols.vectors
        return cls(source, np.array(matrix, dtype=float))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __len__(self):
        return self.n


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValidationError("cosine similarity is undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def _normalized(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(matrix, axis=1)
    nonzero = norms > 0
    unit = np.zeros_like(matrix)
    unit[nonzero] = matrix[nonzero] / norms[nonzero, None]
    return unit, nonzero


def top_k(view: EmbeddingView, index: int, k: int) -> List[Tuple[int, float]]:
    """The k most cosine-similar indices to ``index``, ties by ascending index.

    Indices whose vector is zero have no cosine and are never returned.
    """
    if not 0 <= index < view.n:
        raise ValidationError(f"index {index} out of range [0, {view.n})")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")

    unit, nonzero = _normalized(view.matrix)
    if not nonzero[index]:
        raise ValidationError(f"index {index} has a zero vector")
    sims = np.clip(unit @ unit[index], -1.0, 1.0)

    candidates = np.flatnonzero(nonzero)
    candidates = candidates[candidates != index]
    # primary key last for lexsort: similarity descending, then index ascending
    order = np.lexsort((candidates, -sims[candidates]))
    chosen = candidates[order][:k]
    return [(int(j), float(sims[j])) for j in chosen]


def similarity_matrix(view: EmbeddingView) -> np.ndarray:
    """Pairwise cosine similarities; rows and columns of zero vectors are NaN."""
    unit, nonzero = _normalized(view.matrix)
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    sims[~nonzero, :] = np.nan
    sims[:, ~nonzero] = np.nan
    return sims


def _labels(n: int, tokens: Optional[Sequence[str]]) -> List[str]:
    if tokens is None:
        return [str(i) for i in range(n)]
    if len(tokens) != n:
        raise ValidationError(f"{len(tokens)} tokens for {n} vectors")
    return list(tokens)


def save_embeddings(view: EmbeddingView, path: str, tokens: Optional[Sequence[str]] = None):
    """``token<TAB>v1<TAB>...<TAB>vd`` at 9 significant digits."""
    labels = _labels(view.n, tokens)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for label, vector in zip(labels, view.matrix):
            f.write('\t'.join([label] + [f"{x:.9g}" for x in vector]) + '\n')
    logger.info(f"Wrote {view.n} {view.source.value} vectors to {path}")


def save_similarity(view: EmbeddingView, path: str, tokens: Optional[Sequence[str]] = None):
    labels = _labels(view.n, tokens)
    df = pd.DataFrame(similarity_matrix(view), index=labels, columns=labels)
    df.to_csv(path, sep='\t', float_format='%.9g', na_rep='nan', lineterminator='\n')
    logger.info(f"Wrote {view.n}x{view.n} similarity matrix to {path}")


def neighbors_frame(neighbors: List[Tuple[int, float]], tokens: Optional[Sequence[str]] = None) -> pd.DataFrame:
    return pd.DataFrame(
        [(rank, j, tokens[j] if tokens is not None else str(j), sim)
         for rank, (j, sim) in enumerate(neighbors, start=1)],
        columns=['rank', 'index', 'token', 'similarity'],
    )


def save_neighbors(neighbors: List[Tuple[int, float]], path: str, tokens: Optional[Sequence[str]] = None):
    neighbors_frame(neighbors, tokens).to_csv(path, sep='\t', index=False, float_format='%.9g', lineterminator='\n')
