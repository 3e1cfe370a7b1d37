"""Storage for the observed matrix Y with row-major and column-major access.

Only positive entries are stored. A cell that is not stored has y_ij = 0 and
indicator g_ij = 0; the likelihood accounts for those cells implicitly.
"""
import logging
from typing import Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp

from .errors import FormatError, ValidationError
from .utils import fmt17

TRIPLES_HEADER = '#sazig-triples'

logger = logging.getLogger(__name__)


class SparseCountMatrix:
    """Immutable non-negative matrix holding its positive entries twice, as CSR and CSC."""

    def __init__(self, csr: sp.csr_matrix):
        csr = sp.csr_matrix(csr, dtype=np.float64)
        csr.sort_indices()
        self._csr = csr
        self._csc = csr.tocsc()
        self._csc.sort_indices()

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[float]], n_rows: int, n_cols: int) -> 'SparseCountMatrix':
        """Builds the matrix, dropping zero weights.

        Duplicate (i, j) keys, indices outside the shape and negative or
        non-finite weights raise ``ValidationError``.
        """
        if n_rows < 0 or n_cols < 0:
            raise ValidationError(f"negative matrix shape {n_rows}x{n_cols}")

        arr = np.asarray(list(triples), dtype=np.float64)
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValidationError("triples must be (i, j, y) rows")

        rows, cols, values = arr[:, 0], arr[:, 1], arr[:, 2]
        if np.any(rows != np.floor(rows)) or np.any(cols != np.floor(cols)):
            raise ValidationError("row and column indices must be integers")
        rows = rows.astype(np.int64)
        cols = cols.astype(np.int64)

        bad = (rows < 0) | (rows >= n_rows) | (cols < 0) | (cols >= n_cols)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise ValidationError(f"index ({rows[k]}, {cols[k]}) outside {n_rows}x{n_cols}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("weights must be finite")
        if np.any(values < 0):
            k = int(np.flatnonzero(values < 0)[0])
            raise ValidationError(f"negative weight {values[k]} at ({rows[k]}, {cols[k]})")

        keys = rows * max(n_cols, 1) + cols
        unique, counts = np.unique(keys, return_counts=True)
        if np.any(counts > 1):
            key = int(unique[counts > 1][0])
            raise ValidationError(f"duplicate entry at ({key // max(n_cols, 1)}, {key % max(n_cols, 1)})")

        keep = values > 0
        csr = sp.csr_matrix((values[keep], (rows[keep], cols[keep])), shape=(n_rows, n_cols))
        return cls(csr)

    @property
    def n_rows(self) -> int:
        return self._csr.shape[0]

    @property
    def n_cols(self) -> int:
        return self._csr.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self._csr.shape

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    def row(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        """Column indices and weights of the positive entries in row i."""
        start, end = self._csr.indptr[i], self._csr.indptr[i + 1]
        return self._csr.indices[start:end], self._csr.data[start:end]

    def col(self, j: int) -> Tuple[np.ndarray, np.ndarray]:
        """Row indices and weights of the positive entries in column j."""
        start, end = self._csc.indptr[j], self._csc.indptr[j + 1]
        return self._csc.indices[start:end], self._csc.data[start:end]

    def row_counts(self) -> np.ndarray:
        return np.diff(self._csr.indptr)

    def col_counts(self) -> np.ndarray:
        return np.diff(self._csc.indptr)

    def positive_values(self) -> np.ndarray:
        return self._csr.data.copy()

    def triples(self) -> List[Tuple[int, int, float]]:
        """Positive entries in row-major order."""
        coo = self._csr.tocoo()
        return [(int(i), int(j), float(y)) for i, j, y in zip(coo.row, coo.col, coo.data)]

    def col_triples(self) -> List[Tuple[int, int, float]]:
        """Positive entries enumerated through the column view, column-major order."""
        out = []
        for j in range(self.n_cols):
            idx, vals = self.col(j)
            out.extend((int(i), j, float(y)) for i, y in zip(idx, vals))
        return out

    def views_consistent(self) -> bool:
        return sorted(self.triples()) == sorted(self.col_triples())

    def indicator(self) -> np.ndarray:
        """Dense 0/1 matrix g. Meant for small matrices and diagnostics."""
        g = np.zeros(self.shape)
        coo = self._csr.tocoo()
        g[coo.row, coo.col] = 1.0
        return g

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()


def density(m: SparseCountMatrix) -> float:
    """Fraction of cells holding a positive entry."""
    cells = m.n_rows * m.n_cols
    if cells == 0:
        raise ValidationError("density of a matrix with an empty dimension")
    return m.nnz / cells


def save_triples(m: SparseCountMatrix, path: str):
    """Writes the ``triples-v1`` format: a header then one ``i<TAB>j<TAB>y`` per line."""
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(f"{TRIPLES_HEADER} {m.n_rows} {m.n_cols}\n")
        for i, j, y in m.triples():
            f.write(f"{i}\t{j}\t{fmt17(y)}\n")
    logger.info(f"Wrote {m.nnz} entries to {path}")


def load_triples(path: str) -> SparseCountMatrix:
    with open(path, 'r', encoding='utf-8') as f:
        header = f.readline().split()

    if len(header) != 3 or header[0] != TRIPLES_HEADER:
        raise FormatError(f"{path}: missing '{TRIPLES_HEADER} n_rows n_cols' header")
    try:
        n_rows, n_cols = int(header[1]), int(header[2])
    except ValueError as e:
        raise FormatError(f"{path}: bad shape in header") from e

    try:
        df = pd.read_csv(
            path, sep='\t', comment='#', header=None, names=['i', 'j', 'y'],
            dtype={'i': np.int64, 'j': np.int64, 'y': np.float64},
            float_precision='round_trip',
        )
    except pd.errors.EmptyDataError:
        df = pd.DataFrame({'i': [], 'j': [], 'y': []})
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from e

    return SparseCountMatrix.from_triples(df[['i', 'j', 'y']].to_numpy(dtype=np.float64), n_rows, n_cols)
