"""Distance-weighted word-word co-occurrence counts.

Y_ij sums 1/d over every occurrence of words i and j at separation d <= k
inside one sentence. Separation is measured in token positions of the
original sentence, so out-of-vocabulary tokens still count towards d.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence

import numpy as np
import pandas as pd

from .errors import FormatError, ValidationError
from .sparse import SparseCountMatrix

logger = logging.getLogger(__name__)


@dataclass
class Vocabulary:
    tokens: List[str]
    counts: List[int]
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.tokens) != len(self.counts):
            raise ValidationError("tokens and counts differ in length")
        self.index = {token: i for i, token in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValidationError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def size(self) -> int:
        return len(self.tokens)

    def save(self, path: str):
        """Writes ``token<TAB>index<TAB>count`` lines."""
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            for i, (token, count) in enumerate(zip(self.tokens, self.counts)):
                f.write(f"{token}\t{i}\t{count}\n")

    @classmethod
    def load(cls, path: str) -> 'Vocabulary':
        try:
            df = pd.read_csv(path, sep='\t', header=None, names=['token', 'index', 'count'],
                             dtype={'token': str, 'index': 'int64', 'count': 'int64'},
                             keep_default_na=False, quoting=3)
        except (ValueError, pd.errors.ParserError) as e:
            raise FormatError(f"{path}: {e}") from e
        if not np.array_equal(df['index'].to_numpy(), np.arange(len(df))):
            raise FormatError(f"{path}: indices must be dense and ordered")
        return cls(df['token'].tolist(), df['count'].tolist())


def read_sentences(path: str) -> List[List[str]]:
    """One sentence per line, whitespace-separated tokens; blank lines are skipped."""
    with open(path, 'r', encoding='utf-8') as f:
        return [line.split() for line in f if line.strip()]


def build_vocab(sentences: Iterable[Sequence[str]], size: int) -> Vocabulary:
    """The ``size`` most frequent tokens, ties broken alphabetically."""
    if size < 1:
        raise ValidationError(f"vocabulary size must be >= 1, got {size}")
    counts = Counter()
    for sentence in sentences:
        counts.update(sentence)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))[:size]
    if len(ranked) < size:
        logger.info(f"Only {len(ranked)} distinct tokens available (requested {size})")
    return Vocabulary([t for t, _ in ranked], [c for _, c in ranked])


def build_matrix(sentences: Iterable[Sequence[str]], vocab: Vocabulary, window: int = 10,
                 exclude_self: bool = True) -> SparseCountMatrix:
    """Aggregates 1/d weights for every in-vocabulary pair within ``window`` positions."""
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")

    totals: Dict[tuple, float] = {}
    for sentence in sentences:
        ids = [vocab.index.get(token) for token in sentence]
        for a, ia in enumerate(ids):
            if ia is None:
                continue
            for b in range(a + 1, min(a + window, len(ids) - 1) + 1):
                ib = ids[b]
                if ib is None or (exclude_self and ia == ib):
                    continue
                weight = 1.0 / (b - a)
                totals[(ia, ib)] = totals.get((ia, ib), 0.0) + weight
                totals[(ib, ia)] = totals.get((ib, ia), 0.0) + weight

    triples = [(i, j, y) for (i, j), y in totals.items()]
    m = SparseCountMatrix.from_triples(triples, len(vocab), len(vocab))
    logger.info(f"Co-occurrence matrix {len(vocab)}x{len(vocab)} with {m.nnz} positive cells (window {window})")
    return m
