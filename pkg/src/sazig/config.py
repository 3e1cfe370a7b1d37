import math
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional, Tuple

from .errors import ValidationError
from .model import Link


class Schedule(str, Enum):
    NONE = 'none'
    POWER_QUARTER = 'power-quarter'


class ShapeMode(str, Enum):
    FIXED = 'fixed'
    ESTIMATE_ONCE = 'estimate-once'
    ESTIMATE_EACH = 'estimate-each'


class SweepOrder(str, Enum):
    INTERLEAVED = 'interleaved'
    ROWS_THEN_COLUMNS = 'rows-then-columns'


def _to_jsonable(obj):
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return 'inf' if obj > 0 else '-inf'
    return obj


@dataclass
class FitConfig:
    """Configuration settings for the alternating Fisher-scoring fit."""

    link: Link = Link.LOG
    max_iterations: int = 60
    inner_epochs: int = 20
    lr: float = 0.5
    lr_schedule: Schedule = Schedule.POWER_QUARTER
    # Relative change in overall loss that ends the fit
    epsilon: float = 1e-6
    seed: int = 0

    # Latent dimension used when no initial state is supplied
    dim: int = 20

    # Ridge added to the information matrix: ridge * trace(S) / (d + 2),
    # multiplied by 10 on each failed Cholesky factorization
    ridge: float = 1e-8
    ridge_retries: int = 4
    max_halvings: int = 30

    # Gamma shape: fixed value, or moment estimate. FIXED without a value
    # keeps the shape carried by the initial state.
    shape: Optional[float] = None
    shape_mode: ShapeMode = ShapeMode.ESTIMATE_ONCE

    order: SweepOrder = SweepOrder.INTERLEAVED
    # Workers for the read-only loss/score passes; the sweep itself is sequential
    threads: int = 1

    # Separation monitoring
    monitor_separation: bool = True
    saturation_window: int = 5
    saturation_gap: float = 1e-6

    def __post_init__(self):
        self.link = Link(self.link)
        self.lr_schedule = Schedule(self.lr_schedule)
        self.shape_mode = ShapeMode(self.shape_mode)
        self.order = SweepOrder(self.order)
        if self.inner_epochs < 1:
            raise ValidationError(f"inner_epochs must be >= 1, got {self.inner_epochs}")
        if not self.lr > 0:
            raise ValidationError(f"lr must be positive, got {self.lr}")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iterations < 0:
            raise ValidationError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if self.dim < 0:
            raise ValidationError(f"dim must be >= 0, got {self.dim}")
        if self.ridge < 0 or self.ridge_retries < 0 or self.max_halvings < 0:
            raise ValidationError("ridge, ridge_retries and max_halvings must be non-negative")
        if self.shape is not None and not (math.isfinite(self.shape) and self.shape > 0):
            raise ValidationError(f"shape must be positive, got {self.shape}")
        if self.threads < 1:
            raise ValidationError(f"threads must be >= 1, got {self.threads}")
        if self.saturation_window < 1:
            raise ValidationError("saturation_window must be >= 1")

    def to_dict(self) -> dict:
        return _to_jsonable(asdict(self))


@dataclass
class SimSeeds:
    """Named seed streams, one per generated block.

    Every stream feeds its own numpy PCG64 generator.
    """

    w: int = 99
    wt: int = 98
    b: int = 97
    bt: int = 96
    e: int = 1
    et: int = 2
    bernoulli: int = 3
    gamma: int = 4
    init_w: int = 11
    init_wt: int = 12
    init_b: int = 13
    init_bt: int = 14
    init_e: int = 15
    init_et: int = 16

    def shifted(self, seed: int) -> 'SimSeeds':
        """Moves every stream by ``seed`` so one CLI flag controls a whole run."""
        return SimSeeds(**{k: v + seed for k, v in asdict(self).items()})


@dataclass
class SimConfig:
    """Synthetic data settings."""

    n: int = 300
    d: int = 50
    shape: float = 4.0
    w_range: Tuple[float, float] = (-0.25, 0.25)
    b_range: Tuple[float, float] = (0.0, 0.05)
    e_range: Tuple[float, float] = (0.1, 0.35)
    tie_sides: bool = True
    seeds: SimSeeds = field(default_factory=SimSeeds)

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValidationError(f"n and d must be >= 1, got n={self.n}, d={self.d}")
        if not (math.isfinite(self.shape) and self.shape > 0):
            raise ValidationError(f"shape must be positive, got {self.shape}")
        for name in ('w_range', 'b_range', 'e_range'):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValidationError(f"{name} must be a valid interval, got ({lo}, {hi})")
            setattr(self, name, (float(lo), float(hi)))

    def to_dict(self) -> dict:
        return _to_jsonable(asdict(self))


@dataclass
class CooccurrenceSpec:
    """Weighted co-occurrence ingestion settings."""

    window: int = 10
    vocab_size: int = 300
    exclude_self: bool = True

    def __post_init__(self):
        if self.window < 1:
            raise ValidationError(f"window must be >= 1, got {self.window}")
        if self.vocab_size < 1:
            raise ValidationError(f"vocab_size must be >= 1, got {self.vocab_size}")

    def to_dict(self) -> dict:
        return _to_jsonable(asdict(self))


@dataclass
class OutputLayout:
    """File names inside one run's output directory."""

    out_dir: str

    def ensure(self):
        os.makedirs(self.out_dir, exist_ok=True)

    @property
    def matrix_file(self) -> str:
        return os.path.join(self.out_dir, 'matrix.triples')

    @property
    def truth_file(self) -> str:
        return os.path.join(self.out_dir, 'truth.model')

    @property
    def init_file(self) -> str:
        return os.path.join(self.out_dir, 'init.model')

    @property
    def checkpoint_file(self) -> str:
        return os.path.join(self.out_dir, 'model.model')

    @property
    def trace_file(self) -> str:
        return os.path.join(self.out_dir, 'trace.csv')

    @property
    def diagnostics_file(self) -> str:
        return os.path.join(self.out_dir, 'diagnostics.json')

    @property
    def manifest_file(self) -> str:
        return os.path.join(self.out_dir, 'manifest.json')

    @property
    def vocab_file(self) -> str:
        return os.path.join(self.out_dir, 'vocab.tsv')

    @property
    def log_file(self) -> str:
        return os.path.join(self.out_dir, 'execution.log')
