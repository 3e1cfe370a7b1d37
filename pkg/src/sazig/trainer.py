"""Alternating Fisher-scoring fit of the shared-parameter zero-inflated Gamma model.

One outer iteration t sweeps every index. Each index gets E inner epochs of
theta <- theta + lr_factor(t) * S^-1 U against the opposite side's current
values, followed by one more update of the same form. After the sweep the
overall loss and the stacked score norms are recomputed from scratch.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .config import FitConfig, Schedule, ShapeMode, SweepOrder
from .diagnostics import SeparationFlag, SeparationReport, diagnose_index, failure_signature, max_probabilities
from .errors import FitAborted, InvalidMeanError, SingularInformationError, ValidationError
from .likelihood import LossBreakdown, estimate_shape, index_loglik, total_loss
from .model import Link, ModelState, Side, SideParams
from .scoring import default_ridge, fisher_solve, score_index
from .sparse import SparseCountMatrix
from .utils import relative_change

TRACE_COLUMNS = ['iter', 'loss', 'u_theta_norm', 'u_thetat_norm', 'halvings', 'warnings']

logger = logging.getLogger(__name__)


@dataclass
class IterationRecord:
    iteration: int
    loss: float
    u_theta_norm: float
    u_thetat_norm: float
    halvings: int = 0
    warnings: List[str] = field(default_factory=list)

    @property
    def score_norm(self) -> float:
        return math.hypot(self.u_theta_norm, self.u_thetat_norm)


@dataclass
class FitTrace:
    records: List[IterationRecord] = field(default_factory=list)
    initial_loss: float = math.inf
    converged: bool = False
    # latest non-trivial report per (side, index)
    separation: Dict[Tuple[str, int], SeparationReport] = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.records]

    @property
    def score_norms(self) -> List[float]:
        return [r.score_norm for r in self.records]

    @property
    def total_halvings(self) -> int:
        return sum(r.halvings for r in self.records)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.iteration, r.loss, r.u_theta_norm, r.u_thetat_norm, r.halvings, ';'.join(r.warnings))
             for r in self.records],
            columns=TRACE_COLUMNS,
        )

    def save(self, path: str):
        """Writes the ``sazig-trace-v1`` CSV."""
        self.to_frame().to_csv(path, index=False, float_format='%.17g', na_rep='nan')
        logger.info(f"Wrote {len(self.records)} trace rows to {path}")

    @classmethod
    def load(cls, path: str) -> 'FitTrace':
        df = pd.read_csv(path, float_precision='round_trip')
        if list(df.columns) != TRACE_COLUMNS:
            raise ValidationError(f"{path}: unexpected trace columns {list(df.columns)}")
        df['warnings'] = df['warnings'].fillna('').astype(str)
        records = [
            IterationRecord(int(row.iter), float(row.loss), float(row.u_theta_norm), float(row.u_thetat_norm),
                            int(row.halvings), [w for w in row.warnings.split(';') if w])
            for row in df.itertuples(index=False)
        ]
        return cls(records=records)


@dataclass
class StepResult:
    theta: np.ndarray
    accepted: bool
    halvings: int
    loglik: Optional[LossBreakdown] = None
    warning: Optional[str] = None


@dataclass
class IndexUpdate:
    side: Side
    index: int
    accepted_steps: int = 0
    halvings: int = 0
    warnings: List[str] = field(default_factory=list)
    # index log likelihood before the first step and after every accepted step
    logliks: List[float] = field(default_factory=list)

    @property
    def skipped(self) -> bool:
        return self.accepted_steps == 0


def lr_factor(config: FitConfig, t: int) -> float:
    """Step multiplier at outer iteration t: 1 without a schedule, lr / t^(1/4) with one."""
    if t < 1:
        raise ValidationError(f"outer iteration must be >= 1, got {t}")
    if config.lr_schedule is Schedule.NONE:
        return 1.0
    return config.lr / t ** 0.25


def fisher_step(Y: SparseCountMatrix, state: ModelState, side: Side, index: int,
                factor: float, config: FitConfig) -> StepResult:
    """One damped Fisher-scoring step with validity-only step-halving.

    The proposed step is halved while it yields an invalid Gamma mean or a
    non-finite log likelihood, at most ``config.max_halvings`` times. An
    accepted step is written into ``state``; a rejected one leaves it alone.
    Raises ``SingularInformationError`` when S cannot be factorised.
    """
    side = Side(side)
    own = state.side(side)
    theta = own.theta(index)

    block = score_index(Y, state, side, index)
    delta = fisher_solve(block, default_ridge(block, config.ridge), config.ridge_retries)
    step = factor * delta

    for halvings in range(config.max_halvings + 1):
        candidate = theta + step
        if np.all(np.isfinite(candidate)):
            try:
                loglik = index_loglik(Y, state, side, index, theta=candidate)
            except InvalidMeanError:
                loglik = None
            if loglik is not None and math.isfinite(loglik.total):
                own.set_theta(index, candidate)
                if halvings:
                    logger.debug(f"{side.value} {index}: step accepted after {halvings} halvings")
                return StepResult(candidate, True, halvings, loglik)
        step = step / 2.0

    warning = f"halving:{side.value}:{index}"
    logger.warning(f"{side.value} {index}: step still invalid after {config.max_halvings} halvings, rejected")
    return StepResult(theta, False, config.max_halvings, None, warning)


def update_index(Y: SparseCountMatrix, state: ModelState, side: Side, index: int,
                 t: int, config: FitConfig) -> IndexUpdate:
    """E inner epochs plus the closing outer-form update for one row or column."""
    side = Side(side)
    factor = lr_factor(config, t)
    update = IndexUpdate(side=side, index=index)

    try:
        update.logliks.append(index_loglik(Y, state, side, index).total)
    except InvalidMeanError as e:
        update.warnings.append(f"invalid:{side.value}:{index}")
        logger.warning(f"Skipping {side.value} {index}: {e}")
        return update

    for _ in range(config.inner_epochs + 1):
        try:
            result = fisher_step(Y, state, side, index, factor, config)
        except SingularInformationError as e:
            update.warnings.append(f"singular:{side.value}:{index}")
            logger.warning(f"Skipping {side.value} {index}: {e}")
            break
        update.halvings += result.halvings
        if not result.accepted:
            update.warnings.append(result.warning)
            break
        update.accepted_steps += 1
        update.logliks.append(result.loglik.total)

    return update


def initialize(Y: SparseCountMatrix, config: FitConfig) -> ModelState:
    """Default random start.

    Vectors ~ U(-0.5/(n d), 0.5/(n d)), b-biases ~ U(-0.1, 0.1) and
    e-biases ~ U(0.1, 0.6). Under the canonical link the e-range is mirrored
    to (-0.6, -0.1) so every starting mean is valid. Each block draws from
    its own stream derived from ``config.seed``.
    """
    d = config.dim
    e_lo, e_hi = (0.1, 0.6) if config.link is Link.LOG else (-0.6, -0.1)

    def side(n, offset):
        bound = 0.5 / (n * d) if n and d else 0.0
        vectors = np.random.default_rng([config.seed, offset]).uniform(-bound, bound, (n, d))
        bias_b = np.random.default_rng([config.seed, offset + 1]).uniform(-0.1, 0.1, n)
        bias_e = np.random.default_rng([config.seed, offset + 2]).uniform(e_lo, e_hi, n)
        return SideParams(vectors, bias_b, bias_e)

    return ModelState(side(Y.n_rows, 0), side(Y.n_cols, 3), link=config.link,
                      shape=config.shape or 1.0, iteration=0)


def sweep_plan(Y: SparseCountMatrix, config: FitConfig) -> List[Tuple[Side, int]]:
    """Row i then column i for square matrices; otherwise all rows, then all columns."""
    if Y.n_rows == Y.n_cols and config.order is SweepOrder.INTERLEAVED:
        return [(side, i) for i in range(Y.n_rows) for side in (Side.ROW, Side.COL)]
    return [(Side.ROW, i) for i in range(Y.n_rows)] + [(Side.COL, j) for j in range(Y.n_cols)]


def evaluate(Y: SparseCountMatrix, state: ModelState, workers: int = 1) -> Tuple[float, float, float]:
    """Overall loss and the L2 norms of the stacked row and column scores.

    Per-index work may run in a thread pool; results are combined in index
    order so the numbers do not depend on ``workers``.
    """
    def part(side, k):
        try:
            loglik = index_loglik(Y, state, side, k).total
            u = score_index(Y, state, side, k).u
            return loglik, float(u @ u)
        except InvalidMeanError:
            return -math.inf, math.nan

    jobs = [(Side.ROW, i) for i in range(Y.n_rows)] + [(Side.COL, j) for j in range(Y.n_cols)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: part(*job), jobs))
    else:
        results = [part(*job) for job in jobs]

    rows, cols = results[:Y.n_rows], results[Y.n_rows:]
    loss = -sum(ll for ll, _ in rows)
    u_theta = math.sqrt(sum(sq for _, sq in rows))
    u_thetat = math.sqrt(sum(sq for _, sq in cols))
    return loss, u_theta, u_thetat


def _monitor_separation(Y: SparseCountMatrix, state: ModelState, histories: Dict[Side, List[List[float]]],
                        config: FitConfig, trace: FitTrace) -> List[str]:
    row_max, col_max = max_probabilities(state)
    tokens = []
    for side, maxima in ((Side.ROW, row_max), (Side.COL, col_max)):
        for k, value in enumerate(maxima):
            history = histories[side][k]
            history.append(float(value))
            del history[:-config.saturation_window]
            report = diagnose_index(Y, state, side, k, history, config.saturation_window, config.saturation_gap)
            if report.flag is not SeparationFlag.NONE:
                trace.separation[(side.value, k)] = report
                tokens.append(report.token)
    return tokens


def fit(Y: SparseCountMatrix, config: FitConfig, init: Optional[ModelState] = None) -> Tuple[ModelState, FitTrace]:
    """Runs the alternating fit and returns the final state and its trace.

    Stops when the relative change in overall loss drops below
    ``config.epsilon`` or after ``config.max_iterations`` outer iterations.
    Outer iterations continue the counter carried by ``init``.
    """
    if Y.nnz == 0:
        raise ValidationError("cannot fit a matrix without positive entries")

    if init is None:
        state = initialize(Y, config)
    else:
        if (init.rows.n, init.cols.n) != Y.shape:
            raise ValidationError(f"initial state is {init.rows.n}x{init.cols.n}, matrix is {Y.n_rows}x{Y.n_cols}")
        state = init.copy()
        if state.link is not config.link:
            logger.info(f"Initial state uses the {state.link.value} link; fitting with {config.link.value}")
            state.link = config.link

    if config.shape_mode is ShapeMode.FIXED:
        if config.shape is not None:
            state.shape = config.shape
    else:
        state.shape = estimate_shape(Y)

    trace = FitTrace()
    try:
        trace.initial_loss = total_loss(Y, state, config.threads)
    except InvalidMeanError:
        trace.initial_loss = math.inf
    logger.info(f"Fitting {Y.n_rows}x{Y.n_cols} matrix, nnz={Y.nnz}, d={state.d}, link={state.link.value}, "
                f"shape={state.shape:.6g}, initial loss={trace.initial_loss:.6f}")

    plan = sweep_plan(Y, config)
    histories = {Side.ROW: [[] for _ in range(Y.n_rows)], Side.COL: [[] for _ in range(Y.n_cols)]}
    previous = trace.initial_loss

    for _ in range(config.max_iterations):
        t = state.iteration + 1
        halvings = 0
        warnings: List[str] = []
        progressed = False

        for side, index in plan:
            update = update_index(Y, state, side, index, t, config)
            halvings += update.halvings
            warnings.extend(update.warnings)
            progressed = progressed or not update.skipped

        if not progressed:
            raise FitAborted(f"iteration {t}: every index was skipped ({'; '.join(warnings[:5])} ...)")

        state.iteration = t
        if config.shape_mode is ShapeMode.ESTIMATE_EACH:
            state.shape = estimate_shape(Y, state)

        loss, u_theta, u_thetat = evaluate(Y, state, config.threads)
        if config.monitor_separation:
            warnings.extend(_monitor_separation(Y, state, histories, config, trace))

        trace.records.append(IterationRecord(t, loss, u_theta, u_thetat, halvings, warnings))
        logger.info(f"iter {t}: loss={loss:.6f} |U_theta|={u_theta:.6g} |U_theta~|={u_thetat:.6g} "
                    f"halvings={halvings} warnings={len(warnings)}")

        if math.isinf(config.epsilon) or relative_change(loss, previous) < config.epsilon:
            trace.converged = True
            logger.info(f"Converged at iteration {t}")
            break
        previous = loss

    return state, trace


@dataclass
class ScheduleComparison:
    adjusted: Tuple[ModelState, FitTrace]
    unadjusted: Tuple[ModelState, FitTrace]

    @property
    def adjusted_failure(self) -> Optional[str]:
        trace = self.adjusted[1]
        return failure_signature(trace.losses, trace.score_norms)

    @property
    def unadjusted_failure(self) -> Optional[str]:
        trace = self.unadjusted[1]
        return failure_signature(trace.losses, trace.score_norms)


def compare_schedules(Y: SparseCountMatrix, config: FitConfig, init: ModelState) -> ScheduleComparison:
    """Fits the same data from the same start with and without learning-rate adjustment."""
    adjusted = fit(Y, replace(config, lr_schedule=Schedule.POWER_QUARTER), init)
    unadjusted = fit(Y, replace(config, lr_schedule=Schedule.NONE), init)
    return ScheduleComparison(adjusted=adjusted, unadjusted=unadjusted)
