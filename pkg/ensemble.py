"""
Monte-Carlo ensembles over fiber realizations.

Each (N, K) cell builds independent realizations, optimizes the paddles of
each one and compares the optimized target intensity with its own
random-configuration baseline. Realizations are independent work units; their
streams are derived from the master seed by realization index, so results do
not depend on the number of workers or on scheduling.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from fiber import ExcitationProfile
from file_operations import format_duration
from model import PaddleAngles, build_model
from optimize import (
    OptimizerOptions,
    baseline_intensity,
    coordinate_descent,
    enhancement,
)
from randmat import StreamTree
from settings.defaults import (
    DEFAULT_BASELINE_SAMPLES,
    DEFAULT_DELTA,
    DEFAULT_INPUT_FIELD,
    DEFAULT_REALIZATIONS,
    DEFAULT_TARGET_SPECKLE,
    LCSLM_SLOPE,
)


logger = logging.getLogger(__name__)

# Stream indices below a realization node (matrix streams are defined in model)
BASELINE_STREAM = 2
INITIAL_ANGLE_STREAM = 3

# Numerical failures counted as exclusions instead of aborting a cell
REALIZATION_FAILURES = (np.linalg.LinAlgError, ArithmeticError, FloatingPointError)


def triangular_groups(n_modes: int) -> Optional[int]:
    """G with G(G+1)/2 = n_modes, or None if n_modes is not triangular."""
    if n_modes < 1:
        return None
    groups = int((math.isqrt(8 * n_modes + 1) - 1) // 2)
    return groups if groups * (groups + 1) // 2 == n_modes else None


def nearest_triangular(n_modes: int) -> Tuple[int, int]:
    """The triangular numbers just below and just above n_modes."""
    groups = int((math.isqrt(8 * max(n_modes, 1) + 1) - 1) // 2)
    below = groups * (groups + 1) // 2
    above = (groups + 1) * (groups + 2) // 2
    return below, above


@dataclass(frozen=True)
class ModeSpec:
    """
    Which groups a realization contains and how they are excited.

    Attributes:
        group_sizes: Spatial modes per group of the model
        excitation: Per-group launched power
        n_modes: Excited spatial-mode count reported for the cell
    """
    group_sizes: Tuple[int, ...]
    excitation: ExcitationProfile
    n_modes: int

    @classmethod
    def evenly_excited(cls, n_modes: int) -> 'ModeSpec':
        """
        Uniform excitation of complete groups 1…G with N = G(G+1)/2.

        Raises:
            ValueError: If n_modes is not a triangular number
        """
        groups = triangular_groups(n_modes)
        if groups is None:
            below, above = nearest_triangular(n_modes)
            raise ValueError(
                f"N={n_modes} does not fill complete mode groups; "
                f"nearest valid values are {below} and {above}")
        return cls(tuple(range(1, groups + 1)),
                   ExcitationProfile.uniform_first_groups(groups), n_modes)

    @classmethod
    def from_fiber(cls, structure, excitation: ExcitationProfile) -> 'ModeSpec':
        """All guided groups of a fiber, excited by a given profile."""
        sizes = tuple(structure.modes_per_group)
        if len(excitation.per_group_power) != len(sizes):
            excitation = ExcitationProfile.from_weights(
                excitation.per_group_power, len(sizes), excitation.source)
        return cls(sizes, excitation, excitation.excited_mode_count)


@dataclass(frozen=True)
class EnsembleConfig:
    """
    Settings of one ensemble run.

    Attributes:
        mode_spec: Groups and excitation
        paddle_counts: K values to run
        seed: Master seed
        realizations: Realizations per cell
        baseline_samples: Random configurations per baseline
        delta: Paddle retardation
        ablate_spatial_coupling: Replace every M_C1, M_C2 with the identity
        optimizer: Coordinate-descent settings
        initial_angles: 'zero' or 'random'
        target_m: Target speckle
        input_mixing: 'haar' or 'group_exact'
        input_field: E_in
        keep_raw: Keep per-realization records
    """
    mode_spec: ModeSpec
    paddle_counts: Tuple[int, ...]
    seed: int
    realizations: int = DEFAULT_REALIZATIONS
    baseline_samples: int = DEFAULT_BASELINE_SAMPLES
    delta: float = DEFAULT_DELTA
    ablate_spatial_coupling: bool = False
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)
    initial_angles: str = 'zero'
    target_m: int = DEFAULT_TARGET_SPECKLE
    input_mixing: str = 'haar'
    input_field: Tuple[complex, complex] = DEFAULT_INPUT_FIELD
    keep_raw: bool = False

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError(f"realizations must be >= 1; got {self.realizations}")
        if not self.paddle_counts or any(k < 0 for k in self.paddle_counts):
            raise ValueError(f"paddle_counts must be non-empty and >= 0; got {self.paddle_counts}")
        if self.baseline_samples < 1:
            raise ValueError(f"baseline_samples must be >= 1; got {self.baseline_samples}")
        if self.initial_angles not in ('zero', 'random'):
            raise ValueError(f"initial_angles must be 'zero' or 'random'; got {self.initial_angles!r}")


@dataclass(frozen=True)
class RealizationRecord:
    """
    Result of one realization.

    Attributes:
        seed_path: (master seed, realization index)
        n_modes: Spatial modes of the cell
        k_paddles: Paddle count K of the cell
        ablated: True for the polarization-only model
        angles: Optimized angles
        objective: Optimized target intensity
        baseline: Random-configuration mean intensity
        enhancement: objective / baseline
        cycles: Coordinate-descent cycles
        monotone: True if the trajectory never decreased
        error: Failure message if the realization was excluded
    """
    seed_path: Tuple[int, int]
    n_modes: int = 0
    k_paddles: int = 0
    ablated: bool = False
    angles: Tuple[float, ...] = ()
    objective: float = 0.0
    baseline: float = 0.0
    enhancement: float = 0.0
    cycles: int = 0
    monotone: bool = True
    error: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            'seed_path': list(self.seed_path),
            'n_modes': self.n_modes,
            'k_paddles': self.k_paddles,
            'ablated': self.ablated,
            'angles': list(self.angles),
            'objective': self.objective,
            'baseline': self.baseline,
            'enhancement': self.enhancement,
            'cycles': self.cycles,
            'error': self.error,
        }


@dataclass
class CellStats:
    """
    Enhancement statistics of one (N, K) cell.

    Attributes:
        n_modes: Excited spatial modes
        k_paddles: Paddle count
        mean: Mean enhancement
        std: Sample standard deviation (0 for a single realization)
        count: Realizations that contributed
        ablated: Spatial coupling removed
        excluded: Realizations excluded after a numerical failure
        monotone_violations: Realizations whose trajectory decreased
        records: Per-realization records (only with keep_raw)
    """
    n_modes: int
    k_paddles: int
    mean: float
    std: float
    count: int
    ablated: bool = False
    excluded: int = 0
    monotone_violations: int = 0
    records: List[RealizationRecord] = field(default_factory=list)

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(self.count) if self.count else math.nan


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares slope of mean enhancement against K over [k_min, k_max]."""
    n_modes: int
    k_min: int
    k_max: int
    slope: float


@dataclass
class EnsembleStats:
    """
    Statistics of a whole run.

    Attributes:
        cells: CellStats keyed by (n_modes, k_paddles, ablated)
        slopes: Linear-regime fits keyed by n_modes
    """
    cells: Dict[Tuple[int, int, bool], CellStats] = field(default_factory=dict)
    slopes: Dict[int, SlopeFit] = field(default_factory=dict)

    def merge(self, other: 'EnsembleStats'):
        self.cells.update(other.cells)
        self.slopes.update(other.slopes)

    def sorted_cells(self) -> List[CellStats]:
        return [self.cells[key] for key in sorted(self.cells)]

    def series(self, n_modes: int, ablated: bool = False) -> List[CellStats]:
        """Cells of one N, ordered by K."""
        return [cell for cell in self.sorted_cells()
                if cell.n_modes == n_modes and cell.ablated == ablated]


def run_realization(config: EnsembleConfig, n_paddles: int, index: int) -> RealizationRecord:
    """
    Build, optimize and score one realization.

    Args:
        config: Ensemble settings
        n_paddles: K
        index: Realization index below the master seed

    Returns:
        RealizationRecord (with `error` set on a numerical failure)
    """
    streams = StreamTree(config.seed).child(index)
    seed_path = (config.seed, index)
    cell = dict(n_modes=config.mode_spec.n_modes, k_paddles=n_paddles,
                ablated=config.ablate_spatial_coupling)
    try:
        model = build_model(
            config.mode_spec.group_sizes,
            n_paddles,
            config.mode_spec.excitation,
            input_field=config.input_field,
            delta=config.delta,
            streams=streams,
            ablate=config.ablate_spatial_coupling,
            input_mixing=config.input_mixing,
        )
        initial = None
        if config.initial_angles == 'random':
            initial = PaddleAngles.random(n_paddles, streams.child(INITIAL_ANGLE_STREAM).generator())
        result = coordinate_descent(model, config.target_m, config.optimizer, initial)
        baseline = baseline_intensity(model, config.target_m, config.baseline_samples,
                                      streams.child(BASELINE_STREAM).generator())
        ratio = enhancement(result.objective, baseline)
    except REALIZATION_FAILURES as e:
        return RealizationRecord(seed_path=seed_path, **cell, error=f"{type(e).__name__}: {e}")

    trajectory = result.trajectory
    monotone = all(b >= a for a, b in zip(trajectory, trajectory[1:]))
    return RealizationRecord(
        seed_path=seed_path,
        **cell,
        angles=result.angles.angles,
        objective=result.objective,
        baseline=baseline,
        enhancement=ratio,
        cycles=result.cycles,
        monotone=monotone,
    )


def _run_task(task: Tuple[EnsembleConfig, int, int]) -> RealizationRecord:
    config, n_paddles, index = task
    return run_realization(config, n_paddles, index)


def _map_realizations(tasks: List[Tuple[EnsembleConfig, int, int]],
                      workers: int) -> List[RealizationRecord]:
    # Ordered map: records come back in task order for any worker count
    if workers <= 1 or len(tasks) <= 1:
        return [_run_task(task) for task in tasks]
    chunksize = max(1, len(tasks) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks, chunksize=chunksize))


def summarize_cell(config: EnsembleConfig, n_paddles: int,
                   records: Sequence[RealizationRecord]) -> CellStats:
    """
    Aggregate realization records (in realization-index order) into CellStats.
    """
    good = [r for r in records if r.error is None]
    excluded = len(records) - len(good)
    for record in records:
        if record.error is not None:
            logger.warning("Excluded realization %s (K=%d): %s",
                           record.seed_path, n_paddles, record.error)

    values = np.array([r.enhancement for r in good], dtype=float)
    if values.size:
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    else:
        mean, std = math.nan, math.nan

    return CellStats(
        n_modes=config.mode_spec.n_modes,
        k_paddles=n_paddles,
        mean=mean,
        std=std,
        count=len(good),
        ablated=config.ablate_spatial_coupling,
        excluded=excluded,
        monotone_violations=sum(1 for r in good if not r.monotone),
        records=[replace(r, n_modes=config.mode_spec.n_modes, k_paddles=n_paddles,
                         ablated=config.ablate_spatial_coupling)
                 for r in records] if config.keep_raw else [],
    )


def run_ensemble(config: EnsembleConfig, workers: int = 1) -> EnsembleStats:
    """
    Run every paddle count of a config.

    Args:
        config: Ensemble settings
        workers: Worker processes (1 runs inline)

    Returns:
        EnsembleStats with one cell per K
    """
    stats = EnsembleStats()
    for n_paddles in config.paddle_counts:
        started = time.perf_counter()
        tasks = [(config, n_paddles, index) for index in range(config.realizations)]
        records = _map_realizations(tasks, workers)
        cell = summarize_cell(config, n_paddles, records)
        stats.cells[(cell.n_modes, cell.k_paddles, cell.ablated)] = cell
        logger.info("N=%d K=%d%s: mean enhancement %.3f ± %.3f over %d realizations (%s)",
                    cell.n_modes, n_paddles, ' ablated' if cell.ablated else '',
                    cell.mean, cell.std, cell.count,
                    format_duration(time.perf_counter() - started))
    return stats


def sweep_modes_paddles(mode_counts: Iterable[int], paddle_counts: Sequence[int],
                        base: EnsembleConfig, workers: int = 1,
                        slope_range: Optional[Tuple[int, int]] = None) -> EnsembleStats:
    """
    Grid of evenly excited mode counts against paddle counts.

    Args:
        mode_counts: Triangular mode counts N
        paddle_counts: K values
        base: Settings shared by every cell (mode_spec is replaced)
        workers: Worker processes
        slope_range: Fixed K range for the slope fits (default: mean < N/2 rule)

    Returns:
        EnsembleStats with cells keyed (N, K, ablated) and one slope per N

    Raises:
        ValueError: If any N is not triangular
    """
    specs = [ModeSpec.evenly_excited(n) for n in mode_counts]
    stats = EnsembleStats()
    for spec in specs:
        config = replace(base, mode_spec=spec, paddle_counts=tuple(paddle_counts))
        stats.merge(run_ensemble(config, workers))
        fit = linear_regime_fit(stats, spec.n_modes, slope_range, base.ablate_spatial_coupling)
        if fit is not None:
            stats.slopes[spec.n_modes] = fit
    return stats


def compare_ablation(config: EnsembleConfig,
                     workers: int = 1) -> List[Tuple[CellStats, CellStats]]:
    """
    Full model against the coupling-removed model on identical seeds.

    Returns:
        List of (full, ablated) cell pairs ordered by K
    """
    full = run_ensemble(replace(config, ablate_spatial_coupling=False), workers)
    ablated = run_ensemble(replace(config, ablate_spatial_coupling=True), workers)
    n_modes = config.mode_spec.n_modes
    return [(full.cells[(n_modes, k, False)], ablated.cells[(n_modes, k, True)])
            for k in sorted(set(config.paddle_counts))]


def fit_slope(points: Sequence[Tuple[float, float]], k_range: Tuple[float, float]) -> float:
    """
    Ordinary-least-squares slope over a K interval.

    Args:
        points: (K, mean enhancement) pairs
        k_range: Inclusive (k_min, k_max)

    Returns:
        Slope

    Raises:
        ValueError: If fewer than two distinct K values fall in the range
    """
    low, high = k_range
    selected = [(k, y) for k, y in points if low <= k <= high]
    if len({k for k, _ in selected}) < 2:
        raise ValueError(f"slope fit over K in [{low}, {high}] needs two distinct K values")
    ks, ys = zip(*selected)
    return float(linregress(ks, ys).slope)


def linear_regime_fit(stats: EnsembleStats, n_modes: int,
                      k_range: Optional[Tuple[int, int]] = None,
                      ablated: bool = False) -> Optional[SlopeFit]:
    """
    Slope of mean enhancement against K for one N.

    Without an explicit range the fit uses the K >= 1 cells whose mean stays
    below N/2, i.e. the regime well before saturation.

    Returns:
        SlopeFit, or None if fewer than two cells qualify
    """
    cells = [c for c in stats.series(n_modes, ablated) if c.count > 0]
    if k_range is None:
        cells = [c for c in cells if c.k_paddles >= 1 and c.mean < n_modes / 2]
    else:
        cells = [c for c in cells if k_range[0] <= c.k_paddles <= k_range[1]]
    if len(cells) < 2:
        return None
    k_min, k_max = cells[0].k_paddles, cells[-1].k_paddles
    slope = fit_slope([(c.k_paddles, c.mean) for c in cells], (k_min, k_max))
    return SlopeFit(n_modes, k_min, k_max, slope)


def lcslm_comparator(pixel_counts: Iterable[int]) -> List[Tuple[int, float]]:
    """
    Reference line for a phase-only LC-SLM: 1 + 0.39 · macropixels.

    Raises:
        ValueError: On a negative count
    """
    rows = []
    for count in pixel_counts:
        if count < 0:
            raise ValueError(f"pixel counts must be >= 0; got {count}")
        rows.append((count, 1 + LCSLM_SLOPE * count))
    return rows
