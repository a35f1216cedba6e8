"""
Paddle-angle optimization for one F-SLM realization.

With every other paddle fixed, the target-speckle intensity is a closed-form
function of one angle:

    I(θ) = Σ_j |a_j cos²θ + b_j sin²θ + c_j cosθ sinθ|²

which is π-periodic and, written in 2θ, a trigonometric polynomial of
degree two. Paddles are maximized one at a time, cycling until a full cycle
gains less than a fraction of the mean speckle intensity.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from model import (
    FslmModel,
    PaddleAngles,
    apply_jones,
    propagate,
    propagate_batch,
    speckle_intensity,
    suffix_rows,
)
from settings.defaults import (
    DEFAULT_BASELINE_SAMPLES,
    DEFAULT_GRID_POINTS,
    DEFAULT_MAX_CYCLES,
    DEFAULT_REFINE_TOLERANCE,
    DEFAULT_TERMINATION_FRACTION,
)


logger = logging.getLogger(__name__)

# Smallest baseline accepted as a divisor
BASELINE_FLOOR = np.finfo(float).tiny


class BaselineUnderflowError(ZeroDivisionError):
    """Raised when the random-configuration baseline is too small to divide by."""


@dataclass(frozen=True)
class SinusoidCoeffs:
    """
    Coefficients of the single-angle objective.

    Attributes:
        a: (a₁, a₂), weight of cos²θ per output polarization
        b: (b₁, b₂), weight of sin²θ
        c: (c₁, c₂), weight of cosθ sinθ
        delta: Retardation used to derive them
    """
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    delta: float

    def intensity(self, theta):
        """I(θ) evaluated directly from the closed form; θ may be an array."""
        theta = np.asarray(theta, dtype=float)
        cos, sin = np.cos(theta), np.sin(theta)
        amplitudes = (np.multiply.outer(cos ** 2, self.a) + np.multiply.outer(sin ** 2, self.b)
                      + np.multiply.outer(cos * sin, self.c))
        return np.sum(np.abs(amplitudes) ** 2, axis=-1)

    def fourier_terms(self) -> Tuple[float, float, float, float, float]:
        """
        I(θ) = t0 + t1 cos2θ + u1 sin2θ + t2 cos4θ + u2 sin4θ.

        Returns:
            Tuple of (t0, t1, u1, t2, u2)
        """
        p = (self.a + self.b) / 2
        q = (self.a - self.b) / 2
        r = self.c / 2
        t0 = np.sum(np.abs(p) ** 2 + (np.abs(q) ** 2 + np.abs(r) ** 2) / 2)
        t1 = np.sum(2 * np.real(p * np.conj(q)))
        u1 = np.sum(2 * np.real(p * np.conj(r)))
        t2 = np.sum((np.abs(q) ** 2 - np.abs(r) ** 2) / 2)
        u2 = np.sum(np.real(q * np.conj(r)))
        return float(t0), float(t1), float(u1), float(t2), float(u2)

    def derivative(self, theta: float) -> float:
        """dI/dθ."""
        return _fourier_derivative(self.fourier_terms(), theta)


def _fourier_derivative(terms: Tuple[float, ...], theta: float) -> float:
    _, t1, u1, t2, u2 = terms
    return (-2 * t1 * math.sin(2 * theta) + 2 * u1 * math.cos(2 * theta)
            - 4 * t2 * math.sin(4 * theta) + 4 * u2 * math.cos(4 * theta))


@dataclass(frozen=True)
class OptimizerOptions:
    """
    Coordinate-descent settings.

    Attributes:
        termination_fraction: Stop when a cycle gains less than this fraction
                              of the mean speckle intensity 1/N
        max_cycles: Hard bound on the number of cycles
        grid_points: Samples of [0, π) for the global search
        refine_tolerance: Angular tolerance of the local refinement (rad)
    """
    termination_fraction: float = DEFAULT_TERMINATION_FRACTION
    max_cycles: int = DEFAULT_MAX_CYCLES
    grid_points: int = DEFAULT_GRID_POINTS
    refine_tolerance: float = DEFAULT_REFINE_TOLERANCE

    def __post_init__(self):
        for name in ('termination_fraction', 'max_cycles', 'grid_points', 'refine_tolerance'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive; got {getattr(self, name)}")


@dataclass
class OptimizationResult:
    """
    Outcome of a coordinate-descent run.

    Attributes:
        angles: Final paddle angles
        objective: Final target intensity (last trajectory entry)
        trajectory: Initial intensity followed by the value after every update
        cycles: Completed cycles
        converged: False if max_cycles was reached first
    """
    angles: PaddleAngles
    objective: float
    trajectory: List[float] = field(default_factory=list)
    cycles: int = 0
    converged: bool = False


def sinusoid_coeffs(prefix: np.ndarray, suffix: np.ndarray, delta: float) -> SinusoidCoeffs:
    """
    Closed-form coefficients from a factorization around one paddle.

    Args:
        prefix: V_k, length 2N
        suffix: W_k, shape 2×2N
        delta: Paddle retardation

    Returns:
        SinusoidCoeffs with I(θ) = |W_k · M^J(θ) · V_k|²
    """
    prefix = np.asarray(prefix)
    suffix = np.asarray(suffix)
    if prefix.ndim != 1 or prefix.shape[0] % 2 or suffix.shape != (2, prefix.shape[0]):
        raise ValueError(
            f"expected V of length 2N and W of shape (2, 2N); got {prefix.shape}, {suffix.shape}")

    phase = np.exp(1j * delta)
    v_h, v_v = prefix[0::2], prefix[1::2]
    w_h, w_v = suffix[:, 0::2], suffix[:, 1::2]
    direct_h = w_h @ v_h
    direct_v = w_v @ v_v
    return SinusoidCoeffs(
        a=direct_h + phase * direct_v,
        b=phase * direct_h + direct_v,
        c=(1 - phase) * (w_h @ v_v + w_v @ v_h),
        delta=float(delta),
    )


def maximize_single_angle(coeffs: SinusoidCoeffs,
                          opts: Optional[OptimizerOptions] = None) -> Tuple[float, float]:
    """
    Global maximum of I(θ) over one period.

    A uniform grid on [0, π) locates the best cell (smallest θ on ties); the
    stationary point inside that cell is then bracketed on dI/dθ.

    Args:
        coeffs: Objective coefficients
        opts: Grid size and refinement tolerance

    Returns:
        Tuple of (θ* in [0, π), I(θ*))
    """
    opts = opts or OptimizerOptions()
    step = math.pi / opts.grid_points
    grid = np.arange(opts.grid_points) * step
    values = coeffs.intensity(grid)
    peak = float(np.max(values))
    tie = 4 * np.finfo(float).eps * max(peak, 1.0)
    # First grid point within rounding of the peak, so a flat objective gives θ* = 0
    index = int(np.flatnonzero(values >= peak - tie)[0])
    best_theta, best_value = float(grid[index]), float(values[index])

    terms = coeffs.fourier_terms()
    low, high = best_theta - step, best_theta + step
    if _fourier_derivative(terms, low) > 0 > _fourier_derivative(terms, high):
        root = brentq(lambda theta: _fourier_derivative(terms, theta), low, high,
                      xtol=opts.refine_tolerance)
        refined = float(coeffs.intensity(root))
        # Rounding noise on a flat objective must not move the tie-broken grid point
        if refined > best_value + tie:
            best_theta, best_value = root, refined

    best_theta = math.fmod(best_theta, math.pi)
    if best_theta < 0:
        best_theta += math.pi
    if best_theta >= math.pi:
        best_theta = 0.0
    return best_theta, best_value


def target_intensity(model: FslmModel, angles: PaddleAngles, target_m: int) -> float:
    return speckle_intensity(propagate(model, angles), target_m)


def coordinate_descent(model: FslmModel, target_m: int = 1,
                       opts: Optional[OptimizerOptions] = None,
                       initial_angles: Optional[PaddleAngles] = None) -> OptimizationResult:
    """
    Maximize the target speckle by sequential single-paddle updates.

    Each cycle recomputes the suffix products W_k once from the angles at the
    start of the cycle and carries the prefix V_k forward as paddles are
    updated, so every update costs one section application.

    Args:
        model: Realization
        target_m: Target speckle
        opts: Optimizer settings
        initial_angles: Starting point (all zero by default)

    Returns:
        OptimizationResult with a non-decreasing trajectory
    """
    opts = opts or OptimizerOptions()
    angles = initial_angles if initial_angles is not None else PaddleAngles.zeros(model.n_paddles)
    current = target_intensity(model, angles, target_m)
    result = OptimizationResult(angles=angles, objective=current, trajectory=[current])

    if model.n_paddles == 0:
        result.converged = True
        return result

    threshold = opts.termination_fraction / model.n_modes
    for cycle in range(1, opts.max_cycles + 1):
        cycle_start = current
        suffixes = suffix_rows(model, angles, target_m)
        vector = model.launched_vector()
        for k, section in enumerate(model.sections, start=1):
            prefix = section.coupling_in @ vector
            coeffs = sinusoid_coeffs(prefix, suffixes[k - 1], model.delta)
            theta, value = maximize_single_angle(coeffs, opts)
            if value > current and value > float(coeffs.intensity(angles.angles[k - 1])):
                angles = angles.replaced(k, theta)
                current = value
            vector = section.coupling_out @ apply_jones(prefix, model.jones(angles.angles[k - 1]))
            result.trajectory.append(current)

        result.cycles = cycle
        if current - cycle_start < threshold:
            result.converged = True
            break

    if not result.converged:
        logger.debug("Coordinate descent stopped at max_cycles=%d", opts.max_cycles)

    result.angles = angles
    result.objective = result.trajectory[-1]
    return result


def baseline_intensity(model: FslmModel, target_m: int = 1,
                       samples: int = DEFAULT_BASELINE_SAMPLES,
                       rng: Optional[np.random.Generator] = None) -> float:
    """
    Mean target intensity over random paddle configurations.

    Args:
        model: Realization
        target_m: Target speckle
        samples: Number of random angle vectors, each angle uniform on [0, 2π)
        rng: Random generator

    Returns:
        Mean intensity (exact intensity when K = 0)
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1; got {samples}")
    if model.n_paddles == 0:
        return target_intensity(model, PaddleAngles(()), target_m)
    if rng is None:
        raise ValueError("baseline_intensity needs a random generator")

    angle_sets = rng.uniform(0.0, 2 * math.pi, size=(samples, model.n_paddles))
    fields = propagate_batch(model, angle_sets, target_m)
    return float(np.mean(np.sum(np.abs(fields) ** 2, axis=1)))


def enhancement(optimized: float, baseline: float) -> float:
    """
    Ratio of optimized to baseline intensity.

    Raises:
        BaselineUnderflowError: If baseline is not a usable positive number
    """
    if not baseline >= BASELINE_FLOOR:
        raise BaselineUnderflowError(f"baseline intensity {baseline!r} underflows")
    return optimized / baseline


def enhancement_db(value: float) -> float:
    return 10 * math.log10(value)
