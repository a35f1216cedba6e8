"""
Graded-index fiber model: mode groups, propagation constants,
Hermite-Gaussian mode fields and offset-launch excitation weights.

Lengths are in micrometres; propagation constants are reported in rad/m.
The guided modes of a parabolic-index core are Hermite-Gaussian functions
HG_mn; modes with equal p = m + n + 1 share one propagation constant and form
mode group p, which holds p spatial modes per polarization.
"""

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import eval_hermite, gammaln

from settings.defaults import (
    DEFAULT_SMF_MFR_UM,
    QUADRATURE_HALF_WIDTH,
    QUADRATURE_POINTS,
)


UM_PER_M = 1e6


class UnguidedModeError(ValueError):
    """Raised when a mode or mode group is not guided by the fiber."""


@dataclass(frozen=True)
class FiberSpec:
    """
    Physical parameters of a graded-index multimode fiber.

    Attributes:
        core_radius: Core radius a (µm)
        numerical_aperture: NA = sqrt(n1² - n2²)
        core_index: Peak core index n1
        wavelength: Vacuum wavelength λ (µm)
    """
    core_radius: float
    numerical_aperture: float
    core_index: float
    wavelength: float

    def __post_init__(self):
        if not self.core_radius > 0:
            raise ValueError(f"core_radius must be positive; got {self.core_radius}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive; got {self.wavelength}")
        if not 0 < self.numerical_aperture < self.core_index:
            raise ValueError(
                f"numerical_aperture must lie in (0, core_index); "
                f"got NA={self.numerical_aperture}, n1={self.core_index}")
        if not 0 < 2 * self.delta < 1:
            raise ValueError(f"2*delta must lie in (0, 1); got {2 * self.delta}")

    @classmethod
    def from_config(cls, block: dict) -> 'FiberSpec':
        """Build a FiberSpec from a config fiber block (core_radius_um, na, n1, wavelength_um)."""
        return cls(
            core_radius=block['core_radius_um'],
            numerical_aperture=block['na'],
            core_index=block['n1'],
            wavelength=block['wavelength_um'],
        )

    @property
    def delta(self) -> float:
        """Relative index difference Δ = NA² / (2 n1²)."""
        return self.numerical_aperture ** 2 / (2 * self.core_index ** 2)

    @property
    def cladding_index(self) -> float:
        return self.core_index * math.sqrt(1 - 2 * self.delta)

    @property
    def wavenumber(self) -> float:
        """Vacuum wavenumber k0 in rad/µm."""
        return 2 * math.pi / self.wavelength

    @property
    def normalized_frequency(self) -> float:
        """V = k0 · a · NA."""
        return self.wavenumber * self.core_radius * self.numerical_aperture

    @property
    def mode_scale(self) -> float:
        """Hermite-Gaussian width s = (a² / (2Δ n1² k0²))^(1/4) in µm."""
        a = self.core_radius
        return (a ** 2 / (2 * self.delta * self.core_index ** 2 * self.wavenumber ** 2)) ** 0.25


@dataclass(frozen=True)
class ModeGroupStructure:
    """
    Mode-group structure of a graded-index fiber.

    Attributes:
        normalized_frequency: V
        group_count: Number of guided groups P
        modes_per_group: Spatial modes per group, n_p = p
        propagation_constants: β per group in rad/m, strictly decreasing
        mode_scale: Hermite-Gaussian width s in µm
    """
    normalized_frequency: float
    group_count: int
    modes_per_group: Tuple[int, ...]
    propagation_constants: Tuple[float, ...]
    mode_scale: float

    @property
    def total_modes(self) -> int:
        """Total spatial modes N = P(P+1)/2."""
        return sum(self.modes_per_group)


class ExcitationSource(str, Enum):
    ANALYTIC_OVERLAP = 'analytic_overlap'
    USER_FILE = 'user_file'
    UNIFORM_FIRST_G_GROUPS = 'uniform_first_G_groups'


@dataclass(frozen=True)
class ExcitationProfile:
    """
    Fraction of launched power carried by each mode group.

    Attributes:
        per_group_power: One fraction per group (group 1 first); the
                         remainder up to 1 is unguided power
        source: How the weights were obtained
    """
    per_group_power: Tuple[float, ...]
    source: ExcitationSource

    def __post_init__(self):
        weights = self.per_group_power
        if not weights:
            raise ValueError("excitation profile needs at least one group")
        if any(not math.isfinite(w) or w < 0 or w > 1 for w in weights):
            raise ValueError(f"group weights must lie in [0, 1]; got {weights}")
        if sum(weights) > 1 + 1e-12:
            raise ValueError(f"group weights must sum to at most 1; got {sum(weights)}")

    @classmethod
    def uniform_first_groups(cls, group_count: int,
                             total_groups: Optional[int] = None) -> 'ExcitationProfile':
        """
        Uniform power over every polarization channel of groups 1…G.

        Group p receives p / (G(G+1)/2) so that each of its 2p channels
        carries the same power as every other excited channel.

        Args:
            group_count: G, number of excited groups
            total_groups: Length of the profile (defaults to G)

        Returns:
            ExcitationProfile with source uniform_first_G_groups
        """
        total_groups = group_count if total_groups is None else total_groups
        if group_count < 1 or total_groups < group_count:
            raise ValueError(f"cannot excite {group_count} of {total_groups} groups")
        n_modes = group_count * (group_count + 1) / 2
        weights = [p / n_modes if p <= group_count else 0.0
                   for p in range(1, total_groups + 1)]
        return cls(tuple(weights), ExcitationSource.UNIFORM_FIRST_G_GROUPS)

    @classmethod
    def from_weights(cls, weights: Sequence[float], total_groups: Optional[int] = None,
                     source: ExcitationSource = ExcitationSource.USER_FILE) -> 'ExcitationProfile':
        """Profile from explicit weights, zero-padded (or truncated) to total_groups."""
        weights = [float(w) for w in weights]
        if total_groups is not None:
            if any(w > 0 for w in weights[total_groups:]):
                raise UnguidedModeError(
                    f"weights given for groups beyond the {total_groups} guided groups")
            weights = (weights + [0.0] * total_groups)[:total_groups]
        return cls(tuple(weights), source)

    @classmethod
    def from_csv(cls, csv_path: Union[str, Path],
                 total_groups: Optional[int] = None) -> 'ExcitationProfile':
        """
        Load weights from a CSV file with `group,weight` columns.

        Args:
            csv_path: Path to the CSV file
            total_groups: Length of the profile (defaults to the largest group listed)

        Returns:
            ExcitationProfile with source user_file
        """
        by_group = {}
        with open(csv_path, newline='', encoding='utf-8') as f:
            for row in csv.DictReader(f):
                group = int(row['group'])
                if group < 1:
                    raise ValueError(f"group indices start at 1; got {group}")
                by_group[group] = float(row['weight'])
        if not by_group:
            raise ValueError(f"no weights found in {csv_path}")
        size = max(by_group) if total_groups is None else max(total_groups, max(by_group))
        weights = [by_group.get(p, 0.0) for p in range(1, size + 1)]
        return cls.from_weights(weights, total_groups)

    def restricted(self, first_group: int, last_group: int) -> 'ExcitationProfile':
        """Copy of the profile with every group outside [first_group, last_group] zeroed."""
        weights = tuple(w if first_group <= p <= last_group else 0.0
                        for p, w in enumerate(self.per_group_power, start=1))
        return ExcitationProfile(weights, self.source)

    @property
    def total_power(self) -> float:
        return float(sum(self.per_group_power))

    @property
    def excited_groups(self) -> List[int]:
        return [p for p, w in enumerate(self.per_group_power, start=1) if w > 0]

    @property
    def excited_mode_count(self) -> int:
        """Spatial modes in groups that carry power (n_p = p)."""
        return sum(self.excited_groups)


def mode_group_structure(fiber: FiberSpec) -> ModeGroupStructure:
    """
    Derive the guided mode groups of a fiber.

    P = floor(V/2); groups whose β would be imaginary are truncated.

    Args:
        fiber: Fiber parameters

    Returns:
        ModeGroupStructure for the fiber

    Raises:
        UnguidedModeError: If the fiber guides no complete group
    """
    v_number = fiber.normalized_frequency
    group_count = int(math.floor(v_number / 2))
    # 2Δ < 1 already guarantees 4Δp/V < 1 for p <= V/2
    while group_count > 0 and 4 * fiber.delta * group_count / v_number >= 1:
        group_count -= 1
    if group_count < 1:
        raise UnguidedModeError(f"fiber with V={v_number:.4f} guides no mode group")

    betas = tuple(_group_beta(fiber, p) for p in range(1, group_count + 1))
    return ModeGroupStructure(
        normalized_frequency=v_number,
        group_count=group_count,
        modes_per_group=tuple(range(1, group_count + 1)),
        propagation_constants=betas,
        mode_scale=fiber.mode_scale,
    )


def _group_beta(fiber: FiberSpec, p: int) -> float:
    radicand = 1 - 4 * fiber.delta / fiber.normalized_frequency * p
    if radicand <= 0:
        raise UnguidedModeError(f"group {p} is not guided (4Δp/V >= 1)")
    return fiber.core_index * fiber.wavenumber * math.sqrt(radicand) * UM_PER_M


def propagation_constant(fiber: FiberSpec, m: int, n: int) -> float:
    """
    Propagation constant β_mn in rad/m.

    Args:
        fiber: Fiber parameters
        m, n: Hermite-Gaussian indices (>= 0)

    Returns:
        β_mn, identical for every (m, n) in one group

    Raises:
        UnguidedModeError: If group m+n+1 exceeds the guided group count
    """
    if m < 0 or n < 0:
        raise ValueError(f"mode indices must be non-negative; got ({m}, {n})")
    p = m + n + 1
    if p > int(math.floor(fiber.normalized_frequency / 2)):
        raise UnguidedModeError(f"mode ({m}, {n}) in group {p} is not guided")
    return _group_beta(fiber, p)


def group_modes(p: int) -> List[Tuple[int, int]]:
    """All (m, n) index pairs of mode group p."""
    return [(m, p - 1 - m) for m in range(p)]


def hermite_gauss_1d(order: int, coordinate: np.ndarray, scale: float) -> np.ndarray:
    """
    Unit-norm 1-D Hermite-Gaussian function H_k(x/s) exp(-x²/2s²).

    Args:
        order: Hermite order k
        coordinate: Positions x (µm)
        scale: Width s (µm)

    Returns:
        Real array with ∫ |ψ|² dx = 1
    """
    u = np.asarray(coordinate, dtype=float) / scale
    log_norm = 0.5 * (order * math.log(2) + gammaln(order + 1) + 0.5 * math.log(math.pi) + math.log(scale))
    return eval_hermite(order, u) * np.exp(-u ** 2 / 2 - log_norm)


def mode_field(fiber: FiberSpec, m: int, n: int, x, y, z: float = 0.0) -> np.ndarray:
    """
    Field of the HG_mn mode, C_mn exp(-r²/2s²) H_m(x/s) H_n(y/s) exp(i z β_mn).

    C_mn is fixed by unit L² norm over the transverse plane.

    Args:
        fiber: Fiber parameters
        m, n: Mode indices of a guided mode
        x, y: Transverse coordinates (µm), broadcastable arrays
        z: Axial position (µm)

    Returns:
        Complex amplitude array
    """
    beta = propagation_constant(fiber, m, n)
    s = fiber.mode_scale
    field = hermite_gauss_1d(m, x, s) * hermite_gauss_1d(n, y, s)
    return field * np.exp(1j * z * beta / UM_PER_M)


def _quadrature_axis(center: float, half_width: float, points: int) -> np.ndarray:
    return np.linspace(center - half_width, center + half_width, points)


def offset_launch_weights(fiber: FiberSpec,
                          smf_mode_field_radius: float = DEFAULT_SMF_MFR_UM,
                          offset: float = 0.0,
                          points: int = QUADRATURE_POINTS) -> ExcitationProfile:
    """
    Per-group power coupled from a laterally offset single-mode fiber.

    The SMF field is a unit-norm Gaussian exp(-((x-d)² + y²) / 2w²) with
    w = smf_mode_field_radius, so w = s matches HG_00 exactly. Overlaps are
    taken on a tensor grid spanning ±6s about the core plus the offset; the
    integrand factorizes in x and y, so each 2-D overlap is the product of two
    1-D quadratures on that grid.

    Args:
        fiber: Fiber parameters
        smf_mode_field_radius: w (µm)
        offset: Lateral displacement d along x (µm)
        points: Quadrature samples per axis (>= 256)

    Returns:
        ExcitationProfile with source analytic_overlap
    """
    if offset < 0:
        raise ValueError(f"offset must be >= 0; got {offset}")
    if smf_mode_field_radius <= 0:
        raise ValueError(f"smf_mode_field_radius must be positive; got {smf_mode_field_radius}")
    if points < 256:
        raise ValueError(f"quadrature needs at least 256 points per axis; got {points}")

    structure = mode_group_structure(fiber)
    s = structure.mode_scale
    w = smf_mode_field_radius
    max_order = structure.group_count - 1

    half_width = QUADRATURE_HALF_WIDTH * max(s, w) + offset
    x = _quadrature_axis(offset / 2, half_width, points)
    y = _quadrature_axis(0.0, QUADRATURE_HALF_WIDTH * max(s, w), points)

    smf_x = np.exp(-(x - offset) ** 2 / (2 * w ** 2)) / math.sqrt(math.sqrt(math.pi) * w)
    smf_y = np.exp(-y ** 2 / (2 * w ** 2)) / math.sqrt(math.sqrt(math.pi) * w)

    overlap_x = np.array([trapezoid(hermite_gauss_1d(k, x, s) * smf_x, x) for k in range(max_order + 1)])
    overlap_y = np.array([trapezoid(hermite_gauss_1d(k, y, s) * smf_y, y) for k in range(max_order + 1)])

    power = np.outer(overlap_x ** 2, overlap_y ** 2)
    weights = np.array([sum(power[m, p - 1 - m] for m in range(p))
                        for p in range(1, structure.group_count + 1)])

    # Quadrature rounding can push a lossless launch a few ulps above 1
    total = weights.sum()
    if total > 1.0:
        weights = weights / total
    weights = np.clip(weights, 0.0, 1.0)
    return ExcitationProfile(tuple(float(v) for v in weights), ExcitationSource.ANALYTIC_OVERLAP)


def launch_coupling(profile: ExcitationProfile) -> Tuple[float, float]:
    """
    Guided fraction and insertion loss of a launch.

    Args:
        profile: Excitation profile

    Returns:
        Tuple of (guided_fraction, loss_db)
    """
    guided = profile.total_power
    loss_db = math.inf if guided <= 0 else -10 * math.log10(guided)
    return guided, loss_db


def offset_loss_scan(fiber: FiberSpec, smf_mode_field_radius: float,
                     offsets: Sequence[float]) -> List[Tuple[float, float, float]]:
    """
    Launch loss as a function of lateral offset.

    Args:
        fiber: Fiber parameters
        smf_mode_field_radius: SMF mode-field radius (µm)
        offsets: Offsets to evaluate (µm)

    Returns:
        List of (offset, guided_fraction, loss_db)
    """
    rows = []
    for offset in offsets:
        profile = offset_launch_weights(fiber, smf_mode_field_radius, offset)
        guided, loss_db = launch_coupling(profile)
        rows.append((float(offset), guided, loss_db))
    return rows


def mode_table(structure: ModeGroupStructure,
               profile: Optional[ExcitationProfile] = None) -> List[Tuple[int, int, float, float]]:
    """
    Tabulate the mode groups.

    Args:
        structure: Mode-group structure
        profile: Optional excitation weights to include

    Returns:
        Rows of (group, modes, beta_rad_per_m, weight); weight is 0 without a profile
    """
    weights = profile.per_group_power if profile is not None else ()
    rows = []
    for index, (modes, beta) in enumerate(zip(structure.modes_per_group,
                                              structure.propagation_constants)):
        weight = weights[index] if index < len(weights) else 0.0
        rows.append((index + 1, modes, beta, weight))
    return rows
