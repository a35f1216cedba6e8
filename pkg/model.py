"""
F-SLM transmission model.

One realization cascades K fiber sections between an input coupling U_in and
an output basis change U_out:

    E_out = U_out · T_K ⋯ T_2 · T_1 · U_in · E_in,   T_k = M_C2ᵏ · M^J(θ_k) · M_C1ᵏ

Section 1 is nearest the input. Speckles are indexed from 1; speckle m is the
channel pair (2m−1, 2m) in 1-based channel numbering.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import qr

from fiber import ExcitationProfile
from randmat import (
    JonesParams,
    StreamTree,
    block_diag_coupling,
    group_sizes_of,
    haar_unitary,
    jones_matrix,
    jones_matrix_batch,
)
from settings.defaults import DEFAULT_DELTA, DEFAULT_INPUT_FIELD


# Matrix indices below a realization's stream node
INPUT_STREAM = 0
OUTPUT_STREAM = 1
FIRST_SECTION_STREAM = 4

INPUT_MIXING_MODES = ('haar', 'group_exact')


class DimensionMismatchError(ValueError):
    """Raised when angles or vectors do not match the model dimensions."""


def section_stream(k: int, which: int) -> int:
    """Stream index of coupling matrix `which` (1 or 2) of section k (1-based)."""
    return FIRST_SECTION_STREAM + 2 * (k - 1) + (which - 1)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Section:
    """
    One paddle section: coupling before and after the paddle.

    Attributes:
        coupling_in: M_C1, 2N×2N
        coupling_out: M_C2, 2N×2N
    """
    coupling_in: np.ndarray
    coupling_out: np.ndarray


@dataclass(frozen=True)
class PaddleAngles:
    """
    Paddle rotation angles θ_1…θ_K, each reduced to [0, 2π).
    """
    angles: Tuple[float, ...]

    def __post_init__(self):
        reduced = tuple(JonesParams(float(a)).rotation_angle for a in self.angles)
        object.__setattr__(self, 'angles', reduced)

    @classmethod
    def zeros(cls, count: int) -> 'PaddleAngles':
        return cls((0.0,) * count)

    @classmethod
    def random(cls, count: int, rng: np.random.Generator) -> 'PaddleAngles':
        """Angles drawn uniformly on [0, 2π)."""
        return cls(tuple(rng.uniform(0.0, 2 * math.pi, size=count)))

    def replaced(self, k: int, angle: float) -> 'PaddleAngles':
        """Copy with θ_k (1-based) set to `angle`."""
        values = list(self.angles)
        values[k - 1] = angle
        return PaddleAngles(tuple(values))

    def as_array(self) -> np.ndarray:
        return np.array(self.angles, dtype=float)

    def __len__(self) -> int:
        return len(self.angles)


@dataclass(frozen=True)
class SpeckleField:
    """
    Output field (u₁ᴴ, u₁ⱽ, u₂ᴴ, u₂ⱽ, …) in the angular basis.
    """
    components: np.ndarray

    @property
    def n_speckles(self) -> int:
        return self.components.shape[0] // 2

    def intensities(self) -> np.ndarray:
        """I_m for every speckle, both polarizations summed."""
        return np.sum(np.abs(self.components.reshape(-1, 2)) ** 2, axis=1)


@dataclass(frozen=True)
class FslmModel:
    """
    One random realization of the fiber.

    Attributes:
        group_sizes: Spatial modes per group
        sections: K paddle sections, section 1 nearest the input
        input_coupling: U_in, 2N×2
        output_basis: U_out, 2N×2N
        input_field: E_in, 2-vector
        delta: Paddle retardation δ
        ablated: True if every coupling matrix is the identity
    """
    group_sizes: Tuple[int, ...]
    sections: Tuple[Section, ...]
    input_coupling: np.ndarray
    output_basis: np.ndarray
    input_field: np.ndarray
    delta: float = DEFAULT_DELTA
    ablated: bool = False

    @property
    def n_modes(self) -> int:
        """Spatial modes N."""
        return sum(self.group_sizes)

    @property
    def n_channels(self) -> int:
        return 2 * self.n_modes

    @property
    def n_paddles(self) -> int:
        return len(self.sections)

    def launched_vector(self) -> np.ndarray:
        """U_in · E_in, the unit-norm field entering section 1."""
        return self.input_coupling @ self.input_field

    def jones(self, angle: float) -> np.ndarray:
        return jones_matrix(JonesParams(angle, self.delta))


def _channel_weights(group_sizes: Sequence[int], excitation: ExcitationProfile) -> np.ndarray:
    # Both polarizations of every mode in a group share the group's power equally
    return np.concatenate([np.full(2 * n, w / (2 * n))
                           for n, w in zip(group_sizes, excitation.per_group_power)])


def _group_exact_columns(columns: np.ndarray, group_sizes: Sequence[int],
                         excitation: ExcitationProfile) -> np.ndarray:
    blocks = []
    start = 0
    for n, weight in zip(group_sizes, excitation.per_group_power):
        rows = columns[start:start + 2 * n]
        q, r = qr(rows, mode='economic')
        diagonal = np.diagonal(r)
        q = q * (diagonal / np.abs(diagonal))
        blocks.append(math.sqrt(weight) * q)
        start += 2 * n
    return np.vstack(blocks)


def build_model(structure, n_paddles: int, excitation: ExcitationProfile,
                input_field: Sequence[complex] = DEFAULT_INPUT_FIELD,
                delta: float = DEFAULT_DELTA,
                streams: Optional[StreamTree] = None,
                ablate: bool = False,
                input_mixing: str = 'haar',
                output_basis: Optional[np.ndarray] = None) -> FslmModel:
    """
    Assemble one random realization.

    Each matrix is drawn from its own stream below `streams`, so a realization
    with K paddles shares its input, output and first sections with the same
    realization at any larger K.

    Args:
        structure: ModeGroupStructure or explicit group sizes
        n_paddles: K (>= 0)
        excitation: Per-group power, one weight per group
        input_field: E_in (horizontal SMF polarization by default)
        delta: Paddle retardation
        streams: Stream node of this realization
        ablate: Replace every M_C1 and M_C2 with the identity
        input_mixing: 'haar' builds U_in = D^{1/2} · Q[:, :2] from a full Haar
                      Q; 'group_exact' re-orthonormalizes each group's rows
                      so every group carries exactly its share of the power
        output_basis: Override for U_out (test hook)

    Returns:
        FslmModel with ‖U_in · E_in‖ = 1

    Raises:
        ValueError: On an all-zero excitation or mismatched group count
    """
    if streams is None:
        raise ValueError("build_model needs an explicit StreamTree")
    if n_paddles < 0:
        raise ValueError(f"n_paddles must be >= 0; got {n_paddles}")
    if input_mixing not in INPUT_MIXING_MODES:
        raise ValueError(f"unknown input_mixing {input_mixing!r}")

    sizes = group_sizes_of(structure)
    if len(excitation.per_group_power) != len(sizes):
        raise ValueError(
            f"excitation has {len(excitation.per_group_power)} groups; model has {len(sizes)}")
    if excitation.total_power <= 0:
        raise ValueError("excitation carries no power")

    field = np.asarray(input_field, dtype=complex)
    if field.shape != (2,) or not np.any(field):
        raise DimensionMismatchError(f"input field must be a nonzero 2-vector; got {input_field}")

    dim = 2 * sum(sizes)
    mixing = haar_unitary(dim, streams.child(INPUT_STREAM).generator())[:, :2]
    if input_mixing == 'haar':
        coupling = np.sqrt(_channel_weights(sizes, excitation))[:, None] * mixing
    else:
        coupling = _group_exact_columns(mixing, sizes, excitation)

    norm = np.linalg.norm(coupling @ field)
    if norm == 0:
        raise ValueError("input field does not couple into any excited channel")
    coupling = coupling / norm

    if output_basis is None:
        output_basis = haar_unitary(dim, streams.child(OUTPUT_STREAM).generator())
    elif np.shape(output_basis) != (dim, dim):
        raise DimensionMismatchError(f"output basis must be {dim}x{dim}")

    sections = []
    identity = np.eye(dim, dtype=complex)
    for k in range(1, n_paddles + 1):
        if ablate:
            first, second = identity, identity
        else:
            first = block_diag_coupling(sizes, streams.child(section_stream(k, 1)).generator())
            second = block_diag_coupling(sizes, streams.child(section_stream(k, 2)).generator())
        sections.append(Section(_frozen(first), _frozen(second)))

    return FslmModel(
        group_sizes=sizes,
        sections=tuple(sections),
        input_coupling=_frozen(coupling),
        output_basis=_frozen(output_basis),
        input_field=_frozen(field),
        delta=float(delta),
        ablated=ablate,
    )


def _check_angles(model: FslmModel, angles: PaddleAngles):
    if len(angles) != model.n_paddles:
        raise DimensionMismatchError(
            f"got {len(angles)} angles for a model with {model.n_paddles} paddles")


def _check_speckle(model: FslmModel, m: int):
    if not 1 <= m <= model.n_modes:
        raise IndexError(f"speckle {m} out of range 1..{model.n_modes}")


def apply_jones(vector: np.ndarray, jones: np.ndarray) -> np.ndarray:
    """(I_N ⊗ J) · v without forming the Kronecker product."""
    return (vector.reshape(-1, 2) @ jones.T).reshape(-1)


def apply_jones_rows(rows: np.ndarray, jones: np.ndarray) -> np.ndarray:
    """rows · (I_N ⊗ J) for a stack of row vectors."""
    count = rows.shape[0]
    return (rows.reshape(count, -1, 2) @ jones).reshape(count, -1)


def apply_section(section: Section, jones: np.ndarray, vector: np.ndarray) -> np.ndarray:
    """T_k · v."""
    return section.coupling_out @ apply_jones(section.coupling_in @ vector, jones)


def propagate(model: FslmModel, angles: PaddleAngles) -> SpeckleField:
    """
    Output field for one set of paddle angles.

    Args:
        model: Realization
        angles: K angles

    Returns:
        SpeckleField with unit total power

    Raises:
        DimensionMismatchError: If the angle count differs from K
    """
    _check_angles(model, angles)
    vector = model.launched_vector()
    for section, angle in zip(model.sections, angles.angles):
        vector = apply_section(section, model.jones(angle), vector)
    return SpeckleField(model.output_basis @ vector)


def propagate_batch(model: FslmModel, angle_sets: np.ndarray,
                    target_m: Optional[int] = None) -> np.ndarray:
    """
    Output fields for many angle vectors at once.

    Args:
        model: Realization
        angle_sets: Array of shape (S, K)
        target_m: If given, only the two channels of this speckle are returned

    Returns:
        Complex array of shape (S, 2N), or (S, 2) with target_m
    """
    angle_sets = np.asarray(angle_sets, dtype=float)
    if angle_sets.ndim != 2 or angle_sets.shape[1] != model.n_paddles:
        raise DimensionMismatchError(
            f"angle sets must have shape (S, {model.n_paddles}); got {angle_sets.shape}")
    samples = angle_sets.shape[0]
    vectors = np.repeat(model.launched_vector()[:, None], samples, axis=1)
    for k, section in enumerate(model.sections):
        jones = jones_matrix_batch(angle_sets[:, k], model.delta)
        mixed = (section.coupling_in @ vectors).reshape(model.n_modes, 2, samples)
        mixed = np.einsum('sab,nbs->nas', jones, mixed).reshape(model.n_channels, samples)
        vectors = section.coupling_out @ mixed
    if target_m is not None:
        _check_speckle(model, target_m)
        basis = model.output_basis[2 * target_m - 2:2 * target_m]
    else:
        basis = model.output_basis
    return (basis @ vectors).T


def speckle_intensity(field: SpeckleField, m: int) -> float:
    """
    Intensity of speckle m, |u_mᴴ|² + |u_mⱽ|².

    Args:
        field: Output field
        m: Speckle index, 1 <= m <= N

    Returns:
        I_m
    """
    if not 1 <= m <= field.n_speckles:
        raise IndexError(f"speckle {m} out of range 1..{field.n_speckles}")
    pair = field.components[2 * m - 2:2 * m]
    return float(np.sum(np.abs(pair) ** 2))


def suffix_rows(model: FslmModel, angles: PaddleAngles, target_m: int) -> List[np.ndarray]:
    """
    W_k for every section in one backward pass.

    W_k = rows (2m−1, 2m) of U_out · T_K ⋯ T_{k+1} · M_C2ᵏ.

    Args:
        model: Realization
        angles: Current angles (only θ_{k+1}…θ_K enter W_k)
        target_m: Target speckle

    Returns:
        List [W_1, …, W_K] of 2×2N arrays
    """
    _check_angles(model, angles)
    _check_speckle(model, target_m)
    rows = model.output_basis[2 * target_m - 2:2 * target_m]
    suffixes: List[np.ndarray] = [None] * model.n_paddles
    for k in range(model.n_paddles, 0, -1):
        section = model.sections[k - 1]
        suffixes[k - 1] = rows @ section.coupling_out
        rows = apply_jones_rows(suffixes[k - 1], model.jones(angles.angles[k - 1])) @ section.coupling_in
    return suffixes


def factorize_at(model: FslmModel, angles: PaddleAngles, k: int,
                 target_m: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split the cascade around paddle k.

    V_k = M_C1ᵏ · T_{k−1} ⋯ T_1 · U_in · E_in and
    W_k = rows (2m−1, 2m) of U_out · T_K ⋯ T_{k+1} · M_C2ᵏ, so that
    (u_mᴴ, u_mⱽ) = W_k · M^J(θ_k) · V_k for every θ_k.

    Args:
        model: Realization
        angles: Current angles
        k: Paddle index, 1 <= k <= K
        target_m: Target speckle

    Returns:
        Tuple of (V_k as a 2N vector, W_k as a 2×2N matrix)
    """
    _check_angles(model, angles)
    _check_speckle(model, target_m)
    if not 1 <= k <= model.n_paddles:
        raise IndexError(f"paddle {k} out of range 1..{model.n_paddles}")

    vector = model.launched_vector()
    for i in range(1, k):
        vector = apply_section(model.sections[i - 1], model.jones(angles.angles[i - 1]), vector)
    prefix = model.sections[k - 1].coupling_in @ vector

    rows = model.output_basis[2 * target_m - 2:2 * target_m]
    for i in range(model.n_paddles, k, -1):
        section = model.sections[i - 1]
        rows = apply_jones_rows(rows @ section.coupling_out,
                                model.jones(angles.angles[i - 1])) @ section.coupling_in
    suffix = rows @ model.sections[k - 1].coupling_out
    return prefix, suffix
