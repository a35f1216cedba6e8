"""
Random and structured unitary matrices for the F-SLM model.

Channel ordering is mode-major, polarization-minor: channel 2i is the
horizontal and channel 2i+1 the vertical component of spatial mode i
(0-based), so a per-mode Jones matrix repeats along the diagonal.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.linalg import block_diag, qr

from settings.defaults import DEFAULT_DELTA


UNITARY_TOLERANCE = 1e-12


class StreamTree:
    """
    Hierarchical random streams derived from one master seed.

    Every node is addressed by a path of integer keys below the master seed
    (for example realization index, then matrix index). Streams are Philox
    counter-based generators seeded through numpy's SeedSequence, so the same
    path always yields the same numbers regardless of which other streams were
    drawn, in which order, or in which process.
    """

    def __init__(self, seed: int, path: Tuple[int, ...] = ()):
        """
        Initialize a stream node.

        Args:
            seed: Master seed, 0 <= seed < 2**64
            path: Keys below the master seed
        """
        if seed < 0:
            raise ValueError(f"seed must be non-negative; got {seed}")
        self.seed = int(seed)
        self.path = tuple(int(k) for k in path)

    def child(self, *keys: int) -> 'StreamTree':
        """Node one or more levels below this one."""
        return StreamTree(self.seed, self.path + tuple(keys))

    def generator(self) -> np.random.Generator:
        """Fresh generator for this node; identical on every call."""
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(sequence))

    def __repr__(self) -> str:
        return f"StreamTree(seed={self.seed}, path={self.path})"


@dataclass(frozen=True)
class JonesParams:
    """
    Paddle birefringence parameters.

    Attributes:
        rotation_angle: θ in radians, reduced to [0, 2π)
        retardation: δ in radians, shared by every paddle of a run
    """
    rotation_angle: float
    retardation: float = DEFAULT_DELTA

    def __post_init__(self):
        if not (math.isfinite(self.rotation_angle) and math.isfinite(self.retardation)):
            raise ValueError(f"Jones parameters must be finite; got {self}")
        angle = math.fmod(self.rotation_angle, 2 * math.pi)
        if angle < 0:
            angle += 2 * math.pi
        if angle >= 2 * math.pi:
            angle = 0.0
        object.__setattr__(self, 'rotation_angle', angle)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw a dim×dim unitary from the Haar measure.

    A complex Ginibre matrix is QR-factored and each column of Q is scaled by
    the phase of the matching diagonal entry of R, which makes the factorization
    unique and the distribution exactly Haar.

    Args:
        dim: Matrix dimension (>= 1)
        rng: Random generator

    Returns:
        Complex unitary matrix
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1; got {dim}")
    ginibre = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = qr(ginibre)
    diagonal = np.diagonal(r)
    return q * (diagonal / np.abs(diagonal))


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def jones_matrix(params: JonesParams) -> np.ndarray:
    """
    Jones matrix of one paddle, R(θ) · diag(1, e^{iδ}) · R(-θ).

    Args:
        params: Rotation angle and retardation

    Returns:
        2×2 unitary with determinant e^{iδ}
    """
    rotation = rotation_matrix(params.rotation_angle)
    retarder = np.diag([1.0, np.exp(1j * params.retardation)])
    return rotation @ retarder @ rotation.T


def group_sizes_of(structure) -> Tuple[int, ...]:
    """
    Spatial-mode count per group.

    Args:
        structure: ModeGroupStructure or an explicit sequence of group sizes

    Returns:
        Tuple of n_p values
    """
    sizes = getattr(structure, 'modes_per_group', structure)
    sizes = tuple(int(n) for n in sizes)
    if not sizes or any(n < 1 for n in sizes):
        raise ValueError(f"group sizes must be positive; got {sizes}")
    return sizes


def block_diag_coupling(structure: Union[object, Sequence[int]],
                        rng: np.random.Generator) -> np.ndarray:
    """
    Intra-group coupling matrix M^C.

    Args:
        structure: ModeGroupStructure or explicit group sizes
        rng: Random generator

    Returns:
        2N×2N block-diagonal unitary with one independent 2n_p×2n_p Haar
        block per group; every cross-group entry is exactly zero
    """
    blocks = [haar_unitary(2 * n, rng) for n in group_sizes_of(structure)]
    return block_diag(*blocks)


def paddle_polarization_matrix(n_modes: int, params: JonesParams) -> np.ndarray:
    """
    Polarization mixing of one paddle for all modes, I_N ⊗ U^J(θ).

    Args:
        n_modes: Number of spatial modes N
        params: Rotation angle and retardation

    Returns:
        2N×2N unitary
    """
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1; got {n_modes}")
    return np.kron(np.eye(n_modes), jones_matrix(params))


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOLERANCE) -> bool:
    """True if ‖U†U − I‖_max < tol."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    deviation = matrix.conj().T @ matrix - np.eye(matrix.shape[0])
    return bool(np.max(np.abs(deviation)) < tol)


def jones_matrix_batch(angles: np.ndarray, retardation: float = DEFAULT_DELTA) -> np.ndarray:
    """
    Jones matrices for many rotation angles at once.

    Uses the expanded form cos²θ·diag(1, e^{iδ}) + sin²θ·diag(e^{iδ}, 1)
    + cosθ sinθ (1 − e^{iδ})·antidiag(1, 1), equal to jones_matrix entrywise.

    Args:
        angles: Array of rotation angles, any shape
        retardation: δ

    Returns:
        Array of shape angles.shape + (2, 2)
    """
    angles = np.asarray(angles, dtype=float)
    phase = np.exp(1j * retardation)
    c2 = np.cos(angles) ** 2
    s2 = np.sin(angles) ** 2
    cs = np.cos(angles) * np.sin(angles)
    out = np.empty(angles.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c2 + phase * s2
    out[..., 0, 1] = cs * (1 - phase)
    out[..., 1, 0] = cs * (1 - phase)
    out[..., 1, 1] = s2 + phase * c2
    return out
