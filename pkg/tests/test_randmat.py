"""Tests for random unitaries, Jones matrices and stream derivation."""

import math

import numpy as np
import pytest
from scipy.stats import beta, kstest

from randmat import (
    JonesParams,
    StreamTree,
    block_diag_coupling,
    group_sizes_of,
    haar_unitary,
    is_unitary,
    jones_matrix,
    jones_matrix_batch,
    paddle_polarization_matrix,
)


def test_stream_tree_is_reproducible():
    first = StreamTree(7).child(3, 1).generator().standard_normal(5)
    second = StreamTree(7, (3,)).child(1).generator().standard_normal(5)
    np.testing.assert_array_equal(first, second)


def test_stream_tree_paths_are_independent():
    a = StreamTree(7).child(0).generator().standard_normal(5)
    b = StreamTree(7).child(1).generator().standard_normal(5)
    c = StreamTree(8).child(0).generator().standard_normal(5)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_stream_tree_rejects_negative_seed():
    with pytest.raises(ValueError):
        StreamTree(-1)


@pytest.mark.parametrize('dim', [1, 2, 6, 30])
def test_haar_unitary_is_unitary(dim):
    u = haar_unitary(dim, StreamTree(11).generator())
    assert u.shape == (dim, dim)
    assert is_unitary(u)


def test_haar_unitary_rejects_empty():
    with pytest.raises(ValueError):
        haar_unitary(0, StreamTree(1).generator())


def test_haar_entry_distribution():
    # |U_11|^2 of a Haar unitary of size d follows Beta(1, d - 1)
    dim = 4
    rng = StreamTree(2024).generator()
    samples = [abs(haar_unitary(dim, rng)[0, 0]) ** 2 for _ in range(2000)]
    assert kstest(samples, beta(1, dim - 1).cdf).pvalue > 1e-3


def test_jones_matrix_properties():
    delta = 0.7
    for theta in (0.0, 0.3, 1.2, 2.9):
        j = jones_matrix(JonesParams(theta, delta))
        assert is_unitary(j)
        assert np.linalg.det(j) == pytest.approx(np.exp(1j * delta), abs=1e-14)
        np.testing.assert_allclose(jones_matrix(JonesParams(theta + math.pi, delta)), j, atol=1e-14)


def test_jones_matrix_axes():
    delta = math.pi / 2
    phase = np.exp(1j * delta)
    np.testing.assert_allclose(jones_matrix(JonesParams(0.0, delta)), np.diag([1, phase]), atol=1e-15)
    np.testing.assert_allclose(jones_matrix(JonesParams(math.pi / 2, delta)), np.diag([phase, 1]),
                               atol=1e-15)


def test_half_wave_at_45_degrees_swaps_polarizations():
    j = jones_matrix(JonesParams(math.pi / 4, math.pi))
    np.testing.assert_allclose(j, [[0, 1], [1, 0]], atol=1e-15)


def test_jones_batch_matches_single():
    angles = np.array([0.0, 0.4, 1.1, 3.0, 5.5])
    batch = jones_matrix_batch(angles, 1.3)
    for angle, matrix in zip(angles, batch):
        np.testing.assert_allclose(matrix, jones_matrix(JonesParams(angle, 1.3)), atol=1e-14)


def test_jones_params_reduce_angle():
    assert JonesParams(-0.5).rotation_angle == pytest.approx(2 * math.pi - 0.5)
    assert JonesParams(2 * math.pi).rotation_angle == 0.0
    with pytest.raises(ValueError):
        JonesParams(math.inf)


def test_block_diag_coupling_structure():
    sizes = (1, 2, 3)
    m = block_diag_coupling(sizes, StreamTree(5).generator())
    assert m.shape == (12, 12)
    assert is_unitary(m)
    starts = np.cumsum((0,) + tuple(2 * n for n in sizes))
    for g, (lo, hi) in enumerate(zip(starts, starts[1:])):
        mask = np.ones(12, dtype=bool)
        mask[lo:hi] = False
        assert np.all(m[lo:hi][:, mask] == 0), f"group {g + 1} couples outside its block"


def test_paddle_polarization_matrix_is_kron():
    params = JonesParams(0.8, 0.4)
    m = paddle_polarization_matrix(3, params)
    np.testing.assert_allclose(m, np.kron(np.eye(3), jones_matrix(params)))
    assert is_unitary(m)
    with pytest.raises(ValueError):
        paddle_polarization_matrix(0, params)


def test_is_unitary_rejects_non_unitary():
    assert not is_unitary(np.array([[1.0, 0.0], [0.0, 2.0]]))
    assert not is_unitary(np.ones((2, 3)))


def test_group_sizes_of_validates():
    assert group_sizes_of([1, 2]) == (1, 2)
    with pytest.raises(ValueError):
        group_sizes_of([])
    with pytest.raises(ValueError):
        group_sizes_of([2, 0])
