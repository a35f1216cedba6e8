"""Tests for the cascaded transmission model."""

import math

import numpy as np
import pytest

from fiber import ExcitationProfile
from model import (
    DimensionMismatchError,
    PaddleAngles,
    apply_jones,
    build_model,
    factorize_at,
    propagate,
    propagate_batch,
    section_stream,
    speckle_intensity,
    suffix_rows,
)
from randmat import JonesParams, StreamTree, is_unitary, paddle_polarization_matrix


def random_angles(count, seed=0):
    return PaddleAngles.random(count, StreamTree(seed).generator())


def test_model_dimensions(small_model):
    assert small_model.n_modes == 6
    assert small_model.n_channels == 12
    assert small_model.n_paddles == 3
    assert small_model.input_coupling.shape == (12, 2)
    assert np.linalg.norm(small_model.launched_vector()) == pytest.approx(1.0, abs=1e-14)


def test_model_arrays_are_read_only(small_model):
    assert not small_model.input_coupling.flags.writeable
    assert not small_model.sections[0].coupling_in.flags.writeable


def test_sections_are_unitary(small_model):
    for section in small_model.sections:
        assert is_unitary(section.coupling_in)
        assert is_unitary(section.coupling_out)
    assert is_unitary(small_model.output_basis)


@pytest.mark.parametrize('seed', range(5))
def test_energy_conservation(make_model, seed):
    model = make_model(n_paddles=4, groups=4, seed=seed)
    field = propagate(model, random_angles(4, seed))
    assert field.n_speckles == model.n_modes
    assert np.sum(field.intensities()) == pytest.approx(1.0, abs=1e-10)


def test_propagate_matches_dense_product(small_model):
    angles = random_angles(3, 9)
    vector = small_model.launched_vector()
    for section, angle in zip(small_model.sections, angles.angles):
        dense = paddle_polarization_matrix(small_model.n_modes, JonesParams(angle, small_model.delta))
        vector = section.coupling_out @ dense @ section.coupling_in @ vector
    expected = small_model.output_basis @ vector
    np.testing.assert_allclose(propagate(small_model, angles).components, expected, atol=1e-13)


def test_propagate_batch_matches_propagate(small_model):
    angle_sets = StreamTree(3).generator().uniform(0, 2 * math.pi, size=(6, 3))
    batch = propagate_batch(small_model, angle_sets)
    target = propagate_batch(small_model, angle_sets, target_m=2)
    for row, full, pair in zip(angle_sets, batch, target):
        field = propagate(small_model, PaddleAngles(tuple(row)))
        np.testing.assert_allclose(full, field.components, atol=1e-13)
        np.testing.assert_allclose(pair, field.components[2:4], atol=1e-13)


def test_factorization_reproduces_target_field(small_model):
    angles = random_angles(3, 4)
    for k in (1, 2, 3):
        prefix, suffix = factorize_at(small_model, angles, k, target_m=2)
        assert prefix.shape == (12,)
        assert suffix.shape == (2, 12)
        for theta in (0.0, 0.9, 2.2):
            trial = angles.replaced(k, theta)
            expected = propagate(small_model, trial).components[2:4]
            actual = suffix @ apply_jones(prefix, small_model.jones(theta))
            np.testing.assert_allclose(actual, expected, atol=1e-13)


def test_suffix_rows_match_factorization(small_model):
    angles = random_angles(3, 5)
    suffixes = suffix_rows(small_model, angles, 1)
    for k in (1, 2, 3):
        _, suffix = factorize_at(small_model, angles, k, target_m=1)
        np.testing.assert_allclose(suffixes[k - 1], suffix, atol=1e-13)


def test_zero_paddles(make_model):
    model = make_model(n_paddles=0)
    expected = model.output_basis @ model.launched_vector()
    np.testing.assert_allclose(propagate(model, PaddleAngles(())).components, expected)


def test_wrong_angle_count_rejected(small_model):
    with pytest.raises(DimensionMismatchError):
        propagate(small_model, PaddleAngles.zeros(2))
    with pytest.raises(DimensionMismatchError):
        propagate_batch(small_model, np.zeros((4, 2)))


def test_speckle_index_range(small_model):
    field = propagate(small_model, PaddleAngles.zeros(3))
    assert speckle_intensity(field, 6) >= 0.0
    with pytest.raises(IndexError):
        speckle_intensity(field, 0)
    with pytest.raises(IndexError):
        speckle_intensity(field, 7)


def test_ablation_uses_identity_sections(make_model):
    model = make_model(ablate=True)
    assert model.ablated
    for section in model.sections:
        np.testing.assert_array_equal(section.coupling_in, np.eye(12))
        np.testing.assert_array_equal(section.coupling_out, np.eye(12))


def test_ablation_keeps_input_and_output(make_model):
    full = make_model()
    ablated = make_model(ablate=True)
    np.testing.assert_array_equal(full.input_coupling, ablated.input_coupling)
    np.testing.assert_array_equal(full.output_basis, ablated.output_basis)


def test_common_random_numbers_across_paddle_counts(make_model):
    short = make_model(n_paddles=2)
    long = make_model(n_paddles=5)
    np.testing.assert_array_equal(short.input_coupling, long.input_coupling)
    np.testing.assert_array_equal(short.output_basis, long.output_basis)
    for a, b in zip(short.sections, long.sections):
        np.testing.assert_array_equal(a.coupling_in, b.coupling_in)
        np.testing.assert_array_equal(a.coupling_out, b.coupling_out)


def test_section_streams_do_not_collide():
    indices = [section_stream(k, which) for k in range(1, 20) for which in (1, 2)]
    assert len(set(indices)) == len(indices)
    assert min(indices) > 3


@pytest.mark.parametrize('n_paddles', [0, 3])
def test_group_power_is_conserved(n_paddles):
    sizes = (1, 2, 3, 4)
    excitation = ExcitationProfile.from_weights([0.1, 0.0, 0.3, 0.4])
    dim = 2 * sum(sizes)
    model = build_model(sizes, n_paddles, excitation, streams=StreamTree(77).child(0),
                        input_mixing='group_exact', output_basis=np.eye(dim))
    field = propagate(model, random_angles(n_paddles, 1))
    power = np.abs(field.components) ** 2
    starts = np.cumsum((0,) + tuple(2 * n for n in sizes))
    groups = [power[lo:hi].sum() for lo, hi in zip(starts, starts[1:])]
    np.testing.assert_allclose(groups, np.array([0.1, 0.0, 0.3, 0.4]) / 0.8, atol=1e-12)


def test_build_model_validation():
    excitation = ExcitationProfile.uniform_first_groups(2)
    with pytest.raises(ValueError):
        build_model((1, 2), 1, excitation)
    with pytest.raises(ValueError):
        build_model((1, 2), -1, excitation, streams=StreamTree(1))
    with pytest.raises(ValueError):
        build_model((1, 2, 3), 1, excitation, streams=StreamTree(1))
    with pytest.raises(ValueError):
        build_model((1, 2), 1, excitation, streams=StreamTree(1), input_mixing='other')
    with pytest.raises(DimensionMismatchError):
        build_model((1, 2), 1, excitation, streams=StreamTree(1), input_field=(0.0, 0.0))


def test_paddle_angles():
    angles = PaddleAngles((0.1, -0.2, 7.0))
    assert angles.angles[1] == pytest.approx(2 * math.pi - 0.2)
    assert angles.angles[2] == pytest.approx(7.0 - 2 * math.pi)
    assert angles.replaced(2, 1.5).angles == pytest.approx((0.1, 1.5, 7.0 - 2 * math.pi))
    assert len(PaddleAngles.zeros(4)) == 4
