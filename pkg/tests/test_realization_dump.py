"""Tests for realization dumps."""

import numpy as np

from model import PaddleAngles, propagate
from realization_dump import dump_model, load_model


def test_dump_restores_every_matrix(tmp_path, small_model):
    path = tmp_path / 'realization_0.npz'
    dump_model(small_model, path, {'seed_path': [1234, 0], 'config_hash': 'abc'})
    model, metadata = load_model(path)

    assert metadata == {'seed_path': [1234, 0], 'config_hash': 'abc'}
    assert model.group_sizes == small_model.group_sizes
    assert model.delta == small_model.delta
    assert model.ablated == small_model.ablated
    np.testing.assert_array_equal(model.input_coupling, small_model.input_coupling)
    np.testing.assert_array_equal(model.output_basis, small_model.output_basis)
    for loaded, original in zip(model.sections, small_model.sections):
        np.testing.assert_array_equal(loaded.coupling_in, original.coupling_in)
        np.testing.assert_array_equal(loaded.coupling_out, original.coupling_out)

    angles = PaddleAngles((0.3, 1.1, 2.0))
    np.testing.assert_array_equal(propagate(model, angles).components,
                                  propagate(small_model, angles).components)


def test_dump_without_paddles(tmp_path, make_model):
    original = make_model(n_paddles=0)
    path = tmp_path / 'k0.npz'
    dump_model(original, path, {})
    model, metadata = load_model(path)
    assert model.n_paddles == 0
    assert metadata == {}
