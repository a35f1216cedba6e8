"""Shared fixtures for the F-SLM simulator tests."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from fiber import ExcitationProfile, FiberSpec  # noqa: E402
from model import build_model  # noqa: E402
from randmat import StreamTree  # noqa: E402
from settings import REFERENCE_FIBER  # noqa: E402


@pytest.fixture
def reference_fiber():
    return FiberSpec.from_config(REFERENCE_FIBER)


@pytest.fixture
def streams():
    return StreamTree(1234)


@pytest.fixture
def make_model():
    """Factory for small evenly excited realizations."""
    def factory(n_paddles=3, groups=3, seed=1234, index=0, **kwargs):
        sizes = tuple(range(1, groups + 1))
        excitation = kwargs.pop('excitation', ExcitationProfile.uniform_first_groups(groups))
        return build_model(sizes, n_paddles, excitation,
                           streams=StreamTree(seed).child(index), **kwargs)
    return factory


@pytest.fixture
def small_model(make_model):
    return make_model()
