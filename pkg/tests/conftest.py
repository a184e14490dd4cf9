import dataclasses

import numpy as np
import pytest

from csiloc.channel import EnvironmentSpec
from csiloc.data import FingerprintDataset, NormalizationRecord, SamplePoint
from csiloc.model import init_model


@pytest.fixture
def tiny_model():
    return init_model((6, 5, 4, 3), 2, seed=42)


@pytest.fixture
def rng():
    return np.random.default_rng(123)


@pytest.fixture
def small_env():
    return EnvironmentSpec(
        width=6.0, height=7.0, ap_position=(3.0, 0.3),
        carrier_frequency=5e7, subcarrier_spacing=2e6,
        scatterer_positions=((0.4, 1.0), (5.6, 2.2), (2.8, 6.9)),
        noise_std=0.01, rng_seed=5)


@pytest.fixture
def los_env():
    return EnvironmentSpec(
        width=10.0, height=10.0, ap_position=(1.0, 1.0),
        noise_std=0.0, antenna_gain_offsets=(1.0, 1.0, 1.0),
        antenna_phase_offsets=(0.0, 0.0, 0.0), rng_seed=1)


def make_dataset(n_sps=3, m=2, seed=0, normalized=True):
    rng = np.random.default_rng(seed)
    points = []
    for i in range(n_sps):
        packets = rng.uniform(0.0, 1.0, size=(m, 90))
        points.append(SamplePoint(i, (float(i), float(i % 2)), packets))
    norm = NormalizationRecord(0.0, 1.0) if normalized else None
    return FingerprintDataset(points, norm)


@pytest.fixture
def small_dataset():
    return make_dataset()


def env_with(env, **kw):
    return dataclasses.replace(env, **kw)
