"""Shared fixtures for long-running acceptance models.

Trained checkpoints are cached under .cache/ keyed by (chain, preset,
seed, schedule), so repeated suite runs skip training. Delete the cache
to force retraining.
"""

from pathlib import Path

import numpy as np
import pytest

from neuralik.kinematics import preset_chain
from neuralik.model import IkModel, ModelConfig
from neuralik.training import TrainConfig, generate_dataset, train

CACHE = Path(__file__).resolve().parent.parent / ".cache"


def train_phases(model, dataset, phases):
    """Sequential training phases, each a dict of TrainConfig overrides;
    every phase starts from the best-validation weights of the one before."""
    result = None
    for kw in phases:
        result = train(model, dataset, TrainConfig(**kw))
    return result


def cached_model(key, build):
    CACHE.mkdir(exist_ok=True)
    path = CACHE / f"{key}.ckpt"
    if path.exists():
        return IkModel.load(path)
    model = build()
    model.save(path)
    return model


# Acceptance training schedules, calibrated on the 1-core desk budget.
# Small batches make fast early progress; the long tail needs large
# batches because batch-norm statistics noise puts a floor on how sharp
# the mixture variances can get.
PLANAR2_PHASES = [
    dict(epochs=60, lr=1e-3, seed=0),
    dict(epochs=140, lr=5e-4, grad_clip=1.0, plateau_patience=8, seed=1),
    dict(epochs=300, lr=2.5e-4, grad_clip=0.5, plateau_patience=25, seed=2),
    dict(epochs=600, lr=1e-4, grad_clip=0.25, plateau_patience=35, seed=3),
    dict(epochs=800, batch_size=2048, lr=3e-4, grad_clip=0.25,
         plateau_patience=40, seed=5),
    dict(epochs=500, batch_size=4096, lr=2e-4, grad_clip=0.25,
         plateau_patience=40, seed=6),
]
PLANAR4_PHASES = [
    dict(epochs=60, lr=1e-3, seed=0),
    dict(epochs=140, lr=5e-4, grad_clip=1.0, plateau_patience=8, seed=1),
    dict(epochs=800, batch_size=2048, lr=3e-4, grad_clip=0.25,
         plateau_patience=40, seed=2),
    dict(epochs=500, batch_size=4096, lr=2e-4, grad_clip=0.25,
         plateau_patience=40, seed=3),
]
DIGIT4_PHASES = [
    dict(epochs=30, lr=1e-3, seed=0),
    dict(epochs=40, lr=5e-4, grad_clip=1.0, plateau_patience=8, seed=1),
    dict(epochs=100, batch_size=2048, lr=3e-4, grad_clip=0.25,
         plateau_patience=40, seed=2),
]


@pytest.fixture(scope="session")
def planar2_setup():
    chain = preset_chain("planar2")
    train_ds = generate_dataset(chain, 20000, 0)
    test_ds = generate_dataset(chain, 1000, 1)

    def build():
        model = IkModel(ModelConfig.for_chain(chain, "desk"),
                        np.random.default_rng([0, 0x111]))
        train_phases(model, train_ds, PLANAR2_PHASES)
        return model

    model = cached_model("planar2_desk_s0", build)
    return model, chain, train_ds, test_ds


@pytest.fixture(scope="session")
def planar4_setup():
    chain = preset_chain("planar4")
    train_ds = generate_dataset(chain, 20000, 0)
    test_ds = generate_dataset(chain, 1000, 1)

    def build():
        model = IkModel(ModelConfig.for_chain(chain, "desk"),
                        np.random.default_rng([0, 0x111]))
        train_phases(model, train_ds, PLANAR4_PHASES)
        return model

    model = cached_model("planar4_desk_s0", build)
    return model, chain, train_ds, test_ds


@pytest.fixture(scope="session")
def digit4_setup():
    chain = preset_chain("digit4")
    train_ds = generate_dataset(chain, 100000, 0)
    test_ds = generate_dataset(chain, 1000, 1)

    def build():
        model = IkModel(ModelConfig.for_chain(chain, "desk"),
                        np.random.default_rng([0, 0x111]))
        train_phases(model, train_ds, DIGIT4_PHASES)
        return model

    model = cached_model("digit4_desk_s0", build)
    return model, chain, train_ds, test_ds
