"""Shared fixtures: datasets and trained models reused across test modules.

The expensive session fixtures (full benchmark training runs) are built
once and shared by the acceptance tests; unit tests use the small
dataset and tiny configurations instead.
"""

import time

import numpy as np
import pytest

from tcgl import sampler, trainer


@pytest.fixture(scope="session")
def bench_dataset(tmp_path_factory):
    """The 200-video, 10-class benchmark dataset at seed 7."""
    root = tmp_path_factory.mktemp("bench")
    data_dir = root / "data"
    sampler.generate_dataset(data_dir, num_videos=200, num_classes=10, seed=7)
    return data_dir


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A 30-video, 6-class dataset for fast unit-level training tests."""
    root = tmp_path_factory.mktemp("small")
    data_dir = root / "data"
    sampler.generate_dataset(data_dir, num_videos=30, num_classes=6, seed=5)
    return data_dir


def small_config(data_dir, **overrides):
    defaults = dict(
        data_dir=str(data_dir), epochs=2, batch_size=8, seed=5,
        feature_dim=16, gcn_dim=16,
    )
    defaults.update(overrides)
    return trainer.TrainConfig(**defaults).validate()


@pytest.fixture(scope="session")
def default_run(bench_dataset, tmp_path_factory):
    """Default-configuration training on the benchmark dataset, timed."""
    out = tmp_path_factory.mktemp("default_run")
    config = trainer.TrainConfig(data_dir=str(bench_dataset), seed=7,
                                 out_dir=str(out))
    start = time.monotonic()
    ckpt, rows = trainer.train(config)
    elapsed = time.monotonic() - start
    return {"config": config, "ckpt": ckpt, "rows": rows,
            "seconds": elapsed, "out_dir": out}


@pytest.fixture(scope="session")
def ablation_run(bench_dataset, tmp_path_factory):
    """Same benchmark training with both graph-loss weights zeroed."""
    out = tmp_path_factory.mktemp("ablation_run")
    config = trainer.TrainConfig(data_dir=str(bench_dataset), seed=7,
                                 alpha=0.0, beta=0.0, out_dir=str(out))
    ckpt, rows = trainer.train(config)
    return {"config": config, "ckpt": ckpt, "rows": rows}


@pytest.fixture(scope="session")
def bench_videos(bench_dataset):
    manifest, videos = sampler.load_dataset(bench_dataset)
    return manifest, videos


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
