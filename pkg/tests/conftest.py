"""Shared fixtures: BLAS pinning, micro datasets, archive directories.

A real CIFAR-10 archive is used whenever RWE_NAS_DATA points at one;
otherwise a synthetic archive in the identical binary format is
fabricated once per session so every data-touching path still runs.
"""

from __future__ import annotations

import os

import numpy as np
import pytest

from rwenas.data import (
    SplitData,
    SplitSpec,
    channel_stats,
    load_cifar10,
    make_synthetic_archive,
    normalize,
    split,
    synthetic_image_set,
)
from rwenas.errors import RweNasError
from rwenas.runtime import pin_blas_single_thread
from rwenas.search_space import MacroConfig

pin_blas_single_thread()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: ships-when-green acceptance gate")


@pytest.fixture(scope="session")
def archive_root(tmp_path_factory) -> str:
    """A loadable CIFAR-10 binary archive: real if available, else synthetic."""
    env_root = os.environ.get("RWE_NAS_DATA")
    if env_root:
        try:
            load_cifar10(env_root, split="train")
            return env_root
        except RweNasError:
            pass
    root = tmp_path_factory.mktemp("archive") / "cifar"
    make_synthetic_archive(str(root), n_train=50000, n_test=10000, seed=0)
    return str(root)


@pytest.fixture(scope="session")
def small_archive_root(tmp_path_factory) -> str:
    """A fast-to-build valid archive for loader and CLI plumbing tests."""
    root = tmp_path_factory.mktemp("small_archive") / "cifar"
    make_synthetic_archive(str(root), n_train=1500, n_test=300, seed=3)
    return str(root)


def build_micro_split(
    n_total: int = 300, hw: int = 16, seed: int = 7, split_seed: int = 0
) -> SplitData:
    """Small normalized train/validation pair for fast evaluator tests."""
    raw = synthetic_image_set(n_total, seed=seed)
    if hw != raw.images.shape[-1]:
        images = raw.images[:, :, :hw, :hw].copy()
        raw = type(raw)(images=images, labels=raw.labels.copy(), provenance=raw.provenance)
    mean, std = channel_stats(raw)
    parts = split(raw, SplitSpec(train_fraction=0.8, seed=split_seed))
    return SplitData(
        train=normalize(parts.train, mean, std),
        validation=normalize(parts.validation, mean, std),
    )


MICRO_MACRO = MacroConfig(
    num_layers=2,
    init_channels=8,
    reduction_positions=frozenset({2}),
    input_shape=(3, 16, 16),
)


@pytest.fixture(scope="session")
def micro_split() -> SplitData:
    return build_micro_split()


@pytest.fixture(scope="session")
def micro_macro() -> MacroConfig:
    return MICRO_MACRO


def seeded_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
