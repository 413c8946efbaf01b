"""Shared fixtures: avatar scenes, trained fixture checkpoints, tmp trees."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import torch

from hairlab.imaging.avatar import generate_avatar
from hairlab.pipeline import PipelineConfig, load_models

torch.set_num_threads(max(1, torch.get_num_threads()))

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"
BACKEND_CKPT = FIXTURES / "toy_backend.ckpt"
WARP_CKPT = FIXTURES / "warp.ckpt"
WARP_LOSS_CSV = FIXTURES / "warp_loss.csv"
BACKEND_LOSS_CSV = FIXTURES / "toy_backend_loss.csv"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: training runs measured in minutes")


@pytest.fixture(scope="session")
def scene():
    """One avatar sample reused by read-only tests."""
    return generate_avatar(5)


@pytest.fixture(scope="session")
def scenes100():
    return [generate_avatar(s) for s in range(100)]


@pytest.fixture(scope="session")
def trained_models():
    """Bundle backed by the committed fixture checkpoints."""
    if not BACKEND_CKPT.exists():
        pytest.fail(f"missing committed fixture {BACKEND_CKPT}; run scripts/make_fixtures.py")
    cfg = PipelineConfig(backend_path=str(BACKEND_CKPT), warp_path=str(WARP_CKPT))
    return load_models(cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
