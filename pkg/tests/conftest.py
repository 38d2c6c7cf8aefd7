"""Shared test fixtures for wcp-prior tests."""

from __future__ import annotations

import numpy as np
import pytest


@pytest.fixture(autouse=True)
def serial_workers(monkeypatch):
    """Run thread pools with one worker unless a test asks for more."""
    monkeypatch.setenv("WCP_THREADS", "1")
    monkeypatch.delenv("WCP_LOG_LEVEL", raising=False)


@pytest.fixture
def rng():
    """A seeded generator; each test gets a fresh stream."""
    return np.random.default_rng(20240601)


@pytest.fixture
def out_dir(tmp_path):
    """A scratch output directory for tables, sidecars and goldens."""
    path = tmp_path / "out"
    path.mkdir()
    return path
