"""
Shared fixtures: small SIM instances and an isolated telemetry file.
"""

import pytest

from sim_helpers import make_stack


@pytest.fixture(autouse=True)
def isolated_telemetry(tmp_path, monkeypatch):
    """Route experiment telemetry to a per-test file."""
    path = tmp_path / "experiment_data.json"
    monkeypatch.setenv("SIM_LOG_FILE", str(path))
    monkeypatch.delenv("SIM_EXPERIMENT_LOG", raising=False)
    monkeypatch.delenv("SIM_SEED", raising=False)
    monkeypatch.delenv("SIM_MAX_WORKERS", raising=False)
    return path


@pytest.fixture
def small_stack():
    """L=2, N=4, M=2 transceiver: (config, geometry, stack)."""
    return make_stack(2, 4, 2)
