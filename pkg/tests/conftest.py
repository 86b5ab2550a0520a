from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from fiberqkd.config import RunConfig
from fiberqkd.optics import ideal_config

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# Short, low-loss link that still yields a positive final key after
# reconciliation and privacy amplification.
SHORT_LINK = {
    "protocol": "b92",
    "pulses": 3_000_000,
    "channel": {"length_km": 5.0, "attenuation_db_per_km": 0.3, "extra_loss_db": 3.0},
    "postprocessing": {"security_margin": 32, "block_rows": 32, "block_cols": 32},
    "seeds": {"alice": 11, "bob": 12, "eve": 13, "channel": 14, "auth": 15},
    "run": {"timeout": 20},
}


def short_link(**overrides) -> RunConfig:
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in SHORT_LINK.items()}
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key].update(value)
        else:
            data[key] = value
    return RunConfig.from_dict(data)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def ideal():
    return ideal_config("simple")


@pytest.fixture(scope="session")
def short_link_session():
    from fiberqkd.session.endpoint import run_loopback

    cfg = short_link()
    return cfg, run_loopback(cfg)


# Acceptance verdicts, one line per criterion, printed at the end of the run.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
