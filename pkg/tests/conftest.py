from __future__ import annotations

import os

# timing criteria are stated for a single thread
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402
from hypothesis import HealthCheck, settings  # noqa: E402

from streamov.ingest import ObservationRecord, QueryEvent, SessionMeta, SessionScript  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def emb_obs(i: int, rng: np.random.Generator, dim: int = 8, t: float | None = None) -> ObservationRecord:
    return ObservationRecord(
        id=i, t=float(i) if t is None else t, dur=1.0, v_emb=unit(rng, dim), a_emb=unit(rng, dim)
    )


def emb_script(n: int, dim: int = 8, seed: int = 0, queries=(), sid: str = "s") -> SessionScript:
    rng = np.random.default_rng(seed)
    obs = tuple(emb_obs(i, rng, dim) for i in range(n))
    return SessionScript(SessionMeta(sid, dim, 16000), obs, tuple(queries))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_script() -> SessionScript:
    return emb_script(5, queries=(QueryEvent(2.5, "what happened", "respond"),))


# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
