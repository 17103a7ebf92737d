import os

import numpy as np
import pytest

from tmhomog.config import BulkMedium, GridSpec, InterfaceSpec, Lattice, ProblemConfig, SourcePulse

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    _ACCEPTANCE[criterion] = (bool(passed), detail)


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}: {detail}")


def small_config(interfaces=(), *, h=10.0, L=200.0, N_X=400, f_c=20.0, X_s=100.0, T_end=0.05,
                 rho=1200.0, c=2800.0, receivers=(), snapshots=()):
    return ProblemConfig(
        bulk=BulkMedium.homogeneous(rho, c),
        lattice=Lattice(h, tuple(interfaces)),
        source=SourcePulse(f_c, X_s),
        grid=GridSpec(L, N_X, 1.0, T_end),
        receivers=tuple(receivers),
        snapshot_times=tuple(snapshots),
    )


def single_interface(**kw):
    kw.setdefault("K_mean", 2.45e9)
    return InterfaceSpec.sinusoidal(0.0, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _no_thread_env(monkeypatch):
    # tests set the thread count explicitly where it matters
    if "TMHOMOG_THREADS" in os.environ:
        monkeypatch.delenv("TMHOMOG_THREADS")
