import numpy as np
import pytest

from conftest import single_interface, small_config
from tmhomog import backend
from tmhomog.effective import run_leading, run_second_order
from mms import modulated_config
from tmhomog.micro import run_micro

pytestmark = pytest.mark.skipif(not backend.HAS_NATIVE, reason="compiled kernels not built")


@pytest.fixture
def both():
    return backend.get_kernels("numpy"), backend.get_kernels("cython")


def test_leading_kernel_agrees(both, rng):
    n = 257
    u, up = rng.standard_normal(n), rng.standard_normal(n)
    outs = []
    for k in both:
        out = np.empty(n)
        k.leading_step(u, up, out, 1.3, 0.9, 0.4)
        outs.append(out)
    np.testing.assert_allclose(outs[0], outs[1], rtol=1e-14, atol=1e-14)


def test_second_order_kernels_agree(both, rng):
    n = 200
    u, up = rng.standard_normal(n), rng.standard_normal(n)
    rhs, sol = [], []
    for k in both:
        out = np.empty(n)
        k.second_order_rhs(u, up, out, 0.8, 0.3, 0.05)
        rhs.append(out)
        x, work = np.empty(n), np.empty(n)
        k.thomas_const(1.6, -0.325, out, x, work)
        sol.append(x)
    np.testing.assert_allclose(rhs[0], rhs[1], rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(sol[0], sol[1], rtol=1e-12, atol=1e-13)


def test_gather_kernel_agrees(both, rng):
    vals = rng.standard_normal(50)
    idx = rng.integers(0, 50, (30, 4)).astype(np.int64)
    w = rng.standard_normal((30, 4))
    outs = []
    for k in both:
        out = np.empty(30)
        k.gather4(vals, idx, w, out)
        outs.append(out)
    np.testing.assert_allclose(outs[0], outs[1], rtol=1e-13, atol=1e-14)


@pytest.mark.parametrize("runner", ["leading", "second_order", "micro"])
def test_whole_runs_agree(runner):
    if runner == "leading":
        cfg = small_config([single_interface(M_mean=2e4, eps_C=0.9, eps_M=-0.9, f_m=30.0)], receivers=(150.0,))
        run = run_leading
    elif runner == "second_order":
        cfg = modulated_config(400, limit_case=True).with_(receivers=(150.0,))
        run = run_second_order
    else:
        cfg = small_config([single_interface(M_mean=2e4, eps_C=0.9, eps_M=-0.9, f_m=30.0)], receivers=(150.0,))
        run = run_micro
    a = run(cfg, backend="numpy").receiver(150.0)
    b = run(cfg, backend="cython").receiver(150.0)
    assert np.max(np.abs(a)) > 0
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-10 * np.max(np.abs(a)))


def test_unknown_backend():
    with pytest.raises(ValueError):
        backend.get_kernels("fortran")


def test_thread_count_env(monkeypatch):
    assert backend.thread_count() == 1
    monkeypatch.setenv("TMHOMOG_THREADS", "3")
    assert backend.thread_count() == 3
    monkeypatch.setenv("TMHOMOG_THREADS", "0")
    assert backend.thread_count() == 1
