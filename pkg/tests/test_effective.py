import math

import numpy as np
import pytest

from conftest import single_interface, small_config
from mms import leading_error, modulated_config, observed_orders, second_order_error
from tmhomog.backend import get_kernels
from tmhomog.cell import effective_coefficients
from tmhomog.config import InterfaceSpec
from tmhomog.effective import (
    CFLError,
    DissipativeModel,
    DissipativeState,
    EffectiveModelError,
    SecondOrderModel,
    leading_dt,
    propagate,
    reconstruct_microfield,
    relax_half_step,
    run_leading,
    run_second_order,
    second_order_matrix_coeffs,
    source_node,
    step_dissipative,
)


def test_leading_order_converges_at_second_order():
    orders = observed_orders([leading_error(n) for n in (200, 400, 800)])
    assert np.all(orders > 1.9)


def test_second_order_scheme_converges_at_second_order():
    model = SecondOrderModel.from_config(modulated_config(200, limit_case=True))
    orders = observed_orders([second_order_error(n, model=model) for n in (200, 400, 800)])
    assert np.all(orders > 1.9)


def test_second_order_reduces_to_leading_without_interfaces():
    cfg = small_config(receivers=(60.0, 150.0), T_end=0.04)
    dt = leading_dt(cfg)
    a = run_leading(cfg, dt=dt, field_stride=10)
    b = run_second_order(cfg, dt=dt, field_stride=10)
    scale = np.max(np.abs(a.U))
    assert scale > 0
    assert np.max(np.abs(a.U - b.U)) < 1e-12 * scale
    np.testing.assert_allclose(a.rec_U, b.rec_U, atol=1e-12 * scale)


def test_cfl_refusal():
    cfg = small_config()
    with pytest.raises(CFLError):
        run_leading(cfg, dt=1.01 * cfg.grid.dX / 2800.0, T_end=1e-3)


def test_source_must_sit_on_node():
    with pytest.raises(ValueError):
        source_node(small_config(X_s=100.25))


def test_leading_energy_conserved_for_constant_coefficients():
    cfg = small_config(T_end=0.1)
    tr = run_leading(cfg).energy
    late = tr.T > 1.5 / cfg.source.f_c
    E = tr.total[late]
    assert np.ptp(E) < 1e-12 * E.mean()


def test_tridiagonal_solve_residual(rng):
    k = get_kernels()
    n = 64
    rhs = rng.standard_normal(n)
    rhs[[0, -1]] = 0.0
    out, work = np.empty(n), np.empty(n)
    P, Q = 1.7, -0.4
    k.thomas_const(P, Q, rhs, out, work)
    A = np.diag(np.full(n - 2, P)) + np.diag(np.full(n - 3, Q), 1) + np.diag(np.full(n - 3, Q), -1)
    assert np.max(np.abs(A @ out[1:-1] - rhs[1:-1])) < 1e-13
    assert out[0] == out[-1] == 0.0


def test_matrix_coefficients_are_diagonally_dominant_for_fig3_like_cell():
    cfg = modulated_config(400, limit_case=True)
    model = SecondOrderModel.from_config(cfg)
    dX = cfg.grid.dX
    dt = 0.9 * dX / model.check()
    for T in np.linspace(0, model.period, 17):
        A2, B, C, P, Q = second_order_matrix_coeffs(model, T, dt, dX)
        assert A2 <= 1.0
        assert P >= 2 * abs(Q)


def test_negative_effective_stiffness_refused():
    model = SecondOrderModel(rho=1.0, h=1.0, E0=lambda T: 1.0 + 0 * np.asarray(T), B1=lambda T: -2.0 + 0 * np.asarray(T),
                             B2=lambda T: 0 * np.asarray(T), dB2=lambda T: 0 * np.asarray(T), period=1.0)
    with pytest.raises(EffectiveModelError):
        model.check()


def test_second_order_needs_limit_case():
    with pytest.raises(EffectiveModelError):
        SecondOrderModel.from_config(small_config([single_interface(M_mean=1e4)]))


def _damped_config(N_X=400):
    itf = single_interface(M_mean=2e4, QC_mean=1e-8, QM_mean=1e4, eps_C=0.5, eps_M=0.4, f_m=20.0)
    return small_config([itf], N_X=N_X)


def test_relaxation_substep_is_exact_exponential(rng):
    cfg = _damped_config()
    model = DissipativeModel(cfg)
    V, S = rng.standard_normal(8), rng.standard_normal(8)
    T, tau = 0.013, 2e-4
    out = relax_half_step(DissipativeState(V, S), model, T, tau)
    sv, ss = model.rates(T)
    np.testing.assert_allclose(out.V, V * math.exp(sv * tau), rtol=1e-14)
    np.testing.assert_allclose(out.S, S * math.exp(ss * tau), rtol=1e-14)
    itf = cfg.interfaces[0]
    assert sv == pytest.approx(-(itf.M.deriv(T) + itf.QM(T)) / cfg.h / cfg.rho0(T), rel=1e-12)
    assert ss == pytest.approx(-cfg.E0(T) * (itf.C.deriv(T) + itf.QC(T)) / cfg.h, rel=1e-12)


def test_lax_wendroff_translates_at_unit_cfl():
    cfg = small_config()
    model = DissipativeModel(cfg)
    x, dX = cfg.grid.x, cfg.grid.dX
    c, Z = 2800.0, 1200.0 * 2800.0
    g = np.exp(-((x - 100.0) / 8.0) ** 2)
    st = propagate(DissipativeState(g.copy(), -Z * g), model, 0.0, dX / c, dX)
    # right-going pulse V = g, S = -Z g shifts one cell
    np.testing.assert_allclose(st.V[2:-2], g[1:-3], atol=1e-12)


def _dissipative_error(N_X, ref):
    cfg = _damped_config(N_X)
    model = DissipativeModel(cfg)
    x, dX = cfg.grid.x, cfg.grid.dX
    dt = 0.5 * dX / 2800.0
    k = 3 * math.pi / cfg.grid.L
    st = DissipativeState(np.sin(k * x), np.zeros_like(x))
    T_end = 0.02
    n = int(round(T_end / dt))
    for i in range(n):
        st = step_dissipative(st, model, i * dt, dt, dX)
    if ref is None:
        return st.V
    stride = (ref.size - 1) // (x.size - 1)
    return float(np.max(np.abs(st.V - ref[::stride])))


def test_split_dissipative_scheme_is_second_order():
    ref = _dissipative_error(3200, None)
    errs = [_dissipative_error(n, ref) for n in (200, 400, 800)]
    assert np.all(observed_orders(errs) > 1.8)


def test_reconstruction_is_identity_without_interfaces():
    cfg = small_config(T_end=0.02)
    hist = run_leading(cfg, field_stride=5)
    co = effective_coefficients(cfg, 8)
    np.testing.assert_array_equal(reconstruct_microfield(hist, co, cfg.h), hist.U)


def test_reconstruction_adds_cell_corrector():
    itf = InterfaceSpec.sinusoidal(0.0, K_mean=1e9)
    cfg = small_config([itf], T_end=0.03)
    hist = run_leading(cfg, field_stride=5)
    co = effective_coefficients(cfg, 8)
    u = reconstruct_microfield(hist, co, cfg.h)
    c = (1 / 1e9) * 1200 * 2800.0**2 / cfg.h
    s = -c / (1 + c)
    y = np.mod(hist.x / cfg.h, 1.0)
    expect = hist.U + cfg.h * s * (y - 0.5) * np.gradient(hist.U, hist.dX, axis=1)
    np.testing.assert_allclose(u, expect, atol=1e-12 * np.max(np.abs(hist.U)))
