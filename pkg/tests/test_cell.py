import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import single_interface, small_config
from tmhomog.cell import (
    CellGeometry,
    CellProblemSpec,
    LimitCaseError,
    PeriodicSeries,
    SolvabilityError,
    corrector_family,
    effective_coefficients,
    effective_dissipative,
    effective_dissipative_dimensional,
    effective_leading,
    limit_case_coeffs,
    p1_time_derivative_exact,
    periodic_derivative,
    solve_cell_problem,
    verify_variational_identities,
)
from tmhomog.config import BulkMedium, InterfaceSpec, nondimensionalise
from tmhomog.presets import fig1_config, fig1f_config, fig3_config

Y = np.linspace(0.0, 0.999, 37)


def _p1_single(c):
    geo = CellGeometry.build([0.0])
    return solve_cell_problem(CellProblemSpec(geo, np.array([c]), r=geo.const(np.ones(1))))


@pytest.mark.parametrize("c", [0.0, 0.25, 1.0, 3.0])
def test_p1_single_interface_closed_form(c):
    s = -c / (1 + c)
    sol = _p1_single(c)
    np.testing.assert_allclose(sol.P(Y), s * (Y - 0.5), atol=1e-14)
    assert sol.P.mean() == pytest.approx(0.0, abs=1e-15)


def test_perfect_contact_gives_zero_corrector():
    sol = _p1_single(0.0)
    assert np.max(np.abs(sol.P.coef)) < 1e-15


def test_inconsistent_flux_budget_raises_or_projects():
    geo = CellGeometry.build([0.0])
    spec = CellProblemSpec(geo, np.array([0.5]), j=np.array([1.0]))
    with pytest.raises(SolvabilityError):
        solve_cell_problem(spec)
    sol = solve_cell_problem(spec, project=True)
    assert sol.defect == pytest.approx(1.0)
    assert sol.flux.jumps()[0] == pytest.approx(1.0)


def test_coinciding_interfaces_rejected():
    with pytest.raises(ValueError):
        CellGeometry.build([0.0, 0.0])


def _general_problem():
    """Two modulated massive interfaces in a two-phase bulk."""
    i1 = InterfaceSpec.sinusoidal(0.0, K_mean=2e9, M_mean=1e4, eps_C=0.5, eps_M=0.3, f_m=20.0)
    i2 = InterfaceSpec.sinusoidal(0.4, K_mean=3e9, M_mean=5e3, eps_C=-0.4, eps_M=0.6, f_m=20.0, phase_C=1.0)
    cfg = small_config([i1, i2]).with_(
        bulk=BulkMedium(rho=(1200.0, 2000.0), E=(9e9, 2e10), breakpoints=(0.0, 0.7))
    )
    return nondimensionalise(cfg)


@pytest.fixture(scope="module")
def general_family():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return corrector_family(_general_problem(), 64)


def test_corrector_relations_hold_pointwise(general_family):
    fam = general_family
    P1, P2, P5 = fam["P1"].P, fam["P2"].P, fam["P5"].P
    assert np.max(np.abs(P1(Y) + P2.deriv()(Y))) < 1e-10
    assert np.max(np.abs(P2(Y) + P5.deriv()(Y))) < 1e-10


def test_every_corrector_has_zero_mean(general_family):
    for name, cor in general_family.correctors.items():
        assert np.max(np.abs(cor.P.mean())) < 1e-10, name


def test_declared_jumps_reproduced(general_family):
    fam = general_family
    P1 = fam["P1"]
    c = fam.geometry.to_nodes(fam.laws.c)
    np.testing.assert_allclose(P1.P.jumps(), c * P1.flux.node_means(), atol=1e-12)
    P3 = fam["P3"]
    m = fam.geometry.to_nodes(fam.laws.m)
    np.testing.assert_allclose(P3.flux.jumps(), m, atol=1e-12)


def test_massless_uniform_cell_has_no_inertial_correctors():
    fam = corrector_family(nondimensionalise(fig1_config(f_m=30.0).with_(
        lattice=fig3_config().lattice.__class__(10.0, (InterfaceSpec.sinusoidal(0.0, K_mean=1e9, eps_C=0.9, f_m=10.0),))
    )), 32)
    assert np.max(np.abs(fam["P3"].P.coef)) < 1e-14
    assert np.max(np.abs(fam["P4"].P.coef)) < 1e-14


def test_unmodulated_correctors_are_static():
    fam = corrector_family(nondimensionalise(small_config([single_interface(M_mean=1e4)])), 16)
    assert fam.t.size == 1
    assert np.max(np.abs(fam["P1"].dt.coef)) == 0.0


def test_p1_time_derivative_channel_matches_exact():
    cfg = small_config([InterfaceSpec.sinusoidal(0.0, K_mean=1e9, eps_C=0.9, f_m=10.0)])
    fam = corrector_family(nondimensionalise(cfg), 256)
    exact = p1_time_derivative_exact(fam)
    np.testing.assert_allclose(fam["P1"].dt(Y), exact(Y), atol=1e-8)


def test_b2_closed_form_and_static_b1():
    h = 10.0
    E = 1200 * 2800.0**2
    cfg = small_config([InterfaceSpec.sinusoidal(0.0, C_mean=h / E)], h=h)  # scaled compliance 1
    fam = corrector_family(nondimensionalise(cfg), 8)
    b1, b2 = limit_case_coeffs(fam)
    assert b2[0] == pytest.approx(1 / 48, rel=1e-13)
    assert b1[0] == 0.0


@settings(max_examples=15, deadline=None)
@given(eps=st.floats(-0.9, 0.9), K=st.floats(3e8, 1e10), fm=st.floats(2.0, 60.0))
def test_b2_non_negative(eps, K, fm):
    cfg = small_config([InterfaceSpec.sinusoidal(0.0, K_mean=K, eps_C=eps, f_m=fm)])
    _, b2 = limit_case_coeffs(corrector_family(nondimensionalise(cfg), 32, orders=1))
    assert np.all(b2 >= 0)


def test_limit_case_guard():
    fam = corrector_family(nondimensionalise(small_config([single_interface(M_mean=1e4)])), 8)
    with pytest.raises(LimitCaseError):
        limit_case_coeffs(fam)


def test_effective_leading_direct_formula():
    h, E, rho = 10.0, 1200 * 2800.0**2, 1200.0
    itf = InterfaceSpec.sinusoidal(0.0, C_mean=0.5 * h / E, M_mean=0.3 * rho * h)
    a0, b0 = effective_leading(nondimensionalise(small_config([itf], h=h)), 0.0)
    assert a0 == pytest.approx(1.3, rel=1e-14)
    assert b0 == pytest.approx(2 / 3, rel=1e-14)


@given(c1=st.floats(0.0, 5.0), dc=st.floats(1e-3, 5.0), y2=st.floats(0.1, 0.9))
def test_beta0_decreases_with_compliance(c1, dc, y2):
    E, h = 1200 * 2800.0**2, 10.0

    def b0(extra):
        i1 = InterfaceSpec.sinusoidal(0.0, C_mean=(c1 + extra) * h / E)
        i2 = InterfaceSpec.sinusoidal(y2, C_mean=0.3 * h / E)
        return effective_leading(nondimensionalise(small_config([i1, i2], h=h)), 0.0)[1]

    assert b0(dc) < b0(0.0)


def test_perfect_contact_and_static_limits():
    bulk = BulkMedium(rho=(1000.0, 3000.0), E=(1e9, 4e9), breakpoints=(0.0, 0.5))
    cfg = small_config().with_(bulk=bulk)
    assert cfg.rho0(0.0) == pytest.approx(2000.0, rel=1e-12)
    assert 1 / cfg.E0(0.0) == pytest.approx(0.5 / 1e9 + 0.5 / 4e9, rel=1e-12)
    gm, gc = effective_dissipative(nondimensionalise(small_config([single_interface()])), np.zeros(3))
    assert np.all(gm == 0) and np.all(gc == 0)


def test_gamma_c0_tracks_log_derivative_of_beta0():
    prob = nondimensionalise(small_config([InterfaceSpec.sinusoidal(0.0, K_mean=1e9, eps_C=0.8, f_m=10.0)]))
    t = np.linspace(0, prob.period(), 64, endpoint=False)
    _, b0 = effective_leading(prob, t)
    _, gc = effective_dissipative(prob, t)
    db0 = periodic_derivative(b0, prob.period(), 1)
    np.testing.assert_allclose(gc, db0 / b0, atol=1e-10)


def test_fig1f_low_dissipation_coefficients():
    cfg = fig1f_config("low").with_(lattice=fig1f_config("low").lattice.__class__(
        10.0, (InterfaceSpec.sinusoidal(0.0, K_mean=2.45e9, M_mean=2e4, QC_mean=1e-8, QM_mean=1e4),)))
    GM, GC = effective_dissipative_dimensional(cfg, 0.0)
    assert GC == pytest.approx(-1e-9, rel=1e-12)
    assert GM == pytest.approx(-1e3, rel=1e-12)


def test_identities_on_closed_form_cell():
    cfg = small_config([InterfaceSpec.sinusoidal(0.0, K_mean=2e9, M_mean=1e4, eps_C=0.6, eps_M=-0.5, f_m=20.0)])
    fam = corrector_family(nondimensionalise(cfg), 128)
    assert np.max(np.abs(verify_variational_identities(fam))) < 1e-10


def test_generalised_identities_on_any_cell(general_family):
    assert np.max(np.abs(verify_variational_identities(general_family, generalized=True))) < 1e-9


def test_static_massless_identities_trivial():
    fam = corrector_family(nondimensionalise(small_config([single_interface()])), 4)
    r = verify_variational_identities(fam)
    assert np.all(r[:, 1:] == 0.0)


def test_periodic_series_derivatives():
    tau = 0.2
    T = np.arange(32) * tau / 32
    s = PeriodicSeries(np.sin(2 * math.pi * T / tau) + 0.5, tau)
    Tq = np.linspace(0, 1, 11)
    np.testing.assert_allclose(s(Tq), np.sin(2 * math.pi * Tq / tau) + 0.5, atol=1e-13)
    np.testing.assert_allclose(s(Tq, 1), 2 * math.pi / tau * np.cos(2 * math.pi * Tq / tau), atol=1e-10)


def test_coefficient_table_matches_closed_forms():
    cfg = fig1_config()
    co = effective_coefficients(cfg, 64)
    np.testing.assert_allclose(co.rho0, cfg.rho0(co.T), rtol=1e-12)
    np.testing.assert_allclose(co.E0, cfg.E0(co.T), rtol=1e-12)
    np.testing.assert_allclose(co.alpha0 * 1200.0, cfg.rho0(co.T), rtol=1e-12)
    assert not co.is_limit_case
    assert {"A", "B", "C", "D", "E", "F", "G"} <= set(co.fraktur)


def test_limit_case_table_has_dispersive_columns():
    cfg = small_config([InterfaceSpec.sinusoidal(0.0, K_mean=1e9, eps_C=0.9, f_m=10.0)])
    cols = effective_coefficients(cfg, 32).table()
    assert {"b1", "b2", "B1", "B2"} <= set(cols)
    assert all(np.all(np.isfinite(v)) for v in cols.values())
