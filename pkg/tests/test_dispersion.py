import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmhomog.dispersion import (
    cross_validate,
    detect_k_gaps,
    dispersion_sweep,
    field_dispersion_map,
    fourier_coefficients,
    monodromy,
    pwe_branches,
    pwe_matrices,
)
from tmhomog.history import FieldHistory

TAU = 1.0


def _laws(eps_rho=0.0, eps_E=0.0):
    rho = lambda T: 1.0 + eps_rho * np.cos(2 * np.pi * np.asarray(T) / TAU)  # noqa: E731
    E = lambda T: 1.0 + eps_E * np.sin(2 * np.pi * np.asarray(T) / TAU)  # noqa: E731
    return rho, E


def test_fourier_coefficients_of_single_harmonics():
    fm = fourier_coefficients(*_laws(0.3, 0.2), TAU, 4)
    N = fm.n_f
    assert fm.rho[N] == pytest.approx(1.0)
    assert fm.rho[N + 1] == pytest.approx(0.15) and fm.rho[N - 1] == pytest.approx(0.15)
    assert fm.E[N + 1] == pytest.approx(-0.1j) and fm.E[N - 1] == pytest.approx(0.1j)
    assert np.max(np.abs(np.delete(fm.rho, [N - 1, N, N + 1]))) < 1e-15
    T = np.linspace(0, 1, 9)
    np.testing.assert_allclose(fm.evaluate("E", T), _laws(0.3, 0.2)[1](T), atol=1e-14)


def test_aliasing_guard():
    with pytest.raises(ValueError):
        fourier_coefficients(*_laws(), TAU, 200, n_samples=256)


@pytest.mark.parametrize("omega", [0.0, 0.7, math.pi])
def test_constant_coefficients_give_shifted_light_lines(omega):
    c = 2.0
    fm = fourier_coefficients(lambda T: 0 * np.asarray(T) + 1.0, lambda T: 0 * np.asarray(T) + c**2, TAU, 6)
    k = pwe_branches(fm, omega).k
    n = np.arange(-6, 7)
    expect = np.sort(np.abs(omega + 2 * np.pi * n / TAU) / c)
    np.testing.assert_allclose(k, expect, atol=1e-9)


def test_pwe_matrices_hermitian():
    P, Q = pwe_matrices(fourier_coefficients(*_laws(0.4, 0.3), TAU, 8), 1.3)
    np.testing.assert_array_equal(P, P.conj().T)
    np.testing.assert_array_equal(Q, Q.conj().T)
    assert np.all(np.linalg.eigvalsh(Q) > 0)


@settings(max_examples=20, deadline=None)
@given(k=st.floats(0.0, 20.0), eps=st.floats(0.0, 0.8))
def test_monodromy_has_unit_determinant(k, eps):
    m = monodromy(k, *_laws(eps, 0.5 * eps), TAU)
    assert np.linalg.det(m.matrix) == pytest.approx(1.0, abs=1e-9)


def test_monodromy_closed_form_for_constant_coefficients():
    rho, c, k = 2.0, 3.0, 1.7
    m = monodromy(k, lambda T: rho, lambda T: rho * c**2, TAU)
    w = c * k
    expect = np.array([[math.cos(w), math.sin(w) / (rho * w)], [-rho * w * math.sin(w), math.cos(w)]])
    np.testing.assert_allclose(m.matrix, expect, atol=1e-10)
    assert not m.in_gap()


def _first_gap(eps, n_f=16, n_omega=200):
    rho, E = _laws(0.0, eps)
    res = dispersion_sweep(fourier_coefficients(rho, E, TAU, n_f), n_omega)
    return detect_k_gaps(res, rho, E), res


def test_no_gaps_without_modulation():
    gaps, _ = _first_gap(0.0)
    assert gaps == []


def test_first_gap_is_confirmed_and_centred_on_half_modulation_frequency():
    gaps, _ = _first_gap(0.2)
    g = gaps[0]
    assert g.confirmed and g.growth_rate > 0
    assert g.k_lo < math.pi / TAU < g.k_hi
    # just outside the gap the multipliers sit on the unit circle
    rho, E = _laws(0.0, 0.2)
    assert not monodromy(0.98 * g.k_lo, rho, E, TAU).in_gap(1e-6)
    assert not monodromy(1.02 * g.k_hi, rho, E, TAU).in_gap(1e-6)


def test_gap_width_is_linear_in_modulation_depth():
    w = [(lambda g: g.k_hi - g.k_lo)(_first_gap(e, n_omega=400)[0][0]) for e in (0.1, 0.05)]
    assert w[0] / w[1] == pytest.approx(2.0, rel=0.03)


def test_gap_edges_converge_with_fourier_truncation():
    a = _first_gap(0.3, n_f=12)[0][0]
    b = _first_gap(0.3, n_f=24)[0][0]
    assert abs(a.k_lo - b.k_lo) < 1e-8 and abs(a.k_hi - b.k_hi) < 1e-8


def test_branches_mirror_about_zero_frequency():
    fm = fourier_coefficients(*_laws(0.3, 0.4), TAU, 10)
    a, b = pwe_branches(fm, 0.9).k[:6], pwe_branches(fm, -0.9).k[:6]
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_cross_validation_residual_small():
    rho, E = _laws(0.2, 0.3)
    res = dispersion_sweep(fourier_coefficients(rho, E, TAU, 16), 60)
    assert cross_validate(res, rho, E, max_points=8, n_branches=3) < 1e-8


def test_field_map_locates_a_monochromatic_wave():
    x = np.linspace(0, 100, 401)
    t = np.arange(512) * 1e-3
    k0, w0 = 2 * np.pi * 10 / 100, 2 * np.pi * 125.0
    U = np.cos(w0 * t[:, None] - k0 * x[None, :])
    hist = FieldHistory("synthetic", x, 1e-3, t, U, np.zeros(0), t, np.zeros((t.size, 0)))
    m = field_dispersion_map(hist)
    lo, hi = m.ridge_extent()
    assert lo < k0 < hi and hi - lo < 4 * (m.k[1] - m.k[0])
    i, _ = np.unravel_index(np.argmax(m.log_mag), m.log_mag.shape)
    assert abs(m.omega[i] - w0) <= m.omega[1] - m.omega[0]
