"""Energies, error norms, growth fits and the reciprocity harness."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import ConfigError, GridSpec, ProblemConfig, SourcePulse
from .history import EnergyTrace, FieldHistory


def _trap_weights(n: int, dX: float) -> np.ndarray:
    w = np.full(n, dX)
    w[[0, -1]] *= 0.5
    return w


# -- energies ----------------------------------------------------------------------------------


def energy_bulk(V: np.ndarray, S: np.ndarray, rho, E, dX: float, T=None) -> EnergyTrace:
    """0.5 * int(rho V^2 + S^2 / E) for velocity/stress histories of shape (n_t, n_x)."""
    V = np.atleast_2d(V)
    S = np.atleast_2d(S)
    w = _trap_weights(V.shape[1], dX)
    kin = 0.5 * np.sum(w * np.asarray(rho) * V**2, axis=1)
    pot = 0.5 * np.sum(w * S**2 / np.asarray(E), axis=1)
    T = np.arange(V.shape[0], dtype=float) if T is None else np.asarray(T, dtype=float)
    z = np.zeros_like(kin)
    return EnergyTrace(T, kin, pot, z, z.copy())


def energy_displacement(U: np.ndarray, dt: float, dX: float, rho0: Callable, E0: Callable,
                        T0: float = 0.0) -> EnergyTrace:
    """Staggered energy 0.5 rho0 |D_t U|^2 + 0.5 E0 <D_x U^n, D_x U^{n+1}> at half steps.

    ``U`` holds consecutive time levels (n_t, n_x).
    """
    U = np.asarray(U, dtype=float)
    Th = T0 + (np.arange(U.shape[0] - 1) + 0.5) * dt
    du = np.diff(U, axis=0) / dt
    dx = np.diff(U, axis=1) / dX
    kin = 0.5 * rho0(Th) * np.sum(du**2, axis=1) * dX
    Eh = 0.5 * (E0(Th - 0.5 * dt) + E0(Th + 0.5 * dt))
    pot = 0.5 * Eh * np.sum(dx[:-1] * dx[1:], axis=1) * dX
    z = np.zeros_like(kin)
    return EnergyTrace(Th, kin, pot, z, z.copy())


@dataclass
class SecondOrderEnergy:
    trace: EnergyTrace
    residual: np.ndarray  # per interior time level, balance defect
    scale: float  # energy scale used to normalise the residual

    @property
    def relative_residual(self) -> np.ndarray:
        return self.residual / self.scale


def energy_second_order(U: np.ndarray, dt: float, dX: float, model, force: np.ndarray | None = None,
                        T0: float = 0.0) -> SecondOrderEnergy:
    """Energy of the dispersive model and the defect of its balance law.

    With ``W = E0 + h^2 rho B1`` the continuous balance reads
    dE/dT = P + 0.5 int W' (U_X)^2 - 0.5 h^2 rho int B2' (U_XT)^2,
    where P is the power of the body force.  ``U`` holds every time level.
    ``force`` (n_t, n_x) is the body force density at the integer levels.
    """
    if model is None:
        raise ValueError("second-order model coefficients are required")
    U = np.asarray(U, dtype=float)
    rho, h = model.rho, model.h
    nt = U.shape[0]
    Th = T0 + (np.arange(nt - 1) + 0.5) * dt
    du = np.diff(U, axis=0) / dt
    dxu = np.diff(U, axis=1) / dX
    dxdu = np.diff(du, axis=1) / dX
    kin = 0.5 * rho * np.sum(du**2, axis=1) * dX
    pot = 0.5 * rho * model.speed2(Th) * np.sum(dxu[:-1] * dxu[1:], axis=1) * dX
    extra = 0.5 * rho * h**2 * model.B2(Th) * np.sum(dxdu**2, axis=1) * dX
    power = np.zeros(nt - 1)
    Tn = T0 + np.arange(1, nt - 1) * dt
    if force is not None:
        vel = (U[2:] - U[:-2]) / (2 * dt)
        power_n = np.sum(force[1:-1] * vel, axis=1) * dX
        power[1:] = 0.5 * (power_n + np.concatenate((power_n[:1], power_n[:-1])))
    else:
        power_n = np.zeros(nt - 2)
    tr = EnergyTrace(Th, kin, pot, extra, power)
    total = tr.total
    dEdt = np.diff(total) / dt
    W1 = rho * model.dspeed2(Tn)
    ux2 = np.sum(dxu[1:-1] ** 2, axis=1) * dX
    uxt2 = 0.5 * (np.sum(dxdu[:-1] ** 2, axis=1) + np.sum(dxdu[1:] ** 2, axis=1)) * dX
    rhs = power_n + 0.5 * W1 * ux2 - 0.5 * rho * h**2 * model.dB2(Tn) * uxt2
    scale = max(float(np.max(np.abs(total))), 1e-300)
    return SecondOrderEnergy(tr, dEdt - rhs, scale / max(Th[-1] - Th[0], dt))


def energy_drift(trace: EnergyTrace, t_min: float | None = None) -> float:
    """max |E - E_ref| / E_ref after ``t_min`` (E_ref: first value in the window)."""
    sel = trace.T >= (t_min if t_min is not None else trace.T[0])
    tot = trace.total[sel]
    if tot.size == 0:
        raise ValueError("empty window")
    return float(np.max(np.abs(tot - tot[0])) / abs(tot[0]))


# -- Floquet growth -------------------------------------------------------------------------------


def floquet_growth_fit(trace: EnergyTrace, t_min: float | None = None, t_max: float | None = None,
                       period: float | None = None) -> float:
    """Least-squares slope of log(total energy) over the window (per second).

    Defaults to the second half of the trace.  With ``period`` the window is
    trimmed to a whole number of periods so intra-period ripple averages out.
    """
    T, E = trace.T, trace.total
    t_min = T[0] + 0.5 * (T[-1] - T[0]) if t_min is None else t_min
    t_max = T[-1] if t_max is None else t_max
    if period:
        n_per = math.floor((t_max - t_min) / period + 1e-9)
        if n_per < 1:
            raise ValueError("window shorter than one modulation period")
        t_max = t_min + n_per * period
    sel = (T >= t_min) & (T <= t_max)
    if sel.sum() < 2:
        raise ValueError("empty fit window")
    if np.any(E[sel] <= 0):
        raise ValueError("energy must be positive for a logarithmic fit")
    slope, _ = np.polyfit(T[sel], np.log(E[sel]), 1)
    return float(slope)


# -- norms -------------------------------------------------------------------------------------------


def _fields_at(hist: FieldHistory, times: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Linear interpolation of stored fields in time, then in space."""
    t = hist.field_t
    if t.size == 0:
        raise ValueError(f"{hist.solver} history holds no stored fields")
    if times.min() < t[0] - 1e-12 or times.max() > t[-1] + 1e-12:
        raise ValueError("requested time outside the stored range")
    j = np.clip(np.searchsorted(t, times) - 1, 0, max(t.size - 2, 0))
    if t.size == 1:
        rows = hist.U[[0] * times.size]
    else:
        th = np.clip((times - t[j]) / (t[j + 1] - t[j]), 0.0, 1.0)[:, None]
        rows = (1 - th) * hist.U[j] + th * hist.U[j + 1]
    if hist.x.size == x.size and np.allclose(hist.x, x):
        return rows
    return np.array([np.interp(x, hist.x, r) for r in rows])


def error_norms(A: FieldHistory, B: FieldHistory, window: tuple[float, float],
                x_window: tuple[float, float] | None = None) -> tuple[float, float]:
    """(relative L2, relative Linf) of B against A over A's stored fields inside the window.

    B is interpolated linearly onto A's times and grid; the window is clipped
    to the span B actually stored.
    """
    if B.field_t.size == 0:
        raise ValueError(f"{B.solver} history holds no stored fields")
    lo = max(window[0], B.field_t[0])
    hi = min(window[1], B.field_t[-1])
    sel = (A.field_t >= lo - 1e-12) & (A.field_t <= hi + 1e-12)
    if not np.any(sel):
        raise ValueError("empty comparison window")
    xs = np.ones(A.x.size, dtype=bool) if x_window is None else (A.x >= x_window[0]) & (A.x <= x_window[1])
    a = A.U[sel][:, xs]
    b = _fields_at(B, A.field_t[sel], A.x)[:, xs]
    return relative_errors(a, b)


def relative_errors(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na = np.linalg.norm(a)
    if na == 0:
        raise ValueError("reference field is identically zero")
    return float(np.linalg.norm(a - b) / na), float(np.max(np.abs(a - b)) / np.max(np.abs(a)))


def energy_mismatch(ref: EnergyTrace, other: EnergyTrace, window: tuple[float, float]) -> float:
    """max |E_other / E_ref - 1| on the reference times inside the window."""
    sel = (ref.T >= window[0]) & (ref.T <= window[1])
    if not np.any(sel):
        raise ValueError("empty window")
    eo = np.interp(ref.T[sel], other.T, other.total)
    return float(np.max(np.abs(eo / ref.total[sel] - 1.0)))


def peak_arrival(t: np.ndarray, u: np.ndarray, window: tuple[float, float] | None = None) -> float:
    """Time of the largest |u| in the window, refined by a parabola through the three top samples."""
    t = np.asarray(t, dtype=float)
    u = np.abs(np.asarray(u, dtype=float))
    sel = np.ones(t.size, dtype=bool) if window is None else (t >= window[0]) & (t <= window[1])
    idx = np.flatnonzero(sel)
    if idx.size == 0:
        raise ValueError("empty window")
    i = idx[np.argmax(u[idx])]
    if 0 < i < t.size - 1:
        y0, y1, y2 = u[i - 1], u[i], u[i + 1]
        den = y0 - 2 * y1 + y2
        if den != 0:
            return float(t[i] + 0.5 * (y0 - y2) / den * (t[i + 1] - t[i]))
    return float(t[i])


def dominant_peak_position(x: np.ndarray, u: np.ndarray, window: tuple[float, float] | None = None) -> float:
    """Same parabola-refined argmax, in space."""
    return peak_arrival(x, u, window)


def reflection_ratio(x, V, S, Z: float, X_s: float, margin: float = 10.0) -> float:
    """Energy of waves moving back toward the source over that of waves moving away from it.

    Uses the Riemann split ``S -+ Z V`` on both sides of the source.
    """
    x = np.asarray(x)
    a = np.asarray(S) - Z * np.asarray(V)  # right-moving
    b = np.asarray(S) + Z * np.asarray(V)
    R = x > X_s + margin
    L = x < X_s - margin
    away = np.sum(a[R] ** 2) + np.sum(b[L] ** 2)
    back = np.sum(b[R] ** 2) + np.sum(a[L] ** 2)
    if away == 0:
        raise ValueError("no outgoing wave in the snapshot")
    return float(back / away)


# -- reciprocity ----------------------------------------------------------------------------------


@dataclass
class ReciprocityResult:
    score: float
    T: np.ndarray
    u_ab: np.ndarray  # source at A, received at B
    u_ba: np.ndarray


def asymmetry_score(u1: np.ndarray, u2: np.ndarray) -> float:
    """||u1 - u2|| / rms(||u1||, ||u2||); symmetric in its arguments."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    den = math.sqrt(0.5 * (np.dot(u1, u1) + np.dot(u2, u2)))
    if den == 0:
        raise ValueError("both traces vanish")
    return float(np.linalg.norm(u1 - u2) / den)


def _solver(name: str):
    from . import effective, micro

    table = {
        "micro": micro.run_micro,
        "leading": effective.run_leading,
        "second_order": effective.run_second_order,
        "dissipative": effective.run_dissipative,
    }
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}") from None


def _swap_run(config: ProblemConfig, src: float, rec: float, solver: str, T_end, **kw):
    for X in (src, rec):
        if not 0 < X < config.grid.L:
            raise ConfigError(f"position X={X} outside the domain")
    pulse = config.source
    cfg = config.with_(source=SourcePulse(pulse.f_c, src, pulse.a, pulse.b), receivers=(rec,), snapshot_times=())
    hist = _solver(solver)(cfg, T_end=T_end, **kw)
    return hist.rec_t, hist.receiver(rec)


def reciprocity_check(config: ProblemConfig, source_pos: float, receiver_pos: float, solver: str = "micro",
                      T_end: float | None = None, **kw) -> ReciprocityResult:
    """Swap source and receiver and compare the two received traces."""
    t, u_ab = _swap_run(config, source_pos, receiver_pos, solver, T_end, **kw)
    _, u_ba = _swap_run(config, receiver_pos, source_pos, solver, T_end, **kw)
    return ReciprocityResult(asymmetry_score(u_ab, u_ba), t, u_ab, u_ba)


def reciprocity_noise_floor(config: ProblemConfig, source_pos: float, receiver_pos: float, solver: str = "micro",
                            T_end: float | None = None, refine: int = 2, **kw) -> float:
    """Discretisation noise of a received trace: its change when the grid is refined.

    Both source/receiver orders are measured and the larger value kept.
    """
    g = config.grid
    fine = config.with_(grid=GridSpec(g.L, g.N_X * refine, g.cfl_fraction, g.T_end))
    worst = 0.0
    for s, r in ((source_pos, receiver_pos), (receiver_pos, source_pos)):
        t, u = _swap_run(config, s, r, solver, T_end, **kw)
        tf, uf = _swap_run(fine, s, r, solver, T_end, **kw)
        ui = np.interp(t, tf, uf)
        worst = max(worst, asymmetry_score(u, ui))
    return worst
