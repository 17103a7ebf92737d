"""Time steppers for the homogenised models.

Three models share the grid and the point source of the problem:

* leading order, displacement form, explicit three-level scheme;
* leading order with interface dissipation, velocity-stress form, Strang
  splitting of relaxation and propagation;
* second order in the uniform-bulk massless-interface case, implicit in space
  through a constant-coefficient tridiagonal solve per step.

All use homogeneous Dirichlet conditions on the displacement.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .backend import get_kernels
from .cell import EffectiveCoefficients, effective_coefficients, effective_dissipative_dimensional, poly_at_time
from .config import ProblemConfig, modulation_period, source_signal
from .history import FieldHistory, Recorder, _EnergyLog


class CFLError(ValueError):
    """Time step too large for the scheme's stability bound."""


class EffectiveModelError(ValueError):
    """Effective coefficients outside the range where the model makes sense."""


def _period_grid(config: ProblemConfig, n: int = 2048) -> np.ndarray:
    tau = modulation_period(config)
    return np.linspace(0.0, tau, n, endpoint=False) if tau else np.zeros(1)


def source_node(config: ProblemConfig) -> int:
    dX = config.grid.dX
    i = int(round(config.source.X_s / dX))
    if abs(i * dX - config.source.X_s) > 1e-9 * dX:
        raise ValueError(f"source X_s={config.source.X_s} is not a grid node (dX={dX})")
    return i


def _n_steps(T_end, dt):
    return int(math.ceil(T_end / dt - 1e-9))


# -- leading order -----------------------------------------------------------------


@dataclass
class LeadingState:
    U: np.ndarray
    U_prev: np.ndarray
    n: int = 0


def leading_max_speed(config: ProblemConfig) -> float:
    T = _period_grid(config)
    return float(np.max(np.sqrt(config.E0(T) / config.rho0(T))))


def leading_dt(config: ProblemConfig, cfl: float | None = None) -> float:
    cfl = config.grid.cfl_fraction if cfl is None else cfl
    return cfl * config.grid.dX / leading_max_speed(config)


def step_leading(
    state: LeadingState,
    T_n: float,
    dT: float,
    dX: float,
    rho0: Callable,
    E0: Callable,
    force: np.ndarray | None = None,
    kernels=None,
) -> np.ndarray:
    """One step of the three-level scheme; returns U at T_n + dT (state is not modified)."""
    k = kernels or get_kernels()
    rp = float(rho0(T_n + 0.5 * dT))
    out = np.empty_like(state.U)
    k.leading_step(state.U, state.U_prev, out, float(rho0(T_n - 0.5 * dT)), rp, (dT / dX) ** 2 * float(E0(T_n)))
    if force is not None:
        out[1:-1] += dT**2 * force[1:-1] / rp
    return out


def _check_cfl(speed_max, dt, dX, what):
    nu = speed_max * dt / dX
    if nu > 1 + 1e-12:
        raise CFLError(f"{what}: CFL number {nu:.4f} exceeds 1")
    return nu


def run_leading(
    config: ProblemConfig,
    *,
    dt: float | None = None,
    T_end: float | None = None,
    receivers=None,
    snapshot_times=None,
    field_stride: int = 0,
    forcing: Callable | None = None,
    initial: tuple[np.ndarray, np.ndarray] | None = None,
    rho0: Callable | None = None,
    E0: Callable | None = None,
    backend: str | None = None,
) -> FieldHistory:
    """Leading-order displacement run.

    ``forcing(x, T)`` replaces the point source by a distributed body force;
    ``initial`` gives (U^0, U^1).  ``rho0``/``E0`` override the closed-form laws.
    """
    g = config.grid
    x, dX = g.x, g.dX
    rho0 = rho0 or config.rho0
    E0 = E0 or config.E0
    Ts = _period_grid(config)
    cmax = float(np.max(np.sqrt(E0(Ts) / rho0(Ts))))
    dt = dt or g.cfl_fraction * dX / cmax
    _check_cfl(cmax, dt, dX, "leading-order scheme")
    T_end = g.T_end if T_end is None else T_end
    n_steps = _n_steps(T_end, dt)
    kern = get_kernels(backend)
    rec = Recorder(x, dt, n_steps, config.receivers if receivers is None else receivers,
                   config.snapshot_times if snapshot_times is None else snapshot_times, field_stride)
    energy = _EnergyLog()
    i_s = source_node(config) if forcing is None else None
    if initial is None:
        st = LeadingState(np.zeros(x.size), np.zeros(x.size))
        n0 = 0
    else:
        U0, U1 = (np.asarray(a, dtype=float).copy() for a in initial)
        rec(0, U0)
        st = LeadingState(U1, U0, 1)
        n0 = 1
    rec(n0, st.U)
    force = np.zeros(x.size)
    for n in range(n0, n_steps):
        T = n * dt
        if forcing is not None:
            force = forcing(x, T)
        else:
            force[i_s] = source_signal(config.source, T) / dX
        U_new = step_leading(st, T, dt, dX, rho0, E0, force, kern)
        Th = T + 0.5 * dt
        du = (U_new - st.U) / dt
        kin = 0.5 * float(rho0(Th)) * np.sum(du**2) * dX
        pot = 0.5 * 0.5 * (float(E0(T)) + float(E0(T + dt))) * np.sum(np.diff(st.U) * np.diff(U_new)) / dX
        power = float(np.sum(force * (U_new - st.U_prev))) / (2 * dt) * dX
        energy.add(Th, kin, pot, 0.0, power)
        st = LeadingState(U_new, st.U, n + 1)
        rec(n + 1, st.U)
    meta = {"dt": dt, "cfl": cmax * dt / dX, "n_steps": n_steps}
    return rec.history("leading", energy.trace(), meta)


# -- second order (uniform bulk, massless interfaces) ------------------------------------------------


@dataclass
class SecondOrderModel:
    """Coefficient laws of the dispersive second-order equation in dimensional time."""

    rho: float
    h: float
    E0: Callable
    B1: Callable
    B2: Callable
    dB2: Callable
    period: float
    dE0: Callable | None = None
    dB1: Callable | None = None

    @classmethod
    def from_config(cls, config: ProblemConfig, coeffs: EffectiveCoefficients | None = None,
                    n_time_samples: int = 256) -> "SecondOrderModel":
        coeffs = coeffs or effective_coefficients(config, n_time_samples)
        if not coeffs.is_limit_case:
            raise EffectiveModelError("second-order scheme needs uniform bulk and massless interfaces")
        s1, s2 = coeffs.series("B1"), coeffs.series("B2")
        h = config.h

        def dE0(T):
            dinv = sum(itf.C.deriv(T) for itf in config.interfaces) / h
            return -config.E0(T) ** 2 * dinv

        return cls(
            rho=float(config.bulk.rho[0]), h=h, E0=config.E0,
            B1=s1, B2=s2, dB2=lambda T: s2(T, 1), period=coeffs.period_T,
            dE0=dE0, dB1=lambda T: s1(T, 1),
        )

    def speed2(self, T):
        return self.E0(T) / self.rho + self.h**2 * self.B1(T)

    def dspeed2(self, T):
        if self.dE0 is None or self.dB1 is None:
            raise EffectiveModelError("model lacks the time derivatives of E0 and B1")
        return self.dE0(T) / self.rho + self.h**2 * self.dB1(T)

    def check(self, n: int = 2048) -> float:
        T = np.linspace(0, self.period, n, endpoint=False) if self.period else np.zeros(1)
        s2 = self.speed2(T)
        if np.any(s2 <= 0):
            raise EffectiveModelError(
                f"E0/rho + h^2 B1 reaches {s2.min():.3e} <= 0: modulation too fast or cell too large"
            )
        return float(np.sqrt(s2.max()))


@dataclass
class SecondOrderState:
    U: np.ndarray
    U_prev: np.ndarray
    n: int = 0
    rhs: np.ndarray | None = None
    work: np.ndarray | None = None


def second_order_matrix_coeffs(model: SecondOrderModel, T_n: float, dT: float, dX: float):
    """(A^2, B, C, P, Q) of the implicit scheme at T_n."""
    A2 = model.speed2(T_n) * (dT / dX) ** 2
    B = model.h**2 * model.B2(T_n) / dX**2
    C = model.h**2 * model.dB2(T_n) * dT / dX**2
    return float(A2), float(B), float(C), float(1 + 2 * B + C), float(-(B + 0.5 * C))


def step_second_order(
    state: SecondOrderState,
    T_n: float,
    dT: float,
    dX: float,
    model: SecondOrderModel,
    force: np.ndarray | None = None,
    kernels=None,
) -> np.ndarray:
    k = kernels or get_kernels()
    if state.rhs is None:
        state.rhs = np.empty_like(state.U)
        state.work = np.empty_like(state.U)
    A2, B, C, P, Q = second_order_matrix_coeffs(model, T_n, dT, dX)
    if abs(P) < 2 * abs(Q):
        warnings.warn(f"tridiagonal system not diagonally dominant at T={T_n:.4g}", stacklevel=2)
    k.second_order_rhs(state.U, state.U_prev, state.rhs, A2, B, C)
    if force is not None:
        state.rhs[1:-1] += dT**2 * force[1:-1] / model.rho
    out = np.empty_like(state.U)
    k.thomas_const(P, Q, state.rhs, out, state.work)
    return out


def second_order_dt(config: ProblemConfig, model: SecondOrderModel, cfl: float | None = None) -> float:
    cfl = config.grid.cfl_fraction if cfl is None else cfl
    return cfl * config.grid.dX / model.check()


def run_second_order(
    config: ProblemConfig,
    *,
    model: SecondOrderModel | None = None,
    coeffs: EffectiveCoefficients | None = None,
    dt: float | None = None,
    T_end: float | None = None,
    receivers=None,
    snapshot_times=None,
    field_stride: int = 0,
    forcing: Callable | None = None,
    initial: tuple[np.ndarray, np.ndarray] | None = None,
    backend: str | None = None,
) -> FieldHistory:
    g = config.grid
    x, dX = g.x, g.dX
    model = model or SecondOrderModel.from_config(config, coeffs)
    amax = model.check()
    dt = dt or g.cfl_fraction * dX / amax
    _check_cfl(amax, dt, dX, "second-order scheme")
    T_end = g.T_end if T_end is None else T_end
    n_steps = _n_steps(T_end, dt)
    kern = get_kernels(backend)
    rec = Recorder(x, dt, n_steps, config.receivers if receivers is None else receivers,
                   config.snapshot_times if snapshot_times is None else snapshot_times, field_stride)
    energy = _EnergyLog()
    i_s = source_node(config) if forcing is None else None
    if initial is None:
        st = SecondOrderState(np.zeros(x.size), np.zeros(x.size))
        n0 = 0
    else:
        U0, U1 = (np.asarray(a, dtype=float).copy() for a in initial)
        rec(0, U0)
        st = SecondOrderState(U1, U0, 1)
        n0 = 1
    rec(n0, st.U)
    force = np.zeros(x.size)
    rho, h = model.rho, model.h
    for n in range(n0, n_steps):
        T = n * dt
        if forcing is not None:
            force = forcing(x, T)
        else:
            force[i_s] = source_signal(config.source, T) / dX
        U_new = step_second_order(st, T, dt, dX, model, force, kern)
        Th = T + 0.5 * dt
        du = U_new - st.U
        kin = 0.5 * rho * np.sum(du**2) / dt**2 * dX
        pot = 0.5 * rho * float(model.speed2(Th)) * np.sum(np.diff(st.U) * np.diff(U_new)) / dX
        extra = 0.5 * rho * h**2 * float(model.B2(Th)) * np.sum(np.diff(du) ** 2) / (dX * dt**2)
        power = float(np.sum(force * (U_new - st.U_prev))) / (2 * dt) * dX
        energy.add(Th, kin, pot, extra, power)
        st = SecondOrderState(U_new, st.U, n + 1, st.rhs, st.work)
        rec(n + 1, st.U)
    meta = {"dt": dt, "cfl": amax * dt / dX, "n_steps": n_steps}
    return rec.history("second_order", energy.trace(), meta)


# -- leading order with dissipation (velocity-stress, Strang splitting) -------------------------------------


@dataclass
class DissipativeState:
    V: np.ndarray
    S: np.ndarray
    n: int = 0


class DissipativeModel:
    def __init__(self, config: ProblemConfig):
        self.config = config
        self.rho0 = config.rho0
        self.E0 = config.E0

    def rates(self, T):
        """Diagonal of the relaxation matrix: (Gamma_M0 / rho0, E0 * Gamma_C0)."""
        GM, GC = effective_dissipative_dimensional(self.config, T)
        return GM / self.rho0(T), self.E0(T) * GC


def relax_half_step(state: DissipativeState, model: DissipativeModel, T: float, tau: float,
                    force: np.ndarray | None = None) -> DissipativeState:
    """Exact solution of dU/dT = S U + F with S, F frozen at T over a duration tau."""
    sv, ss = model.rates(T)
    ev, es = math.exp(float(sv) * tau), math.exp(float(ss) * tau)
    V = state.V * ev
    if force is not None:
        fac = tau if abs(sv) * tau < 1e-12 else (ev - 1.0) / float(sv)
        V = V + fac * force / float(model.rho0(T))
    return DissipativeState(V, state.S * es, state.n)


def propagate(state: DissipativeState, model: DissipativeModel, T: float, dT: float, dX: float) -> DissipativeState:
    """Lax-Wendroff step for V_T = S_X / rho0, S_T = E0 V_X with midpoint coefficients."""
    Tm = T + 0.5 * dT
    rho, E = float(model.rho0(Tm)), float(model.E0(Tm))
    lam = dT / dX
    # ghosts: V odd and S even about each clamped end
    Vg = np.concatenate(([-state.V[1]], state.V, [-state.V[-2]]))
    Sg = np.concatenate(([state.S[1]], state.S, [state.S[-2]]))
    dV = 0.5 * (Vg[2:] - Vg[:-2])
    dS = 0.5 * (Sg[2:] - Sg[:-2])
    lV = Vg[2:] - 2 * Vg[1:-1] + Vg[:-2]
    lS = Sg[2:] - 2 * Sg[1:-1] + Sg[:-2]
    c2 = E / rho * lam**2
    V = state.V + lam / rho * dS + 0.5 * c2 * lV
    S = state.S + lam * E * dV + 0.5 * c2 * lS
    V[0] = V[-1] = 0.0
    return DissipativeState(V, S, state.n)


def step_dissipative(state: DissipativeState, model: DissipativeModel, T_n: float, dT: float, dX: float,
                     force_n: np.ndarray | None = None, force_np1: np.ndarray | None = None) -> DissipativeState:
    s1 = relax_half_step(state, model, T_n, 0.5 * dT, force_n)
    s2 = propagate(s1, model, T_n, dT, dX)
    s3 = relax_half_step(s2, model, T_n + dT, 0.5 * dT, force_np1)
    s3.n = state.n + 1
    return s3


def run_dissipative(
    config: ProblemConfig,
    *,
    dt: float | None = None,
    T_end: float | None = None,
    receivers=None,
    snapshot_times=None,
    field_stride: int = 0,
) -> FieldHistory:
    g = config.grid
    x, dX = g.x, g.dX
    model = DissipativeModel(config)
    cmax = leading_max_speed(config)
    dt = dt or g.cfl_fraction * dX / cmax
    _check_cfl(cmax, dt, dX, "propagation sub-step")
    T_end = g.T_end if T_end is None else T_end
    n_steps = _n_steps(T_end, dt)
    rec = Recorder(x, dt, n_steps, config.receivers if receivers is None else receivers,
                   config.snapshot_times if snapshot_times is None else snapshot_times, field_stride)
    energy = _EnergyLog()
    i_s = source_node(config)
    st = DissipativeState(np.zeros(x.size), np.zeros(x.size))
    U = np.zeros(x.size)
    rec(0, U, st.V, st.S)
    f_n = np.zeros(x.size)
    f_np1 = np.zeros(x.size)

    def bulk_energy(T, V, S):
        w = np.full(x.size, dX)
        w[[0, -1]] *= 0.5
        return 0.5 * float(model.rho0(T)) * np.sum(w * V**2), 0.5 * np.sum(w * S**2) / float(model.E0(T))

    energy.add(0.0, *bulk_energy(0.0, st.V, st.S))
    for n in range(n_steps):
        T = n * dt
        f_n[i_s] = source_signal(config.source, T) / dX
        f_np1[i_s] = source_signal(config.source, T + dt) / dX
        V_old = st.V
        st = step_dissipative(st, model, T, dt, dX, f_n, f_np1)
        U = U + 0.5 * dt * (V_old + st.V)
        kin, pot = bulk_energy(T + dt, st.V, st.S)
        energy.add(T + dt, kin, pot, 0.0, float(f_np1[i_s] * st.V[i_s]) * dX)
        rec(n + 1, U, st.V, st.S)
    meta = {"dt": dt, "cfl": cmax * dt / dX, "n_steps": n_steps}
    return rec.history("dissipative", energy.trace(), meta)


# -- micro-field reconstruction -------------------------------------------------------------------------------------


def reconstruct_microfield(hist: FieldHistory, coeffs: EffectiveCoefficients, h: float) -> np.ndarray:
    """First-order field U + h P1({X/h}, T) dU/dX for every stored field of ``hist``."""
    fam = coeffs.family
    if fam is None:
        raise ValueError("coefficients carry no corrector family")
    if hist.U.shape[0] == 0:
        raise ValueError("history holds no stored fields")
    tf = coeffs.frame.time_factor
    P1 = poly_at_time(fam["P1"].P, fam.period, hist.field_t * tf)
    y = np.mod(hist.x / h, 1.0)
    P1_vals = P1(y)  # (n_fields, nx)
    dU = np.gradient(hist.U, hist.dX, axis=1)
    return hist.U + h * P1_vals * dU
