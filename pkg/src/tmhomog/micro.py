"""Full-field solver for the bar with time-modulated spring-mass interfaces.

The velocity-stress system is written in the Riemann variables
``a = S - Z V`` (moves right) and ``b = S + Z V`` (moves left), with ``Z = rho c``.
Between special nodes (interfaces and the source point) each variable is
transported by a semi-Lagrangian step with a cubic Lagrange stencil kept
inside the segment; at CFL 1 the step is an exact shift.  Every special node
carries a left and a right slot.  The incoming traces reach the node by
transport, the interface means ``<S>`` and ``<V>`` follow from the jump laws
integrated with the trapezoidal rule (dissipation included implicitly), and
the outgoing traces are rebuilt from the means.

Only uniform bulk media are supported; every interface and the source must
sit on a grid node.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .backend import get_kernels
from .config import ConfigError, ProblemConfig, source_signal
from .history import FieldHistory, Recorder, _EnergyLog


class MicroCFLError(ValueError):
    pass


def interface_nodes(config: ProblemConfig, snap: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Grid indices of all interfaces strictly inside the domain and their cell slot ``l``."""
    g, h = config.grid, config.h
    dX = g.dX
    idx, which = [], []
    n_cells = int(math.ceil(g.L / h)) + 1
    for n in range(n_cells):
        for l, itf in enumerate(config.interfaces):
            X = (n + itf.y_pos) * h
            if not 0.0 < X < g.L - 1e-9 * dX:
                continue
            m = int(round(X / dX))
            if abs(m * dX - X) > 1e-6 * dX:
                if not snap:
                    raise ConfigError(
                        f"interface at X={X:g} is not a grid node (dX={dX:g}); choose N_X so that h*y/dX is an integer"
                    )
            idx.append(m)
            which.append(l)
    order = np.argsort(idx, kind="stable")
    idx = np.asarray(idx, dtype=np.int64)[order]
    which = np.asarray(which, dtype=np.int64)[order]
    if idx.size and np.any(np.diff(idx) < 3):
        raise ConfigError("interfaces closer than three grid cells; refine the grid")
    return idx, which


def _lagrange_weights(xs: np.ndarray, xd: float) -> np.ndarray:
    w = np.ones(4)
    for j in range(4):
        for k in range(4):
            if k != j:
                w[j] *= (xd - xs[k]) / (xs[j] - xs[k])
    return w


@dataclass
class MicroState:
    a: np.ndarray  # slot arrays
    b: np.ndarray
    sigma: np.ndarray  # interface means at special nodes
    w: np.ndarray
    U: np.ndarray  # node displacement
    V: np.ndarray  # node velocity
    n: int = 0


class MicroSolver:
    """Stepper bound to one configuration and time step."""

    def __init__(self, config: ProblemConfig, dt: float | None = None, *, snap: bool = False,
                 backend: str | None = None, with_source: bool = True):
        bulk = config.bulk
        if not bulk.is_homogeneous:
            raise ConfigError("the full-field solver needs a uniform bulk medium")
        self.config = config
        self.rho = float(bulk.rho[0])
        self.E = float(bulk.E[0])
        self.c = math.sqrt(self.E / self.rho)
        self.Z = self.rho * self.c
        g = config.grid
        self.dX = g.dX
        self.N = g.N_X
        self.x = g.x
        self.dt = dt if dt is not None else g.cfl_fraction * self.dX / self.c
        nu = self.c * self.dt / self.dX
        if nu > 1 + 1e-12:
            raise MicroCFLError(f"CFL number {nu:.4f} exceeds 1")
        self.nu = min(nu, 1.0)
        self.kern = get_kernels(backend)

        inodes, which = interface_nodes(config, snap)
        self.with_source = with_source
        src = int(round(config.source.X_s / self.dX)) if with_source else -1
        if with_source and abs(src * self.dX - config.source.X_s) > 1e-6 * self.dX:
            raise ConfigError(f"source X_s={config.source.X_s} is not a grid node")
        special = sorted(set(inodes.tolist()) | ({src} if with_source else set()))
        if len(special) > 1 and np.min(np.diff(special)) < 3:
            raise ConfigError("source too close to an interface; refine the grid")
        if special and (special[0] < 3 or special[-1] > self.N - 3):
            raise ConfigError("special node too close to the boundary")
        self.special = np.asarray(special, dtype=np.int64)
        K = self.special.size
        # interface law index per special node (-1: source only)
        self.law = np.full(K, -1, dtype=np.int64)
        pos = {m: k for k, m in enumerate(special)}
        for m, l in zip(inodes, which):
            self.law[pos[int(m)]] = l
        self.src_k = pos[src] if with_source else -1

        # slot layout
        slot_node = []
        self.L_slot = np.zeros(K, dtype=np.int64)
        self.R_slot = np.zeros(K, dtype=np.int64)
        k = 0
        for m in range(self.N + 1):
            if k < K and m == special[k]:
                self.L_slot[k] = len(slot_node)
                slot_node.append(m)
                self.R_slot[k] = len(slot_node)
                slot_node.append(m)
                k += 1
            else:
                slot_node.append(m)
        self.slot_node = np.asarray(slot_node, dtype=np.int64)
        self.n_slots = self.slot_node.size
        self.node_slot = np.searchsorted(self.slot_node, np.arange(self.N + 1))  # left slot of each node
        seg_lo = np.concatenate(([0], self.R_slot))
        seg_hi = np.concatenate((self.L_slot, [self.n_slots - 1]))
        self._build_stencils(seg_lo, seg_hi)

        w = np.full(self.n_slots, self.dX)
        w[seg_lo] *= 0.5
        w[seg_hi] *= 0.5
        self.quad_w = w
        self._prepare_laws()

    def _build_stencils(self, seg_lo, seg_hi):
        xs = self.slot_node * self.dX
        shift = self.nu * self.dX
        da, ia, wa, db, ib, wb = [], [], [], [], [], []
        for lo, hi in zip(seg_lo, seg_hi):
            if hi - lo < 3:
                raise ConfigError("segment with fewer than four nodes; refine the grid")
            for s in range(lo, hi + 1):
                if s != lo:
                    j0 = min(max(s - 2, lo), hi - 3)
                    st = np.arange(j0, j0 + 4)
                    da.append(s)
                    ia.append(st)
                    wa.append(_lagrange_weights(xs[st], xs[s] - shift))
                if s != hi:
                    j0 = min(max(s - 1, lo), hi - 3)
                    st = np.arange(j0, j0 + 4)
                    db.append(s)
                    ib.append(st)
                    wb.append(_lagrange_weights(xs[st], xs[s] + shift))
        self.dest_a = np.asarray(da, dtype=np.int64)
        self.idx_a = np.ascontiguousarray(ia, dtype=np.int64)
        self.w_a = np.ascontiguousarray(wa)
        self.dest_b = np.asarray(db, dtype=np.int64)
        self.idx_b = np.ascontiguousarray(ib, dtype=np.int64)
        self.w_b = np.ascontiguousarray(wb)
        self._buf_a = np.empty(self.dest_a.size)
        self._buf_b = np.empty(self.dest_b.size)

    def _prepare_laws(self):
        itfs = self.config.interfaces
        self._itf_k = np.flatnonzero(self.law >= 0)
        self._itf_specs = [itfs[l] for l in self.law[self._itf_k]]

    def laws(self, T: float):
        """(C, M, QC, QM) at every special node (zeros at a pure source node)."""
        K = self.special.size
        out = np.zeros((4, K))
        # group by law index: every copy of interface l shares its law
        for l, itf in enumerate(self.config.interfaces):
            sel = self.law == l
            if np.any(sel):
                out[0, sel] = itf.C(T)
                out[1, sel] = itf.M(T)
                out[2, sel] = itf.QC(T)
                out[3, sel] = itf.QM(T)
        return out

    def force(self, T: float) -> np.ndarray:
        F = np.zeros(self.special.size)
        if self.with_source:
            F[self.src_k] = source_signal(self.config.source, T)
        return F

    def initial_state(self) -> MicroState:
        K = self.special.size
        z = np.zeros(self.N + 1)
        st = MicroState(np.zeros(self.n_slots), np.zeros(self.n_slots), np.zeros(K), np.zeros(K), z.copy(), z.copy())
        self._prev = (self.laws(0.0), self.force(0.0))
        return st

    def set_riemann(self, state: MicroState, a_nodes: np.ndarray, b_nodes: np.ndarray) -> None:
        """Load node values of a and b (smooth data, no trace jumps) into the slots."""
        state.a[:] = a_nodes[self.slot_node]
        state.b[:] = b_nodes[self.slot_node]
        state.sigma[:] = 0.5 * (a_nodes[self.special] + b_nodes[self.special])
        state.w[:] = 0.5 * (b_nodes[self.special] - a_nodes[self.special]) / self.Z
        state.V[:] = self.node_fields(state)[0]

    def step(self, state: MicroState) -> MicroState:
        dt, Z = self.dt, self.Z
        T1 = (state.n + 1) * dt
        a_new = np.empty_like(state.a)
        b_new = np.empty_like(state.b)
        self.kern.gather4(state.a, self.idx_a, self.w_a, self._buf_a)
        self.kern.gather4(state.b, self.idx_b, self.w_b, self._buf_b)
        a_new[self.dest_a] = self._buf_a
        b_new[self.dest_b] = self._buf_b

        laws0, F0 = self._prev
        laws1, F1 = self.laws(T1), self.force(T1)
        C0, M0, QC0, QM0 = laws0
        C1, M1, QC1, QM1 = laws1
        am, bp = a_new[self.L_slot], b_new[self.R_slot]
        am0, bp0 = state.a[self.L_slot], state.b[self.R_slot]
        in1, in0 = am + bp, am0 + bp0
        d1, d0 = bp - am, bp0 - am0
        sig0, w0 = state.sigma, state.w

        sig = np.empty_like(sig0)
        w = np.empty_like(w0)
        stiff = C1 > 0
        sig[~stiff] = in1[~stiff] / (2.0 + Z * QC1[~stiff])
        s = stiff
        sig[s] = (C0[s] * sig0[s] + 0.5 * dt * (in1[s] / Z + (in0[s] - 2 * sig0[s]) / Z - QC0[s] * sig0[s])) / (
            C1[s] + dt / Z + 0.5 * dt * QC1[s]
        )
        heavy = (M1 > 0) | (M0 > 0)
        lt = ~heavy
        w[lt] = (d1[lt] + F1[lt]) / (2 * Z + QM1[lt])
        s = heavy
        w[s] = (M0[s] * w0[s] + 0.5 * dt * (d1[s] + F1[s] + d0[s] + F0[s] - 2 * Z * w0[s] - QM0[s] * w0[s])) / (
            M1[s] + dt * Z + 0.5 * dt * QM1[s]
        )
        a_new[self.R_slot] = 2 * sig - 2 * Z * w - am
        b_new[self.L_slot] = 2 * sig + 2 * Z * w - bp
        a_new[0] = b_new[0]
        b_new[-1] = a_new[-1]
        self._prev = (laws1, F1)

        new = MicroState(a_new, b_new, sig, w, state.U, state.V, state.n + 1)
        V1, _ = self.node_fields(new)
        new.U = state.U + 0.5 * dt * (state.V + V1)
        new.V = V1
        return new

    def node_fields(self, state: MicroState) -> tuple[np.ndarray, np.ndarray]:
        """(V, S) at grid nodes; interface nodes carry the means."""
        ns = self.node_slot
        a, b = state.a[ns], state.b[ns]
        V = (b - a) / (2 * self.Z)
        S = 0.5 * (a + b)
        V[self.special] = state.w
        S[self.special] = state.sigma
        return V, S

    def energy(self, state: MicroState, T: float, interface_terms: bool = False) -> tuple[float, float, float]:
        """(kinetic, potential, interface-stored) energies per unit cross-section."""
        a, b = state.a, state.b
        V = (b - a) / (2 * self.Z)
        S = 0.5 * (a + b)
        kin = 0.5 * self.rho * float(np.sum(self.quad_w * V**2))
        pot = 0.5 * float(np.sum(self.quad_w * S**2)) / self.E
        extra = 0.0
        if interface_terms:
            C, M = self._prev[0][0], self._prev[0][1]
            extra = 0.5 * float(np.sum(C * state.sigma**2 + M * state.w**2))
        return kin, pot, extra


def step_micro(solver: MicroSolver, state: MicroState) -> MicroState:
    return solver.step(state)


def integrate_displacement(V: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoidal time integral of a velocity history (time on axis 0), starting from zero."""
    V = np.asarray(V, dtype=float)
    U = np.zeros_like(V)
    if V.shape[0] > 1:
        U[1:] = np.cumsum(0.5 * dt * (V[1:] + V[:-1]), axis=0)
    return U


def run_micro(
    config: ProblemConfig,
    *,
    dt: float | None = None,
    T_end: float | None = None,
    receivers=None,
    snapshot_times=None,
    field_stride: int = 0,
    interface_energy: bool = False,
    snap: bool = False,
    backend: str | None = None,
    initial=None,
    with_source: bool = True,
) -> FieldHistory:
    """Run the full-field model; ``initial=(a_nodes, b_nodes)`` seeds Riemann data."""
    solver = MicroSolver(config, dt, snap=snap, backend=backend, with_source=with_source)
    T_end = config.grid.T_end if T_end is None else T_end
    n_steps = int(math.ceil(T_end / solver.dt - 1e-9))
    rec = Recorder(solver.x, solver.dt, n_steps, config.receivers if receivers is None else receivers,
                   config.snapshot_times if snapshot_times is None else snapshot_times, field_stride)
    st = solver.initial_state()
    if initial is not None:
        solver.set_riemann(st, *initial)
    energy = _EnergyLog()

    def log(state, T):
        kin, pot, extra = solver.energy(state, T, interface_energy)
        power = 0.0
        if with_source:
            power = float(solver.force(T)[solver.src_k] * state.w[solver.src_k])
        energy.add(T, kin, pot, extra, power)

    V, S = solver.node_fields(st)
    rec(0, st.U, V, S)
    log(st, 0.0)
    for n in range(n_steps):
        st = solver.step(st)
        T = (n + 1) * solver.dt
        V, S = solver.node_fields(st)
        rec(n + 1, st.U, V, S)
        log(st, T)
    if not np.all(np.isfinite(st.U)):
        warnings.warn("non-finite values in the full-field run", RuntimeWarning, stacklevel=2)
    meta = {"dt": solver.dt, "cfl": solver.nu, "n_steps": n_steps, "n_special": int(solver.special.size)}
    return rec.history("micro", energy.trace(), meta)
