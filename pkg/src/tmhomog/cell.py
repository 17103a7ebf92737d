"""Unit-cell correctors and the effective coefficients built from them.

Every corrector solves a problem of the same shape on the periodic cell:

    flux = beta * (dP/dy + r),   d(flux)/dy = -g          inside segments
    [P]_l = c_l * <<flux>>_l + d_l,   [flux]_l = j_l        at interfaces
    <P> = 0

With piecewise-constant beta and piecewise-polynomial r, g the solution is a
piecewise polynomial, obtained here by exact integration.  Bulk breakpoints
enter as interfaces with c = d = j = 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import DimensionlessProblem, ProblemConfig, ScalingFrame, default_frame, nondimensionalise
from .piecewise import PiecewisePoly


class SolvabilityError(ValueError):
    """Flux budget of a cell problem is inconsistent with periodicity."""


class LimitCaseError(ValueError):
    """Quantity only defined for uniform bulk and massless interfaces."""


# -- geometry ----------------------------------------------------------------


@dataclass(frozen=True)
class CellGeometry:
    nodes: np.ndarray  # segment starts, interfaces and bulk breakpoints merged
    iface_idx: np.ndarray  # node index of each interface
    alpha: np.ndarray  # per segment
    beta: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return np.diff(np.append(self.nodes, 1.0))

    @property
    def n_interfaces(self) -> int:
        return self.iface_idx.size

    @classmethod
    def from_problem(cls, problem: DimensionlessProblem) -> "CellGeometry":
        return cls.build(problem.positions, problem.breakpoints, problem.alpha, problem.beta)

    @classmethod
    def build(cls, positions, breakpoints=(0.0,), alpha=(1.0,), beta=(1.0,)) -> "CellGeometry":
        positions = np.asarray(positions, dtype=float)
        bps = np.asarray(breakpoints, dtype=float)
        if positions.size and np.any(np.diff(positions) <= 0):
            raise ValueError("interface positions coincide or are unsorted")
        nodes = np.union1d(np.union1d(positions, bps), [0.0])
        seg_bulk = np.searchsorted(bps, nodes, side="right") - 1
        return cls(
            nodes=nodes,
            iface_idx=np.searchsorted(nodes, positions),
            alpha=np.asarray(alpha, dtype=float)[seg_bulk],
            beta=np.asarray(beta, dtype=float)[seg_bulk],
        )

    def to_nodes(self, values) -> np.ndarray:
        """Scatter per-interface data (..., N) onto all nodes (..., K)."""
        values = np.asarray(values, dtype=float)
        out = np.zeros(values.shape[:-1] + (self.nodes.size,))
        out[..., self.iface_idx] = values
        return out

    def at_interfaces(self, node_values) -> np.ndarray:
        return np.asarray(node_values)[..., self.iface_idx]

    def const(self, values) -> PiecewisePoly:
        return PiecewisePoly.constant(self.nodes, values)


@dataclass
class CellProblemSpec:
    geometry: CellGeometry
    c: np.ndarray  # (..., N) compliance coupling of the displacement jump
    r: PiecewisePoly | None = None
    g: PiecewisePoly | None = None
    j: np.ndarray | None = None
    d: np.ndarray | None = None


@dataclass
class CellSolution:
    P: PiecewisePoly
    flux: PiecewisePoly
    defect: np.ndarray  # flux budget mismatch removed when projecting (0 otherwise)


def solve_cell_problem(spec: CellProblemSpec, *, project: bool = False, tol: float = 1e-9) -> CellSolution:
    """Exact piecewise-polynomial solution of one (batched) cell problem.

    With ``project=True`` an inconsistent flux budget is absorbed by a uniform
    bulk source and reported in ``defect`` instead of raising.
    """
    geo = spec.geometry
    nodes, w = geo.nodes, geo.widths
    c = geo.to_nodes(spec.c)
    j = geo.to_nodes(spec.j) if spec.j is not None else np.zeros_like(c)
    d = geo.to_nodes(spec.d) if spec.d is not None else np.zeros_like(c)
    g = spec.g if spec.g is not None else PiecewisePoly.zeros(nodes)
    r = spec.r if spec.r is not None else PiecewisePoly.zeros(nodes)

    G = g.antideriv()
    Gw = G.end_values()
    defect = j.sum(-1) - Gw.sum(-1)
    scale = np.maximum(1.0, np.abs(j).sum(-1) + np.abs(Gw).sum(-1))
    defect = np.broadcast_to(defect, np.broadcast_shapes(defect.shape, c.shape[:-1])).copy()
    if np.any(np.abs(defect) > tol * scale):
        if not project:
            raise SolvabilityError(
                f"cell problem not solvable: flux jumps minus bulk source = {np.max(np.abs(defect)):.3e}"
            )
        g = g + defect[..., None]
        G = g.antideriv()
        Gw = G.end_values()
    else:
        defect[...] = 0.0

    # flux entering segment k (just right of node k), up to the unknown constant F0
    steps = j[..., 1:] - Gw[..., :-1]
    H = np.concatenate([np.zeros(steps.shape[:-1] + (1,)), np.cumsum(steps, axis=-1)], axis=-1)
    qH = H - G
    inv_beta = 1.0 / geo.beta
    Phi = (qH * inv_beta - r).antideriv()

    # periodicity of P fixes F0
    num = (c * (H - 0.5 * j)).sum(-1) + d.sum(-1) + Phi.end_values().sum(-1)
    den = c.sum(-1) + np.sum(w * inv_beta)
    F0 = -num / den

    q = qH + F0[..., None]
    coef = Phi._padded(max(Phi.degree, 1)).copy()
    coef = np.array(np.broadcast_to(coef, np.broadcast_shapes(coef.shape[:-1], F0.shape + (1,)) + coef.shape[-1:]))
    coef[..., 1] += F0[..., None] * inv_beta
    Phi = PiecewisePoly(nodes, coef)

    qmean = F0[..., None] + H - 0.5 * j
    incr = Phi.end_values()[..., :-1] + (c * qmean + d)[..., 1:]
    A = np.concatenate([np.zeros(incr.shape[:-1] + (1,)), np.cumsum(incr, axis=-1)], axis=-1)
    P = Phi + A
    P = P - P.mean()[..., None]
    return CellSolution(P=P, flux=q, defect=defect)


# -- periodic time differentiation -----------------------------------------------


def periodic_derivative(values, period: float, order: int = 1, method: str = "spectral", axis: int = 0):
    """Derivative of uniformly sampled periodic data along ``axis``.

    ``spectral`` uses the FFT; ``fd`` uses fourth-order centred differences.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    if order == 0:
        return values.copy()
    if n == 1 or period == 0:
        return np.zeros_like(values)
    if method == "spectral":
        F = np.fft.rfft(values, axis=axis)
        k = 2 * math.pi * np.fft.rfftfreq(n, d=period / n)
        mult = (1j * k) ** order
        if order % 2 == 1 and n % 2 == 0:
            mult[-1] = 0.0
        shape = [1] * values.ndim
        shape[axis] = -1
        return np.fft.irfft(F * mult.reshape(shape), n=n, axis=axis)
    if method == "fd":
        if n < 5:
            raise ValueError("fourth-order differences need at least 5 samples")
        dt = period / n

        def shift(a, k):
            return np.roll(a, -k, axis=axis)

        out = values
        for _ in range(order // 2):
            out = (-shift(out, 2) + 16 * shift(out, 1) - 30 * out + 16 * shift(out, -1) - shift(out, -2)) / (12 * dt**2)
        if order % 2:
            out = (-shift(out, 2) + 8 * shift(out, 1) - 8 * shift(out, -1) + shift(out, -2)) / (12 * dt)
        return out
    raise ValueError(f"unknown differentiation method {method!r}")


class PeriodicSeries:
    """Trigonometric interpolant of samples taken on a uniform periodic grid."""

    def __init__(self, samples, period: float):
        samples = np.asarray(samples, dtype=float)
        self.period = float(period)
        self.n = samples.size
        if self.n == 1 or self.period == 0:
            self.mean = float(samples.mean())
            self.coef = np.zeros(0, dtype=complex)
            self.freqs = np.zeros(0)
            return
        F = np.fft.rfft(samples) / self.n
        self.mean = float(F[0].real)
        c = 2 * F[1:]
        if self.n % 2 == 0:
            c[-1] *= 0.5
        keep = np.abs(c) > 1e-15 * max(1.0, np.abs(samples).max())
        self.coef = c[keep]
        self.freqs = 2 * math.pi * np.arange(1, c.size + 1)[keep] / self.period

    def __call__(self, T, order: int = 0):
        T = np.asarray(T, dtype=float)
        base = np.full(T.shape, self.mean if order == 0 else 0.0)
        if self.coef.size == 0:
            return base
        ph = np.exp(1j * np.multiply.outer(T, self.freqs))
        return base + np.real(ph @ (self.coef * (1j * self.freqs) ** order))


# -- correctors over one modulation period -----------------------------------------------


@dataclass
class Corrector:
    name: str
    P: PiecewisePoly  # batch axis = time samples
    flux: PiecewisePoly
    dt: PiecewisePoly | None = None
    dtt: PiecewisePoly | None = None
    defect: np.ndarray | None = None


def poly_at_time(poly: PiecewisePoly, period: float, t) -> PiecewisePoly:
    """Trigonometric interpolation in time of a corrector sampled on the periodic grid."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n = poly.coef.shape[0]
    if n == 1 or period == 0:
        return poly.with_coef(np.broadcast_to(poly.coef[0], t.shape + poly.coef.shape[1:]).copy())
    F = np.fft.rfft(poly.coef, axis=0) / n
    w = np.full(F.shape[0], 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    om = 2 * math.pi * np.arange(F.shape[0]) / period
    ph = np.exp(1j * np.multiply.outer(t, om)) * w
    return poly.with_coef(np.real(np.tensordot(ph, F, axes=(1, 0))))


@dataclass
class InterfaceSeries:
    """Scaled interface laws sampled on the corrector time grid, shape (n_t, N)."""

    c: np.ndarray
    dc: np.ndarray
    ddc: np.ndarray
    m: np.ndarray
    dm: np.ndarray
    ddm: np.ndarray
    qc: np.ndarray
    qm: np.ndarray


@dataclass
class CorrectorFamily:
    problem: DimensionlessProblem
    geometry: CellGeometry
    t: np.ndarray
    period: float
    laws: InterfaceSeries
    alpha0: np.ndarray
    dalpha0: np.ndarray
    beta0: np.ndarray
    correctors: dict[str, Corrector] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Corrector:
        return self.correctors[name]

    def iface_means(self, poly: PiecewisePoly) -> np.ndarray:
        return self.geometry.at_interfaces(poly.node_means())

    @property
    def is_limit_case(self) -> bool:
        geo = self.geometry
        return bool(
            np.allclose(geo.alpha, 1.0, rtol=0, atol=1e-14)
            and np.allclose(geo.beta, 1.0, rtol=0, atol=1e-14)
            and not np.any(self.laws.m)
        )


def _sample_laws(problem: DimensionlessProblem, t: np.ndarray) -> InterfaceSeries:
    def grab(attr, order):
        return np.stack([getattr(i, attr).deriv(t, order) for i in problem.interfaces], axis=-1) \
            if problem.interfaces else np.zeros((t.size, 0))

    return InterfaceSeries(
        c=grab("c", 0), dc=grab("c", 1), ddc=grab("c", 2),
        m=grab("m", 0), dm=grab("m", 1), ddm=grab("m", 2),
        qc=grab("qc", 0), qm=grab("qm", 0),
    )


def effective_leading(problem: DimensionlessProblem, t) -> tuple[np.ndarray, np.ndarray]:
    """Leading-order effective density and rigidity ratios at times ``t``."""
    t = np.asarray(t, dtype=float)
    a0 = problem.mean_alpha() + sum(i.m(t) for i in problem.interfaces) + 0.0 * t
    inv = problem.mean_inv_beta() + sum(i.c(t) for i in problem.interfaces) + 0.0 * t
    return a0, 1.0 / inv


def effective_dissipative(problem: DimensionlessProblem, t) -> tuple[np.ndarray, np.ndarray]:
    """Relaxation rates (gamma_m0, gamma_c0) of the velocity-stress leading-order model."""
    t = np.asarray(t, dtype=float)
    _, b0 = effective_leading(problem, t)
    gm = sum(i.qm(t) for i in problem.interfaces) + 0.0 * t
    gc = -sum(i.c.deriv(t) + i.qc(t) for i in problem.interfaces) * b0
    return gm, gc + 0.0 * t


def effective_dissipative_dimensional(config: ProblemConfig, T) -> tuple[np.ndarray, np.ndarray]:
    """Dimensional relaxation coefficients (Gamma_M0, Gamma_C0)."""
    T = np.asarray(T, dtype=float)
    GM = -sum(i.M.deriv(T) + i.QM(T) for i in config.interfaces) / config.h + 0.0 * T
    GC = -sum(i.C.deriv(T) + i.QC(T) for i in config.interfaces) / config.h + 0.0 * T
    return GM, GC


def _time_grid(problem: DimensionlessProblem, n_time_samples: int) -> tuple[np.ndarray, float]:
    period = problem.period()
    if period == 0:
        return np.zeros(1), 0.0
    return np.arange(n_time_samples) * period / n_time_samples, period


def corrector_family(
    problem: DimensionlessProblem,
    n_time_samples: int = 256,
    method: str = "spectral",
    orders: int = 8,
) -> CorrectorFamily:
    """Correctors P1..P``orders`` (and Q) sampled over one modulation period."""
    t, period = _time_grid(problem, n_time_samples)
    geo = CellGeometry.from_problem(problem)
    laws = _sample_laws(problem, t)
    alpha0, beta0 = effective_leading(problem, t)
    dalpha0 = laws.dm.sum(-1) + 0.0 * t
    fam = CorrectorFamily(problem, geo, t, period, laws, alpha0, dalpha0, beta0)

    def ddt(poly, order):
        return poly.with_coef(periodic_derivative(poly.coef, period, order, method))

    def add(name, spec, project=False, derivs=True):
        sol = solve_cell_problem(spec, project=project)
        cor = Corrector(name, sol.P, sol.flux, defect=sol.defect)
        if derivs:
            cor.dt = ddt(sol.P, 1)
            cor.dtt = ddt(sol.P, 2)
        fam.correctors[name] = cor
        return cor

    c = laws.c
    P1 = add("P1", CellProblemSpec(geo, c, r=geo.const(np.ones(geo.nodes.size))))
    P1m = fam.iface_means(P1.P)
    if orders >= 2:
        add("P2", CellProblemSpec(geo, c, r=P1.P))
    if orders >= 3:
        add("P3", CellProblemSpec(geo, c, g=geo.const(alpha0[:, None] - geo.alpha), j=laws.m))
    if orders >= 4:
        add("P4", CellProblemSpec(geo, c, g=geo.const(np.broadcast_to(dalpha0[:, None], (t.size, geo.nodes.size))), j=laws.dm))
    if orders >= 5:
        add("P5", CellProblemSpec(geo, c, r=fam["P2"].P), derivs=False)
    if orders >= 6:
        P3 = fam["P3"]
        add("P6", CellProblemSpec(geo, c, r=P3.P, g=P3.flux - P1.P * geo.alpha, j=laws.m * P1m),
            derivs=False)
    if orders >= 7:
        # these flux data are only budget-consistent in special geometries
        P4 = fam["P4"]
        g7 = P4.flux - P1.dt * (2 * geo.alpha)
        j7 = laws.dm * P1m + 2 * laws.m * fam.iface_means(P1.dt)
        add("P7", CellProblemSpec(geo, c, r=P4.P, g=g7, j=j7), project=True, derivs=False)
    if orders >= 8:
        g8 = -(P1.dtt * geo.alpha)
        j8 = laws.dm * fam.iface_means(P1.dt) + laws.m * fam.iface_means(P1.dtt)
        add("P8", CellProblemSpec(geo, c, g=g8, j=j8), project=True, derivs=False)
    add("Q", CellProblemSpec(geo, c, d=laws.dc + laws.qc), derivs=False)
    for name in ("P7", "P8"):
        if name in fam.correctors:
            dfc = fam[name].defect
            if np.max(np.abs(dfc)) > 1e-8:
                warnings.warn(
                    f"{name}: flux budget off by up to {np.max(np.abs(dfc)):.2e}; removed by a uniform "
                    "bulk source (interface-mass and compliance-rate terms do not balance for this cell)",
                    stacklevel=2,
                )
    return fam


def p1_time_derivative_exact(fam: CorrectorFamily) -> PiecewisePoly:
    """d/dt P1 from its own cell problem (differentiated jump law); oracle for the sampled channel."""
    geo, laws = fam.geometry, fam.laws
    q1 = fam["P1"].flux
    d = laws.dc * fam.iface_means(q1)
    return solve_cell_problem(CellProblemSpec(geo, laws.c, d=d)).P


# -- coefficients -----------------------------------------------------------------------------


def second_order_coeffs(fam: CorrectorFamily) -> dict[str, np.ndarray]:
    """The seven coefficients of the second-order forcing, keyed 'A'..'G'."""
    need = ("P2", "P3", "P4", "P6", "P7", "P8")
    missing = [n for n in need if n not in fam.correctors]
    if missing:
        raise ValueError(f"corrector family lacks {missing}")
    a = fam.geometry.alpha
    m, dm = fam.laws.m, fam.laws.dm
    P2, P3, P4 = fam["P2"], fam["P3"], fam["P4"]
    mean = lambda p: p.mean()  # noqa: E731
    im = fam.iface_means

    def isum(weights, poly):
        return np.sum(weights * im(poly), axis=-1)

    out = {
        "A": mean(fam["P6"].flux) - mean(P2.P * a) - isum(m, P2.P),
        "B": -mean(P3.P * a) - isum(m, P3.P),
        "C": mean(fam["P7"].flux) - 2 * mean(P2.dt * a) - isum(dm, P2.P) - 2 * isum(m, P2.dt),
        "D": -mean(P4.P * a) - 2 * mean(P3.dt * a) - isum(dm, P3.P) - isum(m, 2 * P3.dt + P4.P),
        "E": -mean(P2.dtt * a) + mean(fam["P8"].flux) - isum(dm, P2.dt) - isum(m, P2.dtt),
        "F": -mean(P3.dtt * a) - 2 * mean(P4.dt * a) - isum(dm, P3.dt + P4.P) - isum(m, P3.dtt + 2 * P4.dt),
        "G": -mean(P4.dtt * a) - isum(dm, P4.dt) - isum(m, P4.dtt),
    }
    return {k: np.broadcast_to(v, fam.t.shape).copy() for k, v in out.items()}


def limit_case_coeffs(fam: CorrectorFamily) -> tuple[np.ndarray, np.ndarray]:
    """(b1, b2) = (<P1 d2P1/dt2>, <P1^2>) for uniform bulk and massless interfaces."""
    if not fam.is_limit_case:
        raise LimitCaseError("limit case only: requires alpha = beta = 1 and zero interface mass")
    P1 = fam["P1"]
    b1 = (P1.P * P1.dtt).mean()
    b2 = (P1.P * P1.P).mean()
    return np.broadcast_to(b1, fam.t.shape).copy(), np.broadcast_to(b2, fam.t.shape).copy()


def verify_variational_identities(fam: CorrectorFamily, generalized: bool = False) -> np.ndarray:
    """Residuals of the five cell-problem identities, shape (n_t, 5).

    The last three identities as usually stated drop interface terms proportional
    to the compliance rates; ``generalized=True`` adds them back, which makes the
    residuals vanish for any cell.
    """
    a = fam.geometry.alpha
    m, dm, dc, ddc = fam.laws.m, fam.laws.dm, fam.laws.dc, fam.laws.ddc
    P1, P3, P4 = fam["P1"], fam["P3"], fam["P4"]
    im = fam.iface_means
    b0 = fam.beta0
    db0 = periodic_derivative(b0, fam.period, 1)
    r = np.zeros(fam.t.shape + (5,))
    r[:, 0] = P3.flux.mean() - (P1.P * a).mean() - np.sum(m * im(P1.P), -1)
    r[:, 1] = P4.flux.mean() - np.sum(dm * im(P1.P), -1)
    r[:, 2] = -(P1.dt * a).mean() - np.sum(m * im(P1.dt), -1)
    r[:, 3] = -(P1.dtt * a).mean() - np.sum(m * im(P1.dtt), -1)
    r[:, 4] = -np.sum(dm * im(P1.dt), -1)
    if generalized:
        f3, f4 = im(P3.flux), im(P4.flux)
        r[:, 2] -= b0 * np.sum(dc * f3, -1)
        r[:, 3] -= np.sum((ddc * b0[:, None] + 2 * dc * db0[:, None]) * f3, -1)
        r[:, 4] -= b0 * np.sum(dc * f4, -1)
    return r


# -- bundled, time-sampled coefficients -----------------------------------------------------------


@dataclass
class EffectiveCoefficients:
    frame: ScalingFrame
    t: np.ndarray
    T: np.ndarray
    period_t: float
    period_T: float
    alpha0: np.ndarray
    beta0: np.ndarray
    gamma_m0: np.ndarray
    gamma_c0: np.ndarray
    rho0: np.ndarray
    E0: np.ndarray
    Gamma_M0: np.ndarray
    Gamma_C0: np.ndarray
    fraktur: dict[str, np.ndarray] = field(default_factory=dict)
    b1: np.ndarray | None = None
    b2: np.ndarray | None = None
    B1: np.ndarray | None = None
    B2: np.ndarray | None = None
    identities: np.ndarray | None = None
    family: CorrectorFamily | None = None

    def series(self, name: str) -> PeriodicSeries:
        """Interpolant in dimensional time of any sampled dimensional coefficient."""
        return PeriodicSeries(getattr(self, name), self.period_T)

    @property
    def is_limit_case(self) -> bool:
        return self.b2 is not None

    def table(self) -> dict[str, np.ndarray]:
        cols = {
            "t": self.t, "T": self.T, "alpha0": self.alpha0, "beta0": self.beta0,
            "gamma_m0": self.gamma_m0, "gamma_c0": self.gamma_c0,
            "rho0": self.rho0, "E0": self.E0, "Gamma_M0": self.Gamma_M0, "Gamma_C0": self.Gamma_C0,
        }
        for k, v in self.fraktur.items():
            cols[f"frak_{k}"] = v
        if self.is_limit_case:
            cols.update(b1=self.b1, b2=self.b2, B1=self.B1, B2=self.B2)
        return cols


def effective_coefficients(
    config: ProblemConfig,
    n_time_samples: int = 256,
    frame: ScalingFrame | None = None,
    second_order: bool = True,
    method: str = "spectral",
) -> EffectiveCoefficients:
    frame = frame or default_frame(config)
    problem = nondimensionalise(config, frame)
    fam = corrector_family(problem, n_time_samples, method=method, orders=8 if second_order else 4)
    tf = frame.time_factor
    T = fam.t / tf
    gm, gc = effective_dissipative(problem, fam.t)
    GM, GC = effective_dissipative_dimensional(config, T)
    out = EffectiveCoefficients(
        frame=frame, t=fam.t, T=T, period_t=fam.period, period_T=fam.period / tf,
        alpha0=fam.alpha0, beta0=fam.beta0, gamma_m0=gm, gamma_c0=gc,
        rho0=config.rho0(T), E0=config.E0(T), Gamma_M0=GM, Gamma_C0=GC,
        identities=verify_variational_identities(fam), family=fam,
    )
    if second_order:
        out.fraktur = second_order_coeffs(fam)
    if fam.is_limit_case:
        b1, b2 = limit_case_coeffs(fam)
        out.b1, out.b2 = b1, b2
        out.B1, out.B2 = b1 * tf**2, b2.copy()
    return out
