"""Problem definition: bulk medium, modulated interfaces, source, grid and scaling.

All quantities are SI. A configuration is built once, validated, and treated as
immutable afterwards (frozen dataclasses throughout).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import yaml


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class Modulation:
    """Sinusoidal law ``mean * (1 + eps * sin(omega * T + phase))``."""

    mean: float = 0.0
    eps: float = 0.0
    omega: float = 0.0
    phase: float = 0.0

    @property
    def is_modulated(self) -> bool:
        return self.eps != 0.0 and self.omega != 0.0 and self.mean != 0.0

    def __call__(self, T):
        return self.mean * (1.0 + self.eps * np.sin(self.omega * np.asarray(T, dtype=float) + self.phase))

    def deriv(self, T, order: int = 1):
        T = np.asarray(T, dtype=float)
        if order == 0:
            return self(T)
        amp = self.mean * self.eps * self.omega**order
        # d^n/dT^n sin(x) = sin(x + n pi/2)
        return amp * np.sin(self.omega * T + self.phase + order * math.pi / 2)

    def scaled(self, value_factor: float, time_factor: float = 1.0) -> "Modulation":
        """Law for ``value_factor * law(t / time_factor)``."""
        return Modulation(self.mean * value_factor, self.eps, self.omega / time_factor, self.phase)


@dataclass(frozen=True)
class BulkMedium:
    """1-periodic piecewise-constant density and Young's modulus over y in [0, 1)."""

    rho: tuple[float, ...]
    E: tuple[float, ...]
    breakpoints: tuple[float, ...] = (0.0,)

    @classmethod
    def homogeneous(cls, rho: float, c: float) -> "BulkMedium":
        return cls(rho=(float(rho),), E=(float(rho) * float(c) ** 2,))

    def __post_init__(self):
        n = len(self.breakpoints)
        if len(self.rho) != n or len(self.E) != n:
            raise ConfigError("bulk: rho, E and breakpoints must have equal length")
        if self.breakpoints[0] != 0.0:
            raise ConfigError("bulk: first breakpoint must be 0")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])) or self.breakpoints[-1] >= 1.0:
            raise ConfigError("bulk: breakpoints must be strictly increasing inside [0, 1)")
        if min(self.rho) <= 0 or min(self.E) <= 0:
            raise ConfigError("bulk: rho and E must be positive")

    @property
    def is_homogeneous(self) -> bool:
        return len(set(self.rho)) == 1 and len(set(self.E)) == 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(np.append(self.breakpoints, 1.0))

    def mean_rho(self) -> float:
        return float(np.dot(self.widths, self.rho))

    def mean_inv_E(self) -> float:
        return float(np.dot(self.widths, 1.0 / np.asarray(self.E)))

    def mean_E(self) -> float:
        return float(np.dot(self.widths, self.E))

    def speed(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.E) / np.asarray(self.rho))


@dataclass(frozen=True)
class InterfaceSpec:
    """One spring-mass interface of the unit cell.

    ``C`` is the compliance (m/Pa), ``M`` the surface mass (kg/m^2), ``QC`` and
    ``QM`` the dissipation laws (m^2 s/kg and kg/(m^2 s)).
    """

    y_pos: float
    C: Modulation
    M: Modulation = Modulation()
    QC: Modulation = Modulation()
    QM: Modulation = Modulation()

    @classmethod
    def sinusoidal(
        cls,
        y_pos: float = 0.0,
        *,
        K_mean: float | None = None,
        C_mean: float | None = None,
        M_mean: float = 0.0,
        eps_C: float = 0.0,
        eps_M: float = 0.0,
        f_m: float = 0.0,
        phase_C: float = 0.0,
        phase_M: float = 0.0,
        QC_mean: float = 0.0,
        QM_mean: float = 0.0,
        eps_QC: float = 0.0,
        eps_QM: float = 0.0,
        phase_QC: float = 0.0,
        phase_QM: float = 0.0,
    ) -> "InterfaceSpec":
        """Interface whose four laws share the modulation frequency ``f_m`` (Hz)."""
        if (K_mean is None) == (C_mean is None):
            raise ConfigError("give exactly one of K_mean, C_mean")
        if C_mean is None:
            if K_mean <= 0:
                raise ConfigError("K_mean must be positive")
            C_mean = 1.0 / K_mean
        om = 2 * math.pi * f_m
        return cls(
            y_pos=float(y_pos),
            C=Modulation(C_mean, eps_C, om, phase_C),
            M=Modulation(M_mean, eps_M, om, phase_M),
            QC=Modulation(QC_mean, eps_QC, om, phase_QC),
            QM=Modulation(QM_mean, eps_QM, om, phase_QM),
        )

    def __post_init__(self):
        if not 0.0 <= self.y_pos < 1.0:
            raise ConfigError(f"interface y_pos={self.y_pos} outside [0, 1)")
        if self.C.mean < 0:
            raise ConfigError("compliance mean must be >= 0")
        if self.C.mean > 0 and abs(self.C.eps) >= 1:
            raise ConfigError("|eps_C| must be < 1 so that C(T) > 0")
        if self.M.mean < 0 or abs(self.M.eps) > 1:
            raise ConfigError("mass mean must be >= 0 and |eps_M| <= 1")
        for name, q in (("QC", self.QC), ("QM", self.QM)):
            if q.mean < 0 or abs(q.eps) > 1:
                raise ConfigError(f"{name}: mean must be >= 0 and |eps| <= 1")

    @property
    def laws(self) -> tuple[Modulation, ...]:
        return (self.C, self.M, self.QC, self.QM)

    @property
    def is_modulated(self) -> bool:
        return any(law.is_modulated for law in self.laws)

    @property
    def is_dissipative(self) -> bool:
        return self.QC.mean > 0 or self.QM.mean > 0


class InterfaceState(NamedTuple):
    C: np.ndarray
    M: np.ndarray
    QC: np.ndarray
    QM: np.ndarray
    dC: np.ndarray
    dM: np.ndarray


def eval_interface(spec: InterfaceSpec, T) -> InterfaceState:
    """Instantaneous interface parameters and the analytic rates C', M' at time(s) T."""
    return InterfaceState(
        spec.C(T), spec.M(T), spec.QC(T), spec.QM(T), spec.C.deriv(T), spec.M.deriv(T)
    )


@dataclass(frozen=True)
class Lattice:
    h: float
    interfaces: tuple[InterfaceSpec, ...]

    def __post_init__(self):
        if self.h <= 0:
            raise ConfigError("lattice period h must be positive")
        ys = [itf.y_pos for itf in self.interfaces]
        if ys and ys[0] != 0.0:
            raise ConfigError("the first interface must sit at y = 0")
        if any(b <= a for a, b in zip(ys, ys[1:])):
            raise ConfigError("interface positions must be strictly increasing")

    @property
    def positions(self) -> np.ndarray:
        return np.array([itf.y_pos for itf in self.interfaces])


def default_source_coefficients(n_terms: int = 4) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Octave-stacked sines with the odd derivatives 1, 3, ... 2n-3 cancelled at both ends.

    Even derivatives vanish at T = 0 and T = 1/f_c for integer ``b``; the
    remaining conditions plus ``a_1 = 1`` give a regular linear system.
    """
    b = 2.0 ** np.arange(n_terms)
    A = np.zeros((n_terms, n_terms))
    rhs = np.zeros(n_terms)
    A[0, 0] = 1.0
    rhs[0] = 1.0
    for j in range(1, n_terms):
        A[j] = b ** (2 * j - 1)
    a = np.linalg.solve(A, rhs)
    return tuple(float(v) for v in a), tuple(float(v) for v in b)


_DEFAULT_A, _DEFAULT_B = default_source_coefficients()


@dataclass(frozen=True)
class SourcePulse:
    f_c: float
    X_s: float
    a: tuple[float, ...] = _DEFAULT_A
    b: tuple[float, ...] = _DEFAULT_B

    def __post_init__(self):
        if self.f_c <= 0:
            raise ConfigError("source f_c must be positive")
        if len(self.a) != len(self.b):
            raise ConfigError("source coefficient lists a, b differ in length")

    @property
    def omega_c(self) -> float:
        return 2 * math.pi * self.f_c


def source_signal(pulse: SourcePulse, T):
    """Sum of ``a_m sin(b_m omega_c T)`` on ``0 < T < 1/f_c``, zero elsewhere."""
    T = np.asarray(T, dtype=float)
    out = np.zeros_like(T)
    on = (T > 0) & (T < 1.0 / pulse.f_c)
    if np.any(on):
        Ton = T[on]
        out[on] = sum(a * np.sin(b * pulse.omega_c * Ton) for a, b in zip(pulse.a, pulse.b))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GridSpec:
    L: float
    N_X: int
    cfl_fraction: float = 1.0
    T_end: float = 0.3

    def __post_init__(self):
        if self.N_X < 3:
            raise ConfigError("N_X must be >= 3")
        if self.L <= 0:
            raise ConfigError("domain length must be positive")
        if not 0 < self.cfl_fraction <= 1:
            raise ConfigError("cfl_fraction must lie in (0, 1]")
        if self.T_end <= 0:
            raise ConfigError("T_end must be positive")

    @property
    def dX(self) -> float:
        return self.L / self.N_X

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N_X + 1) * self.dX


@dataclass(frozen=True)
class ProblemConfig:
    bulk: BulkMedium
    lattice: Lattice
    source: SourcePulse
    grid: GridSpec
    receivers: tuple[float, ...] = ()
    snapshot_times: tuple[float, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        for xr in self.receivers:
            if not 0 <= xr <= self.grid.L:
                raise ConfigError(f"receiver at X={xr} lies outside [0, {self.grid.L}]")
        if not 0 < self.source.X_s < self.grid.L:
            raise ConfigError("source must lie strictly inside the domain")

    @property
    def h(self) -> float:
        return self.lattice.h

    @property
    def interfaces(self) -> tuple[InterfaceSpec, ...]:
        return self.lattice.interfaces

    def with_(self, **changes) -> "ProblemConfig":
        return replace(self, **changes)

    # -- effective laws (dimensional, closed form) -------------------------

    def rho0(self, T):
        """Leading-order effective density at time(s) T."""
        T = np.asarray(T, dtype=float)
        out = self.bulk.mean_rho() + sum(itf.M(T) for itf in self.interfaces) / self.h
        return out + 0.0 * T

    def E0(self, T):
        T = np.asarray(T, dtype=float)
        inv = self.bulk.mean_inv_E() + sum(itf.C(T) for itf in self.interfaces) / self.h
        return 1.0 / (inv + 0.0 * T)

    def max_effective_speed(self, n_samples: int = 2048) -> float:
        tau = modulation_period(self)
        T = np.linspace(0.0, tau if tau else 1.0, n_samples, endpoint=False)
        return float(np.max(np.sqrt(self.E0(T) / self.rho0(T))))


@dataclass(frozen=True)
class ScalingFrame:
    E_star: float
    rho_star: float
    k_star: float
    h: float

    def __post_init__(self):
        if self.E_star <= 0 or self.rho_star <= 0 or self.k_star <= 0 or self.h <= 0:
            raise ConfigError("scaling frame needs positive E*, rho*, k* and h")

    @property
    def c_star(self) -> float:
        return math.sqrt(self.E_star / self.rho_star)

    @property
    def eta(self) -> float:
        return self.k_star * self.h

    @property
    def time_factor(self) -> float:
        """``t = time_factor * T``."""
        return self.k_star * self.c_star


def reference_speed(config: ProblemConfig) -> float:
    """Reference speed built from the mean effective density and compliance."""
    rho_bar = config.bulk.mean_rho() + sum(i.M.mean for i in config.interfaces) / config.h
    comp_bar = config.bulk.mean_inv_E() + sum(i.C.mean for i in config.interfaces) / config.h
    if rho_bar <= 0 or comp_bar <= 0:
        raise ConfigError("non-positive mean density or compliance")
    return 1.0 / math.sqrt(rho_bar * comp_bar)


def modulation_frequency(config: ProblemConfig) -> float:
    """The single modulation angular frequency shared by all modulated laws (0 if none)."""
    omegas = {law.omega for itf in config.interfaces for law in itf.laws if law.is_modulated}
    if not omegas:
        return 0.0
    if len(omegas) > 1:
        raise ConfigError(
            f"interfaces use several modulation frequencies {sorted(omegas)}; pick one explicitly"
        )
    return omegas.pop()


def eta_n(config: ProblemConfig, n: int, omega_m: float | None = None) -> float:
    """Small parameter of the n-th Floquet harmonic ``(omega_c + n Omega_m) h / c*``."""
    if omega_m is None:
        omega_m = modulation_frequency(config) if n else 0.0
    return (config.source.omega_c + n * omega_m) / reference_speed(config) * config.h


def modulation_period(config: ProblemConfig, max_ratio_denominator: int = 64) -> float:
    """Common period of every modulated law; 0.0 when nothing is modulated.

    Raises ConfigError for incommensurate frequencies.
    """
    omegas = sorted({abs(law.omega) for itf in config.interfaces for law in itf.laws if law.is_modulated})
    if not omegas:
        return 0.0
    base = omegas[0]
    denom = 1
    for om in omegas[1:]:
        frac = Fraction(om / base).limit_denominator(max_ratio_denominator)
        if abs(float(frac) - om / base) > 1e-9 * (om / base):
            raise ConfigError(f"modulation frequencies {omegas} are not commensurate")
        denom = math.lcm(denom, frac.denominator)
    return 2 * math.pi * denom / base


def impedance_matched_mass(rho: float, c: float, C_mean: float) -> float:
    """Surface mass that makes a single modulated interface reflectionless.

    The modulation amplitude, frequency and phase of the mass must equal those
    of the compliance.
    """
    return (rho * c) ** 2 * C_mean


def default_frame(config: ProblemConfig, k_star: float | None = None) -> ScalingFrame:
    """Self-referenced scaling: bulk values when homogeneous, arithmetic means otherwise.

    ``k_star`` defaults to ``omega_c / c*`` with c* from :func:`reference_speed`,
    which makes ``eta`` equal to ``eta_0``.
    """
    E_star = config.bulk.mean_E()
    rho_star = config.bulk.mean_rho()
    if k_star is None:
        k_star = config.source.omega_c / reference_speed(config)
    return ScalingFrame(E_star, rho_star, k_star, config.h)


# -- non-dimensional problem ---------------------------------------------


@dataclass(frozen=True)
class ScaledInterface:
    y_pos: float
    c: Modulation
    m: Modulation
    qc: Modulation
    qm: Modulation


@dataclass(frozen=True)
class DimensionlessProblem:
    """Cell data in the variables ``y = X/h``, ``t = k* c* T``.

    ``alpha``/``beta`` are the per-segment bulk ratios rho/rho*, E/E* on the
    bulk breakpoints.
    """

    frame: ScalingFrame
    breakpoints: tuple[float, ...]
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    interfaces: tuple[ScaledInterface, ...]
    force_scale: float = field(default=1.0)

    @property
    def positions(self) -> np.ndarray:
        return np.array([i.y_pos for i in self.interfaces])

    def mean_alpha(self) -> float:
        w = np.diff(np.append(self.breakpoints, 1.0))
        return float(np.dot(w, self.alpha))

    def mean_inv_beta(self) -> float:
        w = np.diff(np.append(self.breakpoints, 1.0))
        return float(np.dot(w, 1.0 / np.asarray(self.beta)))

    def period(self) -> float:
        omegas = sorted({abs(l.omega) for i in self.interfaces for l in (i.c, i.m, i.qc, i.qm) if l.is_modulated})
        if not omegas:
            return 0.0
        base = omegas[0]
        denom = 1
        for om in omegas[1:]:
            frac = Fraction(om / base).limit_denominator(64)
            if abs(float(frac) - om / base) > 1e-9 * (om / base):
                raise ConfigError("modulation frequencies are not commensurate")
            denom = math.lcm(denom, frac.denominator)
        return 2 * math.pi * denom / base


def nondimensionalise(config: ProblemConfig, frame: ScalingFrame | None = None) -> DimensionlessProblem:
    frame = frame or default_frame(config)
    if frame.h != config.h:
        raise ConfigError("scaling frame built for another lattice period")
    E_s, r_s, h = frame.E_star, frame.rho_star, config.h
    tf = frame.time_factor
    Z_s = math.sqrt(E_s * r_s)
    scaled = tuple(
        ScaledInterface(
            itf.y_pos,
            c=itf.C.scaled(E_s / h, tf),
            m=itf.M.scaled(1.0 / (r_s * h), tf),
            qc=itf.QC.scaled(Z_s / frame.eta, tf),
            qm=itf.QM.scaled(1.0 / (Z_s * frame.eta), tf),
        )
        for itf in config.interfaces
    )
    return DimensionlessProblem(
        frame=frame,
        breakpoints=config.bulk.breakpoints,
        alpha=tuple(r / r_s for r in config.bulk.rho),
        beta=tuple(e / E_s for e in config.bulk.E),
        interfaces=scaled,
        force_scale=1.0 / (frame.k_star * E_s),
    )


def dimensionalise(problem: DimensionlessProblem) -> tuple[BulkMedium, Lattice]:
    """Inverse of :func:`nondimensionalise` for the medium and the lattice."""
    fr = problem.frame
    E_s, r_s, h, tf = fr.E_star, fr.rho_star, fr.h, fr.time_factor
    Z_s = math.sqrt(E_s * r_s)
    bulk = BulkMedium(
        rho=tuple(a * r_s for a in problem.alpha),
        E=tuple(b * E_s for b in problem.beta),
        breakpoints=problem.breakpoints,
    )
    itfs = tuple(
        InterfaceSpec(
            s.y_pos,
            C=s.c.scaled(h / E_s, 1.0 / tf),
            M=s.m.scaled(r_s * h, 1.0 / tf),
            QC=s.qc.scaled(fr.eta / Z_s, 1.0 / tf),
            QM=s.qm.scaled(fr.eta * Z_s, 1.0 / tf),
        )
        for s in problem.interfaces
    )
    return bulk, Lattice(h, itfs)


# -- file format -----------------------------------------------------------


def _interface_from_dict(d: dict) -> InterfaceSpec:
    known = {
        "y", "K_mean", "C_mean", "M_mean", "eps_C", "eps_M", "f_m", "phase_C", "phase_M",
        "QC_mean", "QM_mean", "eps_QC", "eps_QM", "phase_QC", "phase_QM",
    }
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"lattice.interfaces: unknown keys {sorted(unknown)}")
    kw = {k: float(v) for k, v in d.items() if k != "y"}
    return InterfaceSpec.sinusoidal(float(d.get("y", 0.0)), **kw)


def config_from_dict(d: dict, name: str = "custom") -> ProblemConfig:
    """Build a configuration from the documented key tree (see README)."""
    try:
        b = d["bulk"]
        if "breakpoints" in b:
            bulk = BulkMedium(
                rho=tuple(float(v) for v in b["rho"]),
                E=tuple(float(v) for v in b["E"]),
                breakpoints=tuple(float(v) for v in b["breakpoints"]),
            )
        elif "E" in b:
            bulk = BulkMedium(rho=(float(b["rho"]),), E=(float(b["E"]),))
        else:
            bulk = BulkMedium.homogeneous(float(b["rho"]), float(b["c"]))
        lat = d["lattice"]
        lattice = Lattice(float(lat["h"]), tuple(_interface_from_dict(i) for i in lat.get("interfaces", [])))
        s = d["source"]
        src_kw = {}
        if "a" in s:
            src_kw = {"a": tuple(float(v) for v in s["a"]), "b": tuple(float(v) for v in s["b"])}
        source = SourcePulse(float(s["f_c"]), float(s["X_s"]), **src_kw)
        g = d["grid"]
        grid = GridSpec(float(g["L"]), int(g["N_X"]), float(g.get("cfl", 1.0)), float(g["T_end"]))
    except KeyError as exc:
        raise ConfigError(f"missing configuration key: {exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return ProblemConfig(
        bulk=bulk,
        lattice=lattice,
        source=source,
        grid=grid,
        receivers=tuple(float(v) for v in d.get("receivers", [])),
        snapshot_times=tuple(float(v) for v in d.get("snapshots", [])),
        name=str(d.get("name", name)),
    )


def config_to_dict(config: ProblemConfig) -> dict:
    """Serialise to the key tree read by :func:`config_from_dict`.

    Only sinusoidal interfaces sharing one frequency per interface are expressible.
    """
    b = config.bulk
    if b.is_homogeneous:
        bulk = {"rho": b.rho[0], "E": b.E[0]}
    else:
        bulk = {"rho": list(b.rho), "E": list(b.E), "breakpoints": list(b.breakpoints)}
    itfs = []
    for itf in config.interfaces:
        om = {law.omega for law in itf.laws if law.omega}
        if len(om) > 1:
            raise ConfigError("interface laws with different frequencies cannot be written")
        f_m = om.pop() / (2 * math.pi) if om else 0.0
        itfs.append(
            {
                "y": itf.y_pos, "C_mean": itf.C.mean, "eps_C": itf.C.eps, "phase_C": itf.C.phase,
                "M_mean": itf.M.mean, "eps_M": itf.M.eps, "phase_M": itf.M.phase,
                "QC_mean": itf.QC.mean, "eps_QC": itf.QC.eps, "phase_QC": itf.QC.phase,
                "QM_mean": itf.QM.mean, "eps_QM": itf.QM.eps, "phase_QM": itf.QM.phase,
                "f_m": f_m,
            }
        )
    g = config.grid
    return {
        "name": config.name,
        "bulk": bulk,
        "lattice": {"h": config.h, "interfaces": itfs},
        "source": {"f_c": config.source.f_c, "X_s": config.source.X_s,
                   "a": list(config.source.a), "b": list(config.source.b)},
        "grid": {"L": g.L, "N_X": g.N_X, "cfl": g.cfl_fraction, "T_end": g.T_end},
        "receivers": list(config.receivers),
        "snapshots": list(config.snapshot_times),
    }


def load_config(path: str | Path) -> ProblemConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data, name=path.stem)


def dump_config(config: ProblemConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(config), sort_keys=False))


def check_grid_resolves_lattice(config: ProblemConfig, positions: Sequence[float]) -> None:
    """Grid spacing must separate every pair of neighbouring interfaces."""
    if len(positions) > 1 and np.min(np.diff(np.sort(positions))) <= config.grid.dX:
        raise ConfigError("grid does not resolve the interface spacing (dX >= gap)")
