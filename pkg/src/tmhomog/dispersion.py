"""Floquet analysis of the time-periodic leading-order wave equation.

``rho0(T) U'' ...`` with tau-periodic rho0, E0: a plane wave ``exp(ikX)`` obeys
``(rho0 U')' = -k^2 E0 U``.  Two independent routes give the band structure:

* plane-wave expansion in time, a hermitian generalised eigenproblem for k^2 at
  each Bloch frequency;
* the monodromy (one-period transfer) matrix at each k, integrated in the
  variables (U, rho0 U') whose period map has unit determinant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from .history import FieldHistory


@dataclass(frozen=True)
class FourierModulation:
    """Coefficients rho_n, E_n for n = -N_f..N_f (index n + N_f)."""

    period: float
    rho: np.ndarray
    E: np.ndarray

    @property
    def n_f(self) -> int:
        return (self.rho.size - 1) // 2

    def coef(self, which: str, n: int) -> complex:
        arr = self.rho if which == "rho" else self.E
        return complex(arr[n + self.n_f]) if abs(n) <= self.n_f else 0.0

    def evaluate(self, which: str, T) -> np.ndarray:
        arr = self.rho if which == "rho" else self.E
        n = np.arange(-self.n_f, self.n_f + 1)
        T = np.asarray(T, dtype=float)
        ph = np.exp(2j * np.pi * np.multiply.outer(T, n) / self.period)
        return np.real(ph @ arr)


def fourier_coefficients(rho0: Callable, E0: Callable, tau: float, n_f: int,
                         n_samples: int | None = None) -> FourierModulation:
    """Trapezoid-rule (FFT) Fourier coefficients of the two tau-periodic laws."""
    if tau <= 0:
        raise ValueError("modulation period must be positive")
    n_samples = n_samples or max(256, 8 * n_f)
    if n_f > n_samples // 2 - 1:
        raise ValueError(f"N_f={n_f} aliases with {n_samples} samples per period")
    T = np.arange(n_samples) * tau / n_samples

    def coeffs(f):
        c = np.fft.fft(np.asarray(f(T), dtype=float)) / n_samples
        return np.concatenate((c[-n_f:], c[: n_f + 1])) if n_f else c[:1]

    return FourierModulation(tau, coeffs(rho0), coeffs(E0))


def pwe_matrices(fm: FourierModulation, omega: float) -> tuple[np.ndarray, np.ndarray]:
    N = fm.n_f
    n = np.arange(-N, N + 1)
    g = 2 * np.pi * n / fm.period + omega
    diff = n[None, :] - n[:, None]  # p - n
    rho = np.where(np.abs(diff) <= N, fm.rho[np.clip(diff + N, 0, 2 * N)], 0.0)
    E = np.where(np.abs(diff) <= N, fm.E[np.clip(diff + N, 0, 2 * N)], 0.0)
    P = np.outer(g, g) * rho
    E = E.astype(complex)
    # exact hermitian symmetry (rounding in the FFT breaks it at the last digit)
    return 0.5 * (P + P.conj().T), 0.5 * (E + E.conj().T)


@dataclass
class PWEResult:
    omega: float
    k: np.ndarray  # sorted positive wavenumbers
    k2_negative: np.ndarray  # discarded eigenvalues


def pwe_branches(fm: FourierModulation, omega: float) -> PWEResult:
    """Real wavenumbers of the truncated plane-wave expansion at Bloch frequency ``omega``."""
    P, Q = pwe_matrices(fm, omega)
    try:
        k2 = linalg.eigh(P, Q, eigvals_only=True)
    except linalg.LinAlgError:
        warnings.warn("stiffness Fourier matrix is not positive definite; using a general eigensolver",
                      RuntimeWarning, stacklevel=2)
        k2 = np.real(linalg.eigvals(P, Q))
    k2 = np.sort(np.real(k2))
    # the k = 0 mode at omega = 0 comes out as +-round-off
    k2[np.abs(k2) <= 1e-12 * np.max(np.abs(k2))] = 0.0
    pos = k2 >= 0
    return PWEResult(omega, np.sqrt(k2[pos]), k2[~pos])


@dataclass
class MonodromyResult:
    k: float
    matrix: np.ndarray
    multipliers: np.ndarray
    period: float

    @property
    def max_modulus(self) -> float:
        return float(np.max(np.abs(self.multipliers)))

    @property
    def growth_rate(self) -> float:
        """Amplitude growth rate log(max|mu|)/tau (energy grows at twice this)."""
        return math.log(self.max_modulus) / self.period

    def in_gap(self, tol: float = 1e-7) -> bool:
        return self.max_modulus > 1 + tol


def monodromy(k: float, rho0: Callable, E0: Callable, tau: float, rtol: float = 1e-12,
              atol: float = 1e-14) -> MonodromyResult:
    """Period map of (U, rho0 U') for the Fourier amplitude at wavenumber ``k``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    k2 = k * k

    def rhs(T, y):
        return np.array([y[1] / rho0(T), -k2 * E0(T) * y[0]])

    # scale the flux so that both columns have comparable size
    M = np.empty((2, 2))
    for j, y0 in enumerate(([1.0, 0.0], [0.0, 1.0])):
        sol = solve_ivp(rhs, (0.0, tau), y0, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise RuntimeError(f"monodromy integration failed at k={k}: {sol.message}")
        M[:, j] = sol.y[:, -1]
    mu = np.linalg.eigvals(M)
    return MonodromyResult(float(k), M, mu, tau)


@dataclass
class KGap:
    k_lo: float
    k_hi: float
    growth_rate: float  # log max|mu| / tau at the midpoint
    confirmed: bool

    @property
    def mid(self) -> float:
        return 0.5 * (self.k_lo + self.k_hi)


@dataclass
class DispersionResult:
    period: float
    omega: np.ndarray
    branches: list  # per omega, sorted k array
    gaps: list = field(default_factory=list)
    k_max: float = float("inf")

    def branch_table(self) -> np.ndarray:
        """Rows (omega, branch index, k) for every retained branch point below k_max."""
        rows = []
        for om, ks in zip(self.omega, self.branches):
            for j, k in enumerate(ks):
                if k <= self.k_max:
                    rows.append((om, j, k))
        return np.array(rows, dtype=float).reshape(-1, 3)

    def write_csv(self, outdir: str | Path, tag: str = "pwe") -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        np.savetxt(out / f"{tag}_branches.csv", self.branch_table(), delimiter=",",
                   header="omega,branch,k", comments="")
        g = np.array([(gp.k_lo, gp.k_hi, gp.growth_rate) for gp in self.gaps], dtype=float).reshape(-1, 3)
        np.savetxt(out / f"{tag}_gaps.csv", g, delimiter=",", header="k_lo,k_hi,growth_rate", comments="")


def dispersion_sweep(fm: FourierModulation, n_omega: int = 400, n_branches: int | None = None) -> DispersionResult:
    """PWE over the first Brillouin zone [0, pi/tau] (endpoints included)."""
    if n_omega < 2:
        raise ValueError("need at least two Bloch frequencies")
    om = np.linspace(0.0, np.pi / fm.period, n_omega)
    branches = [pwe_branches(fm, w).k for w in om]
    nb = n_branches or max(1, fm.n_f // 2)
    # trust only the lowest branches: truncation corrupts the top of the spectrum
    nmin = min(len(b) for b in branches)
    nb = min(nb, nmin)
    k_max = float(min(b[nb - 1] for b in branches))
    return DispersionResult(fm.period, om, branches, [], k_max)


def detect_k_gaps(res: DispersionResult, rho0: Callable | None = None, E0: Callable | None = None,
                  rel_tol: float = 1e-6, mu_tol: float = 1e-7) -> list[KGap]:
    """Wavenumber intervals not reached by any branch below ``res.k_max``.

    Each sorted branch is continuous in omega, so its range is an interval;
    the gaps are the holes in the union of those intervals.  With the laws
    supplied, the monodromy multiplier at each gap midpoint confirms growth.
    """
    if len(res.omega) < 2:
        raise ValueError("dispersion sweep too coarse")
    nb = min(len(b) for b in res.branches)
    ranges = []
    for j in range(nb):
        kj = np.array([b[j] for b in res.branches])
        ranges.append((kj.min(), kj.max()))
    ranges.sort()
    tol = rel_tol * max(res.k_max if np.isfinite(res.k_max) else ranges[-1][1], 1e-300)
    gaps = []
    reach = 0.0
    for lo, hi in ranges:
        if lo > res.k_max:
            break
        if lo > reach + tol:
            gaps.append((reach, lo))
        reach = max(reach, hi)
    out = []
    for lo, hi in gaps:
        if hi > res.k_max:
            continue
        rate, ok = float("nan"), False
        if rho0 is not None and E0 is not None:
            m = monodromy(0.5 * (lo + hi), rho0, E0, res.period)
            rate, ok = m.growth_rate, m.in_gap(mu_tol)
        out.append(KGap(float(lo), float(hi), rate, ok))
    res.gaps = out
    return out


def cross_validate(res: DispersionResult, rho0: Callable, E0: Callable, max_points: int = 60,
                   n_branches: int = 4) -> float:
    """Largest |tr(M)/2 - cos(omega tau)| over PWE branch points.

    The multipliers of a unit-determinant period map are the roots of
    mu^2 - tr(M) mu + 1, so a PWE point (omega, k) is exact iff
    tr M(k) = 2 cos(omega tau).  The trace test stays well conditioned at the
    band edges where the two multipliers merge.
    """
    worst = 0.0
    idx = np.unique(np.linspace(0, len(res.omega) - 1, max_points).astype(int))
    for i in idx:
        om = res.omega[i]
        for k in res.branches[i][:n_branches]:
            M = monodromy(float(k), rho0, E0, res.period).matrix
            worst = max(worst, abs(0.5 * np.trace(M) - math.cos(om * res.period)))
    return worst


# -- field-based spectrum ------------------------------------------------------------------


@dataclass
class DispersionMap:
    k: np.ndarray  # rad/m, ascending, >= 0
    omega: np.ndarray  # rad/s, ascending, >= 0
    log_mag: np.ndarray  # (n_omega, n_k)

    def write_csv(self, outdir: str | Path, tag: str = "field_map") -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        np.savetxt(out / f"{tag}_k.csv", self.k, delimiter=",", header="k", comments="")
        np.savetxt(out / f"{tag}_omega.csv", self.omega, delimiter=",", header="omega", comments="")
        np.savetxt(out / f"{tag}.csv", self.log_mag, delimiter=",",
                   header="log10 |FFT| rows=omega cols=k", comments="")

    def ridge_extent(self, omega_band: tuple[float, float] | None = None, drop: float = 0.5) -> tuple[float, float]:
        """k-interval around the strongest ridge where the omega-integrated magnitude stays above ``drop`` x peak."""
        mag = 10.0 ** self.log_mag
        sel = slice(None)
        if omega_band is not None:
            sel = (self.omega >= omega_band[0]) & (self.omega <= omega_band[1])
        prof = mag[sel].sum(axis=0)
        prof[0] = 0.0  # drop the static mode
        i = int(np.argmax(prof))
        thr = drop * prof[i]
        lo = i
        while lo > 0 and prof[lo - 1] >= thr:
            lo -= 1
        hi = i
        while hi < prof.size - 1 and prof[hi + 1] >= thr:
            hi += 1
        dk = self.k[1] - self.k[0]
        return float(self.k[lo] - 0.5 * dk), float(self.k[hi] + 0.5 * dk)


def field_dispersion_map(hist: FieldHistory, t_window: tuple[float, float] | None = None,
                         x_window: tuple[float, float] | None = None, floor: float = 1e-300) -> DispersionMap:
    """log10 magnitude of the Hann-windowed 2D FFT of the stored displacement fields."""
    U, t, x = hist.U, hist.field_t, hist.x
    if U.shape[0] < 4:
        raise ValueError("need stored fields (set field_stride) for a dispersion map")
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-15):
        raise ValueError("non-uniform time sampling")
    ts = np.ones(t.size, dtype=bool) if t_window is None else (t >= t_window[0]) & (t <= t_window[1])
    xs = np.ones(x.size, dtype=bool) if x_window is None else (x >= x_window[0]) & (x <= x_window[1])
    A = U[np.ix_(ts, xs)]
    A = A * np.hanning(A.shape[0])[:, None] * np.hanning(A.shape[1])[None, :]
    F = np.fft.fft2(A)
    nt, nx = A.shape
    om = 2 * np.pi * np.fft.fftfreq(nt, dts[0])
    k = 2 * np.pi * np.fft.fftfreq(nx, x[1] - x[0])
    # U real: fold (omega, k) and (-omega, -k); keep omega >= 0 and combine +-k
    io = om >= 0
    ik = k >= 0
    Fp = np.abs(F[io][:, ik])
    neg = np.abs(F[io][:, (-np.arange(nx)) % nx][:, ik])  # value at -k
    mag = np.sqrt(Fp**2 + neg**2)
    return DispersionMap(k[ik], om[io], np.log10(np.maximum(mag, floor)))
