"""Pipelines that run solvers and analyses for one configuration and write the run directory."""

from __future__ import annotations

import json
import math
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .backend import BACKEND
from .cell import effective_coefficients
from .config import ProblemConfig, config_to_dict, eta_n, modulation_period, reference_speed
from .diagnostics import (
    energy_mismatch,
    error_norms,
    floquet_growth_fit,
    reciprocity_check,
    reciprocity_noise_floor,
    reflection_ratio,
)
from .dispersion import (
    cross_validate,
    detect_k_gaps,
    dispersion_sweep,
    field_dispersion_map,
    fourier_coefficients,
)
from .effective import (
    SecondOrderModel,
    leading_dt,
    run_dissipative,
    run_leading,
    run_second_order,
    second_order_dt,
)
from .micro import run_micro

SOLVERS = ("micro", "leading", "second_order", "dissipative")
ANALYSES = ("compare", "energy", "dispersion", "field_map", "reflection", "reciprocity")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, np.integer):
        return int(v)
    return v


def derived_quantities(config: ProblemConfig) -> dict:
    """Reference speed, small parameters and stable time steps."""
    out = {
        "c_star": reference_speed(config),
        "eta0": eta_n(config, 0),
        "modulation_period": modulation_period(config),
        "dX": config.grid.dX,
        "dt_leading": leading_dt(config),
    }
    out["eta1"] = eta_n(config, 1) if out["modulation_period"] else None
    if config.bulk.is_homogeneous:
        c = math.sqrt(config.bulk.E[0] / config.bulk.rho[0])
        out["dt_micro"] = config.grid.cfl_fraction * config.grid.dX / c
    else:
        out["dt_micro"] = None
    try:
        model = SecondOrderModel.from_config(config)
        out["dt_second_order"] = second_order_dt(config, model)
    except ValueError:
        out["dt_second_order"] = None
    return out


def versions() -> dict:
    return {"tmhomog": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "backend": BACKEND}


def coefficient_report(config: ProblemConfig, n_time_samples: int = 256) -> tuple[dict, np.ndarray]:
    """Coefficient columns over one period and the identity residuals (n_t, 5)."""
    coeffs = effective_coefficients(config, n_time_samples)
    return coeffs.table(), coeffs.identities


COLUMN_NOTES = {
    "t": "dimensionless time",
    "T": "time [s]",
    "alpha0": "effective density (dimensionless)",
    "beta0": "effective stiffness (dimensionless)",
    "gamma_m0": "mass-rate coefficient (dimensionless)",
    "gamma_c0": "compliance-rate coefficient (dimensionless)",
    "rho0": "effective density [kg/m^3]",
    "E0": "effective modulus [Pa]",
    "Gamma_M0": "velocity damping coefficient [kg/m^3/s]",
    "Gamma_C0": "stress damping coefficient [1/(Pa s)]",
    "b1": "limit-case dispersive coefficient <P1 d2P1/dt2> (dimensionless)",
    "b2": "limit-case dispersive coefficient <P1^2> (dimensionless)",
    "B1": "b1 in physical time [1/s^2]",
    "B2": "b2 (dimensionless)",
}


def write_coefficients(config: ProblemConfig, path: str | Path, n_time_samples: int = 256) -> np.ndarray:
    """CSV with a name row and a description row; returns the identity residuals."""
    cols, ident = coefficient_report(config, n_time_samples)
    names = list(cols)
    notes = [COLUMN_NOTES.get(n, f"second-order source coefficient {n[5:]}" if n.startswith("frak_") else n)
             for n in names]
    data = np.column_stack([cols[n] for n in names])
    header = ",".join(names) + "\n# " + ",".join(notes)
    np.savetxt(path, data, delimiter=",", header=header, comments="")
    return ident


def _run_solver(name: str, config: ProblemConfig, field_stride: int, interface_energy: bool):
    if name == "micro":
        return run_micro(config, field_stride=field_stride, interface_energy=interface_energy)
    if name == "leading":
        return run_leading(config, field_stride=field_stride)
    if name == "second_order":
        return run_second_order(config, field_stride=field_stride)
    if name == "dissipative":
        return run_dissipative(config, field_stride=field_stride)
    raise ValueError(f"unknown solver {name!r}; choose from {SOLVERS}")


def comparison_window(config: ProblemConfig) -> tuple[float, float]:
    """From the end of the source pulse to the horizon."""
    return 1.0 / config.source.f_c, config.grid.T_end


def run_experiment(config: ProblemConfig, outdir: str | Path, pipeline=("leading",), *,
                   field_stride: int = 4, interface_energy: bool = False, n_f: int = 32,
                   n_omega: int = 400, reciprocity_pair: tuple[float, float] | None = None) -> dict:
    """Run the requested solvers and analyses; write artifacts and ``summary.json``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    unknown = set(pipeline) - set(SOLVERS) - set(ANALYSES)
    if unknown:
        raise ValueError(f"unknown pipeline steps {sorted(unknown)}")
    summary: dict = {
        "name": config.name, "config": config_to_dict(config), "derived": derived_quantities(config),
        "versions": versions(), "pipeline": list(pipeline), "interface_energy": interface_energy,
        "results": {},
    }
    res = summary["results"]
    hists = {}
    for step in pipeline:
        if step in SOLVERS:
            h = _run_solver(step, config, field_stride, interface_energy)
            h.write(out)
            hists[step] = h
            res[step] = {"dt": h.dt, **h.meta}
    window = comparison_window(config)
    if "compare" in pipeline:
        ref = hists.get("micro")
        if ref is None:
            raise ValueError("compare needs a micro run in the pipeline")
        cmp = {}
        for name, h in hists.items():
            if name == "micro":
                continue
            l2, linf = error_norms(ref, h, window)
            cmp[name] = {"rel_L2": l2, "rel_Linf": linf}
            if ref.energy is not None and h.energy is not None:
                cmp[name]["energy_mismatch"] = energy_mismatch(ref.energy, h.energy, window)
        res["compare"] = {"window": list(window), **cmp}
    if "energy" in pipeline:
        tau = modulation_period(config) or None
        growth = {}
        for name, h in hists.items():
            if h.energy is not None and len(h.energy.T) > 2:
                try:
                    growth[name] = floquet_growth_fit(h.energy, window[0], window[1], tau)
                except ValueError as exc:
                    growth[name] = str(exc)
        res["energy_growth_rate"] = growth
    if "dispersion" in pipeline or "field_map" in pipeline:
        tau = modulation_period(config)
        if not tau:
            raise ValueError("dispersion analysis needs a time-modulated configuration")
        fm = fourier_coefficients(config.rho0, config.E0, tau, n_f)
        d = dispersion_sweep(fm, n_omega)
        gaps = detect_k_gaps(d, config.rho0, config.E0)
        d.gaps = gaps
        d.write_csv(out / "dispersion")
        res["dispersion"] = {
            "n_f": n_f, "n_omega": n_omega, "k_max": d.k_max,
            "gaps": [{"k_lo": g.k_lo, "k_hi": g.k_hi, "growth_rate": g.growth_rate, "confirmed": g.confirmed}
                     for g in gaps],
            "trace_mismatch": cross_validate(d, config.rho0, config.E0),
        }
        if "field_map" in pipeline:
            h = hists.get("micro") or hists.get("leading")
            if h is None:
                raise ValueError("field_map needs a micro or leading-order run")
            m = field_dispersion_map(h, window)
            m.write_csv(out / "dispersion", tag=f"{h.solver}_field_map")
            res["field_map"] = {"solver": h.solver, "ridge_k": list(m.ridge_extent())}
    if "reflection" in pipeline:
        h = hists.get("micro")
        if h is None or not h.snapshots:
            raise ValueError("reflection needs a micro run with a snapshot")
        T, (U, V, S) = sorted(h.snapshots.items())[0]
        Z = math.sqrt(config.bulk.rho[0] * config.bulk.E[0])
        res["reflection"] = {"T": T, "ratio": reflection_ratio(h.x, V, S, Z, config.source.X_s)}
    if "reciprocity" in pipeline:
        s, r = reciprocity_pair or (config.source.X_s, config.receivers[0])
        rc = reciprocity_check(config, s, r, "micro")
        floor = reciprocity_noise_floor(config, s, r, "micro")
        (out / "fields").mkdir(exist_ok=True)
        np.savetxt(out / "fields" / "reciprocity_traces.csv", np.column_stack([rc.T, rc.u_ab, rc.u_ba]),
                   delimiter=",", header=f"T,U_src{s:g}_rec{r:g},U_src{r:g}_rec{s:g}", comments="")
        res["reciprocity"] = {"source": s, "receiver": r, "score": rc.score, "noise_floor": floor}
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True))
    return summary
