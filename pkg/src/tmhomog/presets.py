"""Ready-made experiment configurations and their pipelines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import (
    BulkMedium,
    ConfigError,
    GridSpec,
    InterfaceSpec,
    Lattice,
    ProblemConfig,
    SourcePulse,
    impedance_matched_mass,
)

RHO = 1200.0
C_BULK = 2800.0
H = 10.0
L = 1000.0
N_X = 4000
X_S = 500.0

FIG1F_LEVELS = {"low": (1e-8, 1e4), "medium": (5e-8, 5e4), "high": (1e-7, 1e5)}


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    config: ProblemConfig
    pipeline: tuple[str, ...]
    outputs: tuple[str, ...] = ()
    notes: dict = field(default_factory=dict)


def _bulk():
    return BulkMedium.homogeneous(RHO, C_BULK)


def _config(name, interfaces, f_c, *, N_X=N_X, T_end=0.3, receivers=(), snapshots=(), cfl=1.0):
    return ProblemConfig(
        bulk=_bulk(),
        lattice=Lattice(H, tuple(interfaces)),
        source=SourcePulse(f_c=f_c, X_s=X_S),
        grid=GridSpec(L=L, N_X=N_X, cfl_fraction=cfl, T_end=T_end),
        receivers=tuple(receivers),
        snapshot_times=tuple(snapshots),
        name=name,
    )


def fig1_config(f_c=20.0, f_m=30.0, QC_mean=0.0, QM_mean=0.0, eps_Q=0.0, **grid) -> ProblemConfig:
    itf = InterfaceSpec.sinusoidal(
        0.0, K_mean=2.45e9, M_mean=2e4, eps_C=0.9, eps_M=-0.9, f_m=f_m,
        QC_mean=QC_mean, QM_mean=QM_mean, eps_QC=eps_Q, eps_QM=eps_Q,
    )
    grid.setdefault("snapshots", (0.15,))
    grid.setdefault("receivers", (300.0, 400.0, 600.0, 700.0))
    return _config("fig1", [itf], f_c, **grid)


def fig1f_config(level: str, **grid) -> ProblemConfig:
    try:
        qc, qm = FIG1F_LEVELS[level]
    except KeyError:
        raise ConfigError(f"unknown dissipation level {level!r}; choose from {sorted(FIG1F_LEVELS)}") from None
    cfg = fig1_config(QC_mean=qc, QM_mean=qm, eps_Q=0.9, **grid)
    return cfg.with_(name=f"fig1f_{level}")


def fig2_config(**grid) -> ProblemConfig:
    C_mean = 1.0 / 1e9
    itf = InterfaceSpec.sinusoidal(
        0.0, C_mean=C_mean, M_mean=impedance_matched_mass(RHO, C_BULK, C_mean),
        eps_C=0.9, eps_M=0.9, f_m=20.0,
    )
    grid.setdefault("snapshots", (0.15,))
    grid.setdefault("receivers", (300.0, 700.0))
    return _config("fig2", [itf], 10.0, **grid)


def fig3_config(**grid) -> ProblemConfig:
    i1 = InterfaceSpec.sinusoidal(0.0, K_mean=2.45e9, M_mean=1e4, eps_C=-0.9, eps_M=0.9, f_m=20.0)
    i2 = InterfaceSpec.sinusoidal(
        0.65, K_mean=1e9, M_mean=2e4, eps_C=0.5, eps_M=0.5, f_m=20.0,
        phase_C=-math.pi / 2, phase_M=-math.pi / 2,
    )
    grid.setdefault("snapshots", (0.15,))
    grid.setdefault("receivers", (300.0, 700.0))
    return _config("fig3", [i1, i2], 10.0, **grid)


def fig45_config(f_c: float, f_m: float, **grid) -> ProblemConfig:
    """Massless single interface, K = 1 GPa/m, eps_C = 0.9 (limit case of the second-order model)."""
    itf = InterfaceSpec.sinusoidal(0.0, K_mean=1e9, eps_C=0.9 if f_m else 0.0, f_m=f_m)
    grid.setdefault("snapshots", (0.15,))
    grid.setdefault("receivers", (200.0, 300.0, 700.0, 800.0))
    return _config(f"fig45_fc{f_c:g}_fm{f_m:g}", [itf], f_c, **grid)


def fig6_config(n_interfaces: int = 8, f_m: float = 80.0, **grid) -> ProblemConfig:
    itfs = [
        InterfaceSpec.sinusoidal(
            l / n_interfaces, K_mean=4e9, M_mean=5000.0, eps_C=-0.9, eps_M=0.9, f_m=f_m,
            phase_C=-2 * math.pi * (l + 1) / n_interfaces, phase_M=-2 * math.pi * (l + 1) / n_interfaces,
        )
        for l in range(n_interfaces)
    ]
    grid.setdefault("N_X", 8000)
    grid.setdefault("receivers", (470.0, 530.0))
    grid.setdefault("snapshots", (0.15,))
    return _config("fig6", itfs, 10.0, **grid)


def _fig4(fc):
    cfg = fig45_config(fc, 0.0).with_(name=f"fig4_fc{fc:g}")
    return ExperimentPreset(cfg.name, cfg, ("micro", "leading", "second_order", "compare"), ("fields/", "energy/"),
                            {"interface_energy": True})


def _fig5(fm):
    cfg = fig45_config(20.0, fm).with_(name=f"fig5_fm{fm:g}")
    return ExperimentPreset(cfg.name, cfg, ("micro", "leading", "second_order", "compare"), ("fields/", "energy/"),
                            {"interface_energy": True})


def _build() -> dict[str, ExperimentPreset]:
    p: dict[str, ExperimentPreset] = {}
    c1 = fig1_config()
    p["fig1"] = ExperimentPreset(
        "fig1", c1, ("micro", "leading", "compare", "energy", "dispersion", "field_map"),
        ("fields/", "energy/", "dispersion/"), {"interface_energy": True},
    )
    p["fig1a-e"] = p["fig1"]
    for lvl in FIG1F_LEVELS:
        c = fig1f_config(lvl)
        p[f"fig1f_{lvl}"] = ExperimentPreset(c.name, c, ("micro", "dissipative", "compare", "energy"),
                                               ("fields/", "energy/"), {"interface_energy": True})
    p["fig2"] = ExperimentPreset("fig2", fig2_config(), ("micro", "leading", "compare", "reflection"),
                                 ("fields/", "energy/"), {"interface_energy": True})
    p["fig3"] = ExperimentPreset("fig3", fig3_config(), ("micro", "leading", "compare"), ("fields/", "energy/"),
                                 {"interface_energy": True})
    for fc in (10.0, 20.0, 30.0):
        pr = _fig4(fc)
        p[pr.name] = pr
    for fm in (5.0, 10.0, 20.0, 50.0):
        pr = _fig5(fm)
        p[pr.name] = pr
    p["fig6"] = ExperimentPreset("fig6", fig6_config(), ("micro", "reciprocity"), ("fields/", "energy/"),
                                 {"reciprocity_pair": (500.0, 470.0)})
    return p


PRESETS = _build()

# group names expand to several presets
GROUPS = {
    "fig1f": tuple(f"fig1f_{lvl}" for lvl in FIG1F_LEVELS),
    "fig4": ("fig4_fc10", "fig4_fc20", "fig4_fc30"),
    "fig5": ("fig5_fm5", "fig5_fm10", "fig5_fm20", "fig5_fm50"),
}


def get_preset(name: str) -> list[ExperimentPreset]:
    if name in GROUPS:
        return [PRESETS[n] for n in GROUPS[name]]
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(set(PRESETS) | set(GROUPS)))}")
    return [PRESETS[name]]
