"""Solver-agnostic space-time records and their CSV/NPZ writers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HISTORY_FORMAT_VERSION = 1


@dataclass
class EnergyTrace:
    T: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    extra: np.ndarray  # higher-order or interface-stored part
    power: np.ndarray  # power of external forces

    @property
    def total(self) -> np.ndarray:
        return self.kinetic + self.potential + self.extra

    def scaled(self, factor: float) -> "EnergyTrace":
        return EnergyTrace(self.T, self.kinetic * factor, self.potential * factor, self.extra * factor, self.power * factor)

    def write_csv(self, path: str | Path) -> None:
        data = np.column_stack([self.T, self.kinetic, self.potential, self.extra, self.total, self.power])
        np.savetxt(path, data, delimiter=",", header="T,kinetic,potential,extra,total,power", comments="")


class _EnergyLog:
    def __init__(self):
        self.rows: list[tuple[float, float, float, float, float]] = []

    def add(self, T, kin, pot, extra=0.0, power=0.0):
        self.rows.append((T, kin, pot, extra, power))

    def trace(self) -> EnergyTrace:
        a = np.array(self.rows, dtype=float).reshape(-1, 5)
        return EnergyTrace(*(a[:, k] for k in range(5)))


@dataclass
class FieldHistory:
    """Everything a run recorded.

    ``U`` holds full displacement fields every ``field_stride`` steps at
    ``field_t``; receivers are sampled every step at ``rec_t``.  ``snapshots``
    maps requested times to (U, V, S) rows, with V or S possibly None.
    """

    solver: str
    x: np.ndarray
    dt: float
    field_t: np.ndarray
    U: np.ndarray
    rec_x: np.ndarray
    rec_t: np.ndarray
    rec_U: np.ndarray
    energy: EnergyTrace | None = None
    snapshots: dict[float, tuple] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def dX(self) -> float:
        return float(self.x[1] - self.x[0])

    def receiver(self, X: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.rec_x - X)))
        if abs(self.rec_x[k] - X) > 1e-9 * max(1.0, abs(X)):
            raise KeyError(f"no receiver recorded at X={X}")
        return self.rec_U[:, k]

    def field_at(self, T: float) -> np.ndarray:
        """Stored displacement field closest in time to ``T``."""
        k = int(np.argmin(np.abs(self.field_t - T)))
        return self.U[k]

    def write(self, outdir: str | Path) -> None:
        out = Path(outdir)
        (out / "fields").mkdir(parents=True, exist_ok=True)
        (out / "energy").mkdir(parents=True, exist_ok=True)
        tag = self.solver
        for T, (U, V, S) in sorted(self.snapshots.items()):
            cols = [self.x, U]
            names = ["X", "U"]
            for nm, arr in (("V", V), ("S", S)):
                if arr is not None:
                    cols.append(arr)
                    names.append(nm)
            np.savetxt(out / "fields" / f"{tag}_snapshot_T{T:.6f}.csv", np.column_stack(cols),
                       delimiter=",", header=",".join(names), comments="")
        if self.rec_x.size:
            header = "T," + ",".join(f"U_at_X{xr:g}" for xr in self.rec_x)
            np.savetxt(out / "fields" / f"{tag}_receivers.csv", np.column_stack([self.rec_t, self.rec_U]),
                       delimiter=",", header=header, comments="")
        np.savez_compressed(
            out / "fields" / f"{tag}_field.npz",
            format_version=HISTORY_FORMAT_VERSION, x=self.x, T=self.field_t, U=self.U,
        )
        if self.energy is not None:
            self.energy.write_csv(out / "energy" / f"{tag}_energy.csv")
        (out / "fields" / f"{tag}_meta.json").write_text(json.dumps(self.meta, indent=2, sort_keys=True, default=float))


def load_field_npz(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != HISTORY_FORMAT_VERSION:
            raise ValueError(f"unsupported field file version {version}")
        return data["x"], data["T"], data["U"]


class Recorder:
    """Collects receivers, strided fields and snapshots while a solver steps."""

    def __init__(self, x, dt, n_steps, receivers=(), snapshot_times=(), field_stride=0):
        self.x = np.asarray(x, dtype=float)
        self.dt = float(dt)
        dX = self.x[1] - self.x[0]
        rx = np.asarray(receivers, dtype=float)
        if np.any((rx < self.x[0] - 1e-12) | (rx > self.x[-1] + 1e-12)):
            raise ValueError("receiver outside the domain")
        self.rec_x = rx
        pos = (rx - self.x[0]) / dX
        self._i0 = np.clip(np.floor(pos).astype(int), 0, self.x.size - 2)
        self._w = pos - self._i0
        self.rec_t = np.arange(n_steps + 1) * self.dt
        self.rec_U = np.zeros((n_steps + 1, rx.size))
        self.stride = int(field_stride)
        self.field_t: list[float] = []
        self.fields: list[np.ndarray] = []
        self._snap_steps = {int(round(T / self.dt)): float(T) for T in snapshot_times if 0 <= round(T / self.dt) <= n_steps}
        self.snapshots: dict[float, tuple] = {}

    def __call__(self, n, U, V=None, S=None):
        if self.rec_x.size:
            self.rec_U[n] = (1 - self._w) * U[self._i0] + self._w * U[self._i0 + 1]
        if self.stride and n % self.stride == 0:
            self.field_t.append(n * self.dt)
            self.fields.append(np.array(U, dtype=float))
        if n in self._snap_steps:
            cp = lambda a: None if a is None else np.array(a, dtype=float)  # noqa: E731
            self.snapshots[self._snap_steps[n]] = (cp(U), cp(V), cp(S))

    def history(self, solver, energy=None, meta=None) -> FieldHistory:
        U = np.array(self.fields) if self.fields else np.zeros((0, self.x.size))
        return FieldHistory(
            solver=solver, x=self.x, dt=self.dt, field_t=np.array(self.field_t), U=U,
            rec_x=self.rec_x, rec_t=self.rec_t, rec_U=self.rec_U, energy=energy,
            snapshots=self.snapshots, meta=dict(meta or {}),
        )
