"""NumPy implementations of the kernels in ``_core.pyx`` (same signatures)."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


def leading_step(u, u_prev, out, rho_minus, rho_plus, lam2_E):
    out[1:-1] = u[1:-1] + (
        rho_minus * (u[1:-1] - u_prev[1:-1]) + lam2_E * (u[2:] - 2.0 * u[1:-1] + u[:-2])
    ) / rho_plus
    out[0] = out[-1] = 0.0


def second_order_rhs(u, u_prev, out, A2, B, C):
    out[1:-1] = (
        2.0 * (1.0 - A2 + 2.0 * B) * u[1:-1]
        + (A2 - 2.0 * B) * (u[2:] + u[:-2])
        - (1.0 + 2.0 * B - C) * u_prev[1:-1]
        + (B - 0.5 * C) * (u_prev[2:] + u_prev[:-2])
    )
    out[0] = out[-1] = 0.0


def thomas_const(P, Q, rhs, out, work):
    n = rhs.shape[0]
    out[0] = out[-1] = 0.0
    if n < 3:
        return
    ab = np.empty((3, n - 2))
    ab[0] = Q
    ab[1] = P
    ab[2] = Q
    out[1:-1] = solve_banded((1, 1), ab, rhs[1:-1], check_finite=False)


def gather4(vals, idx, w, out):
    np.einsum("ij,ij->i", w, vals[idx], out=out)
