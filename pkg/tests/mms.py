"""Manufactured standing waves U = sin(kX) cos(wT) for the effective schemes."""

import math

import numpy as np

from conftest import small_config
from tmhomog.config import InterfaceSpec
from tmhomog.effective import SecondOrderModel, leading_dt, run_leading, run_second_order, second_order_dt


def modulated_config(N_X, *, limit_case=False, L=200.0):
    if limit_case:
        itf = InterfaceSpec.sinusoidal(0.0, K_mean=1e9, eps_C=0.9, f_m=10.0)
    else:
        itf = InterfaceSpec.sinusoidal(0.0, K_mean=2.45e9, M_mean=2e4, eps_C=0.9, eps_M=-0.9, f_m=30.0)
    return small_config([itf], L=L, N_X=N_X, T_end=0.06)


def _rho0_dot(cfg, T):
    return sum(itf.M.deriv(T) for itf in cfg.interfaces) / cfg.h


def _exact(x, T, k, w):
    return np.sin(k * x) * math.cos(w * T)


def leading_error(N_X, m=3, w=2 * math.pi * 15, T_end=0.06):
    """Max-norm error at the last stored field of the leading-order scheme."""
    cfg = modulated_config(N_X)
    k = m * math.pi / cfg.grid.L

    def forcing(x, T):
        return np.sin(k * x) * (-w * _rho0_dot(cfg, T) * math.sin(w * T)
                                + (cfg.E0(T) * k**2 - cfg.rho0(T) * w**2) * math.cos(w * T))

    x = cfg.grid.x
    dt = leading_dt(cfg)
    hist = run_leading(cfg, dt=dt, T_end=T_end, receivers=(), snapshot_times=(), field_stride=1,
                       forcing=forcing, initial=(_exact(x, 0, k, w), _exact(x, dt, k, w)))
    return float(np.max(np.abs(hist.U[-1] - _exact(x, hist.field_t[-1], k, w))))


def second_order_error(N_X, m=3, w=2 * math.pi * 15, T_end=0.06, model=None):
    cfg = modulated_config(N_X, limit_case=True)
    model = model or SecondOrderModel.from_config(cfg)
    k = m * math.pi / cfg.grid.L
    rho, h = model.rho, model.h

    def forcing(x, T):
        c, s = math.cos(w * T), math.sin(w * T)
        amp = (rho * (model.speed2(T) * k**2 - w**2) * c
               - h**2 * rho * k**2 * w * (model.dB2(T) * s + model.B2(T) * w * c))
        return np.sin(k * x) * amp

    x = cfg.grid.x
    dt = second_order_dt(cfg, model)
    hist = run_second_order(cfg, model=model, dt=dt, T_end=T_end, receivers=(), snapshot_times=(),
                            field_stride=1, forcing=forcing, initial=(_exact(x, 0, k, w), _exact(x, dt, k, w)))
    return float(np.max(np.abs(hist.U[-1] - _exact(x, hist.field_t[-1], k, w))))


def observed_orders(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])
