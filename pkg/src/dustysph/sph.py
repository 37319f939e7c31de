"""Cubic-spline kernel, density summation, pressure/viscosity forces and the
internal-energy rate.

Pair loops run over position-sorted particles and visit each pair once, in
ascending sorted-index order, so the floating-point result does not depend on
anything but the particle positions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

SUPPORT = 2.0


@dataclass(frozen=True)
class KernelEval:
    value: np.ndarray
    gradient: np.ndarray
    q: np.ndarray


@njit(cache=True, inline="always")
def _w(r, h):
    q = abs(r) / h
    if q < 1.0:
        return (2.0 / (3.0 * h)) * (1.0 - 1.5 * q * q + 0.75 * q * q * q)
    if q < 2.0:
        s = 2.0 - q
        return (2.0 / (3.0 * h)) * 0.25 * s * s * s
    return 0.0


@njit(cache=True, inline="always")
def _dw(r, h):
    """dW/dr_a for the signed separation r = r_a - r_b (odd in r)."""
    q = abs(r) / h
    if q < 1.0:
        g = (2.0 / (3.0 * h * h)) * (-3.0 * q + 2.25 * q * q)
    elif q < 2.0:
        s = 2.0 - q
        g = -(2.0 / (3.0 * h * h)) * 0.75 * s * s
    else:
        return 0.0
    return g if r > 0.0 else -g


def kernel(r_ab, h: float) -> KernelEval:
    """Cubic spline ``W(|r_ab|, h)`` and its derivative with respect to ``r_a``."""
    if not h > 0:
        raise ValueError("smoothing length must be positive")
    r = np.asarray(r_ab, dtype=float)
    flat = r.ravel()
    w = np.array([_w(v, h) for v in flat]).reshape(r.shape)
    dw = np.array([_dw(v, h) for v in flat]).reshape(r.shape)
    return KernelEval(w, dw, np.abs(r) / h)


@njit(cache=True)
def _density_sorted(xs, mass, h):
    n = xs.shape[0]
    rho = np.zeros(n)
    w0 = _w(0.0, h)
    reach = SUPPORT * h
    for a in range(n):
        rho[a] += mass * w0
        for b in range(a + 1, n):
            r = xs[a] - xs[b]
            if -r >= reach:
                break
            w = mass * _w(r, h)
            rho[a] += w
            rho[b] += w
    return rho


def compute_density(x, mass: float, h: float) -> np.ndarray:
    """Summation density ``rho_a = m sum_b W_ab`` over one phase, self included."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    rho = np.empty_like(x)
    rho[order] = _density_sorted(x[order], float(mass), float(h))
    return rho


def equation_of_state(rho, e, cfg):
    """Return ``(p, c)``.  ``c`` is the sound speed used in the viscosity term."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("equation of state needs positive density")
    if cfg.eos_mode == "isothermal":
        p = cfg.sound_speed ** 2 * rho
        return p, np.full_like(rho, cfg.sound_speed)
    e = np.asarray(e, dtype=float)
    if np.any(e <= 0):
        raise ValueError("equation of state needs positive internal energy")
    p = rho * e * (cfg.gamma - 1.0)
    return p, np.sqrt(cfg.gamma * p / rho)


def isothermal_sound_speed(rho, p):
    """``sqrt(p / rho)``: the sound speed entering Epstein drag and the Courant bound."""
    return np.sqrt(np.asarray(p) / np.asarray(rho))


@njit(cache=True)
def _forces_sorted(xs, vs, rho, p, c, mass, h, alpha, beta, nu2, visc):
    n = xs.shape[0]
    acc = np.zeros(n)
    dedt = np.zeros(n)
    reach = SUPPORT * h
    for a in range(n):
        pa = p[a] / (rho[a] * rho[a])
        for b in range(a + 1, n):
            r = xs[a] - xs[b]
            if -r >= reach:
                break
            grad = _dw(r, h)
            vab = vs[a] - vs[b]
            pb = p[b] / (rho[b] * rho[b])
            pi_ab = 0.0
            if visc and vab * r < 0.0:
                mu = h * vab * r / (r * r + nu2)
                pi_ab = (-alpha * 0.5 * (c[a] + c[b]) * mu + beta * mu * mu) / (0.5 * (rho[a] + rho[b]))
            f = mass * (pa + pb + pi_ab) * grad
            acc[a] -= f
            acc[b] += f
            # v_ab * grad_a W_ab is symmetric under a <-> b
            work = vab * grad
            dedt[a] += mass * (pa + 0.5 * pi_ab) * work
            dedt[b] += mass * (pb + 0.5 * pi_ab) * work
    return acc, dedt


def gas_forces(gas, cfg):
    """Pressure + artificial-viscosity acceleration and the internal-energy rate.

    Returns ``(acc, dedt)`` for every gas particle, ghosts included (callers
    discard ghost entries).  The energy rate is the compressive term plus
    viscous heating; drag heating is not included.
    """
    order = np.argsort(gas.x, kind="stable")
    acc_s, dedt_s = _forces_sorted(
        gas.x[order], gas.v[order], gas.rho[order], gas.p[order], gas.c[order],
        float(gas.mass), float(cfg.h), float(cfg.visc_alpha), float(cfg.visc_beta),
        float(cfg.visc_limiter) ** 2, bool(cfg.viscosity))
    acc = np.empty_like(acc_s)
    dedt = np.empty_like(dedt_s)
    acc[order] = acc_s
    dedt[order] = dedt_s
    return acc, dedt


def gas_acceleration(gas, cfg):
    acc, _ = gas_forces(gas, cfg)
    return acc + cfg.external_accel_gas


def update_internal_energy(gas, cfg, tau, dedt=None):
    """Explicit update ``e + tau * de/dt``; a no-op in isothermal mode."""
    if cfg.eos_mode == "isothermal":
        return gas.e.copy()
    if dedt is None:
        _, dedt = gas_forces(gas, cfg)
    e_new = gas.e + tau * dedt
    e_new[gas.ghost] = gas.e[gas.ghost]
    if np.any(e_new <= 0):
        bad = int(np.argmin(e_new))
        raise FloatingPointError(f"internal energy became non-positive at particle {bad}")
    return e_new


@njit(cache=True)
def _interp_sorted(xq, xs, weight, h):
    out = np.zeros(xq.shape[0])
    reach = SUPPORT * h
    lo = np.searchsorted(xs, xq - reach)
    for i in range(xq.shape[0]):
        acc = 0.0
        for b in range(lo[i], xs.shape[0]):
            r = xq[i] - xs[b]
            if -r >= reach:
                break
            acc += weight[b] * _w(r, h)
        out[i] = acc
    return out


def interpolate(xq, particles, values, h):
    """SPH estimate ``sum_b m f_b / rho_b W(x - x_b)`` at query points ``xq``."""
    xq = np.atleast_1d(np.asarray(xq, dtype=float))
    order = np.argsort(particles.x, kind="stable")
    weight = particles.mass * np.asarray(values, dtype=float)[order] / particles.rho[order]
    return _interp_sorted(xq, particles.x[order], weight, float(h))
