"""Implicit drag-in-cell coupling between gas and N dust fractions.

Particles are binned on a motionless uniform grid.  Drag is solved implicitly
for the cell-averaged velocities, where the N x N system for the gas-dust
relative velocities has matrix ``B = diag(b) + 1 1^T`` and is inverted in
closed form.  Individual particle velocities are then relaxed towards the
new cell averages.  The explicit Monaghan-Kocharyan pairwise drag is kept as a
baseline.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from numba import njit

from .sph import SUPPORT, _w


class EmptyFractionCell(RuntimeError):
    """A cell holds gas but no particle of some dust fraction."""

    def __init__(self, cell, fraction, position):
        self.cell = cell
        self.fraction = fraction
        self.position = position
        super().__init__(
            f"cell {cell} (x in [{position[0]:.6g}, {position[1]:.6g})) contains gas but no "
            f"particle of dust fraction {fraction + 1}; drag cannot be computed there")


@dataclass
class CellGrid:
    origin: float
    width: float
    n_cells: int
    gas_cell: np.ndarray
    dust_cell: List[np.ndarray]
    gas_count: np.ndarray
    dust_count: np.ndarray          # (n_cells, N)
    # populated by average_cells
    v: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None          # (n_cells, N)
    t_stop: Optional[np.ndarray] = None     # (n_cells, N)
    eps: Optional[np.ndarray] = None        # (n_cells, N)
    acc_gas: Optional[np.ndarray] = None
    acc_dust: Optional[np.ndarray] = None   # (n_cells, N)

    @property
    def has_gas(self):
        return self.gas_count > 0

    def bounds(self, k):
        lo = self.origin + k * self.width
        return lo, lo + self.width


@dataclass
class DragSystem:
    """Per-cell barycentric/relative velocities and the coefficients of ``B``."""

    w: np.ndarray
    w_rel: np.ndarray
    b: np.ndarray
    theta: np.ndarray
    rhs: np.ndarray


def _cell_index(x, origin, width):
    # half-open cells [x_k, x_k + width): a particle on a boundary goes right
    return np.floor((x - origin) / width).astype(np.int64)


def build_cells(gas, dust, cfg, origin=0.0):
    """Bin active particles into cells of width ``cfg.cell_size``.

    Ghost particles are left out (index -1).  Raises :class:`EmptyFractionCell`
    when a cell with gas lacks some dust fraction.
    """
    width = float(cfg.cell_size)
    phases = [gas] + list(dust)
    raw = [_cell_index(ps.x[ps.active], origin, width) for ps in phases]
    lows = [r.min() for r in raw if r.size]
    lowest = min(lows) if lows else 0
    highest = max((r.max() for r in raw if r.size), default=lowest)
    n_cells = int(highest - lowest + 1)
    grid_origin = origin + lowest * width

    idx = []
    for ps, r in zip(phases, raw):
        full = np.full(len(ps), -1, dtype=np.int64)
        full[ps.active] = r - lowest
        idx.append(full)

    gas_count = np.bincount(idx[0][idx[0] >= 0], minlength=n_cells)
    dust_count = np.zeros((n_cells, len(dust)), dtype=np.int64)
    for i, d in enumerate(idx[1:]):
        dust_count[:, i] = np.bincount(d[d >= 0], minlength=n_cells)

    grid = CellGrid(grid_origin, width, n_cells, idx[0], idx[1:], gas_count, dust_count)
    if dust:
        empty = (gas_count[:, None] > 0) & (dust_count == 0)
        if empty.any():
            k, i = np.argwhere(empty)[0]
            raise EmptyFractionCell(int(k), int(i), grid.bounds(int(k)))
    return grid


def _cell_mean(cell, values, count, n_cells):
    sel = cell >= 0
    total = np.bincount(cell[sel], weights=values[sel], minlength=n_cells)
    out = np.zeros(n_cells)
    np.divide(total, count, out=out, where=count > 0)
    return out


def average_cells(grid, gas, dust, acc_gas, acc_dust):
    """Arithmetic cell means of velocities, stopping times and accelerations.

    ``np.bincount`` accumulates in particle-index order, so the sums are
    reproducible.  ``eps`` is the count-based mass ratio ``m_i L_i / (m_g K)``.
    """
    n, nf = grid.n_cells, len(dust)
    grid.v = _cell_mean(grid.gas_cell, gas.v, grid.gas_count, n)
    grid.acc_gas = _cell_mean(grid.gas_cell, acc_gas, grid.gas_count, n)
    grid.u = np.zeros((n, nf))
    grid.t_stop = np.zeros((n, nf))
    grid.acc_dust = np.zeros((n, nf))
    grid.eps = np.zeros((n, nf))
    for i, d in enumerate(dust):
        cell, count = grid.dust_cell[i], grid.dust_count[:, i]
        grid.u[:, i] = _cell_mean(cell, d.v, count, n)
        grid.t_stop[:, i] = _cell_mean(cell, d.t_stop, count, n)
        grid.acc_dust[:, i] = _cell_mean(cell, acc_dust[i], count, n)
        with np.errstate(divide="ignore", invalid="ignore"):
            grid.eps[:, i] = np.where(grid.gas_count > 0,
                                      d.mass * count / (gas.mass * grid.gas_count), 0.0)
    return grid


def drag_system(v, u, eps, t_stop, acc_gas, acc_dust, tau):
    """Forward transform to barycentric ``w`` and relative ``w_i`` velocities.

    All per-fraction arrays are ``(n_cells, N)``; ``v`` and ``acc_gas`` are
    ``(n_cells,)``.
    """
    w = v + np.sum(eps * u, axis=1)
    w_rel = v[:, None] - u
    with np.errstate(divide="ignore"):
        b = (t_stop + tau) / (eps * tau)
    theta = 1.0 + np.sum(1.0 / b, axis=1)
    rhs = w_rel + tau * (acc_gas[:, None] - acc_dust)
    return DragSystem(w, w_rel, b, theta, rhs)


def solve_drag_system(eps, t_stop, rhs, tau):
    """Relative velocities at ``n+1`` from ``B z = rhs``, ``w_i = t_i z_i / (tau eps_i)``.

    Row ``i`` of the closed-form inverse reduces to
    ``w_i = t_i / (t_i + tau) * (rhs_i - S / theta)`` with
    ``S = sum_j rhs_j / b_j`` and ``theta = 1 + sum_j 1 / b_j``; the shared sum
    makes the solve O(N) per cell.  Written with ``1 / b_j = eps_j tau / (t_j + tau)``
    it stays finite as ``t_j`` grows without bound.
    """
    inv_b = eps * tau / (t_stop + tau)
    theta = 1.0 + np.sum(inv_b, axis=-1, keepdims=True)
    s = np.sum(inv_b * rhs, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        lam = np.where(np.isinf(t_stop), 1.0, t_stop / (t_stop + tau))
    return lam * (rhs - s / theta)


def back_transform(w, w_rel, eps):
    """Cell velocities from barycentric and relative velocities."""
    total = 1.0 + np.sum(eps, axis=-1)
    weighted = np.sum(eps * w_rel, axis=-1)
    v = (w + weighted) / total
    # u_i = (w - (1 + sum_{j!=i} eps_j) w_i + sum_{j!=i} eps_j w_j) / (1 + sum_j eps_j)
    rest_eps = np.sum(eps, axis=-1, keepdims=True) - eps
    rest_w = weighted[..., None] - eps * w_rel
    u = (w[..., None] - (1.0 + rest_eps) * w_rel + rest_w) / total[..., None]
    return v, u


def solve_cell_velocities(grid, tau):
    """Cell-averaged ``v*`` and ``u*_i`` at the next step, for cells with gas."""
    sel = grid.has_gas
    v_new = np.zeros(grid.n_cells)
    u_new = grid.u.copy()
    if not sel.any():
        return v_new, u_new
    system = drag_system(grid.v[sel], grid.u[sel], grid.eps[sel], grid.t_stop[sel],
                         grid.acc_gas[sel], grid.acc_dust[sel], tau)
    w_new = system.w + tau * (grid.acc_gas[sel] + np.sum(grid.eps[sel] * grid.acc_dust[sel], axis=1))
    w_rel_new = solve_drag_system(grid.eps[sel], grid.t_stop[sel], system.rhs, tau)
    v_sel, u_sel = back_transform(w_new, w_rel_new, grid.eps[sel])
    v_new[sel] = v_sel
    u_new[sel] = u_sel
    return v_new, u_new


def invert_drag_matrix(b):
    """Closed-form inverse of ``B = diag(b) + 1 1^T``.

    ``B^-1 = -(1/beta) [ (1 - b_i beta) / b_i^2  on the diagonal,
    1 / (b_i b_j) off it ]`` with ``beta = 1 + sum 1/b_i``.
    """
    b = np.asarray(b, dtype=float)
    if np.any(b <= 0):
        raise ValueError("drag matrix coefficients must be positive")
    beta = 1.0 + np.sum(1.0 / b)
    inv = np.outer(1.0 / b, 1.0 / b)
    inv[np.diag_indices_from(inv)] = (1.0 - b * beta) / b ** 2
    return -inv / beta


def drag_matrix(b):
    b = np.asarray(b, dtype=float)
    return np.diag(b) + 1.0


def update_particle_velocities(grid, gas, dust, acc_gas, acc_dust, v_cell, u_cell, tau):
    """Relax particle velocities towards the new cell averages.

    Gas:  ``(1/tau + sum eps/t) v' = v/tau + sum (eps/t) u*' + A``
    Dust: ``(1/tau + 1/t) u' = u/tau + v*'/t + A``

    Ghosts keep their velocities.  Dust in cells without gas feels no drag.
    """
    act = gas.active
    gc = grid.gas_cell[act]
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(grid.has_gas[:, None], grid.eps / grid.t_stop, 0.0)
    rate_sum = rate.sum(axis=1)
    pull = np.sum(rate * u_cell, axis=1)
    v_new = gas.v.copy()
    v_new[act] = ((gas.v[act] / tau + pull[gc] + acc_gas[act])
                  / (1.0 / tau + rate_sum[gc]))

    u_new = []
    for i, d in enumerate(dust):
        out = d.v.copy()
        act = d.active
        dc = grid.dust_cell[i][act]
        coupled = grid.has_gas[dc]
        t = grid.t_stop[dc, i]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_t = np.where(coupled, 1.0 / t, 0.0)
        target = np.where(coupled, v_cell[dc], 0.0)
        out[act] = (d.v[act] / tau + inv_t * target + acc_dust[i][act]) / (1.0 / tau + inv_t)
        u_new.append(out)
    return v_new, u_new


def cell_momentum_imbalance(grid, gas, dust, v_old, u_old, v_new, u_new, acc_gas, acc_dust, tau):
    """Largest per-cell relative momentum imbalance over cells with gas.

    For every cell compares the momentum change of its particles with
    ``tau * sum m A``; the scale is the sum of absolute momenta and impulses.
    """
    n = grid.n_cells

    def cell_sum(cell, values):
        sel = cell >= 0
        return np.bincount(cell[sel], weights=values[sel], minlength=n)

    change = gas.mass * (cell_sum(grid.gas_cell, v_new) - cell_sum(grid.gas_cell, v_old))
    impulse = tau * gas.mass * cell_sum(grid.gas_cell, acc_gas)
    scale = gas.mass * (cell_sum(grid.gas_cell, np.abs(v_new)) + cell_sum(grid.gas_cell, np.abs(v_old))
                        + tau * cell_sum(grid.gas_cell, np.abs(acc_gas)))
    for i, d in enumerate(dust):
        c = grid.dust_cell[i]
        change += d.mass * (cell_sum(c, u_new[i]) - cell_sum(c, u_old[i]))
        impulse += tau * d.mass * cell_sum(c, acc_dust[i])
        scale += d.mass * (cell_sum(c, np.abs(u_new[i])) + cell_sum(c, np.abs(u_old[i]))
                           + tau * cell_sum(c, np.abs(acc_dust[i])))
    sel = grid.has_gas & (scale > 0)
    if not sel.any():
        return 0.0
    return float(np.max(np.abs(change[sel] - impulse[sel]) / scale[sel]))


def epstein_stopping_time(size, material_density, p, rho_gas):
    """``t = s rho_s / (sqrt(p / rho_g) rho_g)``."""
    p = np.asarray(p, dtype=float)
    rho_gas = np.asarray(rho_gas, dtype=float)
    if np.any(p <= 0) or np.any(rho_gas <= 0):
        raise ValueError("Epstein stopping time needs positive gas pressure and density")
    return size * material_density / (np.sqrt(p / rho_gas) * rho_gas)


def cell_stopping_times(grid, gas, dust, cfg):
    """Per-particle stopping times for every dust fraction.

    Fixed mode returns the configured values.  In Epstein mode every dust
    particle takes the value computed from the mean gas density and pressure
    of its cell; particles in cells without gas keep their previous value.
    """
    out = []
    if cfg.drag_mode == "fixed-stopping-time":
        for i, d in enumerate(dust):
            out.append(np.full(len(d), cfg.stopping_times[i]))
        return out
    n = grid.n_cells
    rho_c = _cell_mean(grid.gas_cell, gas.rho, grid.gas_count, n)
    p_c = _cell_mean(grid.gas_cell, gas.p, grid.gas_count, n)
    has = grid.has_gas
    for i, d in enumerate(dust):
        t_cell = np.full(n, np.nan)
        t_cell[has] = epstein_stopping_time(cfg.grain_sizes[i], cfg.grain_material_density,
                                            p_c[has], rho_c[has])
        t = d.t_stop.copy() if d.t_stop is not None else np.full(len(d), np.nan)
        cell = grid.dust_cell[i]
        sel = cell >= 0
        vals = t_cell[cell[sel]]
        keep = np.isnan(vals)
        vals[keep] = t[sel][keep]
        t[sel] = vals
        out.append(t)
    return out


@njit(cache=True)
def _mk_pairs(xg, vg, rhog, cg, xd, ud, rhod, mg, md, coeff, eta2, h):
    ng = xg.shape[0]
    nd = xd.shape[0]
    acc_g = np.zeros(ng)
    acc_d = np.zeros(nd)
    reach = SUPPORT * h
    start = 0
    for a in range(ng):
        while start < nd and xd[start] <= xg[a] - reach:
            start += 1
        for l in range(start, nd):
            r = xd[l] - xg[a]
            if r >= reach:
                break
            # K_al / (rho_a rho_l) = c_a / (s rho_s)
            term = cg[a] * coeff * (vg[a] - ud[l]) * r * r / (r * r + eta2) * _w(r, h)
            acc_g[a] -= md * term
            acc_d[l] += mg * term
    return acc_g, acc_d


def mk_drag_accelerations(gas, dust, cfg):
    """Explicit pairwise drag accelerations for one dust fraction.

    Uses ``K_al = rho_l rho_a c_a / (s rho_s)`` with ``c_a = sqrt(p_a / rho_a)``
    and the clipping ``eta^2 = 0.001 h^2``.
    """
    h = cfg.h
    og = np.argsort(gas.x, kind="stable")
    od = np.argsort(dust.x, kind="stable")
    c = np.sqrt(gas.p / gas.rho)
    coeff = 1.0 / (cfg.grain_sizes[0] * cfg.grain_material_density)
    ag, ad = _mk_pairs(gas.x[og], gas.v[og], gas.rho[og], c[og], dust.x[od], dust.v[od],
                       dust.rho[od], float(gas.mass), float(dust.mass), coeff, 0.001 * h * h, h)
    acc_g = np.empty_like(ag)
    acc_d = np.empty_like(ad)
    acc_g[og] = ag
    acc_d[od] = ad
    return acc_g, acc_d


def mk_drag_step(gas, dust, acc_gas, cfg, tau):
    """One explicit Monaghan-Kocharyan velocity update for N = 1.

    ``acc_gas`` carries the pressure/viscosity acceleration.  Returns the new
    gas and dust velocities; ghosts are left untouched.
    """
    if len(dust) != 1:
        raise ValueError("the Monaghan-Kocharyan step supports exactly one dust fraction")
    d = dust[0]
    drag_g, drag_d = mk_drag_accelerations(gas, d, cfg)
    v_new = gas.v + tau * (acc_gas + drag_g)
    u_new = d.v + tau * (drag_d + cfg.external_accel_dust[0])
    v_new[gas.ghost] = gas.v[gas.ghost]
    u_new[d.ghost] = d.v[d.ghost]
    return v_new, [u_new]
