"""Timing of the cell drag solve against dense elimination on the same cells."""
from __future__ import annotations

import time

import numpy as np

from .drag import back_transform, drag_system, solve_drag_system


def random_cells(n_cells, n_fractions, rng, tau=1e-3):
    """Random cell averages: log-uniform stopping times over six decades."""
    v = rng.normal(size=n_cells)
    u = rng.normal(size=(n_cells, n_fractions))
    eps = rng.uniform(0.01, 1.0, size=(n_cells, n_fractions))
    t = 10.0 ** rng.uniform(-6, 0, size=(n_cells, n_fractions))
    ag = rng.normal(size=n_cells)
    ad = rng.normal(size=(n_cells, n_fractions))
    return v, u, eps, t, ag, ad, tau


def closed_form_solve(v, u, eps, t, ag, ad, tau):
    """New cell velocities ``(v, u)`` via the barycentric / relative split."""
    system = drag_system(v, u, eps, t, ag, ad, tau)
    w_new = system.w + tau * (ag + np.sum(eps * ad, axis=-1))
    return back_transform(w_new, solve_drag_system(eps, t, system.rhs, tau), eps)


def dense_cell_solve(v, u, eps, t, ag, ad, tau):
    """Implicit Euler on the cell equations in ``(v, u_1..u_N)`` by LU elimination.

    ``(v' - v)/tau = A_g - sum eps_i (v' - u_i')/t_i``,
    ``(u_i' - u_i)/tau = A_i + (v' - u_i')/t_i``.
    """
    v = np.atleast_1d(v)
    u = np.atleast_2d(u)
    n_cells, n = u.shape
    mats = np.zeros((n_cells, n + 1, n + 1))
    rhs = np.empty((n_cells, n + 1))
    k = eps / t
    mats[:, 0, 0] = 1.0 / tau + k.sum(axis=1)
    mats[:, 0, 1:] = -k
    idx = np.arange(1, n + 1)
    mats[:, idx, 0] = -1.0 / t
    mats[:, idx, idx] = 1.0 / tau + 1.0 / t
    rhs[:, 0] = v / tau + ag
    rhs[:, 1:] = u / tau + ad
    sol = np.linalg.solve(mats, rhs[..., None])[..., 0]
    return sol[:, 0], sol[:, 1:]


def time_solver(fn, n_fractions, n_cells=2000, repeats=5, seed=0):
    rng = np.random.default_rng(seed)
    args = random_cells(n_cells, n_fractions, rng)
    fn(*args)
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def fit_exponent(ns, times):
    """Slope of ``log(time)`` against ``log(N)``."""
    slope, _ = np.polyfit(np.log(ns), np.log(times), 1)
    return float(slope)


def bench_drag(ns=(8, 16, 32, 64, 128), n_cells=2000, repeats=5, seed=0):
    rows = []
    for n in ns:
        rows.append({"N": int(n),
                     "closed_form_s": time_solver(closed_form_solve, n, n_cells, repeats, seed),
                     "dense_s": time_solver(dense_cell_solve, n, n_cells, max(1, repeats // 2), seed)})
    ns = [r["N"] for r in rows]
    return {"cells": n_cells, "rows": rows,
            "closed_form_exponent": fit_exponent(ns, [r["closed_form_s"] for r in rows]),
            "dense_exponent": fit_exponent(ns, [r["dense_s"] for r in rows])}
