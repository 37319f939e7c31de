"""Problem setup and the time-step loop."""
from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from . import drag, sph
from .core import (ConfigError, DustyShockIC, DustyWaveIC, ParticleSet, RunPreset, SimConfig,
                   initial_for, validate_config)
from .reference import WaveSolution, solve_dustywave, wave_solution_at

DW_COPIES = range(-4, 4)


class PlacementError(RuntimeError):
    pass


@dataclass
class SimulationState:
    config: SimConfig
    gas: ParticleSet
    dust: List[ParticleSet]
    time: float = 0.0
    step_index: int = 0
    grid: Optional[drag.CellGrid] = None
    name: str = "custom"
    region: tuple = (0.0, 1.0)
    wave: Optional[WaveSolution] = None
    initial: object = None
    # diagnostics
    max_momentum_imbalance: float = 0.0
    courant_limit: float = math.inf
    courant_violations: int = 0

    @property
    def phases(self):
        return [self.gas] + list(self.dust)

    def copy(self):
        out = SimulationState(self.config, self.gas.copy(), [d.copy() for d in self.dust],
                              self.time, self.step_index, self.grid, self.name, self.region,
                              self.wave, self.initial, self.max_momentum_imbalance,
                              self.courant_limit, self.courant_violations)
        return out


def place_particles_for_density(density: Callable, n: int, interval, points=None, shift=True):
    """Equal-mass positions for the profile ``density`` on ``interval``.

    Starting at the interval start, each step ``dx`` solves
    ``int_x^{x+dx} rho = M / n``.  With ``shift`` every particle is moved right
    by half its own interval, which turns a uniform profile into the centred
    lattice ``(k + 1/2) / n``.
    """
    a, b = (float(v) for v in interval)
    if n < 1 or not b > a:
        raise ValueError("need n >= 1 and a non-empty interval")
    pts = None if points is None else [p for p in points if a < p < b]

    def mass(lo, hi):
        inner = None if pts is None else [p for p in pts if lo < p < hi] or None
        val, err = integrate.quad(density, lo, hi, points=inner, epsabs=1e-15, epsrel=1e-13, limit=200)
        if not np.isfinite(val):
            raise PlacementError(f"density integral on [{lo}, {hi}] is not finite")
        return val

    total = mass(a, b)
    if not total > 0:
        raise PlacementError("density must integrate to a positive mass")
    share = total / n
    edges = np.empty(n + 1)
    edges[0] = a
    edges[-1] = b
    for k in range(1, n):
        lo = edges[k - 1]
        f = lambda x: mass(lo, x) - share
        try:
            edges[k] = optimize.brentq(f, lo, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        except ValueError as exc:
            raise PlacementError(f"could not bracket particle {k}") from exc
    x = edges[:-1].copy()
    if shift:
        x += 0.5 * np.diff(edges)
    return x


def _make_gas(x, mass, v, ghost, cfg, e0):
    rho = sph.compute_density(x, mass, cfg.h)
    e = np.asarray(e0, dtype=float) * np.ones_like(x)
    p, c = sph.equation_of_state(rho, e, cfg)
    return ParticleSet("gas", mass, x, v, rho, ghost, e, p, c)


def setup_dustywave(preset: RunPreset, oracle: Optional[WaveSolution] = None) -> SimulationState:
    """Sinusoidal gas and dust profiles on ``[0, 1)`` copied over ``[-4, 4)``."""
    cfg = preset.config
    ic = preset.initial if isinstance(preset.initial, DustyWaveIC) else DustyWaveIC()
    t_stop = np.asarray(cfg.stopping_times, dtype=float)
    eps = np.asarray(cfg.epsilon, dtype=float)
    if oracle is None:
        oracle = solve_dustywave(eps, t_stop, cfg.sound_speed, ic.wavenumber, ic.amplitude, ic.rho_gas)
    if oracle.n_fractions != cfg.n_fractions or not np.allclose(oracle.t_stop, t_stop):
        raise ConfigError("oracle does not match the preset's dust fractions or stopping times")
    k = oracle.wavenumber

    def profile(hat, base):
        return lambda x: base + (hat * np.exp(1j * k * x)).real

    gas_rho = profile(oracle.d_rho_gas, oracle.rho_gas)
    base_x = place_particles_for_density(gas_rho, cfg.n_sph, (0.0, 1.0))
    xg = np.concatenate([base_x + off for off in DW_COPIES])
    _, vg, _, _ = wave_solution_at(oracle, xg, 0.0)
    mg = 1.0 * oracle.rho_gas / cfg.n_sph
    e0 = cfg.sound_speed ** 2 / (cfg.gamma - 1.0)
    gas = _make_gas(xg, mg, vg, _dw_ghosts(xg, cfg), cfg, e0)
    gas.rho[gas.ghost] = gas_rho(xg[gas.ghost])
    _refresh_eos(gas, cfg)

    dust = []
    for j in range(cfg.n_fractions):
        f = profile(oracle.d_rho_dust[j], oracle.rho_dust[j])
        bx = place_particles_for_density(f, cfg.n_sph, (0.0, 1.0))
        xd = np.concatenate([bx + off for off in DW_COPIES])
        _, _, _, u = wave_solution_at(oracle, xd, 0.0)
        md = oracle.rho_dust[j] / cfg.n_sph
        ghost = _dw_ghosts(xd, cfg)
        rho = sph.compute_density(xd, md, cfg.h)
        rho[ghost] = f(xd[ghost])
        dust.append(ParticleSet(j, md, xd, u[j], rho, ghost, t_stop=np.full(xd.size, t_stop[j])))
    return SimulationState(cfg, gas, dust, wave=oracle, initial=ic)


def _dw_ghosts(x, cfg):
    # the open ends of the extended domain would spread apart; a layer of at
    # least 2h, rounded up to whole cells, is held motionless there instead
    width = math.ceil(sph.SUPPORT * cfg.h / cfg.cell_size - 1e-9) * cfg.cell_size
    lo, hi = DW_COPIES[0], DW_COPIES[-1] + 1
    return (x < lo + width) | (x >= hi - width)


def _ghosts(edge, spacing, count, side):
    j = np.arange(count)
    return edge + side * (0.5 + j) * spacing


def setup_dustyshock(preset: RunPreset) -> SimulationState:
    """Sod-type tube on ``[0, 1]`` with motionless ghost particles beyond each end."""
    cfg = preset.config
    ic = preset.initial if isinstance(preset.initial, DustyShockIC) else DustyShockIC()
    (rl, pl, el), (rr, pr, er) = ic.left, ic.right
    x0 = ic.x_discontinuity

    def rho_fn(x):
        return rl if x < x0 else rr

    x = place_particles_for_density(rho_fn, cfg.n_sph, (0.0, 1.0), points=[x0])
    mg = (rl * x0 + rr * (1.0 - x0)) / cfg.n_sph
    reach = sph.SUPPORT * cfg.h
    sl, sr = mg / rl, mg / rr
    nl, nr = math.ceil(reach / sl), math.ceil(reach / sr)
    gl = _ghosts(0.0, sl, nl, -1)[::-1]
    gr = _ghosts(1.0, sr, nr, 1)
    xg = np.concatenate([gl, x, gr])
    ghost = np.zeros(xg.size, bool)
    ghost[:nl] = True
    ghost[nl + x.size:] = True
    e0 = np.where(xg < x0, el, er)
    gas = _make_gas(xg, mg, np.zeros(xg.size), ghost, cfg, e0)
    # ghosts hold the unperturbed states exactly
    gas.rho[ghost] = np.where(xg[ghost] < x0, rl, rr)
    _refresh_eos(gas, cfg)

    dust = []
    for j in range(cfg.n_fractions):
        md = cfg.epsilon[j] * mg
        rho = sph.compute_density(xg, md, cfg.h)
        rho[ghost] = cfg.epsilon[j] * gas.rho[ghost]
        dust.append(ParticleSet(j, md, xg.copy(), np.zeros(xg.size), rho, ghost.copy(),
                                t_stop=np.full(xg.size, np.nan)))
    state = SimulationState(cfg, gas, dust, initial=ic)
    _assign_stopping_times(state)
    return state


def _refresh_eos(gas, cfg):
    # ghosts keep fixed rho and e, so their pressure never changes either
    gas.p, gas.c = sph.equation_of_state(gas.rho, gas.e, cfg)


def _assign_stopping_times(state):
    cfg = state.config
    if not state.dust:
        return
    if cfg.drag_mode == "fixed-stopping-time":
        for j, d in enumerate(state.dust):
            d.t_stop = np.full(len(d), float(cfg.stopping_times[j]))
        return
    if cfg.method == "mk":
        # pairwise scheme: every particle sees its own gas state
        return
    grid = drag.build_cells(state.gas, state.dust, cfg)
    ts = drag.cell_stopping_times(grid, state.gas, state.dust, cfg)
    for d, t in zip(state.dust, ts):
        d.t_stop = t
    state.grid = grid


def setup(preset: RunPreset) -> SimulationState:
    validate_config(preset.config)
    if preset.config.problem == "dustywave":
        state = setup_dustywave(preset)
    else:
        state = setup_dustyshock(preset)
    state.name = preset.name
    return state


def _dust_accelerations(state):
    f = state.config.external_accel_dust
    return [np.full(len(d), float(f[j])) for j, d in enumerate(state.dust)]


def step(state: SimulationState) -> SimulationState:
    """Advance one constant time step in place and return ``state``."""
    cfg = state.config
    tau = cfg.tau
    gas, dust = state.gas, state.dust

    acc_p, dedt = sph.gas_forces(gas, cfg)
    acc_g = acc_p + cfg.external_accel_gas
    acc_d = _dust_accelerations(state)

    if not dust:
        v_new = gas.v + tau * acc_g
        v_new[gas.ghost] = gas.v[gas.ghost]
        u_new = []
    elif cfg.method == "mk":
        v_new, u_new = drag.mk_drag_step(gas, dust, acc_g, cfg, tau)
    else:
        grid = drag.build_cells(gas, dust, cfg)
        if cfg.drag_mode == "epstein":
            for d, t in zip(dust, drag.cell_stopping_times(grid, gas, dust, cfg)):
                d.t_stop = t
        drag.average_cells(grid, gas, dust, acc_g, acc_d)
        v_cell, u_cell = drag.solve_cell_velocities(grid, tau)
        v_new, u_new = drag.update_particle_velocities(grid, gas, dust, acc_g, acc_d,
                                                       v_cell, u_cell, tau)
        imb = drag.cell_momentum_imbalance(grid, gas, dust, gas.v, [d.v for d in dust],
                                           v_new, u_new, acc_g, acc_d, tau)
        state.max_momentum_imbalance = max(state.max_momentum_imbalance, imb)
        state.grid = grid

    # positions with the new velocities; ghosts stay put
    gas.v = v_new
    gas.x = np.where(gas.ghost, gas.x, gas.x + tau * v_new)
    for d, u in zip(dust, u_new):
        d.v = u
        d.x = np.where(d.ghost, d.x, d.x + tau * u)

    gas.e = sph.update_internal_energy(gas, cfg, tau, dedt)

    rho = sph.compute_density(gas.x, gas.mass, cfg.h)
    gas.rho = np.where(gas.ghost, gas.rho, rho)
    _refresh_eos(gas, cfg)
    for d in dust:
        rho = sph.compute_density(d.x, d.mass, cfg.h)
        d.rho = np.where(d.ghost, d.rho, rho)

    state.step_index += 1
    state.time = state.step_index * tau
    limit = courant_check(state)
    state.courant_limit = min(state.courant_limit, limit)
    if tau > limit * (1 + 1e-12):
        state.courant_violations += 1
    if not np.all(np.isfinite(gas.x)) or not np.all(np.isfinite(gas.v)):
        raise FloatingPointError(f"non-finite gas state after step {state.step_index}")
    return state


def courant_check(state: SimulationState) -> float:
    """``h * CFL / max(c_s, |v|, |u_i|)`` with ``c_s = sqrt(p / rho)`` over active particles."""
    cfg = state.config
    gas = state.gas
    act = gas.active
    speeds = [np.max(sph.isothermal_sound_speed(gas.rho[act], gas.p[act]), initial=0.0),
              np.max(np.abs(gas.v[act]), initial=0.0)]
    speeds += [np.max(np.abs(d.v[d.active]), initial=0.0) for d in state.dust]
    top = max(speeds)
    return math.inf if top == 0 else cfg.h * cfg.cfl / top


@dataclass
class RunResult:
    state: SimulationState
    snapshots: list
    probes: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def steps(self):
        return self.state.step_index

    @property
    def final(self):
        return self.snapshots[-1]


def snapshot_times(cfg: SimConfig, n_snapshots=10):
    """Step indices of the ``n_snapshots`` uniformly spaced outputs plus the final one."""
    n = cfg.n_steps
    if n == 0 or n_snapshots <= 0:
        return [n]
    picks = {int(round(k * n / n_snapshots)) for k in range(n_snapshots + 1)}
    return sorted(picks | {n})


def run(source, n_snapshots=10, probes: Sequence[float] = (), observer=None) -> RunResult:
    """Run a preset (or bare config) to its end time.

    ``probes`` are positions whose gas velocity and density are recorded every
    step by kernel interpolation.  ``observer(state)`` is called after setup
    and after every step.
    """
    from .output import take_snapshot

    if isinstance(source, SimConfig):
        source = RunPreset("custom", source, initial_for(source))
    state = setup(source)
    started = _time.perf_counter()
    wanted = set(snapshot_times(state.config, n_snapshots))
    snaps = []
    series = {float(x): {"t": [], "v": [], "rho": []} for x in probes}

    def record():
        for x, s in series.items():
            s["t"].append(state.time)
            s["v"].append(float(sph.interpolate([x], state.gas, state.gas.v, state.config.h)[0]))
            s["rho"].append(float(sph.interpolate([x], state.gas, state.gas.rho,
                                                  state.config.h)[0]))
        if state.step_index in wanted:
            snaps.append(take_snapshot(state))
        if observer is not None:
            observer(state)

    record()
    for _ in range(state.config.n_steps):
        step(state)
        record()
    probes_out = {x: {k: np.array(v) for k, v in s.items()} for x, s in series.items()}
    return RunResult(state, snaps, probes_out, _time.perf_counter() - started)
