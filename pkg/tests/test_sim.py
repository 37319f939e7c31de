import math

import numpy as np
import pytest

from dustysph import sph
from dustysph.core import DustyWaveIC, RunPreset, preset, with_overrides
from dustysph.sim import (courant_check, place_particles_for_density, run, setup,
                          setup_dustyshock, snapshot_times, step)


def test_uniform_partition():
    one = lambda x: 1.0
    assert np.allclose(place_particles_for_density(one, 4, (0, 1), shift=False), [0, 0.25, 0.5, 0.75])
    assert np.allclose(place_particles_for_density(one, 4, (0, 1)), [0.125, 0.375, 0.625, 0.875])
    assert np.allclose(place_particles_for_density(one, 1, (0, 1)), [0.5])


def test_cosine_profile_against_inverse_cdf():
    A, n = 1e-4, 200
    rho = lambda x: 1 + A * np.cos(2 * np.pi * x)
    x = place_particles_for_density(rho, n, (0, 1), shift=False)
    # dense cumulative mass, inverted by interpolation
    grid = np.linspace(0, 1, 200001)
    cdf = grid + A * np.sin(2 * np.pi * grid) / (2 * np.pi)
    oracle = np.interp(np.arange(n) / n, cdf, grid)
    assert np.max(np.abs(x - oracle)) < 1e-10
    assert np.max(np.abs(x - np.arange(n) / n)) < 2 * A / (2 * np.pi)


def test_dustywave_setup():
    state = setup(preset("DW2"))
    cfg = state.config
    total = len(state.gas) + sum(len(d) for d in state.dust)
    assert total == 8 * (cfg.n_fractions + 1) * cfg.n_sph
    x = state.gas.x
    A = 1e-4
    table = A * (-0.707212 * np.cos(2 * np.pi * x) + 0.0029033 * np.sin(2 * np.pi * x))
    assert np.max(np.abs(state.gas.v - table)) < 1e-5 * A * 2
    assert not cfg.viscosity
    assert np.all(np.diff(x) > 0)


def test_dustyshock_setup():
    state = setup(preset("DS1"))
    gas = state.gas
    act = gas.x[gas.active]
    left = np.diff(act[act < 0.45])
    right = np.diff(act[act > 0.55])
    assert right.mean() / left.mean() == pytest.approx(8.0, rel=1e-9)
    h = state.config.h
    assert gas.ghost[:].sum() == math.ceil(2 * h / left.mean()) + math.ceil(2 * h / right.mean())
    assert np.all(gas.x[gas.ghost & (gas.x < 0)] >= -2 * h - left.mean())
    assert np.all(gas.v == 0)


def test_ds6_dust_masses():
    state = setup(preset("DS6"))
    g = state.gas
    for d in state.dust:
        assert d.mass * d.active.sum() == pytest.approx(0.5 * g.mass * g.active.sum(), rel=1e-12)


def _still_wave():
    p = preset("DW2")
    return RunPreset("still", with_overrides(p.config, end_time=0.05), DustyWaveIC(amplitude=0.0))


def test_uniform_state_is_equilibrium():
    state = setup(_still_wave())
    x0 = state.gas.x.copy()
    for _ in range(3):
        step(state)
    assert state.time == pytest.approx(0.015)
    assert np.max(np.abs(state.gas.v)) < 1e-11
    assert np.max(np.abs(state.gas.x - x0)) < 1e-13


def test_drag_free_matches_pure_gas():
    base = preset("DS1").config
    coupled = with_overrides(base, drag_mode="fixed-stopping-time", grain_sizes=(),
                             stopping_times=(np.inf,), timestep=0.001, end_time=0.02)
    gas_only = with_overrides(base, n_fractions=0, epsilon=(), grain_sizes=(),
                              external_accel_dust=(), timestep=0.001, end_time=0.02)
    a = run(coupled, n_snapshots=0).state.gas
    b = run(gas_only, n_snapshots=0).state.gas
    assert np.allclose(a.v, b.v, rtol=1e-12, atol=1e-14)
    assert np.allclose(a.e, b.e, rtol=1e-12)


def test_one_wave_step_balances_cells():
    state = setup(preset("DW2"))
    step(state)
    assert state.max_momentum_imbalance < 1e-14


@pytest.mark.parametrize("name", ["DS1", "DW2"])
def test_momentum_changes_only_through_ghosts(name):
    state = setup(preset(name))
    for _ in range(2):
        step(state)
    before = sum(ps.mass * np.sum(ps.v[ps.active]) for ps in state.phases)
    acc, _ = sph.gas_forces(state.gas, state.config)
    wall = -state.config.tau * state.gas.mass * np.sum(acc[state.gas.ghost])
    step(state)
    after = sum(ps.mass * np.sum(ps.v[ps.active]) for ps in state.phases)
    scale = sum(ps.mass * np.sum(np.abs(ps.v)) for ps in state.phases)
    assert abs(after - before - wall) < 1e-13 * scale


def test_courant_examples():
    state = setup(_still_wave())
    assert courant_check(state) == pytest.approx(0.005)
    cfg = with_overrides(state.config, cfl=0.25, smoothing_length=0.02)
    state.config = cfg
    assert courant_check(state) == pytest.approx(0.005)


def test_snapshot_schedule():
    assert snapshot_times(preset("DS1").config) == [0, 4, 8, 12, 16, 20, 24, 28, 32, 36, 40]
    assert snapshot_times(with_overrides(preset("DS1").config, end_time=0.0)) == [0]


def test_zero_end_time_single_snapshot():
    p = preset("DS1")
    res = run(RunPreset("DS1", with_overrides(p.config, end_time=0.0), p.initial))
    assert res.steps == 0 and len(res.snapshots) == 1 and res.final.time == 0.0


def test_step_counts(runs):
    assert runs("DS1").steps == 40 and runs("DS1").final.time == pytest.approx(0.2)
    assert runs("DW2").steps == 400 and runs("DW2").final.time == pytest.approx(2.0)


def test_ghosts_never_move(runs):
    fresh = setup(preset("DS1"))
    end = runs("DS1").state
    for a, b in zip(fresh.phases, end.phases):
        assert np.array_equal(a.x[a.ghost], b.x[b.ghost])
        assert np.array_equal(a.v[a.ghost], b.v[b.ghost])


def test_snapshot_masses_constant(runs):
    masses = [s.total_mass for s in runs("DS1").snapshots]
    assert all(m == masses[0] for m in masses)


def test_wave_particles_stay_ordered(runs):
    state = runs("DW2").state
    for ps in state.phases:
        assert np.all(np.diff(ps.x) > 0)


def test_empty_fraction_aborts():
    p = preset("DW2")
    tiny = RunPreset("tiny", with_overrides(p.config, cell_size=1e-4, end_time=0.01), p.initial)
    from dustysph.drag import EmptyFractionCell
    with pytest.raises(EmptyFractionCell):
        run(tiny)
