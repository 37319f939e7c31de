"""Estimator-style wrappers: ``fit`` runs (or solves), ``predict`` samples the
result at query positions.  Hyper-parameters live in ``__init__`` so
``get_params`` / ``set_params`` / ``clone`` work as usual."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import sph
from .core import preset as _preset
from .core import with_overrides
from .reference import shock_reference, solve_dustywave, wave_solution_at
from .sim import run


def _positions(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X = check_array(X)
    if X.shape[1] != 1:
        raise ValueError(f"expected one column of positions, got {X.shape[1]}")
    return X[:, 0]


class DustyGasSPH(BaseEstimator):
    """Run a preset.  ``predict`` gives kernel-interpolated fields at the end time.

    Output columns: gas density, gas velocity, then density and velocity of
    each dust fraction.
    """

    def __init__(self, preset="DS1", method=None, n_snapshots=10, overrides=None):
        self.preset = preset
        self.method = method
        self.n_snapshots = n_snapshots
        self.overrides = overrides

    def fit(self, X=None, y=None):
        p = _preset(self.preset)
        changes = dict(self.overrides or {})
        if self.method is not None:
            changes["method"] = self.method
        if changes:
            p = type(p)(p.name, with_overrides(p.config, **changes), p.initial)
        self.result_ = run(p, n_snapshots=self.n_snapshots)
        self.state_ = self.result_.state
        self.snapshots_ = self.result_.snapshots
        self.n_fractions_ = len(self.state_.dust)
        return self

    def predict(self, X):
        check_is_fitted(self, "state_")
        x = _positions(X)
        h = self.state_.config.h
        cols = []
        for ps in self.state_.phases:
            cols.append(sph.interpolate(x, ps, ps.rho, h))
            cols.append(sph.interpolate(x, ps, ps.v, h) / np.maximum(
                sph.interpolate(x, ps, np.ones(len(ps)), h), 1e-300))
        return np.column_stack(cols)


class DustyWaveReference(BaseEstimator):
    """Linear damped sound wave in gas with dust fractions.

    ``predict(X, t)`` columns: gas density, gas velocity, dust densities,
    dust velocities.
    """

    def __init__(self, eps=(1.0,), t_stop=(1.0,), sound_speed=1.0, wave_count=1.0,
                 amplitude=1e-4, rho_gas=1.0):
        self.eps = eps
        self.t_stop = t_stop
        self.sound_speed = sound_speed
        self.wave_count = wave_count
        self.amplitude = amplitude
        self.rho_gas = rho_gas

    def fit(self, X=None, y=None):
        self.solution_ = solve_dustywave(self.eps, self.t_stop, self.sound_speed, self.wave_count,
                                         self.amplitude, self.rho_gas)
        self.omega_ = self.solution_.omega
        return self

    def predict(self, X, t=0.0):
        check_is_fitted(self, "solution_")
        rg, v, rd, u = wave_solution_at(self.solution_, _positions(X), t)
        return np.column_stack([rg, v, *rd, *u])


class DustyShockReference(BaseEstimator):
    """Stiff-limit dusty shock tube; ``predict(X, t)`` gives ``rho_g, v, p, e``.

    States are ``(rho_g, p, v)``.
    """

    def __init__(self, left=(1.0, 1.0, 0.0), right=(0.125, 0.1, 0.0), gamma=1.4, eps=(1.0,),
                 x0=0.5):
        self.left = left
        self.right = right
        self.gamma = gamma
        self.eps = eps
        self.x0 = x0

    def fit(self, X=None, y=None):
        self.reference_ = shock_reference(self.left, self.right, self.gamma, self.eps, self.x0)
        return self

    def predict(self, X, t=0.2):
        check_is_fitted(self, "reference_")
        return np.column_stack(self.reference_.sample(_positions(X), t))
