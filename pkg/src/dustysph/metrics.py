"""Error norms against reference solutions, wave-front extraction and
amplitude fitting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np


@dataclass
class FieldError:
    l1: float
    l2: float
    linf: float

    def as_dict(self):
        return {"L1": self.l1, "L2": self.l2, "Linf": self.linf}


@dataclass
class MetricsReport:
    fields: Dict[str, FieldError] = field(default_factory=dict)
    momentum_drift: float = 0.0
    wall_per_step: Optional[float] = None
    solver_timing: Optional[dict] = None

    def as_dict(self):
        out = {"fields": {k: v.as_dict() for k, v in self.fields.items()},
               "momentum_drift": self.momentum_drift}
        if self.wall_per_step is not None:
            out["wall_per_step"] = self.wall_per_step
        if self.solver_timing is not None:
            out["solver_timing"] = self.solver_timing
        return out


def field_error(numeric, reference) -> FieldError:
    """``L1 = mean|d|``, ``L2 = sqrt(mean d^2)``, ``Linf = max|d|``."""
    a = np.asarray(numeric, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty region of interest")
    d = np.abs(a - b)
    return FieldError(float(d.mean()), float(np.sqrt(np.mean(d * d))), float(d.max()))


def error_metrics(numeric: dict, reference: dict, momentum_drift=0.0) -> MetricsReport:
    """Per-field norms for every key present in both mappings."""
    report = MetricsReport(momentum_drift=float(momentum_drift))
    for key in numeric:
        if key in reference:
            report.fields[key] = field_error(numeric[key], reference[key])
    if not report.fields:
        raise ValueError("no common fields to compare")
    return report


def on_grid(x, values, grid):
    """Linear interpolation of a particle profile (sorted by ``x``) onto ``grid``."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    return np.interp(grid, x[order], np.asarray(values, dtype=float)[order])


def _crossings(x, y, level):
    s = np.sign(y - level)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    out = []
    for i in idx:
        t = (level - y[i]) / (y[i + 1] - y[i])
        out.append(x[i] + t * (x[i + 1] - x[i]))
    return np.array(out)


def wave_fronts(x, rho, v, x0=0.5):
    """Shock, contact and rarefaction-foot positions of a Sod-type profile.

    Applied identically to numerical and reference profiles:

    * shock: right-most crossing of half the plateau velocity,
    * rarefaction foot: left-most crossing of a tenth of the plateau velocity,
    * contact: crossing of the mid density between the two plateaus that lie
      on either side of it, searched between the foot and the shock.
    """
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    x, rho, v = x[order], np.asarray(rho, float)[order], np.asarray(v, float)[order]
    plateau = float(np.median(v[(v > 0.5 * v.max())]))
    up = _crossings(x, v, 0.5 * plateau)
    foot = _crossings(x, v, 0.1 * plateau)
    if up.size == 0 or foot.size == 0:
        raise ValueError("no wave structure found")
    shock = float(up.max())
    rare = float(foot.min())
    # density just behind the shock and just ahead of the contact
    span = shock - x0
    behind = (x > x0 + 0.55 * span) & (x < shock - 0.1 * span)
    ahead = (x > rare) & (x < x0 + 0.2 * span) & (v > 0.9 * plateau)
    if not behind.any() or not ahead.any():
        raise ValueError("plateaus around the contact are not resolved")
    level = 0.5 * (np.median(rho[behind]) + np.median(rho[ahead]))
    sel = (x > x0) & (x < shock)
    cross = _crossings(x[sel], rho[sel], level)
    if cross.size == 0:
        raise ValueError("no contact found")
    # the crossing with the steepest local gradient
    grad = np.abs(np.gradient(rho[sel], x[sel]))
    pick = np.argmax(np.interp(cross, x[sel], grad))
    return {"shock": shock, "contact": float(cross[pick]), "rarefaction": rare}


def fit_amplitude(t, y, omega):
    """Least-squares complex amplitude ``C`` of ``y ~ Re(C exp(-omega t))``.

    Returns ``|C|``; the fitted signal has envelope ``|C| exp(-Re(omega) t)``.
    """
    t = np.asarray(t, dtype=float)
    basis = np.exp(-omega * t)
    design = np.column_stack([basis.real, -basis.imag])
    coef, *_ = np.linalg.lstsq(design, np.asarray(y, dtype=float), rcond=None)
    return float(np.hypot(*coef))


def local_amplitude(t, y, period, when):
    """Half the peak-to-peak swing of ``y`` over the last ``period`` before ``when``."""
    t = np.asarray(t)
    sel = (t <= when + 1e-12) & (t >= when - period)
    seg = np.asarray(y)[sel]
    return 0.5 * float(seg.max() - seg.min())


def reference_fields(snapshot, config, wave=None, shock=None):
    """Numerical and reference values, keyed ``phase:field``, at particle positions.

    Wave runs compare densities and velocities of every phase; shock runs
    compare gas density, velocity, pressure and energy plus dust velocity and
    density, with dust moving at the gas velocity and carrying ``eps`` times
    its density in the stiff limit.
    """
    from .reference import wave_solution_at

    numeric, ref = {}, {}
    for phase in snapshot.phases:
        x = snapshot.column(phase, "x")
        if x.size == 0:
            continue
        j = None if phase == "gas" else int(phase[4:]) - 1
        if wave is not None:
            rg, v, rd, u = wave_solution_at(wave, x, snapshot.time)
            want = {"rho": rg, "v": v} if j is None else {"rho": rd[j], "v": u[j]}
        else:
            rg, v, p, e = shock.sample(x, snapshot.time)
            if j is None:
                want = {"rho": rg, "v": v, "p": p, "e": e}
            else:
                want = {"rho": config.epsilon[j] * rg, "v": v}
        for name, values in want.items():
            numeric[f"{phase}:{name}"] = snapshot.column(phase, name)
            ref[f"{phase}:{name}"] = values
    return numeric, ref


def shock_reference_for(config, initial):
    from .reference import shock_reference

    (rl, pl, _), (rr, pr, _) = initial.left, initial.right
    return shock_reference((rl, pl, 0.0), (rr, pr, 0.0), config.gamma, config.epsilon,
                           initial.x_discontinuity)
