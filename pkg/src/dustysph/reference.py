"""Reference solutions: linear sound waves in a gas with N dust fractions,
the stiff-limit dusty shock tube, and the characteristic speeds of the
isothermal system.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class OracleError(RuntimeError):
    pass


MAX_BISECTIONS = 200


def _as_params(eps, t_stop):
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    t_stop = np.atleast_1d(np.asarray(t_stop, dtype=float))
    if eps.shape != t_stop.shape:
        raise ValueError("eps and t_stop must have the same length")
    return eps, t_stop


def dispersion_F(omega, omega_s, eps, t_stop):
    """``F = omega^2 (1 + sum eps_j / (1 - omega t_j)) + omega_s^2``."""
    eps, t_stop = _as_params(eps, t_stop)
    denom = 1.0 - omega * t_stop
    if np.any(denom == 0):
        raise ZeroDivisionError("F evaluated at a singular point omega = 1/t_j")
    return omega * omega * (1.0 + np.sum(eps / denom)) + omega_s * omega_s


def dispersion_coefficients(omega_s, eps, t_stop):
    """Ascending-power coefficients of the degree N+2 polynomial
    ``omega^2 (prod (1 - omega t_j) + sum_j eps_j prod_{p != j} (1 - omega t_p))
    + omega_s^2 prod (1 - omega t_j)``.
    """
    eps, t_stop = _as_params(eps, t_stop)
    P = np.polynomial.Polynomial
    prod = P([1.0])
    for t in t_stop:
        prod = prod * P([1.0, -t])
    mixed = P([0.0])
    for j, e in enumerate(eps):
        term = P([e])
        for p, t in enumerate(t_stop):
            if p != j:
                term = term * P([1.0, -t])
        mixed = mixed + term
    poly = P([0.0, 0.0, 1.0]) * (prod + mixed) + omega_s ** 2 * prod
    coef = np.zeros(len(eps) + 3)
    coef[: len(poly.coef)] = poly.coef
    return coef


def dispersion_polynomial(omega, omega_s, eps, t_stop):
    """The polynomial form, i.e. ``F * prod (1 - omega t_j)``."""
    coef = dispersion_coefficients(omega_s, eps, t_stop)
    return np.polynomial.polynomial.polyval(omega, coef)


def dispersion_residual(omega, omega_s, eps, t_stop):
    """Backward error ``|P(w)| / sum_k |c_k| |w|^k`` of a candidate root."""
    coef = dispersion_coefficients(omega_s, eps, t_stop)
    num = abs(np.polynomial.polynomial.polyval(omega, coef))
    den = np.polynomial.polynomial.polyval(abs(omega), np.abs(coef))
    return num / den


def _bisect(f, lo, hi):
    f_lo = f(lo)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * abs(mid):
            break
    return 0.5 * (lo + hi)


def _inside(point, towards):
    # nudge off a singular point by a few ulps in the given direction
    return np.nextafter(np.nextafter(np.nextafter(point, towards), towards), towards)


def find_real_roots(eps, t_stop, omega_s):
    """The N real positive roots of the dispersion relation, ascending.

    One root lies in every gap between consecutive singular points ``1/t_j``
    and one beyond the largest; each is isolated by bisection.
    """
    eps, t_stop = _as_params(eps, t_stop)
    if eps.size == 0:
        return np.empty(0)
    if np.any(t_stop <= 0) or np.any(eps <= 0):
        raise ValueError("stopping times and dust fractions must be positive")
    sing = np.sort(1.0 / t_stop)
    if np.any(np.diff(sing) <= 1e-12 * sing[1:]):
        raise OracleError("stopping times must be distinct")

    def f(w):
        return dispersion_F(w, omega_s, eps, t_stop)

    roots = []
    brackets = [(a, b) for a, b in zip(sing[:-1], sing[1:])]
    hi = 2.0 * sing[-1]
    for _ in range(2000):
        if f(hi) > 0:
            break
        hi *= 2.0
    else:
        raise OracleError("no sign change beyond the largest singular point")
    brackets.append((sing[-1], hi))
    for a, b in brackets:
        lo = _inside(a, np.inf)
        up = b if b == hi else _inside(b, -np.inf)
        if not (f(lo) < 0 < f(up)):
            raise OracleError(f"no sign change on ({a:.6g}, {b:.6g})")
        roots.append(_bisect(f, lo, up))
    return np.array(roots)


def complex_pair(real_roots, eps, t_stop, omega_s):
    """The conjugate pair from the root sum and product of the monic polynomial.

    Returns ``(w_plus, w_minus)`` with ``w_plus`` the root with negative
    imaginary part.
    """
    eps, t_stop = _as_params(eps, t_stop)
    n = eps.size
    real_roots = np.asarray(real_roots, dtype=float)
    inv_t = 1.0 / t_stop
    a0 = (-1) ** n * omega_s ** 2 * np.prod(inv_t)
    a_top = -np.sum(inv_t * (1.0 + eps))
    product = (-1) ** (n + 2) * a0 / np.prod(real_roots)
    total = -a_top - np.sum(real_roots)
    disc = product - 0.25 * total * total
    if not disc > 0:
        raise OracleError("remaining roots are not a complex pair")
    half = 0.5 * total
    im = math.sqrt(disc)
    return complex(half, -im), complex(half, im)


@dataclass(frozen=True)
class WaveSolution:
    wavenumber: float
    amplitude: float
    rho_gas: float
    rho_dust: np.ndarray
    t_stop: np.ndarray
    sound_speed: float
    real_roots: np.ndarray
    omega: complex
    omega_conj: complex
    d_rho_gas: complex
    d_v: complex
    d_rho_dust: np.ndarray
    d_u: np.ndarray

    @property
    def n_fractions(self):
        return len(self.t_stop)

    def coefficients(self):
        """Table-style ``(cos, sin)`` coefficient pairs divided by the amplitude."""
        rows = {"rho_g": self.d_rho_gas, "v": self.d_v}
        for j in range(self.n_fractions):
            rows[f"rho_{j + 1}"] = self.d_rho_dust[j]
        for j in range(self.n_fractions):
            rows[f"u_{j + 1}"] = self.d_u[j]
        return {k: (z.real / self.amplitude, -z.imag / self.amplitude) for k, z in rows.items()}

    def damping_factor(self, t):
        return math.exp(-self.omega.real * t)


def wave_amplitudes(omega, wavenumber, sound_speed, rho_gas, rho_dust, t_stop, amplitude):
    """Complex amplitudes of every field for the mode ``omega``, normalised so
    the gas density amplitude equals ``amplitude``."""
    rho_dust = np.atleast_1d(np.asarray(rho_dust, dtype=float))
    t_stop = np.atleast_1d(np.asarray(t_stop, dtype=float))
    lag = 1.0 - omega * t_stop
    if np.any(lag == 0):
        raise OracleError("mode frequency coincides with a singular point")
    omega_s = wavenumber * sound_speed
    d_rho = complex(amplitude)
    d_v = -1j * omega / omega_s * sound_speed * d_rho / rho_gas
    d_u = d_v / lag
    d_rho_dust = rho_dust / rho_gas * d_rho / lag
    return d_rho, d_v, d_rho_dust, d_u


def solve_dustywave(eps, t_stop, sound_speed=1.0, wave_count=1.0, amplitude=1e-4, rho_gas=1.0):
    """Assemble the damped travelling-wave solution for ``cos(2 pi k x)`` data."""
    eps, t_stop = _as_params(eps, t_stop)
    k = 2.0 * math.pi * wave_count
    omega_s = k * sound_speed
    if eps.size:
        # fractions sharing a stopping time act as one fraction carrying their summed eps
        t_u, group = np.unique(t_stop, return_inverse=True)
        eps_u = np.bincount(group, weights=eps)
        roots = find_real_roots(eps_u, t_u, omega_s)
        omega, omega_conj = complex_pair(roots, eps_u, t_u, omega_s)
    else:
        roots = np.empty(0)
        omega, omega_conj = complex(0.0, -omega_s), complex(0.0, omega_s)
    rho_dust = eps * rho_gas
    d_rho, d_v, d_rho_dust, d_u = wave_amplitudes(omega, k, sound_speed, rho_gas, rho_dust,
                                                  t_stop, amplitude)
    return WaveSolution(k, amplitude, rho_gas, rho_dust, t_stop, sound_speed, roots,
                        omega, omega_conj, d_rho, d_v, d_rho_dust, d_u)


def wave_solution_at(sol: WaveSolution, x, t=0.0):
    """Fields ``(rho_g, v, rho_dust (N, n), u (N, n))`` at positions ``x`` and time ``t``."""
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * sol.wavenumber * x - sol.omega * t)
    rho_g = sol.rho_gas + np.real(sol.d_rho_gas * phase)
    v = np.real(sol.d_v * phase)
    rho_d = sol.rho_dust[:, None] + np.real(sol.d_rho_dust[:, None] * phase[None, :])
    u = np.real(sol.d_u[:, None] * phase[None, :])
    return rho_g, v, rho_d, u


def effective_sound_speed(sound_speed, eps):
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(eps < 0):
        raise ValueError("dust-to-gas ratios must be non-negative")
    return sound_speed / math.sqrt(1.0 + float(np.sum(eps)))


def characteristic_speeds(v, u, sound_speed):
    """Eigenvalues of the isothermal flux Jacobian: each ``u_j`` twice and ``v -/+ c``."""
    if not sound_speed > 0:
        raise ValueError("sound speed must be positive")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return np.sort(np.concatenate([np.repeat(u, 2), [v - sound_speed, v + sound_speed]]))


def flux_jacobian(rho_gas, v, rho_dust, u, sound_speed):
    """Matrix ``M`` of ``Phi_t + M Phi_x = Psi`` for ``Phi = (rho_g, v, rho_1, u_1, ...)``."""
    rho_dust = np.atleast_1d(np.asarray(rho_dust, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    n = 2 + 2 * len(u)
    m = np.zeros((n, n))
    m[0, 0], m[0, 1] = v, rho_gas
    m[1, 0], m[1, 1] = sound_speed ** 2 / rho_gas, v
    for j, (rd, uj) in enumerate(zip(rho_dust, u)):
        k = 2 + 2 * j
        m[k, k], m[k, k + 1] = uj, rd
        m[k + 1, k + 1] = uj
    return m


# ---------------------------------------------------------------------------
# Shock tube


@dataclass(frozen=True)
class ShockReference:
    """Exact Riemann solution for the gas-dust mixture in the stiff limit.

    The mixture is an ideal gas of density ``(1 + sum eps) rho_g`` carrying
    the gas pressure, so every sound speed is the pure-gas one divided by
    ``sqrt(1 + sum eps)``.  States are ``(rho_g, p, v)``; wave speeds are
    stored as similarity coordinates ``(x - x0) / t``.
    """

    left: tuple
    right: tuple
    gamma: float
    eps_total: float
    x0: float
    p_star: float
    v_star: float
    rho_star_left: float
    rho_star_right: float
    left_head: float
    left_tail: float
    right_tail: float
    right_head: float

    @property
    def loading(self):
        return 1.0 + self.eps_total

    @property
    def sound_speed_scale(self):
        return 1.0 / math.sqrt(self.loading)

    @property
    def contact(self):
        return self.v_star

    def wave_positions(self, t):
        """Rarefaction head/tail, contact and shock positions at time ``t``
        (Sod orientation: fan to the left, shock to the right)."""
        return {"head": self.x0 + self.left_head * t, "tail": self.x0 + self.left_tail * t,
                "contact": self.x0 + self.v_star * t, "shock": self.x0 + self.right_head * t}

    def _fan(self, s, side):
        g = self.gamma
        lam = self.loading
        rho, p, v = self.left if side < 0 else self.right
        rho = rho * lam
        c = math.sqrt(g * p / rho)
        # side = -1: left-facing fan, side = +1: right-facing fan
        vf = 2.0 / (g + 1.0) * (-side * c + 0.5 * (g - 1.0) * v + s)
        cf = side * (s - vf)
        return rho * (cf / c) ** (2.0 / (g - 1.0)), vf, p * (cf / c) ** (2.0 * g / (g - 1.0))

    def sample(self, x, t):
        """``(rho_g, v, p, e)`` at positions ``x`` and time ``t``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        g = self.gamma
        lam = self.loading
        rl, pl, vl = self.left
        rr, pr, vr = self.right
        if t <= 0:
            left = x < self.x0
            rho = np.where(left, rl * lam, rr * lam)
            v = np.where(left, vl, vr)
            p = np.where(left, pl, pr)
        else:
            s = (x - self.x0) / t
            rho = np.empty_like(x)
            v = np.full_like(x, self.v_star)
            p = np.full_like(x, self.p_star)
            rho[:] = np.where(s < self.contact, self.rho_star_left, self.rho_star_right) * lam
            outer_l = s < self.left_head
            outer_r = s >= self.right_head
            rho[outer_l], v[outer_l], p[outer_l] = rl * lam, vl, pl
            rho[outer_r], v[outer_r], p[outer_r] = rr * lam, vr, pr
            for side, lo, hi in ((-1, self.left_head, self.left_tail),
                                 (1, self.right_tail, self.right_head)):
                fan = (s >= lo) & (s < hi)
                if fan.any():
                    rho[fan], v[fan], p[fan] = self._fan(s[fan], side)
        rho_g = rho / lam
        return rho_g, v, p, p / ((g - 1.0) * rho_g)


def _pressure_function(p, rho, pk, ck, g):
    """Toro's ``f_K(p)`` and derivative for one side of the Riemann problem."""
    if p > pk:
        a = 2.0 / ((g + 1.0) * rho)
        b = (g - 1.0) / (g + 1.0) * pk
        root = math.sqrt(a / (p + b))
        return (p - pk) * root, root * (1.0 - 0.5 * (p - pk) / (p + b))
    ratio = p / pk
    f = 2.0 * ck / (g - 1.0) * (ratio ** ((g - 1.0) / (2.0 * g)) - 1.0)
    df = ratio ** (-(g + 1.0) / (2.0 * g)) / (rho * ck)
    return f, df


def _side(p, rho, pk, vk, ck, g, sign):
    """Star density and the (outer, inner) wave speeds on one side.
    ``sign`` is -1 for the left wave, +1 for the right wave."""
    if p > pk:
        gm = (g - 1.0) / (g + 1.0)
        rho_star = rho * (p / pk + gm) / (gm * p / pk + 1.0)
        speed = vk + sign * ck * math.sqrt((g + 1.0) / (2.0 * g) * p / pk + (g - 1.0) / (2.0 * g))
        return rho_star, speed, speed
    rho_star = rho * (p / pk) ** (1.0 / g)
    c_star = ck * (p / pk) ** ((g - 1.0) / (2.0 * g))
    return rho_star, vk + sign * ck, None, c_star


def shock_reference(left, right, gamma=1.4, eps=(), x0=0.5, tol=1e-12, max_iter=100):
    """Solve the mixture Riemann problem.

    ``left`` / ``right`` are ``(rho_g, p, v)``.  Raises :class:`OracleError`
    when the data would create a vacuum or Newton fails to converge.
    """
    g = float(gamma)
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(eps < 0):
        raise OracleError("dust-to-gas ratios must be non-negative")
    eps_total = float(np.sum(eps))
    lam = 1.0 + eps_total
    rl, pl, vl = (float(v) for v in left)
    rr, pr, vr = (float(v) for v in right)
    if min(rl, pl, rr, pr) <= 0:
        raise OracleError("Riemann states need positive density and pressure")
    ml, mr = rl * lam, rr * lam
    cl = math.sqrt(g * pl / ml)
    cr = math.sqrt(g * pr / mr)
    if 2.0 / (g - 1.0) * (cl + cr) <= vr - vl:
        raise OracleError("initial states generate a vacuum")

    # two-rarefaction guess
    z = (g - 1.0) / (2.0 * g)
    p = ((cl + cr - 0.5 * (g - 1.0) * (vr - vl)) / (cl / pl ** z + cr / pr ** z)) ** (1.0 / z)
    for _ in range(max_iter):
        fl, dfl = _pressure_function(p, ml, pl, cl, g)
        fr, dfr = _pressure_function(p, mr, pr, cr, g)
        step = (fl + fr + vr - vl) / (dfl + dfr)
        p_new = max(p - step, 1e-14 * p)
        if abs(p_new - p) <= tol * 0.5 * (p_new + p):
            p = p_new
            break
        p = p_new
    else:
        raise OracleError("star pressure iteration did not converge")
    fl, _ = _pressure_function(p, ml, pl, cl, g)
    fr, _ = _pressure_function(p, mr, pr, cr, g)
    v_star = 0.5 * (vl + vr) + 0.5 * (fr - fl)

    sides = []
    for rho, pk, vk, ck, sign in ((ml, pl, vl, cl, -1), (mr, pr, vr, cr, 1)):
        out = _side(p, rho, pk, vk, ck, g, sign)
        if out[2] is None:
            rho_star, outer, _, c_star = out
            inner = v_star + sign * c_star
        else:
            rho_star, outer, inner = out
        sides.append((rho_star, outer, inner))
    (rsl, lh, lt), (rsr, rh, rt) = sides
    return ShockReference((rl, pl, vl), (rr, pr, vr), g, eps_total, float(x0), p, v_star,
                          rsl / lam, rsr / lam, lh, lt, rt, rh)
