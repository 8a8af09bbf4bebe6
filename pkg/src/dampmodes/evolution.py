"""Decomposition coefficients of the time-ordered evolution and moment propagation.

In the interaction picture the evolution operator factorises as
``exp(g2 L2+) exp(g1 L1+) exp(g0 O+) exp(h (O0 - I/2))`` with

    dh/dt = -gamma,      dg_i/dt = -eta_bar_i(t) - gamma * g_i,

and ``h(0) = g_i(0) = 0``, so ``h = -gamma t`` and
``g_i(t) = -int_0^t eta_bar_i(s) exp(-gamma (t - s)) ds``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .generators import (DissipativeCoefficients, Regime, UnitaryCoefficients, classify_omega,
                         eta_flow)
from .moments import GaussianMoments, generalized_uncertainty

__all__ = [
    "IntegrationError",
    "GCoefficients",
    "Trajectory",
    "compute_g_ode",
    "g_ode_trajectory",
    "compute_g_quadrature",
    "adaptive_simpson",
    "mean_flow_generator",
    "symplectic_map",
    "propagate_interaction",
    "interaction_delta",
    "asymptotic_delta",
    "to_schrodinger",
    "to_interaction",
    "evolve",
]


class IntegrationError(RuntimeError):
    """Step-size or quadrature control failed to reach the requested tolerance."""


@dataclass(frozen=True)
class GCoefficients:
    h: float
    g0: float
    g1: float
    g2: float
    t: float

    @property
    def g(self) -> np.ndarray:
        return np.array([self.g0, self.g1, self.g2])

    @classmethod
    def from_g(cls, g, gamma: float, t: float) -> "GCoefficients":
        return cls(-gamma * t, float(g[0]), float(g[1]), float(g[2]), float(t))


@dataclass
class Trajectory:
    """Samples of Schrodinger-picture moments and the coefficients behind them."""

    times: np.ndarray
    moments: list[GaussianMoments]
    g: list[GCoefficients] = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.moments) != len(self.times):
            raise ValueError("one moment sample per time is required")
        if self.g and len(self.g) != len(self.times):
            raise ValueError("one coefficient sample per time is required")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def delta(self) -> np.ndarray:
        return np.array([generalized_uncertainty(m) for m in self.moments])

    def moment_array(self) -> np.ndarray:
        """Array of shape ``(n, 5)``: mean_x, mean_p, sigma_xx, sigma_pp, sigma_xp."""
        return np.array([m.as_array() for m in self.moments]).reshape(-1, 5)

    def __len__(self):
        return len(self.times)


def compute_g_ode(u: UnitaryCoefficients, d: DissipativeCoefficients, t: float,
                  rtol: float = 1e-10, atol: float = 1e-12) -> GCoefficients:
    """Integrate the rate equations for ``g_i`` up to time ``t``."""
    return g_ode_trajectory(u, d, [t], rtol=rtol, atol=atol)[0]


def g_ode_trajectory(u: UnitaryCoefficients, d: DissipativeCoefficients, times: Sequence[float],
                     rtol: float = 1e-10, atol: float = 1e-12) -> list[GCoefficients]:
    """Integrate the rate equations once and sample ``g`` at each of ``times``.

    Uses an adaptive embedded Runge-Kutta pair of order 8(5,3).
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    gamma = d.gamma
    if times.size == 0:
        return []
    t_end = float(times.max())
    if t_end == 0.0:
        return [GCoefficients.from_g(np.zeros(3), gamma, t) for t in times]
    flow = eta_flow(u, d)

    def rhs(t, g):
        return -flow(t) - gamma * g

    order = np.argsort(times)
    sol = solve_ivp(rhs, (0.0, t_end), np.zeros(3), method="DOP853",
                    t_eval=times[order], rtol=rtol, atol=atol)
    if sol.status != 0:
        raise IntegrationError(f"rate-equation integration failed: {sol.message}")
    out: list[GCoefficients | None] = [None] * len(times)
    for col, idx in enumerate(order):
        out[idx] = GCoefficients.from_g(sol.y[:, col], gamma, times[idx])
    return out  # type: ignore[return-value]


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-12,
                     max_depth: int = 50, dim: int = 1, rtol: float = 0.0,
                     max_intervals: int = 1 << 18) -> np.ndarray:
    """Adaptive Simpson quadrature of a vectorised, possibly vector-valued ``f``.

    ``f`` maps an array of abscissae of shape ``(n,)`` to ``(dim, n)`` (or
    ``(n,)`` when ``dim == 1``).  All intervals of a refinement level are
    evaluated in one call.  Each accepted interval satisfies
    ``|S2 - S1| <= 15 tol' * width / (b - a)`` and contributes the
    Richardson-corrected ``S2 + (S2 - S1)/15``, where
    ``tol' = max(tol, rtol * (b - a) * max|f|)`` over the samples seen so far.
    """
    def ev(x):
        return np.asarray(f(x), dtype=float).reshape(dim, -1)

    total = np.zeros(dim)
    if b == a:
        return total if dim > 1 else total[0]
    span = b - a
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    mid = 0.5 * (lo + hi)
    f_lo, f_mid, f_hi = ev(lo), ev(mid), ev(hi)
    whole = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
    f_max = float(np.abs(np.concatenate([f_lo, f_mid, f_hi], axis=1)).max())

    for _ in range(max_depth):
        if lo.size > max_intervals:
            break
        w = hi - lo
        q1, q3 = lo + 0.25 * w, lo + 0.75 * w
        f_q = ev(np.concatenate([q1, q3]))
        n = lo.size
        f_q1, f_q3 = f_q[:, :n], f_q[:, n:]
        left = w / 12.0 * (f_lo + 4.0 * f_q1 + f_mid)
        right = w / 12.0 * (f_mid + 4.0 * f_q3 + f_hi)
        halves = left + right
        err = np.max(np.abs(halves - whole), axis=0)
        f_max = max(f_max, float(np.abs(f_q).max()))
        goal = max(tol, rtol * span * f_max)
        ok = err <= 15.0 * goal * w / span
        total += np.sum((halves + (halves - whole) / 15.0)[:, ok], axis=1)
        todo = ~ok
        if not todo.any():
            return total if dim > 1 else total[0]
        lo, mid, hi = lo[todo], mid[todo], hi[todo]
        f_lo, f_mid, f_hi = f_lo[:, todo], f_mid[:, todo], f_hi[:, todo]
        f_q1, f_q3 = f_q1[:, todo], f_q3[:, todo]
        left, right = left[:, todo], right[:, todo]
        q1, q3 = q1[todo], q3[todo]
        lo = np.concatenate([lo, mid])
        hi_new = np.concatenate([mid, hi])
        mid = np.concatenate([q1, q3])
        f_lo, f_hi = np.concatenate([f_lo, f_mid], axis=1), np.concatenate([f_mid, f_hi], axis=1)
        f_mid = np.concatenate([f_q1, f_q3], axis=1)
        whole = np.concatenate([left, right], axis=1)
        hi = hi_new
    raise IntegrationError(f"adaptive Simpson did not converge to {tol:g} within depth "
                           f"{max_depth} and {max_intervals} intervals")


def compute_g_quadrature(u: UnitaryCoefficients, d: DissipativeCoefficients, t: float,
                         tol: float = 1e-12, rtol: float = 1e-13) -> GCoefficients:
    """``g_i(t) = -int_0^t eta_bar_i(s) exp(-gamma (t - s)) ds`` by adaptive Simpson.

    The integrating factor is kept inside the integrand so that it never
    exceeds one, which keeps the absolute tolerance meaningful for large
    ``gamma t``; ``rtol`` relaxes it when the integrand itself grows
    exponentially (hyperbolic regime).
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    gamma = d.gamma
    flow = eta_flow(u, d)

    def integrand(s):
        return flow(s) * np.exp(-gamma * (t - s))

    g = -adaptive_simpson(integrand, 0.0, float(t), tol=tol, dim=3, rtol=rtol)
    return GCoefficients.from_g(g, gamma, t)


def mean_flow_generator(u: UnitaryCoefficients) -> np.ndarray:
    """2x2 generator of the mean flow of ``theta iL0 + phi iM1 + psi iM2``."""
    return 0.5 * np.array([[u.psi, u.phi - u.theta],
                           [u.phi + u.theta, -u.psi]])


def symplectic_map(u: UnitaryCoefficients, t: float) -> np.ndarray:
    """Matrix ``S`` with ``mean -> S mean`` and ``cov -> S cov S^T`` under
    ``exp(t (theta iL0 + phi iM1 + psi iM2))``.

    The generator ``A`` is traceless with ``A @ A = -(omega/2)**2 I``, so the
    exponential is a cos/cosh combination of ``I`` and ``A``.
    """
    a = mean_flow_generator(u)
    w2 = u.theta ** 2 - u.phi ** 2 - u.psi ** 2
    x = 0.5 * math.sqrt(abs(w2)) * t
    if w2 >= 0:
        c = math.cos(x)
        s = t * (math.sin(x) / x if x != 0.0 else 1.0)
    else:
        c = math.cosh(x)
        s = t * (math.sinh(x) / x if x != 0.0 else 1.0)
    return c * np.eye(2) + s * a


def _apply_symplectic(m: GaussianMoments, s: np.ndarray) -> GaussianMoments:
    return GaussianMoments.from_mean_cov(s @ m.mean, s @ m.covariance @ s.T)


def to_schrodinger(m_bar: GaussianMoments, u: UnitaryCoefficients, t: float) -> GaussianMoments:
    """Undo the interaction-picture frame: apply ``exp(-K0 t)``."""
    return _apply_symplectic(m_bar, symplectic_map(u, -t))


def to_interaction(m: GaussianMoments, u: UnitaryCoefficients, t: float) -> GaussianMoments:
    return _apply_symplectic(m, symplectic_map(u, t))


def _check_h(gamma: float, g: GCoefficients, atol: float = 1e-12) -> None:
    if abs(g.h + gamma * g.t) > atol * max(1.0, abs(gamma * g.t)):
        raise ValueError(f"inconsistent coefficients: h={g.h!r}, gamma={gamma!r}, t={g.t!r}")


def propagate_interaction(m0: GaussianMoments, gamma: float, g: GCoefficients) -> GaussianMoments:
    """Interaction-picture moments at ``g.t`` from the initial moments ``m0``."""
    _check_h(gamma, g)
    decay = math.exp(g.h)
    half = math.exp(0.5 * g.h)
    return GaussianMoments(
        half * m0.mean_x,
        half * m0.mean_p,
        decay * m0.sigma_xx + 0.5 * (g.g0 - g.g1),
        decay * m0.sigma_pp + 0.5 * (g.g0 + g.g1),
        decay * m0.sigma_xp + 0.5 * g.g2,
    )


def interaction_delta(m0: GaussianMoments, gamma: float, g: GCoefficients) -> float:
    """Generalized uncertainty at ``g.t`` as a quadratic form in ``g``."""
    _check_h(gamma, g)
    e = math.exp(g.h)
    return (e * e * generalized_uncertainty(m0)
            + 0.5 * e * ((g.g0 + g.g1) * m0.sigma_xx + (g.g0 - g.g1) * m0.sigma_pp
                         - 2.0 * g.g2 * m0.sigma_xp)
            + asymptotic_delta((g.g0, g.g1, g.g2)))


def asymptotic_delta(g_inf) -> float:
    """``(g0**2 - g1**2 - g2**2) / 4``: the uncertainty once the initial state has decayed."""
    g0, g1, g2 = g_inf
    return 0.25 * (g0 * g0 - g1 * g1 - g2 * g2)


def _g_for(u, d, method):
    if method == "ode":
        return lambda t: compute_g_ode(u, d, t)
    if method == "quad":
        return lambda t: compute_g_quadrature(u, d, t)
    raise ValueError(f"unknown method {method!r}")


def _evolve_stepwise(m0: GaussianMoments, u: UnitaryCoefficients, d: DissipativeCoefficients,
                     times: np.ndarray, g_of) -> list[GaussianMoments]:
    """Restart the interaction picture every ``1/|omega|`` time units.

    With ``omega**2 < 0`` both ``g`` and the frame map grow like
    ``exp(|omega| t)`` while the moments stay bounded, so a single frame
    loses everything to cancellation.  The generator is time independent,
    hence chaining short steps is exact.
    """
    w = math.sqrt(abs(classify_omega(u)[0]))
    max_step = 1.0 / w
    cache: dict[float, GCoefficients] = {}
    m, t_prev = m0, 0.0
    out = []
    for t in times:
        span = float(t) - t_prev
        n = math.ceil(span / max_step) if span > 0 else 0
        h = span / n if n else 0.0
        for _ in range(n):
            if h not in cache:
                cache[h] = g_of(h)
            m = to_schrodinger(propagate_interaction(m, d.gamma, cache[h]), u, h)
        out.append(m)
        t_prev = float(t)
    return out


def evolve(m0: GaussianMoments, u: UnitaryCoefficients, d: DissipativeCoefficients,
           times: Sequence[float], g: Sequence[GCoefficients] | None = None,
           method: str = "ode") -> Trajectory:
    """Schrodinger-picture moment trajectory starting from ``m0``.

    ``g`` may be supplied (e.g. from closed forms); otherwise it is computed
    with ``method`` ``"ode"`` or ``"quad"``.  In the hyperbolic regime the
    moments are chained over short steps (see :func:`_evolve_stepwise`);
    the reported ``g`` still run from ``t = 0``.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    if g is None:
        g_of = _g_for(u, d, method)
        g = g_ode_trajectory(u, d, times) if method == "ode" else [g_of(t) for t in times]
        if classify_omega(u)[1] is Regime.HYPERBOLIC:
            moments = _evolve_stepwise(m0, u, d, np.sort(times), g_of)
            return Trajectory(times, moments, list(g))
    moments = [to_schrodinger(propagate_interaction(m0, d.gamma, gi), u, gi.t) for gi in g]
    return Trajectory(times, moments, list(g))
