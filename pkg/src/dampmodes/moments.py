"""Phase-space moments of an oscillator state and the single-generator maps.

A state is summarised by its means ``<x>``, ``<p>`` and the symmetrised
covariances ``sigma_xx``, ``sigma_pp``, ``sigma_xp``.  Each of the seven
bilinear generators acts on these five numbers in closed form; the unitary
ones (``L0``, ``M1``, ``M2``) are rotations, hyperbolic rotations and
reciprocal scalings, the dissipative ones (``O0``, ``Oplus``, ``L1plus``,
``L2plus``) rescale or shift the covariance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "DEFAULT_TOL",
    "Generator",
    "GaussianMoments",
    "MomentRates",
    "generalized_uncertainty",
    "check_physical",
    "apply_unitary",
    "apply_dissipative",
    "apply_generator",
    "dissipative_delta",
    "infinitesimal_rates",
    "PHASE_SPACE_OPERATORS",
]

#: Slack allowed on ``delta >= 1/4`` for rounding in long chains of maps.
DEFAULT_TOL = 1e-9


class Generator(str, enum.Enum):
    """The seven hermiticity- and trace-preserving generators."""

    L0 = "L0"
    M1 = "M1"
    M2 = "M2"
    O0 = "O0"  # stands for O0 - I/2
    OPLUS = "Oplus"
    L1PLUS = "L1plus"
    L2PLUS = "L2plus"

    @property
    def is_unitary(self) -> bool:
        return self in _UNITARY

    @classmethod
    def parse(cls, name: str) -> "Generator":
        key = name.strip().lower().replace("_", "").replace("+", "plus")
        for g in cls:
            if g.value.lower() == key:
                return g
        raise ValueError(f"unknown generator {name!r}")


_UNITARY = frozenset({Generator.L0, Generator.M1, Generator.M2})


@dataclass(frozen=True)
class GaussianMoments:
    """First and second moments of position and momentum."""

    mean_x: float = 0.0
    mean_p: float = 0.0
    sigma_xx: float = 0.5
    sigma_pp: float = 0.5
    sigma_xp: float = 0.0

    @property
    def delta(self) -> float:
        return generalized_uncertainty(self)

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.mean_x, self.mean_p])

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.sigma_xx, self.sigma_xp],
                         [self.sigma_xp, self.sigma_pp]])

    def as_array(self) -> np.ndarray:
        return np.array([self.mean_x, self.mean_p,
                         self.sigma_xx, self.sigma_pp, self.sigma_xp])

    @classmethod
    def from_array(cls, values) -> "GaussianMoments":
        mx, mp, sxx, spp, sxp = (float(v) for v in values)
        return cls(mx, mp, sxx, spp, sxp)

    @classmethod
    def from_mean_cov(cls, mean, cov) -> "GaussianMoments":
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        return cls(float(mean[0]), float(mean[1]),
                   float(cov[0, 0]), float(cov[1, 1]),
                   0.5 * float(cov[0, 1] + cov[1, 0]))

    @classmethod
    def vacuum(cls) -> "GaussianMoments":
        return cls()

    @classmethod
    def coherent(cls, mean_x: float, mean_p: float) -> "GaussianMoments":
        return cls(mean_x, mean_p, 0.5, 0.5, 0.0)

    @classmethod
    def thermal(cls, sigma: float) -> "GaussianMoments":
        """Thermal state with equal variances ``sigma`` (``sigma = nbar + 1/2``)."""
        return cls(0.0, 0.0, sigma, sigma, 0.0)


class MomentRates(NamedTuple):
    """Derivatives of the five moments with respect to a generator parameter."""

    d_mean_x: float
    d_mean_p: float
    d_sigma_xx: float
    d_sigma_pp: float
    d_sigma_xp: float


def generalized_uncertainty(m: GaussianMoments) -> float:
    """Return ``sigma_xx * sigma_pp - sigma_xp**2``."""
    return m.sigma_xx * m.sigma_pp - m.sigma_xp ** 2


def check_physical(m: GaussianMoments, tol: float = DEFAULT_TOL) -> bool:
    """True iff the variances are positive and the generalized uncertainty
    relation ``delta >= 1/4`` holds up to ``tol``.

    A matrix with two negative variances can still have ``delta >= 1/4``,
    hence the separate sign test.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return m.sigma_xx > 0 and m.sigma_pp > 0 and generalized_uncertainty(m) >= 0.25 - tol


def apply_unitary(m: GaussianMoments, which: Generator, param: float) -> GaussianMoments:
    """Moments of ``exp(param * G) rho`` for a unitary generator ``G``.

    ``L0`` rotates the means by ``param/2``, ``M1`` is a hyperbolic rotation
    by ``param/2`` and ``M2`` scales ``x`` by ``exp(param/2)`` and ``p`` by
    ``exp(-param/2)``.  The generalized uncertainty is unchanged.
    """
    which = Generator(which)
    if not which.is_unitary:
        raise ValueError(f"{which.value} is not a unitary generator")
    x, p = m.mean_x, m.mean_p
    sxx, spp, sxp = m.sigma_xx, m.sigma_pp, m.sigma_xp
    h = 0.5 * param
    if which is Generator.L0:
        c, s = math.cos(h), math.sin(h)
        return GaussianMoments(
            c * x - s * p,
            s * x + c * p,
            c * c * sxx + s * s * spp - math.sin(param) * sxp,
            s * s * sxx + c * c * spp + math.sin(param) * sxp,
            s * c * (sxx - spp) + math.cos(param) * sxp,
        )
    if which is Generator.M1:
        c, s = math.cosh(h), math.sinh(h)
        return GaussianMoments(
            c * x + s * p,
            s * x + c * p,
            c * c * sxx + s * s * spp + math.sinh(param) * sxp,
            s * s * sxx + c * c * spp + math.sinh(param) * sxp,
            s * c * (sxx + spp) + math.cosh(param) * sxp,
        )
    e = math.exp(h)
    return GaussianMoments(e * x, p / e, e * e * sxx, spp / (e * e), sxp)


def apply_dissipative(m: GaussianMoments, which: Generator, param: float) -> GaussianMoments:
    """Moments of ``exp(param * G) rho`` for a dissipative generator ``G``.

    ``O0`` (meaning ``O0 - I/2``) scales the means by ``exp(param/2)`` and
    the covariance by ``exp(param)``.  ``Oplus`` adds ``param/2`` to both
    variances, ``L1plus`` moves ``param/2`` from ``sigma_xx`` to ``sigma_pp``
    and ``L2plus`` adds ``param/2`` to ``sigma_xp``.  Means are untouched by
    the last three.  The result may be unphysical; see :func:`check_physical`.
    """
    which = Generator(which)
    if which.is_unitary:
        raise ValueError(f"{which.value} is not a dissipative generator")
    h = 0.5 * param
    if which is Generator.O0:
        e = math.exp(param)
        s = math.exp(h)
        return GaussianMoments(s * m.mean_x, s * m.mean_p,
                               e * m.sigma_xx, e * m.sigma_pp, e * m.sigma_xp)
    if which is Generator.OPLUS:
        return GaussianMoments(m.mean_x, m.mean_p,
                               m.sigma_xx + h, m.sigma_pp + h, m.sigma_xp)
    if which is Generator.L1PLUS:
        return GaussianMoments(m.mean_x, m.mean_p,
                               m.sigma_xx - h, m.sigma_pp + h, m.sigma_xp)
    return GaussianMoments(m.mean_x, m.mean_p,
                           m.sigma_xx, m.sigma_pp, m.sigma_xp + h)


def dissipative_delta(m: GaussianMoments, which: Generator, param: float) -> float:
    """Generalized uncertainty after a dissipative map, in the closed form
    expressed through the *initial* moments."""
    which = Generator(which)
    d = generalized_uncertainty(m)
    if which is Generator.O0:
        return math.exp(2.0 * param) * d
    if which is Generator.OPLUS:
        return d + 0.5 * param * (m.sigma_xx + m.sigma_pp) + 0.25 * param ** 2
    if which is Generator.L1PLUS:
        return d + 0.5 * param * (m.sigma_xx - m.sigma_pp) - 0.25 * param ** 2
    if which is Generator.L2PLUS:
        return d - param * m.sigma_xp - 0.25 * param ** 2
    raise ValueError(f"{which.value} is not a dissipative generator")


def apply_generator(m: GaussianMoments, which: Generator, param: float) -> GaussianMoments:
    which = Generator(which)
    if which.is_unitary:
        return apply_unitary(m, which, param)
    return apply_dissipative(m, which, param)


# --- phase-space differential operators -------------------------------------
#
# Each operator acts on a quasi-probability W(q, p).  A term is
# (coeff, q_power, p_power, dq_order, dp_order, multiply_first):
#   multiply_first=False:  coeff * q^a p^b * d^m W
#   multiply_first=True:   coeff * d^m (q^a p^b W)

_Term = tuple[float, int, int, int, int, bool]

PHASE_SPACE_OPERATORS: dict[Generator, tuple[_Term, ...]] = {
    Generator.L0: ((-0.5, 1, 0, 0, 1, False), (0.5, 0, 1, 1, 0, False)),
    Generator.M1: ((-0.5, 1, 0, 0, 1, False), (-0.5, 0, 1, 1, 0, False)),
    Generator.M2: ((-0.5, 1, 0, 1, 0, False), (0.5, 0, 1, 0, 1, True),
                   (-0.5, 0, 0, 0, 0, False)),
    Generator.O0: ((-0.5, 1, 0, 1, 0, False), (-0.5, 0, 1, 0, 1, True),
                   (-0.5, 0, 0, 0, 0, False)),
    Generator.OPLUS: ((0.25, 0, 0, 2, 0, False), (0.25, 0, 0, 0, 2, False)),
    Generator.L1PLUS: ((-0.25, 0, 0, 2, 0, False), (0.25, 0, 0, 0, 2, False)),
    Generator.L2PLUS: ((0.5, 0, 0, 1, 1, False),),
}

_Poly = dict[tuple[int, int], float]


def _poly_mul(f: _Poly, a: int, b: int) -> _Poly:
    return {(i + a, j + b): c for (i, j), c in f.items()}


def _poly_diff(f: _Poly, m: int, n: int) -> _Poly:
    out: _Poly = {}
    for (i, j), c in f.items():
        if i < m or j < n:
            continue
        c = c * math.perm(i, m) * math.perm(j, n)
        key = (i - m, j - n)
        out[key] = out.get(key, 0.0) + c
    return out


def _adjoint(terms: tuple[_Term, ...], f: _Poly) -> _Poly:
    # integration by parts against W: each derivative contributes a sign flip
    out: _Poly = {}
    for coeff, a, b, m, n, multiply_first in terms:
        sign = -1.0 if (m + n) % 2 else 1.0
        if multiply_first:
            g = _poly_mul(_poly_diff(f, m, n), a, b)
        else:
            g = _poly_diff(_poly_mul(f, a, b), m, n)
        for key, c in g.items():
            out[key] = out.get(key, 0.0) + sign * coeff * c
    return out


def _gaussian_expectation(f: _Poly, m: GaussianMoments) -> float:
    raw = {
        (0, 0): 1.0,
        (1, 0): m.mean_x,
        (0, 1): m.mean_p,
        (2, 0): m.sigma_xx + m.mean_x ** 2,
        (0, 2): m.sigma_pp + m.mean_p ** 2,
        (1, 1): m.sigma_xp + m.mean_x * m.mean_p,
    }
    total = 0.0
    for key, c in f.items():
        if c == 0.0:
            continue
        if key not in raw:
            raise ValueError("only polynomials up to degree two are supported")
        total += c * raw[key]
    return total


def infinitesimal_rates(which: Generator, m: GaussianMoments) -> MomentRates:
    """Moment rates at zero parameter, from the phase-space form of a generator.

    The differential operator is moved onto the test polynomials
    ``q, p, q^2, p^2, qp`` by integration by parts and the results are
    averaged over the Gaussian with moments ``m``.
    """
    terms = PHASE_SPACE_OPERATORS[Generator(which)]
    rate = {key: _gaussian_expectation(_adjoint(terms, {key: 1.0}), m)
            for key in ((1, 0), (0, 1), (2, 0), (0, 2), (1, 1))}
    mx, mp = m.mean_x, m.mean_p
    dx, dp = rate[(1, 0)], rate[(0, 1)]
    return MomentRates(
        dx,
        dp,
        rate[(2, 0)] - 2.0 * mx * dx,
        rate[(0, 2)] - 2.0 * mp * dp,
        rate[(1, 1)] - mx * dp - mp * dx,
    )
