"""Generic generator coefficients and the interaction-picture coefficient flow.

The unitary part ``theta*iL0 + phi*iM1 + psi*iM2`` acts on the diffusion
coefficients ``(eta0, eta1, eta2)`` of ``Oplus, L1plus, L2plus`` through the
3x3 coupling matrix built here.  In the interaction picture the diffusion
coefficients become ``exp(K t) @ eta``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import expm

__all__ = [
    "RegimeError",
    "Regime",
    "UnitaryCoefficients",
    "DissipativeCoefficients",
    "CouplingMatrix",
    "EigenSystem",
    "classify_omega",
    "coupling_matrix",
    "build_coupling_matrix",
    "eigensystem",
    "eta_bar",
    "eta_bar_exp",
    "eta_flow",
]


class RegimeError(ValueError):
    """Raised when a closed form needs a real frequency but ``omega**2 <= 0``."""


class Regime(str, enum.Enum):
    OSCILLATORY = "oscillatory"
    DEGENERATE = "degenerate"
    HYPERBOLIC = "hyperbolic"


@dataclass(frozen=True)
class UnitaryCoefficients:
    """Coefficients of ``iL0``, ``iM1`` and ``iM2``."""

    theta: float = 0.0
    phi: float = 0.0
    psi: float = 0.0

    def scaled(self, factor: float) -> "UnitaryCoefficients":
        return UnitaryCoefficients(factor * self.theta, factor * self.phi, factor * self.psi)


@dataclass(frozen=True)
class DissipativeCoefficients:
    """Relaxation constant and the coefficients of ``Oplus, L1plus, L2plus``."""

    gamma: float = 0.0
    eta0: float = 0.0
    eta1: float = 0.0
    eta2: float = 0.0

    @property
    def eta(self) -> np.ndarray:
        return np.array([self.eta0, self.eta1, self.eta2], dtype=float)


@dataclass(frozen=True)
class CouplingMatrix:
    """The 3x3 matrix representing ``[K0, .]`` on ``(eta0, eta1, eta2)``.

    In the oscillatory regime the entries are divided by ``omega`` and
    ``normalized`` is true; otherwise the raw ``(theta, phi, psi)`` entries
    are kept.
    """

    matrix: np.ndarray
    omega_squared: float
    regime: Regime
    normalized: bool

    @property
    def omega(self) -> float:
        """``sqrt(|omega**2|)``; the imaginary magnitude in the hyperbolic regime."""
        return math.sqrt(abs(self.omega_squared))

    @property
    def unnormalized(self) -> np.ndarray:
        return self.matrix * self.omega if self.normalized else self.matrix.copy()


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray  # (0, i omega, -i omega)
    U: np.ndarray  # columns u0, u+, u-
    V: np.ndarray  # columns v0, v+, v-
    N: float
    omega: float


def classify_omega(u: UnitaryCoefficients, rtol: float = 1e-14) -> tuple[float, Regime]:
    """Return ``theta**2 - phi**2 - psi**2`` and its regime.

    Values within ``rtol`` of the coefficients' scale count as degenerate.
    """
    w2 = u.theta ** 2 - u.phi ** 2 - u.psi ** 2
    scale = u.theta ** 2 + u.phi ** 2 + u.psi ** 2
    if abs(w2) <= rtol * scale:
        return w2, Regime.DEGENERATE
    return w2, (Regime.OSCILLATORY if w2 > 0 else Regime.HYPERBOLIC)


def coupling_matrix(theta: float, phi: float, psi: float) -> np.ndarray:
    return np.array([[0.0, -psi, phi],
                     [-psi, 0.0, theta],
                     [phi, -theta, 0.0]])


def build_coupling_matrix(u: UnitaryCoefficients) -> CouplingMatrix:
    w2, regime = classify_omega(u)
    if regime is Regime.OSCILLATORY:
        w = math.sqrt(w2)
        k = coupling_matrix(u.theta / w, u.phi / w, u.psi / w)
        return CouplingMatrix(k, w2, regime, True)
    return CouplingMatrix(coupling_matrix(u.theta, u.phi, u.psi), w2, regime, False)


def eigensystem(k: CouplingMatrix) -> EigenSystem:
    """Closed-form right and left eigenvectors of the normalized coupling matrix.

    Uses the phase convention ``u0 = -i(th, ph, ps)``, ``v0 = i(-th, ph, ps)``
    and ``u- = -conj(u+)``, ``v- = -conj(v+)`` with hatted entries, so that
    ``V^H U = I``.
    """
    if k.regime is not Regime.OSCILLATORY or not k.normalized:
        raise RegimeError(f"eigensystem needs omega**2 > 0, got {k.omega_squared!r}")
    th, ph, ps = k.matrix[1, 2], k.matrix[0, 2], -k.matrix[0, 1]
    n = math.sqrt(2.0 * (1.0 + ph * ph))
    u0 = -1j * np.array([th, ph, ps])
    v0 = 1j * np.array([-th, ph, ps])
    up = np.array([th * ph + 1j * ps, 1.0 + ph * ph, ph * ps + 1j * th]) / n
    vp = np.array([-th * ph - 1j * ps, 1.0 + ph * ph, ph * ps + 1j * th]) / n
    U = np.column_stack([u0, up, -up.conj()])
    V = np.column_stack([v0, vp, -vp.conj()])
    w = k.omega
    return EigenSystem(np.array([0.0, 1j * w, -1j * w]), U, V, n, w)


def eta_flow(u: UnitaryCoefficients, d: DissipativeCoefficients) -> Callable[[float], np.ndarray]:
    """Return ``t -> eta_bar(t)``; the setup work is done once.

    The callable accepts a scalar or a 1-D array of times and returns an
    array of shape ``(3,)`` or ``(3, len(t))``.
    """
    k = build_coupling_matrix(u)
    eta = d.eta
    if k.regime is Regime.OSCILLATORY:
        es = eigensystem(k)
        u0 = es.U[:, 0]
        v0 = es.V[:, 0]
        p0 = np.outer(u0, v0.conj()).real
        const = p0 @ eta
        cos_part = eta - const
        sin_part = k.matrix @ eta
        w = k.omega

        def flow(t):
            t = np.asarray(t, dtype=float)
            c, s = np.cos(w * t), np.sin(w * t)
            if t.ndim:
                return (const[:, None] + np.multiply.outer(cos_part, c)
                        + np.multiply.outer(sin_part, s))
            return const + cos_part * c + sin_part * s

        return flow

    raw = k.matrix
    if k.regime is Regime.DEGENERATE:
        # raw**3 == 0 when omega == 0, so the series stops after t**2
        k1 = raw @ eta
        k2 = raw @ k1

        def flow(t):
            t = np.asarray(t, dtype=float)
            if t.ndim:
                return eta[:, None] + np.multiply.outer(k1, t) + 0.5 * np.multiply.outer(k2, t * t)
            return eta + k1 * t + 0.5 * k2 * t * t

        return flow

    def flow(t):
        t = np.asarray(t, dtype=float)
        if t.ndim:
            return np.column_stack([expm(raw * ti) @ eta for ti in t]) if t.size else np.zeros((3, 0))
        return expm(raw * float(t)) @ eta

    return flow


def eta_bar(u: UnitaryCoefficients, d: DissipativeCoefficients, t) -> np.ndarray:
    """Interaction-picture diffusion coefficients ``(eta0, eta1, eta2)`` at ``t``.

    Closed form ``(P0 + (I - P0) cos wt + K sin wt) @ eta`` with
    ``P0 = u0 v0^H`` when ``omega**2 > 0``; otherwise the exponential of the
    raw coupling matrix.
    """
    return eta_flow(u, d)(t)


def eta_bar_exp(u: UnitaryCoefficients, d: DissipativeCoefficients, t: float) -> np.ndarray:
    """``expm(K_raw * t) @ eta`` evaluated by scaling and squaring, in any regime."""
    raw = coupling_matrix(u.theta, u.phi, u.psi)
    return expm(raw * t) @ d.eta
