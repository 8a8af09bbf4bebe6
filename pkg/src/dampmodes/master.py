"""Kossakowski-Lindblad, Caldeira-Leggett and Hu-Paz-Zhang presets.

All three share ``theta = 2 omega0``; CL and HPZ add ``psi = -gamma`` and a
diffusion term on ``L1plus``, HPZ an anomalous-diffusion term ``-d L2plus``.
With ``omega = sqrt(4 omega0**2 - gamma**2)`` and ``gh = gamma/omega`` the
interaction-picture coefficients and the ``g_i`` have closed forms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .evolution import GCoefficients, Trajectory, asymptotic_delta, evolve
from .generators import DissipativeCoefficients, RegimeError, UnitaryCoefficients
from .moments import GaussianMoments

__all__ = [
    "EquationKind",
    "MasterEquationSpec",
    "LongTimeDelta",
    "PositivityReport",
    "preset_coefficients",
    "eta_bar_closed",
    "g_closed_values",
    "g_closed",
    "g_stripped",
    "delta_longtime",
    "positivity_check",
    "evolve_preset",
]


class EquationKind(str, enum.Enum):
    KL = "kl"
    CL = "cl"
    HPZ = "hpz"

    @classmethod
    def parse(cls, name: str) -> "EquationKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown master equation {name!r}; expected kl, cl or hpz") from None


@dataclass(frozen=True)
class MasterEquationSpec:
    """One of the three presets with its physical parameters.

    ``b`` below 1/2 is rejected unless ``allow_low_b`` is set. ``d`` is only
    used by HPZ.
    """

    kind: EquationKind
    omega0: float
    gamma: float
    b: float
    d: float = 0.0
    allow_low_b: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", EquationKind(self.kind))
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")
        if self.b < 0.5 and not self.allow_low_b:
            raise ValueError("b must be at least 1/2 (set allow_low_b to override)")
        if not all(map(math.isfinite, (self.omega0, self.gamma, self.b, self.d))):
            raise ValueError("parameters must be finite")

    @property
    def has_closed_form(self) -> bool:
        return self.kind is EquationKind.KL or self.gamma < 2.0 * self.omega0

    @property
    def omega(self) -> float:
        """Frequency of the interaction-picture coefficients."""
        if self.kind is EquationKind.KL:
            return 2.0 * self.omega0
        w2 = 4.0 * self.omega0 ** 2 - self.gamma ** 2
        if w2 <= 0:
            raise RegimeError(f"gamma={self.gamma} >= 2*omega0={2 * self.omega0}: no real omega")
        return math.sqrt(w2)

    @property
    def gamma_hat(self) -> float:
        return self.gamma / self.omega

    @property
    def d_hat(self) -> float:
        return self.d / self.omega if self.kind is EquationKind.HPZ else 0.0


class LongTimeDelta(NamedTuple):
    delta_printed: float
    delta_exact: float


class PositivityReport(NamedTuple):
    ok: bool
    delta_printed: float
    delta_exact: float
    margin: float

    def __bool__(self):
        return self.ok

    def describe(self) -> str:
        state = "satisfied" if self.ok else "VIOLATED"
        return (f"long-time uncertainty relation {state}: "
                f"delta_exact={self.delta_exact:.6g}, delta_printed={self.delta_printed:.6g}, "
                f"margin={self.margin:+.6g}")


def preset_coefficients(spec: MasterEquationSpec) -> tuple[UnitaryCoefficients, DissipativeCoefficients]:
    """Generic coefficients such that ``d rho/dt = -(K0 + Kd) rho`` is the preset."""
    g, b = spec.gamma, spec.b
    theta = 2.0 * spec.omega0
    if spec.kind is EquationKind.KL:
        return UnitaryCoefficients(theta, 0.0, 0.0), DissipativeCoefficients(g, -2.0 * g * b, 0.0, 0.0)
    eta2 = -spec.d if spec.kind is EquationKind.HPZ else 0.0
    return (UnitaryCoefficients(theta, 0.0, -g),
            DissipativeCoefficients(g, -2.0 * g * b, -2.0 * g * b, eta2))


def _require_closed(spec: MasterEquationSpec) -> None:
    if not spec.has_closed_form:
        raise RegimeError("closed forms need gamma < 2*omega0; use the ODE route")


def eta_bar_closed(spec: MasterEquationSpec, t) -> np.ndarray:
    """Interaction-picture ``(eta0, eta1, eta2)`` from the preset closed forms.

    Accepts scalar or array ``t``; the result has shape ``(3,) + shape(t)``.
    """
    _require_closed(spec)
    t = np.asarray(t, dtype=float)
    g, b = spec.gamma, spec.b
    if spec.kind is EquationKind.KL:
        z = np.zeros_like(t)
        return np.array([z - 2.0 * b * g, z, z])
    w = spec.omega
    gh = spec.gamma_hat
    th = 2.0 * spec.omega0 / w
    ps = -gh
    c, s = np.cos(w * t), np.sin(w * t)
    e0 = -2.0 * b * g * (1.0 + gh * gh - gh * gh * c + gh * s)
    e1 = -2.0 * b * g * (c + gh * s)
    e2 = 2.0 * b * g * th * (gh - gh * c + s)
    if spec.kind is EquationKind.HPZ:
        d = spec.d
        e0 = e0 + d * th * gh * (c - 1.0)
        e1 = e1 - d * th * s
        e2 = e2 + d * (ps * ps - (1.0 + ps * ps) * c)
    return np.array([e0, e1, e2])


def g_closed_values(spec: MasterEquationSpec, t) -> np.ndarray:
    """``(g0, g1, g2)`` from the closed forms, shape ``(3,) + shape(t)``."""
    _require_closed(spec)
    t = np.asarray(t, dtype=float)
    b = spec.b
    e = np.exp(-spec.gamma * t)
    if spec.kind is EquationKind.KL:
        z = np.zeros_like(t)
        return np.array([2.0 * b * (1.0 - e), z, z])
    w = spec.omega
    gh = spec.gamma_hat
    r = math.sqrt(1.0 + gh * gh)
    c, s = np.cos(w * t), np.sin(w * t)
    # grouped so that every term vanishes exactly at t = 0
    g0 = 2.0 * b * ((1.0 - e) + gh * gh * (1.0 - c))
    g1 = 2.0 * b * gh * s
    g2 = 2.0 * b * gh * r * (c - 1.0)
    if spec.kind is EquationKind.HPZ:
        dh = spec.d_hat
        g0 = g0 + dh / r * ((1.0 - e) + gh * gh * (1.0 - c) - gh * s)
        g1 = g1 + dh / r * ((e - c) + gh * s)
        g2 = g2 + dh * (gh * (c - 1.0) + s)
    return np.array([g0, g1, g2])


def g_closed(spec: MasterEquationSpec, t: float) -> GCoefficients:
    return GCoefficients.from_g(g_closed_values(spec, float(t)), spec.gamma, float(t))


def g_stripped(spec: MasterEquationSpec) -> np.ndarray:
    """Non-oscillating, non-decaying part of the closed-form ``g_i``."""
    _require_closed(spec)
    b = spec.b
    if spec.kind is EquationKind.KL:
        return np.array([2.0 * b, 0.0, 0.0])
    gh = spec.gamma_hat
    r = math.sqrt(1.0 + gh * gh)
    dh = spec.d_hat
    return np.array([(2.0 * b + dh / r) * (1.0 + gh * gh),
                     0.0,
                     -2.0 * b * gh * r - dh * gh])


def delta_longtime(spec: MasterEquationSpec) -> LongTimeDelta:
    """Printed long-time limit alongside the value from the stripped ``g_i``."""
    b = spec.b
    if spec.kind is EquationKind.KL:
        printed = b * b
    elif spec.kind is EquationKind.CL:
        printed = b * b * (1.0 + spec.gamma_hat ** 2)
    else:
        printed = (b + spec.d / (4.0 * spec.omega0)) ** 2
    return LongTimeDelta(printed, asymptotic_delta(g_stripped(spec)))


def positivity_check(spec: MasterEquationSpec, tol: float = 1e-12) -> PositivityReport:
    """Whether the stripped long-time uncertainty respects ``delta >= 1/4``."""
    lt = delta_longtime(spec)
    margin = lt.delta_exact - 0.25
    return PositivityReport(bool(margin >= -tol), lt.delta_printed, lt.delta_exact, margin)


def evolve_preset(spec: MasterEquationSpec, m0: GaussianMoments, times: Sequence[float],
                  method: str = "auto") -> Trajectory:
    """Moment trajectory for a preset.

    ``method`` is ``"closed"``, ``"ode"``, ``"quad"`` or ``"auto"`` (closed
    forms when ``gamma < 2 omega0``, the ODE otherwise).
    """
    u, d = preset_coefficients(spec)
    if method == "auto":
        method = "closed" if spec.has_closed_form else "ode"
    if method == "closed":
        times = np.asarray(times, dtype=float)
        vals = g_closed_values(spec, times).reshape(3, -1)
        g = [GCoefficients.from_g(vals[:, i], spec.gamma, t) for i, t in enumerate(times)]
        return evolve(m0, u, d, times, g=g)
    return evolve(m0, u, d, times, method=method)
