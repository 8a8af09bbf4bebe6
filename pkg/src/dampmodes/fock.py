"""Truncated Fock-space density-matrix oracle.

Every generator is a sum ``sum_k c_k (A_k x B_k)`` of superoperators acting as
``rho -> A rho B``.  Density matrices are column-stacked, so ``A x B`` is the
matrix ``kron(B.T, A)``.  Superoperators are stored as sparse CSR matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm as dense_expm
from scipy.sparse.linalg import expm_multiply

from .generators import DissipativeCoefficients, UnitaryCoefficients
from .moments import GaussianMoments, Generator, generalized_uncertainty

__all__ = [
    "TruncationError",
    "TruncationLeakError",
    "TruncationConfig",
    "COMMUTATOR_TABLE",
    "build_ladder",
    "quadratures",
    "generator_terms",
    "build_generator_super",
    "generator_superoperator",
    "vec",
    "unvec",
    "CommutatorEntry",
    "CommutatorReport",
    "commutator_table_check",
    "gaussian_state",
    "moments_from_rho",
    "evolve_oracle",
    "evolve_oracle_trajectory",
]


class TruncationError(ValueError):
    """The requested state does not fit in the Fock cutoff."""


class TruncationLeakError(RuntimeError):
    """Population reached the top of the truncated space during evolution."""


@dataclass(frozen=True)
class TruncationConfig:
    dim: int = 40
    tail_tol: float = 1e-8

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError("dim must be an integer >= 2")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")


G = Generator

#: ``[row, column]`` commutators of the generators; ``None`` is zero and a
#: leading ``-`` negates.  ``O0`` commutes like ``O0 - I/2``.
COMMUTATOR_TABLE: dict[Generator, tuple] = {
    G.L0: (None, "-M2", "M1", None, None, "-L2plus", "L1plus"),
    G.M1: ("M2", None, "L0", None, "L2plus", None, "Oplus"),
    G.M2: ("-M1", "-L0", None, None, "-L1plus", "-Oplus", None),
    G.O0: (None, None, None, None, "Oplus", "L1plus", "L2plus"),
    G.OPLUS: (None, "-L2plus", "L1plus", "-Oplus", None, None, None),
    G.L1PLUS: ("L2plus", None, "Oplus", "-L1plus", None, None, None),
    G.L2PLUS: ("-L1plus", "-Oplus", None, "-L2plus", None, None, None),
}


def build_ladder(cfg: TruncationConfig) -> tuple[np.ndarray, np.ndarray]:
    """Truncated annihilation and creation matrices, ``<n|a|n+1> = sqrt(n+1)``."""
    a = np.diag(np.sqrt(np.arange(1, cfg.dim, dtype=float)), 1).astype(complex)
    return a, a.conj().T


def quadratures(cfg: TruncationConfig) -> tuple[np.ndarray, np.ndarray]:
    a, ad = build_ladder(cfg)
    return (a + ad) / math.sqrt(2.0), 1j * (ad - a) / math.sqrt(2.0)


def generator_terms(which: Generator, a: np.ndarray, ad: np.ndarray) -> list[tuple[complex, np.ndarray, np.ndarray]]:
    """``(c, A, B)`` triples with ``G = sum c (A x B)``."""
    one = np.eye(a.shape[0], dtype=complex)
    n = ad @ a
    a2, ad2 = a @ a, ad @ ad
    which = Generator(which)
    if which is G.L0:
        return [(0.5j, n, one), (-0.5j, one, n)]
    if which is G.M1:
        return [(0.25j, ad2, one), (0.25j, a2, one), (-0.25j, one, ad2), (-0.25j, one, a2)]
    if which is G.M2:
        return [(0.25, ad2, one), (-0.25, a2, one), (-0.25, one, ad2), (0.25, one, a2)]
    if which is G.O0:
        return [(0.5, ad, a), (-0.5, a, ad), (-0.5, one, one)]
    if which is G.OPLUS:
        return [(0.5, ad, a), (0.5, a, ad), (-0.5, n, one), (-0.5, one, n), (-0.5, one, one)]
    if which is G.L1PLUS:
        return [(0.5, ad, ad), (0.5, a, a), (-0.25, ad2, one), (-0.25, a2, one),
                (-0.25, one, ad2), (-0.25, one, a2)]
    return [(-0.5j, ad, ad), (0.5j, a, a), (0.25j, ad2, one), (-0.25j, a2, one),
            (0.25j, one, ad2), (-0.25j, one, a2)]


def _sandwich(a: np.ndarray, b: np.ndarray) -> sp.csr_matrix:
    return sp.kron(sp.csr_matrix(b.T), sp.csr_matrix(a), format="csr")


def build_generator_super(which: Generator, cfg: TruncationConfig,
                          transposed: bool = False) -> sp.csr_matrix:
    """Superoperator matrix of a generator.

    With ``transposed=True`` every ``A x B`` is replaced by ``B x A``, which
    is the transposition that moves the map from states onto observables:
    ``tr(o S rho) = tr((S^T o) rho)``.
    """
    a, ad = build_ladder(cfg)
    out = sp.csr_matrix((cfg.dim ** 2, cfg.dim ** 2), dtype=complex)
    for c, left, right in generator_terms(which, a, ad):
        out = out + c * (_sandwich(right, left) if transposed else _sandwich(left, right))
    return out.tocsr()


def generator_superoperator(u: UnitaryCoefficients, d: DissipativeCoefficients,
                            cfg: TruncationConfig) -> sp.csr_matrix:
    """``K0 + Kd``; the state obeys ``d rho/dt = -(K0 + Kd) rho``."""
    weights = {G.L0: u.theta, G.M1: u.phi, G.M2: u.psi, G.O0: d.gamma,
               G.OPLUS: d.eta0, G.L1PLUS: d.eta1, G.L2PLUS: d.eta2}
    out = sp.csr_matrix((cfg.dim ** 2, cfg.dim ** 2), dtype=complex)
    for which, w in weights.items():
        if w != 0.0:
            out = out + w * build_generator_super(which, cfg)
    return out.tocsr()


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


# --- commutators --------------------------------------------------------------

class CommutatorEntry(NamedTuple):
    row: Generator
    col: Generator
    expected: str
    deviation: float


@dataclass
class CommutatorReport:
    entries: list[CommutatorEntry]
    dim: int

    @property
    def max_deviation(self) -> float:
        return max(e.deviation for e in self.entries)

    def passed(self, tol: float = 1e-10) -> bool:
        return all(e.deviation < tol for e in self.entries)

    def failures(self, tol: float = 1e-10) -> list[CommutatorEntry]:
        return [e for e in self.entries if not e.deviation < tol]


def commutator_table_check(cfg: TruncationConfig) -> CommutatorReport:
    """Compare all 49 superoperator commutators with the tabulated results.

    Only matrix elements whose row and column both map to Fock indices below
    ``dim - 2`` are compared; the top two levels carry truncation artefacts.
    """
    dim = cfg.dim
    supers = {g: build_generator_super(g, cfg).toarray() for g in Generator}
    idx = np.arange(dim * dim)
    i, j = idx % dim, idx // dim
    interior = np.flatnonzero((i < dim - 2) & (j < dim - 2))
    block = np.ix_(interior, interior)
    order = list(Generator)
    entries = []
    for row in order:
        for k, col in enumerate(order):
            comm = supers[row] @ supers[col] - supers[col] @ supers[row]
            spec = COMMUTATOR_TABLE[row][k]
            if spec is None:
                target = np.zeros_like(comm)
                label = "0"
            else:
                sign = -1.0 if spec.startswith("-") else 1.0
                target = sign * supers[Generator.parse(spec.lstrip("-"))]
                label = spec
            dev = float(np.abs((comm - target)[block]).max())
            entries.append(CommutatorEntry(row, col, label, dev))
    return CommutatorReport(entries, dim)


# --- states and moments ---------------------------------------------------------

def _thermal_populations(nbar: float, dim: int) -> np.ndarray:
    if nbar <= 0:
        p = np.zeros(dim)
        p[0] = 1.0
        return p
    q = nbar / (nbar + 1.0)
    return (1.0 - q) * q ** np.arange(dim)


def gaussian_state(cfg: TruncationConfig, m: GaussianMoments, pad: int | None = None,
                   tol: float = 1e-9) -> np.ndarray:
    """Displaced squeezed thermal state with the requested moments.

    The state is assembled in an enlarged space of ``dim + pad`` levels and
    then cut to ``dim``; the discarded weight must stay below ``tail_tol``.
    """
    delta = generalized_uncertainty(m)
    if delta < 0.25 - tol or m.sigma_xx <= 0 or m.sigma_pp <= 0:
        raise ValueError(f"moments violate the uncertainty relation (delta={delta!r})")
    big = cfg.dim + (pad if pad is not None else cfg.dim + 20)
    nu = math.sqrt(max(delta, 0.25))
    rho = np.diag(_thermal_populations(nu - 0.5, big)).astype(complex)

    evals, evecs = np.linalg.eigh(m.covariance / nu)
    squeeze = 0.5 * math.log(evals[1] / evals[0])  # e^{+-squeeze} after normalisation
    angle = math.atan2(evecs[1, 1], evecs[0, 1])

    a = np.diag(np.sqrt(np.arange(1, big, dtype=float)), 1).astype(complex)
    ad = a.conj().T
    # exp(psi iM2) is conjugation by exp(psi (a+^2 - a^2)/4); exp(theta iL0) by exp(i theta n/2)
    u = dense_expm(0.25 * squeeze * (ad @ ad - a @ a))
    u = np.diag(np.exp(1j * angle * np.arange(big))) @ u
    alpha = (m.mean_x + 1j * m.mean_p) / math.sqrt(2.0)
    u = dense_expm(alpha * ad - np.conj(alpha) * a) @ u
    rho = u @ rho @ u.conj().T

    cut = rho[:cfg.dim, :cfg.dim]
    lost = 1.0 - np.trace(cut).real
    if lost > cfg.tail_tol:
        raise TruncationError(f"state needs more than {cfg.dim} levels (lost weight {lost:.3g})")
    cut = cut / np.trace(cut).real
    return 0.5 * (cut + cut.conj().T)


def moments_from_rho(rho: np.ndarray, tol: float = 1e-10) -> GaussianMoments:
    """Means and symmetrised covariances ``tr(o rho)`` of a density matrix."""
    rho = np.asarray(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise TruncationLeakError(f"trace deviates from one by {tr - 1.0:.3g}")
    x, p = quadratures(TruncationConfig(rho.shape[0]))

    def ev(o):
        return float(np.einsum("ij,ji->", o, rho).real)

    mx, mp = ev(x), ev(p)
    return GaussianMoments(
        mx, mp,
        ev(x @ x) - mx * mx,
        ev(p @ p) - mp * mp,
        0.5 * ev(x @ p + p @ x) - mx * mp,
    )


# --- evolution --------------------------------------------------------------------

def _coefficients(source) -> tuple[UnitaryCoefficients, DissipativeCoefficients]:
    if isinstance(source, tuple):
        return source
    from .master import preset_coefficients  # avoid an import cycle at module load
    return preset_coefficients(source)


def _check_leak(rho: np.ndarray, cfg: TruncationConfig, t: float) -> None:
    top = float(np.abs(np.diag(rho)[-2:]).sum())
    if top > cfg.tail_tol:
        raise TruncationLeakError(
            f"population {top:.3g} in the top two Fock levels at t={t:g} "
            f"exceeds tail_tol={cfg.tail_tol:g}; increase dim")


def evolve_oracle(source, rho0: np.ndarray, t: float, cfg: TruncationConfig) -> np.ndarray:
    """Exact evolution ``rho(t) = exp(-(K0 + Kd) t) rho0`` in the truncated space.

    ``source`` is a :class:`~dampmodes.master.MasterEquationSpec` or a
    ``(UnitaryCoefficients, DissipativeCoefficients)`` pair.
    """
    return evolve_oracle_trajectory(source, rho0, [t], cfg)[0]


def evolve_oracle_trajectory(source, rho0: np.ndarray, times: Sequence[float],
                             cfg: TruncationConfig) -> list[np.ndarray]:
    """Density matrices at each of the increasing ``times``."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    u, d = _coefficients(source)
    gen = -generator_superoperator(u, d, cfg)
    v = vec(np.asarray(rho0, dtype=complex))
    out = []
    t_prev = 0.0
    for t in times:
        if t > t_prev:
            v = expm_multiply(gen * (t - t_prev), v)
            t_prev = t
        rho = unvec(v, cfg.dim)
        _check_leak(rho, cfg, t)
        out.append(rho.copy())
    return out
