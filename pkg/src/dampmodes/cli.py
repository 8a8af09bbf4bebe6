"""Command-line front end.

Subcommands
-----------
evolve    moment trajectory of a preset or raw-coefficient equation, as CSV
validate  run a validation suite and report every check
sweep     evolve a grid of parameter values in parallel and summarise
table     closed-form single-generator maps for a given initial state

Exit codes: 0 ok, 1 validation failure, 2 usage or configuration error,
3 physicality violation in strict mode.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import fock
from .evolution import IntegrationError, Trajectory, evolve
from .generators import DissipativeCoefficients, RegimeError, UnitaryCoefficients
from .master import (EquationKind, MasterEquationSpec, delta_longtime, evolve_preset,
                     positivity_check)
from .moments import (GaussianMoments, Generator, apply_generator, apply_unitary,
                      check_physical)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_UNPHYSICAL = 3

CSV_HEADER = ("t", "mean_x", "mean_p", "sigma_xx", "sigma_pp", "sigma_xp",
              "delta", "g0", "g1", "g2")
#: slack below 1/4 tolerated before strict mode reports a violation
STRICT_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (exit code 2)."""


def fmt(x: float) -> str:
    """17 significant digits: lossless for float64."""
    return format(float(x), ".17g")


# --- configuration -----------------------------------------------------------------

DEFAULTS: dict[str, Any] = {
    "eq": "kl",
    "omega0": 1.0,
    "gamma": 0.1,
    "b": 0.5,
    "d": 0.0,
    "theta": 0.0,
    "phi": 0.0,
    "psi": 0.0,
    "eta0": 0.0,
    "eta1": 0.0,
    "eta2": 0.0,
    "init": "vacuum",
    "t_max": 10.0,
    "dt": 0.1,
    "out": "-",
    "strict": False,
    "oracle": False,
    "oracle_tol": 1e-6,
    "dim": 40,
    "tail_tol": 1e-8,
    "allow_low_b": False,
    "allow_unphysical": False,
    "g_method": "auto",
    "figure": None,
}

_FLOAT_KEYS = {"omega0", "gamma", "b", "d", "theta", "phi", "psi", "eta0", "eta1", "eta2",
               "t_max", "dt", "oracle_tol", "tail_tol"}


def parse_init(text: str) -> GaussianMoments:
    """Initial state from ``vacuum``, ``coherent:x,p``, ``thermal:s``,
    ``squeezed:psi[,x,p]`` or ``moments:mx,mp,sxx,spp,sxp``."""
    kind, _, rest = str(text).strip().partition(":")
    kind = kind.lower()
    try:
        vals = [float(v) for v in rest.split(",")] if rest.strip() else []
    except ValueError:
        raise ConfigError(f"bad numbers in --init {text!r}") from None
    if kind == "vacuum" and not vals:
        return GaussianMoments.vacuum()
    if kind == "coherent" and len(vals) == 2:
        return GaussianMoments.coherent(*vals)
    if kind == "thermal" and len(vals) == 1:
        return GaussianMoments.thermal(vals[0])
    if kind == "squeezed" and len(vals) in (1, 3):
        base = GaussianMoments.coherent(*vals[1:]) if len(vals) == 3 else GaussianMoments.vacuum()
        return apply_unitary(base, Generator.M2, vals[0])
    if kind == "moments" and len(vals) == 5:
        return GaussianMoments(*vals)
    raise ConfigError(f"cannot parse --init {text!r}")


def parse_times(t_max: float, dt: float) -> np.ndarray:
    """``0, dt, 2 dt, ...`` up to ``t_max``; ``t_max = 0`` gives the single point 0."""
    if not (dt > 0 and math.isfinite(dt)):
        raise ConfigError("dt must be positive")
    if not (t_max >= 0 and math.isfinite(t_max)):
        raise ConfigError("t-max must be non-negative")
    if 0 < t_max < dt:
        raise ConfigError("t-max must be 0 or at least dt")
    n = int(math.floor(t_max / dt + 1e-9)) + 1
    return dt * np.arange(n)


@dataclass(frozen=True)
class RunConfig:
    """Everything one ``evolve`` run needs."""

    source: MasterEquationSpec | tuple[UnitaryCoefficients, DissipativeCoefficients]
    init: GaussianMoments
    times: np.ndarray
    g_method: str = "auto"
    strict: bool = False
    oracle: bool = False
    oracle_tol: float = 1e-6
    truncation: fock.TruncationConfig = fock.TruncationConfig()
    out: str = "-"
    figure: str | None = None

    @property
    def label(self) -> str:
        if isinstance(self.source, MasterEquationSpec):
            s = self.source
            extra = f", d={s.d:g}" if s.kind is EquationKind.HPZ else ""
            return f"{s.kind.value.upper()}: omega0={s.omega0:g}, gamma={s.gamma:g}, b={s.b:g}{extra}"
        u, d = self.source
        return (f"theta={u.theta:g}, phi={u.phi:g}, psi={u.psi:g}, gamma={d.gamma:g}, "
                f"eta=({d.eta0:g}, {d.eta1:g}, {d.eta2:g})")

    @classmethod
    def from_options(cls, opts: dict[str, Any]) -> "RunConfig":
        o = dict(DEFAULTS)
        o.update({k: v for k, v in opts.items() if v is not None})
        try:
            for k in _FLOAT_KEYS:
                o[k] = float(o[k])
            o["dim"] = int(o["dim"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad numeric option: {exc}") from None
        eq = str(o["eq"]).lower()
        try:
            if eq == "raw":
                source = (UnitaryCoefficients(o["theta"], o["phi"], o["psi"]),
                          DissipativeCoefficients(o["gamma"], o["eta0"], o["eta1"], o["eta2"]))
                if not all(map(math.isfinite, astuple(source[0]) + astuple(source[1]))):
                    raise ConfigError("coefficients must be finite")
            else:
                source = MasterEquationSpec(EquationKind.parse(eq), o["omega0"], o["gamma"], o["b"],
                                            o["d"], allow_low_b=bool(o["allow_low_b"]))
            truncation = fock.TruncationConfig(o["dim"], o["tail_tol"])
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        init = parse_init(o["init"])
        if not o["allow_unphysical"] and not check_physical(init):
            raise ConfigError(f"initial moments violate delta >= 1/4 (delta={init.delta:.6g}); "
                              "use --allow-unphysical to override")
        method = str(o["g_method"]).lower()
        if method not in ("auto", "closed", "ode", "quad"):
            raise ConfigError(f"unknown g method {method!r}")
        if method == "closed" and not (isinstance(source, MasterEquationSpec) and source.has_closed_form):
            raise ConfigError("closed forms need a preset with gamma < 2*omega0")
        return cls(source, init, parse_times(o["t_max"], o["dt"]), method, bool(o["strict"]),
                   bool(o["oracle"]), o["oracle_tol"], truncation, str(o["out"]),
                   o["figure"])


def load_config_file(path: str | Path) -> dict[str, Any]:
    """JSON object whose keys mirror the flag names (dashes or underscores)."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    out = {}
    for k, v in raw.items():
        key = k.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {k!r}")
        out[key] = v
    return out


# --- evolve ------------------------------------------------------------------------

def compute_trajectory(cfg: RunConfig) -> Trajectory:
    try:
        if isinstance(cfg.source, MasterEquationSpec):
            return evolve_preset(cfg.source, cfg.init, cfg.times, method=cfg.g_method)
        u, d = cfg.source
        method = "ode" if cfg.g_method == "auto" else cfg.g_method
        return evolve(cfg.init, u, d, cfg.times, method=method)
    except (RegimeError, IntegrationError) as exc:
        raise ConfigError(str(exc)) from None


def trajectory_table(traj: Trajectory) -> np.ndarray:
    """Rows in CSV column order; ``delta`` is recomputed from the row itself."""
    rows = []
    for t, m, g in zip(traj.times, traj.moments, traj.g):
        sxx, spp, sxp = m.sigma_xx, m.sigma_pp, m.sigma_xp
        rows.append([t, m.mean_x, m.mean_p, sxx, spp, sxp, sxx * spp - sxp * sxp, *g.g])
    return np.array(rows, dtype=float).reshape(-1, len(CSV_HEADER))


def write_csv(table: np.ndarray, dest, header: Sequence[str] = CSV_HEADER) -> None:
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(header)
    for row in table:
        w.writerow([fmt(v) for v in row])


def _open_out(path: str):
    if path == "-":
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", newline="")


def oracle_table(cfg: RunConfig) -> np.ndarray:
    """Density-matrix moments at the same times, with the smallest eigenvalue of rho."""
    rho0 = fock.gaussian_state(cfg.truncation, cfg.init)
    later = cfg.times[cfg.times > 0]
    rhos = [rho0] + (fock.evolve_oracle_trajectory(cfg.source, rho0, later, cfg.truncation)
                     if later.size else [])
    rows = []
    for t, r in zip(cfg.times, rhos):
        m = fock.moments_from_rho(r, tol=1e-8)
        lam = float(np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0])
        rows.append([t, *m.as_array(), m.sigma_xx * m.sigma_pp - m.sigma_xp ** 2, lam])
    return np.array(rows)


def positivity_messages(cfg: RunConfig, table: np.ndarray) -> list[str]:
    """Human-readable violations of ``delta >= 1/4``; empty if none."""
    msgs = []
    delta = table[:, 6]
    i = int(np.argmin(delta))
    if delta[i] < 0.25 - STRICT_TOL:
        msgs.append(f"trajectory violates delta >= 1/4: min delta={delta[i]:.6g} at t={table[i, 0]:.6g}")
    src = cfg.source
    if isinstance(src, MasterEquationSpec) and src.has_closed_form:
        rep = positivity_check(src, tol=STRICT_TOL)
        if not rep.ok:
            msgs.append(rep.describe())
    return msgs


def run_evolve(cfg: RunConfig, stderr=None) -> int:
    stderr = stderr or sys.stderr
    traj = compute_trajectory(cfg)
    table = trajectory_table(traj)
    with _open_out(cfg.out) as fh:
        write_csv(table, fh)
    code = EXIT_OK
    oracle = None
    if cfg.oracle:
        try:
            oracle = oracle_table(cfg)
        except fock.TruncationError as exc:
            raise ConfigError(str(exc)) from None
        except fock.TruncationLeakError as exc:
            print(f"oracle: {exc}", file=stderr)
            return EXIT_VALIDATION
        dev = float(np.abs(oracle[:, 1:6] - table[:, 1:6]).max())
        print(f"oracle: max moment deviation {dev:.3e} (dim={cfg.truncation.dim}), "
              f"min eigenvalue of rho {oracle[:, 7].min():.3e}", file=stderr)
        if cfg.out != "-":
            p = Path(cfg.out)
            with open(p.with_name(p.stem + ".oracle.csv"), "w", newline="") as fh:
                write_csv(oracle, fh, CSV_HEADER[:7] + ("min_eig",))
        if dev > cfg.oracle_tol:
            code = EXIT_VALIDATION
    if cfg.figure:
        from .plotting import trajectory_figure
        trajectory_figure(table, cfg.figure, title=cfg.label, oracle=oracle)
    msgs = positivity_messages(cfg, table)
    if cfg.strict and msgs:
        print("positivity report:", file=stderr)
        for m in msgs:
            print("  " + m, file=stderr)
        return EXIT_UNPHYSICAL
    for m in msgs:
        print("warning: " + m, file=stderr)
    return code


# --- sweep -------------------------------------------------------------------------

SWEEP_HEADER = ("final_delta", "min_delta", "delta_longtime", "delta_longtime_printed",
                "positive")


def parse_vary(text: str) -> tuple[str, list[float]]:
    """``name=v1,v2,...`` or ``name=start:stop:num``."""
    name, sep, spec = text.partition("=")
    name = name.strip().replace("-", "_")
    if not sep or name not in _FLOAT_KEYS - {"t_max", "dt", "oracle_tol", "tail_tol"}:
        raise ConfigError(f"cannot sweep {text!r}")
    try:
        if ":" in spec:
            a, b, n = spec.split(":")
            vals = list(np.linspace(float(a), float(b), int(n)))
        else:
            vals = [float(v) for v in spec.split(",")]
    except ValueError:
        raise ConfigError(f"bad values in --vary {text!r}") from None
    if not vals:
        raise ConfigError(f"no values in --vary {text!r}")
    return name, vals


def _sweep_point(opts: dict[str, Any]) -> list[float]:
    cfg = RunConfig.from_options(opts)
    table = trajectory_table(compute_trajectory(cfg))
    lt_exact = lt_printed = math.nan
    ok = bool(table[:, 6].min() >= 0.25 - STRICT_TOL)
    if isinstance(cfg.source, MasterEquationSpec) and cfg.source.has_closed_form:
        lt = delta_longtime(cfg.source)
        lt_exact, lt_printed = lt.delta_exact, lt.delta_printed
        ok = ok and lt_exact >= 0.25 - STRICT_TOL
    return [table[-1, 6], table[:, 6].min(), lt_exact, lt_printed, float(ok)]


def run_sweep(base: dict[str, Any], vary: list[tuple[str, list[float]]], workers: int = 1,
              out: str = "-", figure: str | None = None) -> int:
    names = [n for n, _ in vary]
    grid = list(itertools.product(*(v for _, v in vary)))
    points = [dict(base, **dict(zip(names, combo)), out="-", figure=None, oracle=False)
              for combo in grid]
    RunConfig.from_options(points[0])  # fail fast on a bad base configuration
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, points))
    else:
        results = [_sweep_point(p) for p in points]
    table = np.array([[*combo, *res] for combo, res in zip(grid, results)])
    with _open_out(out) as fh:
        write_csv(table, fh, tuple(names) + SWEEP_HEADER)
    if figure:
        from .plotting import sweep_figure
        k = len(names)
        sweep_figure(table[:, 0], {"final": table[:, k], "min": table[:, k + 1],
                                   "long-time": table[:, k + 2]}, figure, xlabel=names[0])
    return EXIT_OK


# --- table -------------------------------------------------------------------------

def run_table(init: GaussianMoments, generators: Sequence[Generator], params: Sequence[float],
              dest=None) -> int:
    w = csv.writer(dest or sys.stdout, lineterminator="\n")
    w.writerow(("generator", "param", "mean_x", "mean_p", "sigma_xx", "sigma_pp", "sigma_xp",
                "delta", "physical"))
    w.writerow(("initial", "", *(fmt(v) for v in init.as_array()), fmt(init.delta),
                int(check_physical(init))))
    for which in generators:
        for lam in params:
            m = apply_generator(init, which, lam)
            w.writerow((which.value, fmt(lam), *(fmt(v) for v in m.as_array()), fmt(m.delta),
                        int(check_physical(m))))
    return EXIT_OK


# --- validate ----------------------------------------------------------------------

def run_validate(suite: str, dim: int | None = None, json_path: str | None = None,
                 dest=None) -> int:
    from .validation import run_suite
    dest = dest or sys.stdout
    results = run_suite(suite, dim)
    for r in results:
        print(r.line(), file=dest)
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} checks passed", file=dest)
    report = {"suite": suite, "passed": n_ok == len(results),
              "checks": [r.to_dict() for r in results]}
    text = json.dumps(report, indent=2, default=float)
    if json_path and json_path != "-":
        Path(json_path).write_text(text + "\n")
    else:
        print(text, file=dest)
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


# --- argument parsing --------------------------------------------------------------

def _add_run_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("equation")
    g.add_argument("--config", help="JSON file with the same keys as the flags")
    g.add_argument("--eq", choices=["kl", "cl", "hpz", "raw"])
    for name in ("omega0", "gamma", "b", "d"):
        g.add_argument(f"--{name}", type=float)
    g.add_argument("--allow-low-b", action="store_true", default=None)
    r = p.add_argument_group("raw coefficients (--eq raw; gamma is shared)")
    for name in ("theta", "phi", "psi", "eta0", "eta1", "eta2"):
        r.add_argument(f"--{name}", type=float)
    s = p.add_argument_group("state and grid")
    s.add_argument("--init", help="vacuum | coherent:x,p | thermal:s | squeezed:psi[,x,p] | "
                                  "moments:mx,mp,sxx,spp,sxp")
    s.add_argument("--allow-unphysical", action="store_true", default=None)
    s.add_argument("--t-max", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--g-method", choices=["auto", "closed", "ode", "quad"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dampmodes",
                                     description="Moment dynamics of a damped harmonic oscillator.")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evolve", help="moment trajectory as CSV")
    _add_run_options(ev)
    o = ev.add_argument_group("output")
    o.add_argument("--out", help="CSV path, '-' for stdout")
    o.add_argument("--figure", help="also render the trajectory to this image file")
    o.add_argument("--strict", action="store_true", default=None,
                   help="exit 3 if delta drops below 1/4")
    o.add_argument("--oracle", action="store_true", default=None,
                   help="cross-check against density-matrix evolution")
    o.add_argument("--oracle-tol", type=float)
    o.add_argument("--dim", type=int, help="Fock cutoff for --oracle")
    o.add_argument("--tail-tol", type=float)

    va = sub.add_parser("validate", help="run a validation suite")
    va.add_argument("suite", choices=["tables", "commutators", "oracle", "closed_forms",
                                      "limits", "all"])
    va.add_argument("--dim", type=int)
    va.add_argument("--json", help="write the JSON report here instead of stdout")

    sw = sub.add_parser("sweep", help="parallel parameter sweep")
    _add_run_options(sw)
    sw.add_argument("--vary", action="append", required=True,
                    help="name=v1,v2,... or name=start:stop:num; repeat for a product grid")
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--out")
    sw.add_argument("--figure")

    ta = sub.add_parser("table", help="single-generator closed-form maps")
    ta.add_argument("--init", default="vacuum")
    ta.add_argument("--allow-unphysical", action="store_true")
    ta.add_argument("--generator", action="append",
                    help="generator name (L0, M1, M2, O0, Oplus, L1plus, L2plus); default all")
    ta.add_argument("--param", type=float, action="append", help="default 0.1")
    return parser


def _collect(args: argparse.Namespace) -> dict[str, Any]:
    opts = load_config_file(args.config) if getattr(args, "config", None) else {}
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "evolve":
            return run_evolve(RunConfig.from_options(_collect(args)))
        if args.command == "sweep":
            if args.workers < 1:
                raise ConfigError("--workers must be at least 1")
            vary = [parse_vary(v) for v in args.vary]
            return run_sweep(_collect(args), vary, args.workers, args.out or "-", args.figure)
        if args.command == "table":
            init = parse_init(args.init)
            if not args.allow_unphysical and not check_physical(init):
                raise ConfigError("initial moments violate delta >= 1/4")
            try:
                gens = [Generator.parse(g) for g in args.generator] if args.generator else list(Generator)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            return run_table(init, gens, args.param or [0.1])
        if args.command == "validate":
            return run_validate(args.suite, args.dim, args.json)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
