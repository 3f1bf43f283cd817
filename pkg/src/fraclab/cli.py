"""Experiment runner.

    fraclab constants --s 0.3,0.5,0.75 --out results
    fraclab --config run.ini

Each scenario writes ``<scenario>.csv`` (17 significant digits) and a
``manifest.json`` with the configuration, library versions and tolerances.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .angular import assemble_angular, eigenpairs, tan_root, w0_angular_profile, w0_rayleigh_excess
from .constants import ConstantsBundle, gamma_n_limit, hardy_constant, kappa_bar, mu
from .extension import extension_flux
from .fields import bump, builtin, gaussian, manufactured, omega_gamma
from .galerkin import DIRICHLET, NEUMANN, l2_distance, solve_dirichlet, solve_neumann
from .mesh import Domain1D, default_grading, graded_mesh
from .operator1d import full_flap, full_flap_zero_ext, killing_potential, regional_flap
from .probes import (dirichlet_boundary_ratio, dirichlet_weighted_gradient, neumann_normal_derivative,
                     s_to_one_comparison)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

SCENARIOS = ("constants", "eval-op", "solve", "rates", "eigen", "extension", "limit-s1")
ALIASES = {"dirichlet_rate": ("rates", DIRICHLET), "neumann_rate": ("rates", NEUMANN),
           "eval_op": ("eval-op", None), "limit_s1": ("limit-s1", None)}
FIELDS = ("const1", "zero", "linear", "sine", "manufactured")

_DEFAULT_S = {
    "constants": [0.3, 0.5, 0.6, 0.75, 0.9],
    "eval-op": [0.6, 0.75, 0.9],
    "solve": [0.75],
    "rates": [0.7, 0.8],
    "eigen": [0.3, 0.5, 0.75, 0.9],
    "extension": [0.6, 0.8],
    "limit-s1": [0.9, 0.95, 0.99],
}
_DEFAULT_N = {"solve": [128], "rates": [1024], "eigen": [512], "limit-s1": [512]}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str
    s: List[float] = field(default_factory=list)
    n: List[int] = field(default_factory=list)
    grading: Optional[float] = None          # None: default_grading(s)
    f: Optional[str] = None
    bc: Optional[str] = None
    x: List[float] = field(default_factory=lambda: [0.25, 1.0, 4.0])
    samples: int = 50
    out: str = "results"
    seed: int = 0
    threads: int = 1

    def validate(self):
        if self.scenario not in SCENARIOS and self.scenario != "all":
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS + ('all',)}")
        for s in self.s:
            if not 0 < s < 1:
                raise ConfigError(f"s must lie in (0, 1), got {s}")
        for n in self.n:
            if n < 4 or n % 2:
                raise ConfigError(f"mesh sizes must be even and >= 4, got {n}")
        if self.scenario == "eigen" and any(n < 32 for n in self.n):
            raise ConfigError("the angular problem needs n >= 32")
        if self.grading is not None and self.grading < 1:
            raise ConfigError(f"grading must be >= 1, got {self.grading}")
        if self.f is not None and self.f not in FIELDS:
            raise ConfigError(f"unknown right-hand side {self.f!r}; choose from {FIELDS}")
        if self.bc is not None and self.bc not in (DIRICHLET, NEUMANN):
            raise ConfigError(f"bc must be 'dirichlet' or 'neumann', got {self.bc!r}")
        if self.bc == DIRICHLET and self.scenario in ("solve", "rates") and any(s <= 0.5 for s in self.s):
            raise ConfigError("Dirichlet runs need s > 1/2")
        if self.scenario == "rates" and self.bc == NEUMANN and any(s <= 0.5 for s in self.s):
            raise ConfigError("the normal-derivative probe needs s > 1/2")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.samples < 1:
            raise ConfigError("samples must be positive")

    def for_scenario(self, name: str) -> "ExperimentConfig":
        """Copy with scenario-specific defaults filled in."""
        cfg = ExperimentConfig(**{**asdict(self), "scenario": name})
        if not cfg.s:
            cfg.s = list(_DEFAULT_S[name])
        if not cfg.n:
            cfg.n = list(_DEFAULT_N.get(name, [512]))
        if cfg.bc is None and name in ("solve", "rates"):
            cfg.bc = DIRICHLET
        if cfg.f is None and name in ("solve", "rates"):
            cfg.f = "const1" if cfg.bc == DIRICHLET else "linear"
        cfg.validate()
        return cfg


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _ints(text: str) -> List[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _apply(cfg: Dict[str, object], key: str, raw: str):
    try:
        if key == "s" or key == "x":
            cfg[key] = _floats(raw)
        elif key == "n":
            cfg[key] = _ints(raw)
        elif key == "grading":
            cfg[key] = None if raw.strip() in ("", "auto") else float(raw)
        elif key in ("seed", "threads", "samples"):
            cfg[key] = int(raw)
        elif key in ("scenario", "f", "bc", "out"):
            cfg[key] = raw.strip()
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def load_config(path: Optional[str], overrides: Dict[str, Optional[str]]) -> ExperimentConfig:
    """Read an INI file (section ``[experiment]``) and apply command-line overrides."""
    cfg: Dict[str, object] = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not parser.has_section("experiment"):
            raise ConfigError(f"{path} has no [experiment] section")
        for key, raw in parser.items("experiment"):
            _apply(cfg, key, raw)
    for key, raw in overrides.items():
        if raw is not None:
            _apply(cfg, key, str(raw))
    if "scenario" not in cfg:
        raise ConfigError("no scenario given")
    scen = str(cfg["scenario"])
    if scen in ALIASES:
        cfg["scenario"], bc = ALIASES[scen]
        if bc is not None:
            cfg.setdefault("bc", bc)
    out = ExperimentConfig(**cfg)
    out.validate()
    return out


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def _atomic_write(path: str, text: str):
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp_", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, columns: Sequence[str], rows: Sequence[dict]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    _atomic_write(path, buf.getvalue())


@dataclass
class Table:
    name: str
    columns: List[str]
    rows: List[dict]


# ---------------------------------------------------------------- scenarios

def run_constants(cfg: ExperimentConfig) -> List[Table]:
    rows = []
    for s in cfg.s:
        b = ConstantsBundle.for_order(s)
        mid = mu((2 * s - 1) / 2, s)
        rows.append(dict(s=s, c1s=b.c_ns, a_s=b.a_s, b_s=b.b_s, kappa_bar=b.kappa_bar, hardy=b.hardy,
                         mu_mid=mid, identity_residual=abs(b.a_s - mid - b.hardy)))
    cols = ["s", "c1s", "a_s", "b_s", "kappa_bar", "hardy", "mu_mid", "identity_residual"]
    g_rows = [dict(N=N, gamma_n=gamma_n_limit(N)) for N in (1, 2, 3)]
    return [Table("constants", cols, rows), Table("gamma_n", ["N", "gamma_n"], g_rows)]


def run_eval_op(cfg: ExperimentConfig) -> List[Table]:
    half = Domain1D.halfline()
    rows = []
    for s in cfg.s:
        gm = (2 * s - 1) / 2
        for x in cfg.x:
            zext = full_flap_zero_ext(omega_gamma(gm), x, s).value
            rows.append(dict(s=s, x=x,
                             flap_omega_0=regional_flap(omega_gamma(0.0), half, x, s).value,
                             flap_omega_2sm1=regional_flap(omega_gamma(2 * s - 1), half, x, s).value,
                             zero_ext_mid=zext,
                             hardy_target=hardy_constant(s) * x ** (gm - 2 * s)))
    cols = ["s", "x", "flap_omega_0", "flap_omega_2sm1", "zero_ext_mid", "hardy_target"]
    # killing identity on random smooth bumps supported in (0, inf)
    rng = np.random.default_rng(cfg.seed)
    k_rows = []
    for i in range(cfg.samples):
        s = float(cfg.s[i % len(cfg.s)])
        c = rng.uniform(1.0, 4.0)
        w = rng.uniform(0.3, 0.9) * c
        u = bump(c, w, rng.uniform(0.5, 2.0))
        x = rng.uniform(c - 0.9 * w, c + 0.9 * w)
        full = full_flap_zero_ext(u, x, s)
        reg = regional_flap(u, half, x, s)
        gap = full.value - reg.value - killing_potential(x, s) * u.scalar(x)
        k_rows.append(dict(sample=i, s=s, x=x, gap=gap, error_bound=10 * (full.error + reg.error)))
    return [Table("eval-op", cols, rows),
            Table("killing_identity", ["sample", "s", "x", "gap", "error_bound"], k_rows)]


def _mesh_for(cfg, s, n, a=-1.0, b=1.0):
    g = cfg.grading if cfg.grading is not None else default_grading(s)
    return graded_mesh(a, b, n, g)


def _field(cfg, s):
    return builtin(cfg.f, s=s)


def run_solve(cfg: ExperimentConfig) -> List[Table]:
    rows, err_rows = [], []
    for s in cfg.s:
        for n in cfg.n:
            mesh = _mesh_for(cfg, s, n)
            solver = solve_dirichlet if cfg.bc == DIRICHLET else solve_neumann
            res = solver(mesh, s, _field(cfg, s), threads=cfg.threads)
            for x, v in zip(mesh.nodes, res.values):
                rows.append(dict(s=s, n=n, bc=cfg.bc, x=x, u=v))
            row = dict(s=s, n=n, bc=cfg.bc, solver_residual=res.diagnostics["solver_residual"],
                       constraint_residual=res.diagnostics["constraint_residual"], l2_error=None)
            if cfg.f == "manufactured":
                row["l2_error"] = l2_distance(mesh, res.values, manufactured(s)[1])
            err_rows.append(row)
    return [Table("solve", ["s", "n", "bc", "x", "u"], rows),
            Table("solve_summary", ["s", "n", "bc", "solver_residual", "constraint_residual", "l2_error"],
                  err_rows)]


def run_rates(cfg: ExperimentConfig) -> List[Table]:
    rows = []
    for s in cfg.s:
        for n in cfg.n:
            mesh = _mesh_for(cfg, s, n)
            if cfg.bc == DIRICHLET:
                res = solve_dirichlet(mesh, s, _field(cfg, s), threads=cfg.threads)
                ratio = dirichlet_boundary_ratio(res)
                grad = dirichlet_weighted_gradient(res)
                for side in ("left", "right"):
                    tp, gr = ratio[side], grad[side]
                    rows.append(dict(s=s, n=n, bc=cfg.bc, side=side, trace=tp.trace.value,
                                     trace_spread=tp.trace.spread,
                                     exponent=tp.exponent.exponent if tp.exponent else None,
                                     expected_exponent=2 * s - 1,
                                     weighted_gradient=gr.weighted_gradient.value if gr.weighted_gradient else None,
                                     relation_residual=gr.residual, status=gr.status,
                                     window_lo=tp.window[0], window_hi=tp.window[1]))
            else:
                res = solve_neumann(mesh, s, _field(cfg, s), threads=cfg.threads)
                probe = neumann_normal_derivative(res)
                for side in ("left", "right"):
                    p = probe[side]
                    rows.append(dict(s=s, n=n, bc=cfg.bc, side=side, first_limit=p.first.limit,
                                     first_spread=p.first.spread, second_limit=p.second.limit,
                                     growth_exponent=p.growth.exponent if p.growth else None,
                                     u_max=float(np.max(np.abs(res.values)))))
    if cfg.bc == DIRICHLET:
        cols = ["s", "n", "bc", "side", "trace", "trace_spread", "exponent", "expected_exponent",
                "weighted_gradient", "relation_residual", "status", "window_lo", "window_hi"]
    else:
        cols = ["s", "n", "bc", "side", "first_limit", "first_spread", "second_limit",
                "growth_exponent", "u_max"]
    return [Table("rates", cols, rows)]


def run_eigen(cfg: ExperimentConfig) -> List[Table]:
    rows = []
    for s in cfg.s:
        for n in cfg.n:
            prob = assemble_angular(s, n)
            p1, p2 = eigenpairs(prob, 2)
            row = dict(s=s, n=n, lambda1=p1.lam, lambda1_target=(2 * s - 1) ** 2 / 4,
                       lambda2=p2.lam, sqrt_lambda2=math.sqrt(max(p2.lam, 0.0)),
                       gap_margin=None, w0_rayleigh_excess=w0_rayleigh_excess(prob))
            if s == 0.5:
                row["gap_margin"] = math.sqrt(p2.lam) - 1.0
                row["tan_root"] = tan_root(1)
            else:
                row["gap_margin"] = (2 * s - 1) / 2 + math.sqrt(p2.lam) - 2 * s
            rows.append(row)
    cols = ["s", "n", "lambda1", "lambda1_target", "lambda2", "sqrt_lambda2", "gap_margin",
            "w0_rayleigh_excess", "tan_root"]
    return [Table("eigen", cols, rows)]


def run_extension(cfg: ExperimentConfig) -> List[Table]:
    rows = []
    u = gaussian(0.2, 0.7)
    for s in cfg.s:
        flux = extension_flux(u, 0.0, s)
        direct = -kappa_bar(s) * full_flap(u, 0.0, s).value
        # central difference of the angular profile against its closed-form derivative
        th = np.linspace(0.1, math.pi - 0.1, 9)
        h = 1e-4
        fd = [(w0_angular_profile(t + h, s)[0] - w0_angular_profile(t - h, s)[0]) / (2 * h)
              - w0_angular_profile(t, s)[1] for t in th]
        rows.append(dict(s=s, x0=0.0, flux=flux.value, flux_spread=flux.error, direct=direct,
                         relative_error=abs(flux.value - direct) / abs(direct),
                         w0_derivative_max_error=float(np.max(np.abs(fd)))))
    cols = ["s", "x0", "flux", "flux_spread", "direct", "relative_error", "w0_derivative_max_error"]
    return [Table("extension", cols, rows)]


def run_limit_s1(cfg: ExperimentConfig) -> List[Table]:
    rows = []
    for n in cfg.n:
        g = cfg.grading if cfg.grading is not None else 1.0
        mesh = graded_mesh(-1.0, 1.0, n, g)
        for r in s_to_one_comparison(builtin("const1"), builtin("linear"), cfg.s, mesh,
                                     threads=cfg.threads):
            rows.append(dict(s=r.s, n=n, bc=r.bc, l2_error=r.error))
    return [Table("limit-s1", ["s", "n", "bc", "l2_error"], rows)]


RUNNERS: Dict[str, Callable[[ExperimentConfig], List[Table]]] = {
    "constants": run_constants, "eval-op": run_eval_op, "solve": run_solve, "rates": run_rates,
    "eigen": run_eigen, "extension": run_extension, "limit-s1": run_limit_s1,
}

TOLERANCES = {
    "mu_quadrature_abs": 1e-12, "pv_quadrature_abs": 1e-12, "pair_quadrature_rel": 1e-14,
    "extension_quadrature_abs": 1e-12, "csv_significant_digits": 17,
}


def run(cfg: ExperimentConfig) -> dict:
    """Run the configured scenario(s), write CSV tables and the manifest; return the manifest."""
    names = SCENARIOS if cfg.scenario == "all" else (cfg.scenario,)
    manifest = {
        "config": asdict(cfg),
        "versions": {"fraclab": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "tolerances": TOLERANCES,
        "files": [],
        "wall_clock": {},
    }
    for name in names:
        sub = cfg.for_scenario(name)
        t0 = time.perf_counter()
        tables = RUNNERS[name](sub)
        manifest["wall_clock"][name] = time.perf_counter() - t0
        for tab in tables:
            path = os.path.join(cfg.out, f"{tab.name}.csv")
            write_csv(path, tab.columns, tab.rows)
            manifest["files"].append(os.path.basename(path))
    _atomic_write(os.path.join(cfg.out, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fraclab", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=SCENARIOS + ("all",) + tuple(ALIASES),
                    help="scenario to run (or use --scenario / the config file)")
    ap.add_argument("--config", help="INI file with an [experiment] section")
    ap.add_argument("--out", help="output directory (default: results)")
    ap.add_argument("--scenario")
    ap.add_argument("--seed", help="seed for randomised checks (unsigned 64-bit)")
    ap.add_argument("--threads", help="worker threads for assembly")
    ap.add_argument("--s", help="comma-separated fractional orders")
    ap.add_argument("--n", help="comma-separated element counts")
    ap.add_argument("--grading", help="mesh grading exponent or 'auto'")
    ap.add_argument("--f", help=f"right-hand side: {', '.join(FIELDS)}")
    ap.add_argument("--bc", help="dirichlet or neumann")
    return ap


def _error_record(out: str, kind: str, exc: BaseException, code: int) -> int:
    rec = {"status": "error", "kind": kind, "type": type(exc).__name__, "message": str(exc),
           "exit_code": code}
    print(json.dumps(rec), file=sys.stderr)
    try:
        _atomic_write(os.path.join(out, "error.json"), json.dumps(rec, indent=2))
    except OSError:
        pass
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    scenario = args.scenario or args.command
    overrides = {"scenario": scenario, "out": args.out, "seed": args.seed, "threads": args.threads,
                 "s": args.s, "n": args.n, "grading": args.grading, "f": args.f, "bc": args.bc}
    out = args.out or "results"
    try:
        cfg = load_config(args.config, overrides)
        out = cfg.out
        if cfg.scenario != "all":
            cfg.for_scenario(cfg.scenario)
    except ConfigError as exc:
        return _error_record(out, "config", exc, EXIT_CONFIG)
    try:
        manifest = run(cfg)
    except ConfigError as exc:
        return _error_record(out, "config", exc, EXIT_CONFIG)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return _error_record(out, "numerical", exc, EXIT_NUMERIC)
    print(json.dumps({"status": "ok", "files": manifest["files"]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
