"""Command-line front end: ``trimap {expand,stats,operator,nuclear,verify-all}``.

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import acceptance, map_core, nuclear_rep, statistics, transfer_op
from .errors import AccuracyError, DomainError, InstabilityError
from .parallel import configure_threads
from .reporting import SCHEMA_VERSION, dumps17, metadata

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    point: Optional[str] = None
    exact: bool = False
    steps: int = 20
    seed: int = 42
    orbit: int = 1_000_000
    k_max: int = 10
    grid: int = 256
    grid_u: Optional[int] = None
    max_iters: int = 200
    K: int = 60
    tol: float = 1e-8
    out: Optional[str] = None
    out_dir: Optional[str] = None
    fmt: str = "csv"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tol > 0 or not math.isfinite(self.tol):
            raise UsageError(f"tolerance must be positive, got {self.tol}")
        for name in ("grid", "grid_u"):
            v = getattr(self, name)
            if v is not None and v < 8:
                raise UsageError(f"grid resolution must be at least 8, got {v}")
        for name in ("orbit", "steps", "k_max", "K", "max_iters"):
            if getattr(self, name) < 0:
                raise UsageError(f"{name} must be non-negative")
        if self.fmt not in ("text", "csv", "json"):
            raise UsageError(f"unknown format {self.fmt!r}")


def _write(text: str, path: Optional[str], stdout):
    if path is None or path == "-":
        stdout.write(text)
    else:
        Path(path).write_text(text)


# --- subcommands -------------------------------------------------------------------

def cmd_expand(cfg: RunConfig, stdout) -> int:
    if cfg.point is None:
        raise UsageError("expand needs --point")
    p = map_core.parse_point(cfg.point, exact=cfg.exact)
    seq = map_core.expand_sequence(p, cfg.steps)
    final = None
    if seq.final is not None:
        final = (f"{seq.final.x},{seq.final.y}" if cfg.exact
                 else f"{format(seq.final.x, '.17g')},{format(seq.final.y, '.17g')}")
    if cfg.fmt == "json":
        _write(dumps17({"schema_version": SCHEMA_VERSION, "kind": "triangle_sequence", "point": cfg.point,
                        "exact": cfg.exact, "digits": seq.digits, "terminated": seq.terminated,
                        "iterate": final, "near_boundary_steps": seq.near_boundary_steps,
                        "metadata": metadata()}), cfg.out, stdout)
    else:
        lines = [f"digits: {seq.digits}", f"terminated: {str(seq.terminated).lower()}"]
        if final is not None:
            lines.append(f"iterate: {final}")
        _write("\n".join(lines) + "\n", cfg.out, stdout)
    return EXIT_OK


def cmd_stats(cfg: RunConfig, stdout) -> int:
    if cfg.point is not None:
        seed = map_core.parse_point(cfg.point, exact=cfg.exact)
        label = f"point:{cfg.point}"
    else:
        seed = statistics.sample_invariant_point(np.random.default_rng(cfg.seed))
        label = f"rng:{cfg.seed}"
    rep = statistics.empirical_frequencies(seed, cfg.orbit, cfg.k_max, seed_label=label)
    rep.fill_numeric(tol=min(cfg.tol, 1e-10))
    text = rep.to_json() if cfg.fmt == "json" else rep.to_csv()
    _write(text, cfg.out, stdout)
    return EXIT_OK if rep.max_analytic_numeric_gap() <= cfg.tol else EXIT_CHECK


def eigenvalue_tolerance(n: int) -> float:
    """Declared |eigenvalue - 1| tolerance; the discretization error falls like 1/n^2."""
    return max(1e-6, 0.06 / n**2)


def cmd_operator(cfg: RunConfig, stdout) -> int:
    rep, grid = transfer_op.power_iteration(cfg.grid, cfg.grid_u, max_iters=cfg.max_iters, tol=cfg.tol)
    ratios = [transfer_op.norm_bound_check(f, 400)[0]
              for f in [transfer_op.fixed_point_function()] + acceptance.random_test_functions(10)]
    lam_tol = eigenvalue_tolerance(cfg.grid)
    ok = abs(rep.eigenvalue_estimate - 1.0) <= lam_tol and max(ratios) <= 3.0 + 1e-9
    doc = rep.to_dict()
    doc["eigenvalue_tolerance"] = lam_tol
    doc["norm_bound_max_ratio"] = max(ratios)
    doc["passed"] = ok
    _write(dumps17(doc), cfg.out, stdout)
    if cfg.out_dir:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out_dir) / "eigenfunction.csv").write_text(grid.to_csv())
    return EXIT_OK if ok else EXIT_CHECK


def identity_rows(K: int, points=None):
    """(suite, inputs, lhs, rhs, abs_diff, tolerance) rows for the four nuclear suites."""
    rows = []
    for w in acceptance.LERCH_W:
        for k in range(7):
            a, b = nuclear_rep.lerch_identity_check(w, k)
            rows.append(("lerch", f"w={w};k={k}", a, b, 1e-10))
    for s in acceptance.GEN_S:
        for t in acceptance.GEN_T:
            a, b = nuclear_rep.generating_identity_check(s, t, 120)
            rows.append(("generating", f"s={s};t={t};K=120", a, b, 1e-8))
    for k, p in acceptance.e_suite():
        rows.append(("E_cross", f"k={k};x={p.x!r};y={p.y!r}",
                     nuclear_rep.E_series(k, p), nuclear_rep.E_quad(k, p), 1e-8))
    for phi in nuclear_rep.default_suite():
        for p in points or acceptance.interior_points():
            v, exp = nuclear_rep.nuclear_apply(phi, p, K)
            rows.append(("expansion", f"phi={phi.name};K={K};x={p.x!r};y={p.y!r}",
                         v, nuclear_rep.direct_value(phi, p), 1e-6))
    return [(s, i, a, b, abs(a - b), tol) for s, i, a, b, tol in rows]


def cmd_nuclear(cfg: RunConfig, stdout) -> int:
    rows = identity_rows(cfg.K)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["suite", "inputs", "lhs", "rhs", "abs_diff", "tolerance", "pass"])
    for suite, inputs, a, b, d, tol in rows:
        w.writerow([suite, inputs, format(a, ".17g"), format(b, ".17g"), format(d, ".17g"), format(tol, "g"),
                    str(d < tol).lower()])
    p = map_core.parse_point(cfg.point) if cfg.point else map_core.TrianglePoint(0.5, 0.25)
    _, exp = nuclear_rep.nuclear_apply(nuclear_rep.phi_fixed_point(), p, cfg.K)
    out_dir = Path(cfg.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "identities.csv").write_text(buf.getvalue())
    (out_dir / "expansion.json").write_text(exp.to_json())
    failed = {s for s, _, _, _, d, tol in rows if not d < tol}
    for suite in ("lerch", "generating", "E_cross", "expansion"):
        status = "fail" if suite in failed else "pass"
        stdout.write(f"{suite}: {status}\n")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_verify_all(cfg: RunConfig, stdout) -> int:
    results = acceptance.run_all(emit=lambda line: (stdout.write(line + "\n"), stdout.flush()))
    if cfg.out:
        Path(cfg.out).write_text(dumps17({"schema_version": SCHEMA_VERSION, "kind": "acceptance",
                                          "criteria": [r.to_dict() for r in results], "metadata": metadata()}))
    return EXIT_OK if acceptance.summary_ok(results) else EXIT_CHECK


COMMANDS = {"expand": cmd_expand, "stats": cmd_stats, "operator": cmd_operator, "nuclear": cmd_nuclear,
            "verify-all": cmd_verify_all}


# --- argument parsing ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="trimap", description="Triangle map: expansions, digit statistics, transfer operator.")
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    ex = sub.add_parser("expand", help="triangle sequence of a point")
    ex.add_argument("--point", required=True, help="'x,y' with decimals or fractions p/q")
    ex.add_argument("--steps", type=int, default=20)
    ex.add_argument("--exact", action="store_true", help="exact rational arithmetic")
    ex.add_argument("--format", dest="fmt", choices=["text", "json"], default="text")
    ex.add_argument("--out")

    st = sub.add_parser("stats", help="digit frequency table")
    st.add_argument("--kmax", dest="k_max", type=int, default=10)
    st.add_argument("--orbit", type=int, default=1_000_000)
    st.add_argument("--seed", type=int, default=42, help="RNG seed for the starting point")
    st.add_argument("--point", help="explicit starting point instead of a random one")
    st.add_argument("--exact", action="store_true")
    st.add_argument("--tol", type=float, default=1e-8)
    st.add_argument("--format", dest="fmt", choices=["csv", "json"], default="csv")
    st.add_argument("--out")

    op = sub.add_parser("operator", help="power iteration for the leading eigenpair")
    op.add_argument("--grid", type=int, default=256)
    op.add_argument("--grid-u", dest="grid_u", type=int)
    op.add_argument("--tol", type=float, default=1e-10, help="stop when successive grids differ by less")
    op.add_argument("--max-iters", dest="max_iters", type=int, default=200)
    op.add_argument("--out")
    op.add_argument("--out-dir", dest="out_dir", help="also write the converged grid as CSV here")

    nu = sub.add_parser("nuclear", help="kernel-representation identity suites")
    nu.add_argument("--K", type=int, default=60)
    nu.add_argument("--point", help="point for the expansion record (default 1/2,1/4)")
    nu.add_argument("--out-dir", dest="out_dir", default=".")

    va = sub.add_parser("verify-all", help="run every acceptance criterion")
    va.add_argument("--out", help="JSON summary path")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    d = dict(vars(ns))
    known = {f for f in RunConfig.__dataclass_fields__}
    extra = {k: v for k, v in d.items() if k not in known}
    return RunConfig(**{k: v for k, v in d.items() if k in known}, extra=extra)


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        configure_threads()
        ns = build_parser().parse_args(argv)
        cfg = config_from_args(ns)
        return COMMANDS[cfg.subcommand](cfg, stdout)
    except (UsageError, DomainError, ValueError) as exc:
        stderr.write(f"trimap: error: {exc}\n")
        return EXIT_USAGE
    except (AccuracyError, InstabilityError) as exc:
        stderr.write(f"trimap: numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
