"""The ten acceptance criteria, each at its pinned tolerance and time budget.

Every criterion returns a :class:`CriterionResult`; ``passed`` requires both
the numerical condition and the wall-clock budget.  The test suite and the
``verify-all`` subcommand both run these.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import geometry, map_core, nuclear_rep, statistics, transfer_op
from .parallel import map_threads


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    budget_s: float
    elapsed_s: float = 0.0
    measured: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        facts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] AC{self.number} {self.title}: {facts}; {self.elapsed_s:.2f}s (budget {self.budget_s:g}s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "elapsed_s": self.elapsed_s, "budget_s": self.budget_s, "measured": self.measured}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _timed(number, title, budget, body):
    t0 = time.perf_counter()
    ok, measured = body()
    elapsed = time.perf_counter() - t0
    return CriterionResult(number, title, bool(ok) and elapsed < budget, budget, elapsed, measured)


def interior_points(count=20, seed=11, x_min=0.1):
    """Fixed sample of points with x >= x_min and y/x in [0.05, 0.95]."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(x_min, 0.95, count)
    us = rng.uniform(0.05, 0.95, count)
    return [map_core.TrianglePoint(float(x), float(u * x)) for x, u in zip(xs, us)]


def e_suite(count=20, seed=5):
    """Fixed (k, point) pairs with k <= 10."""
    rng = np.random.default_rng(seed)
    pts = interior_points(count, seed=seed, x_min=0.05)
    return [(int(k), p) for k, p in zip(rng.integers(0, 11, count), pts)]


# --- criteria ----------------------------------------------------------------------

def ac1_digit_law():
    def body():
        gaps = [abs(statistics.analytic_P(k) - statistics.numeric_P(k, tol=1e-10)) for k in range(21)]
        p0 = statistics.analytic_P(0)
        return max(gaps) < 1e-8 and abs(p0 - 0.2531257) < 1e-6, {"max_gap": max(gaps), "P0": p0}
    return _timed(1, "digit law", 30, body)


def ac2_partition():
    def body():
        p = statistics.analytic_P(np.arange(100_001))
        partial = np.cumsum(p)
        total = float(partial[-1])
        increasing = bool(np.all(np.diff(partial) > 0))
        return 0.998 < total < 1.0 and increasing, {"sum": total, "strictly_increasing": increasing}
    return _timed(2, "partition of unity", 5, body)


def ac3_ergodic(seeds=tuple(range(10)), n=10_000_000):
    def one(seed):
        start = statistics.sample_invariant_point(np.random.default_rng(seed))
        rep = statistics.empirical_frequencies(start, n, 5, seed_label=f"rng:{seed}")
        return max(abs(e - a) for e, a in zip(rep.empirical[:6], rep.analytic[:6])), rep.terminated

    def body():
        out = map_threads(one, seeds)
        worst = max(d for d, _ in out)
        ok = worst < 1e-2 and not any(t for _, t in out)
        return ok, {"seeds": len(seeds), "steps": n, "max_deviation": worst}
    return _timed(3, "ergodic frequencies", 60, body)


def ac4_fixed_point(resolution=200, x_min=0.02):
    def body():
        c = (np.arange(resolution) + 0.5) / resolution
        X, U = np.meshgrid(x_min + (1.0 - x_min) * c, c, indexing="ij")
        x, y = X.ravel(), (U * X).ravel()
        lf = transfer_op.apply_L(transfer_op.fixed_point_function(), (x, y), tol=1e-12)
        err = float(np.abs(lf - 1.0 / (x * (1.0 + y))).max())
        return err < 1e-10, {"sup_error": err, "points": x.size}
    return _timed(4, "fixed point", 20, body)


def random_test_functions(count=50, seed=3):
    """Random polynomials of degree <= 3 in the square coordinates (x, u)."""
    rng = np.random.default_rng(seed)
    return [transfer_op.polynomial_function(rng.normal(size=(d + 1, d + 1)))
            for d in rng.integers(1, 4, count)]


def ac5_norm_bound():
    def body():
        fs = [transfer_op.fixed_point_function()] + random_test_functions()
        ratios = [transfer_op.norm_bound_check(f, 400)[0] for f in fs]
        return max(ratios) <= 3.0 + 1e-9, {"functions": len(fs), "max_ratio": max(ratios)}
    return _timed(5, "norm bound", 20, body)


def ac6_eigenvalue(n=256):
    def body():
        rep, g = transfer_op.power_iteration(n, tol=1e-12)
        ref = g.values / g.values.mean()
        spread = 0.0
        for seed in (1, 2, 3):
            start = transfer_op.GridFunction(np.random.default_rng(seed).uniform(0.5, 2.0, (n, n)))
            _, gs = transfer_op.power_iteration(n, tol=1e-12, start=start)
            spread = max(spread, float(np.abs(gs.values / gs.values.mean() - ref).max()))
        lam_err = abs(rep.eigenvalue_estimate - 1.0)
        ok = lam_err < 1e-6 and rep.residual_sup < 5e-4 and spread < 1e-4
        return ok, {"eigenvalue_error": lam_err, "residual_sup": rep.residual_sup, "start_spread": spread,
                    "gap_estimate": rep.gap_estimate}
    return _timed(6, "leading eigenvalue", 120, body)


def ac7_nuclear(K=60):
    def body():
        worst = 0.0
        for phi in nuclear_rep.default_suite():
            for p in interior_points():
                v, _ = nuclear_rep.nuclear_apply(phi, p, K)
                worst = max(worst, abs(v - nuclear_rep.direct_value(phi, p)))
        return worst < 1e-6, {"max_gap": worst, "K": K}
    return _timed(7, "nuclear expansion", 120, body)


LERCH_W = (1.2, 1.5, 2.0, 5.0, 10.0)
GEN_S = (0.0, 0.5, 2.0, 4.0, 8.0)
GEN_T = (0.0, 1.0, 3.0, 9.0, 20.0)


def ac8_identities():
    def body():
        lerch = max(abs(a - b) for w in LERCH_W for a, b in
                    (nuclear_rep.lerch_identity_check(w, k) for k in range(7)))
        gen = max(abs(a - b) for s in GEN_S for a, b in
                  (nuclear_rep.generating_identity_check(s, t, 120) for t in GEN_T))
        ecross = max(abs(nuclear_rep.E_series(k, p) - nuclear_rep.E_quad(k, p)) for k, p in e_suite())
        ok = lerch < 1e-10 and gen < 1e-8 and ecross < 1e-8
        return ok, {"lerch": lerch, "generating": gen, "E_cross": ecross}
    return _timed(8, "identity suites", 120, body)


def ac9_invariance():
    def body():
        f = transfer_op.fixed_point_function()
        inv = dual = cross = 0.0
        for r in geometry.rectangle_suite():
            mu, pre = statistics.invariance_check(r)
            lhs, rhs = transfer_op.duality_check(f, r, tol=1e-7)
            inv = max(inv, abs(mu - pre))
            dual = max(dual, abs(lhs - rhs))
            cross = max(cross, abs(statistics.NORMALIZATION * lhs - mu))
        return max(inv, dual, cross) < 1e-6, {"invariance": inv, "duality": dual, "cross": cross}
    return _timed(9, "measure invariance", 60, body)


def random_rational_pairs(count=1000, seed=17, q_max=1000, k_max=50):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        q = int(rng.integers(3, q_max + 1))
        a, b = sorted(rng.choice(np.arange(1, q), 2, replace=False).tolist(), reverse=True)
        out.append((int(rng.integers(0, k_max + 1)), map_core.RationalTrianglePoint(Fraction(a, q), Fraction(b, q))))
    return out


def ac10_round_trip():
    def body():
        bad = 0
        pairs = random_rational_pairs()
        for k, p in pairs:
            res = map_core.step(map_core.inverse_branch(k, p))
            bad += not (res.digit == k and res.image == p)
        return bad == 0, {"pairs": len(pairs), "mismatches": bad}
    return _timed(10, "exact round trips", 5, body)


ALL = (ac1_digit_law, ac2_partition, ac3_ergodic, ac4_fixed_point, ac5_norm_bound, ac6_eigenvalue,
       ac7_nuclear, ac8_identities, ac9_invariance, ac10_round_trip)


def run_all(emit=print):
    results = []
    for crit in ALL:
        r = crit()
        if emit:
            emit(r.line())
        results.append(r)
    return results


def summary_ok(results) -> bool:
    return all(r.passed for r in results) and math.isfinite(sum(r.elapsed_s for r in results))
