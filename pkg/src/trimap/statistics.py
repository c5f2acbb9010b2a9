"""Gauss-Kuzmin statistics of the triangle map.

The invariant probability density is ``12 / (pi^2 x (1 + y))``; the limiting
frequency of digit ``k`` along almost every orbit is the mass it gives to
cell ``k``.  Closed forms for these masses involve the dilogarithm.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from . import geometry
from .errors import AccuracyError, TruncationError
from .map_core import Point, RationalTrianglePoint, TrianglePoint, expand_sequence, orbit_tally
from .reporting import SCHEMA_VERSION, dumps17, metadata
from .special_fn import dilog

NORMALIZATION = 12.0 / math.pi**2


def invariant_density(x, y):
    return NORMALIZATION / (x * (1.0 + y))


# --- closed forms ------------------------------------------------------------------

def analytic_P(k):
    """Closed-form probability of digit ``k`` (scalar or integer array).

    ``P(0) = 1 - (6 Li2(1/4) + 12 ln^2 2)/pi^2`` and, for ``k >= 1``,
    ``(6/pi^2) [Li2(1/(k+1)^2) - Li2(1/(k+2)^2) + 4 ln^2(k+1)
    - 2 ln^2((k+2)/(k+1)) - 2 ln(k(k+2)) ln(k+1)]``.

    The logarithmic part is evaluated in the algebraically equal form
    ``-2 ln(k+1) log1p(-1/(k+1)^2) - 2 log1p(1/(k+1))^2``, which avoids the
    cancellation between ``4 ln^2(k+1)`` and ``2 ln(k(k+2)) ln(k+1)`` for large k.
    """
    ka = np.asarray(k)
    if np.any(ka < 0):
        raise ValueError("digit must be non-negative")
    scalar = ka.ndim == 0
    kf = np.atleast_1d(ka).astype(float)
    out = np.empty_like(kf)
    zero = kf == 0
    out[zero] = 1.0 - (6.0 * dilog(0.25) + 12.0 * math.log(2.0) ** 2) / math.pi**2
    kp = kf[~zero]
    if kp.size:
        a = kp + 1.0
        inv2 = 1.0 / (a * a)
        li = dilog(inv2) - dilog(1.0 / ((kp + 2.0) ** 2))
        logs = -2.0 * np.log(a) * np.log1p(-inv2) - 2.0 * np.log1p(1.0 / a) ** 2
        out[~zero] = (6.0 / math.pi**2) * (li + logs)
    return float(out[0]) if scalar else out


def numeric_P(k: int, tol: float = 1e-10) -> float:
    """Invariant mass of cell ``k`` by two-dimensional adaptive quadrature.

    Integration limits: for k = 0, x in [1/2, 1] and y in [1-x, x]; for k >= 1
    the union of x in [1/(k+1), 1], y in [(1-x)/(k+1), (1-x)/k] and
    x in [1/(k+2), 1/(k+1)], y in [(1-x)/(k+1), x].
    """
    if k < 0:
        raise ValueError("digit must be non-negative")

    def rho(y, x):
        return NORMALIZATION / (x * (1.0 + y))

    opts = dict(epsabs=tol / 4, epsrel=1e-13)
    if k == 0:
        pieces = [(0.5, 1.0, lambda x: 1.0 - x, lambda x: x)]
    else:
        pieces = [
            (1.0 / (k + 1), 1.0, lambda x: (1.0 - x) / (k + 1), lambda x: (1.0 - x) / k),
            (1.0 / (k + 2), 1.0 / (k + 1), lambda x: (1.0 - x) / (k + 1), lambda x: x),
        ]
    total, err = 0.0, 0.0
    for a, b, lo, hi in pieces:
        v, e = integrate.dblquad(rho, a, b, lo, hi, **opts)
        total += v
        err += e
    if err > tol:
        raise AccuracyError(f"cell {k} quadrature error {err:.3g} > {tol:.3g}", total, err)
    return total


def remaining_mass(k_max: int, tol: float = 1e-12) -> float:
    """Invariant mass of all cells beyond ``k_max``: the region y < (1-x)/(k_max+1)."""
    c = k_max + 1

    def inner(x):
        top = min(x, (1.0 - x) / c)
        return math.log1p(top) / x

    v, e = integrate.quad(inner, 0.0, 1.0, points=[1.0 / (c + 1)], epsabs=tol, epsrel=1e-13, limit=200)
    return NORMALIZATION * v


# --- orbits ------------------------------------------------------------------------

def sample_invariant_point(rng: np.random.Generator, x_floor: float = 1e-3) -> TrianglePoint:
    """Draw a point from the invariant density restricted to x > x_floor.

    Rejection sampling against a uniform proposal on the triangle; the density
    is bounded by its value at (x_floor, 0) on the restricted region.
    """
    bound = 1.0 / x_floor
    while True:
        x, y = rng.random(2)
        if y > x:
            x, y = y, x
        if x <= x_floor or y <= 0.0 or x >= 1.0:
            continue
        if rng.random() * bound < 1.0 / (x * (1.0 + y)):
            return TrianglePoint(x, y)


@dataclass
class FrequencyReport:
    k_max: int
    analytic: list
    empirical: list
    counts: list
    orbit_length: int
    seed: str
    excluded_steps: int = 0
    terminated: bool = False
    termination_index: Optional[int] = None
    numeric: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def fill_numeric(self, tol: float = 1e-10) -> "FrequencyReport":
        vals = [numeric_P(k, tol) for k in range(self.k_max + 1)]
        vals.append(remaining_mass(self.k_max))
        self.numeric = vals
        return self

    def max_analytic_numeric_gap(self) -> float:
        if not self.numeric:
            return float("nan")
        return max(abs(a - n) for a, n in zip(self.analytic, self.numeric))

    def rows(self):
        labels = list(range(self.k_max + 1)) + [f">{self.k_max}"]
        out = []
        for i, label in enumerate(labels):
            a = self.analytic[i]
            n = self.numeric[i] if self.numeric else None
            e = self.empirical[i] if self.empirical else None
            out.append({
                "k": label,
                "analytic": a,
                "numeric": n,
                "empirical": e,
                "abs_error": abs(a - n) if n is not None else None,
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "analytic", "numeric", "empirical", "abs_error"])
        for r in self.rows():
            w.writerow([r["k"]] + ["" if r[c] is None else format(r[c], ".17g")
                                   for c in ("analytic", "numeric", "empirical", "abs_error")])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "frequency_report",
            "k_max": self.k_max,
            "orbit_length": self.orbit_length,
            "seed": self.seed,
            "excluded_steps": self.excluded_steps,
            "terminated": self.terminated,
            "termination_index": self.termination_index,
            "warnings": list(self.warnings),
            "rows": self.rows(),
            "metadata": metadata(),
        }

    def to_json(self) -> str:
        return dumps17(self.to_dict())


def _analytic_column(k_max):
    head = analytic_P(np.arange(k_max + 1)).tolist()
    return head + [1.0 - math.fsum(head)]


def empirical_frequencies(seed: Point, n: int, k_max: int, seed_label: Optional[str] = None) -> FrequencyReport:
    """Digit frequencies over the first ``n`` steps of the orbit of ``seed``.

    Double-precision iteration with compensated digit classification; digits
    above ``k_max`` share an overflow bin.  A rational seed is first expanded
    exactly for up to 64 steps: if that orbit terminates, the exact partial
    tallies are reported, otherwise the orbit is run from the nearest double.
    """
    if n < 0:
        raise ValueError("orbit length must be non-negative")
    label = seed_label or f"point({seed.x},{seed.y})"
    analytic = _analytic_column(k_max)
    report = FrequencyReport(k_max, analytic, [], [0] * (k_max + 2), 0, label)
    if n == 0:
        return report

    counts = np.zeros(k_max + 2, np.int64)
    if isinstance(seed, RationalTrianglePoint):
        prefix = expand_sequence(seed, min(n, 64))
        if prefix.terminated:
            for d in prefix.digits:
                counts[min(d, k_max + 1)] += 1
            steps, terminated, near = len(prefix.digits), True, 0
        else:
            seed = seed.to_float()
    if not isinstance(seed, RationalTrianglePoint):
        counts, near, steps, terminated = orbit_tally(seed.x, seed.y, n, k_max)

    report.counts = [int(c) for c in counts]
    report.orbit_length = int(steps)
    report.empirical = (np.asarray(counts, float) / steps).tolist()
    report.excluded_steps = int(near)
    report.terminated = bool(terminated)
    if terminated:
        report.termination_index = int(steps)
        if steps < 10:
            report.warnings.append(f"degenerate seed: orbit terminated after {steps} steps")
    return report


# --- invariance of the measure ------------------------------------------------------

def _slice_integral(poly, inner, tol):
    """Integral over a convex polygon of ``inner(x, ylo, yhi)`` along x (adaptive)."""
    xs = sorted({v[0] for v in poly})
    lo, hi = xs[0], xs[-1]
    if hi <= lo:
        return 0.0, 0.0

    def g(x):
        r = geometry.y_range(poly, x)
        if r is None or r[1] <= r[0]:
            return 0.0
        return inner(x, r[0], r[1])

    v, e = integrate.quad(g, lo, hi, points=xs[1:-1] or None, epsabs=tol, epsrel=1e-13, limit=400)
    return v, e


def invariant_mass(region: geometry.Rectangle, tol: float = 1e-12) -> float:
    """Invariant mass of ``region ∩ triangle`` (inner integral in closed form)."""
    poly = region.polygon()
    if not poly:
        return 0.0
    v, _ = _slice_integral(poly, lambda x, a, b: (math.log1p(b) - math.log1p(a)) / x, tol)
    return NORMALIZATION * v


def invariance_check(region: geometry.Rectangle, tol: float = 1e-7, n_branches: int = 100, order: int = 24):
    """Invariant mass of a region and of its full preimage.

    The preimage mass sums polygon quadratures over the images of the region
    under the first ``n_branches`` inverse branches.  The remaining branches
    contribute exactly ``(12/pi^2) * integral over the region of
    1/(x (1 + K x + y))`` (the summand telescopes), which is added by
    quadrature; a quadrature error above tol/2 on that tail raises.
    """
    poly = region.polygon()
    if not poly or geometry.polygon_area(poly) == 0.0:
        return 0.0, 0.0
    mu = invariant_mass(region, tol=tol / 100)
    head = 0.0
    for k in range(n_branches):
        head += geometry.integrate_polygon(invariant_density, geometry.branch_image(k, poly), order)
    c = float(n_branches)  # first omitted branch
    tail, err = _slice_integral(
        poly, lambda x, a, b: math.log((1.0 + c * x + b) / (1.0 + c * x + a)) / x, tol / 100)
    if err > tol / 2:
        raise TruncationError(f"preimage tail error {err:.3g} exceeds tol/2", head + NORMALIZATION * tail, err)
    return mu, head + NORMALIZATION * tail
