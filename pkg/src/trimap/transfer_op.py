"""The transfer operator of the triangle map and its Banach-coordinate form.

    (L f)(x, y) = sum_{n>=0} (1 + n x + y)^{-3} f(1/(1+nx+y), x/(1+nx+y))

Functions are carried in Banach coordinates ``h = x f``: membership in the
space with norm ``sup |x f|`` is exactly boundedness of ``h``.  In these
coordinates the operator reads

    (M h)(x, y) = x sum_{n>=0} (1 + n x + y)^{-2} h(x'_n, x x'_n),   x'_n = 1/(1+nx+y)

with fixed point ``h*(x, y) = 1/(1+y)``.  Grid work uses square coordinates
``(x, u)`` with ``y = u x``; every preimage has second square coordinate
``u' = x``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numba
import numpy as np

from . import geometry
from .errors import AccuracyError, DomainError, InstabilityError, TruncationError
from .map_core import TrianglePoint
from .reporting import SCHEMA_VERSION, dumps17, metadata
from .special_fn import gl_panel

# grid and residual claims hold on x >= X_MIN; the branch count grows like 1/x
X_MIN = 0.02


@dataclass(frozen=True)
class BanachFunction:
    """A function on the triangle given by its Banach coordinate ``h = x f``.

    ``h`` is vectorized over coordinate arrays ``(x, y)``; ``bound`` is a
    recorded bound on ``sup |h|``.
    """

    h: Callable
    bound: float
    name: str = "anonymous"
    kind: str = "analytic"

    @classmethod
    def from_f(cls, f: Callable, bound: float, name: str = "anonymous"):
        return cls(lambda x, y: x * f(x, y), bound, name)

    def f(self, x, y):
        return self.h(x, y) / x

    def __add__(self, other):
        return BanachFunction(lambda x, y: self.h(x, y) + other.h(x, y), self.bound + other.bound,
                              f"({self.name}+{other.name})")

    def scale(self, c: float):
        return BanachFunction(lambda x, y: c * self.h(x, y), abs(c) * self.bound, f"{c}*{self.name}")


def fixed_point_function() -> BanachFunction:
    """f*(x, y) = 1/(x (1 + y)), i.e. h* = 1/(1 + y)."""
    return BanachFunction(lambda x, y: 1.0 / (1.0 + y), 1.0, "fixed_point")


def inverse_x_function() -> BanachFunction:
    """f(x, y) = 1/x, i.e. h = 1."""
    return BanachFunction(lambda x, y: np.ones(np.broadcast(x, y).shape), 1.0, "inverse_x")


def zero_function() -> BanachFunction:
    return BanachFunction(lambda x, y: np.zeros(np.broadcast(x, y).shape), 0.0, "zero")


def polynomial_function(coeffs) -> BanachFunction:
    """h(x, u) = sum_ij c[i, j] x^i u^j in square coordinates (u = y/x)."""
    c = np.asarray(coeffs, dtype=float)

    def h(x, y):
        u = y / x
        return np.polynomial.polynomial.polyval2d(x, u, c)

    return BanachFunction(h, float(np.abs(c).sum()), "polynomial")


def bump_function(center=(0.8, 0.45), radius: float = 0.15) -> BanachFunction:
    """Smooth compactly supported bump; with the defaults its support lies inside cell 0."""
    cx, cy = center

    def f(x, y):
        r2 = ((x - cx) ** 2 + (y - cy) ** 2) / radius**2
        inside = r2 < 1.0
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - r2, 1.0)), 0.0)

    return BanachFunction.from_f(f, cx + radius, "bump")


# --- the branch sum ----------------------------------------------------------------

# Gregory end corrections for sum_{n>=M} g(n) - integral: coefficients of the forward differences
_GREGORY = (0.5, -1.0 / 12, 1.0 / 24, -19.0 / 720, 3.0 / 160)
_GREGORY_NEXT = 863.0 / 60480
_BLOCK = 64


def _terms(h, x, y, n0, n1):
    """g(n) = x x'_n^2 h(x'_n, x x'_n) for n in [n0, n1), shape (n1-n0, len(x))."""
    n = np.arange(n0, n1, dtype=float)[:, None]
    xp = 1.0 / (1.0 + n * x + y)
    return x * xp * xp * h(xp, x * xp)


def _branch_count(x, tol, bound, y, tail):
    if tail == "bound":
        # x sum_{n>=M} (1+nx+y)^{-2} <= 1/(1+y+(M-1)x), so bound/(1+y+Mx) is a safe margin one branch later
        need = (bound / tol - 1.0 - y) / x
        return np.maximum(np.ceil(need), 1.0)
    # the fifth-difference term is about 10 x^6 / (1+y+Mx)^7 for smooth h; aim for tol/10,
    # and keep x'_M <= 1/32 so the summand is smooth on the scale of one step
    b = (100.0 * x**6 / tol) ** (1.0 / 7.0)
    return np.maximum.reduce([np.ceil((b - 1.0 - y) / x), np.ceil(32.0 / x), np.full(x.shape, 16.0)])


def branch_sum(h: Callable, x, y, tol: float = 1e-12, start: int = 0, tail: str = "gregory",
               bound: float = 1.0, max_terms: int = 2_000_000):
    """``(M h)(x, y)`` restricted to branches ``n >= start``, with an error estimate.

    ``tail="gregory"``: the branches beyond an index M are replaced by the
    integral of ``h(a, x a)`` over ``a`` in ``(0, x'_M)`` (exact for the
    continuum version of the sum) plus Gregory end corrections through fourth
    differences; the fifth-difference term is returned as the error estimate.

    ``tail="bound"``: plain truncation with the certified bound
    ``bound / (1 + y + M x)`` on everything omitted (``bound >= sup |h|``).
    Raises :class:`TruncationError` if the needed M exceeds ``max_terms``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.broadcast_to(np.atleast_1d(np.asarray(y, dtype=float)), x.shape)
    out = np.zeros(x.shape)
    err = np.zeros(x.shape)
    counts = np.maximum(_branch_count(x, tol, bound, y, tail), start + 1)
    if np.any(counts > max_terms):
        worst = int(np.argmax(counts))
        raise TruncationError(
            f"need {int(counts[worst])} branches at x={x[worst]:.3g} (budget {max_terms})",
            float("nan"), float("inf"))
    # group points with similar branch counts to share one loop
    bucket = np.ceil(np.log2(counts)).astype(int)
    for b in np.unique(bucket):
        idx = np.nonzero(bucket == b)[0]
        xs, ys = x[idx], y[idx]
        m = int(2**b) if tail == "gregory" else int(counts[idx].max())
        acc = np.zeros(idx.size)
        for n0 in range(start, m, _BLOCK):
            acc += _terms(h, xs, ys, n0, min(n0 + _BLOCK, m)).sum(axis=0)
        if tail == "gregory":
            g = _terms(h, xs, ys, m, m + 6)
            diffs = [g[0]]
            d = g
            for _ in range(5):
                d = np.diff(d, axis=0)
                diffs.append(d[0])
            corr = sum(c * dj for c, dj in zip(_GREGORY, diffs))
            a_end = 1.0 / (1.0 + m * xs + ys)
            nodes, weights = gl_panel(0.0, 1.0, 24)
            a = nodes[:, None] * a_end
            integral = a_end * (weights @ h(a, xs * a))
            acc += integral + corr
            err[idx] = _GREGORY_NEXT * np.abs(diffs[5]) + 1e-16 * np.abs(acc)
        else:
            err[idx] = bound / (1.0 + ys + m * xs)
        out[idx] = acc
    return out, err


def _coords(p):
    if isinstance(p, TrianglePoint):
        return np.array([p.x]), np.array([p.y]), True
    x, y = p
    return np.asarray(x, float), np.asarray(y, float), np.ndim(x) == 0


def apply_M(h, p, tol: float = 1e-12, tail: str = "gregory"):
    """Banach-coordinate operator at a point (or coordinate arrays ``(x, y)``)."""
    fn, bound = (h.evaluate, h.bound) if isinstance(h, GridFunction) else (h.h, h.bound)
    x, y, scalar = _coords(p)
    val, err = branch_sum(fn, x, y, tol, tail=tail, bound=max(bound, 1e-300))
    if np.any(err > tol):
        raise TruncationError(f"branch tail error {err.max():.3g} exceeds tol {tol:.3g}", val, err.max())
    return float(val[0]) if scalar else val


def apply_L(f: BanachFunction, p, tol: float = 1e-12, tail: str = "gregory"):
    """Transfer operator applied to ``f`` at a point (or coordinate arrays).

    ``tol`` bounds the error in ``x * L f``; the error in ``L f`` itself is at
    most ``tol / x``.
    """
    x, y, scalar = _coords(p)
    val = np.atleast_1d(apply_M(f, (x, y), tol, tail)) / np.atleast_1d(x)
    return float(val[0]) if scalar else val


# --- norms ---------------------------------------------------------------------------

def _norm_sample(resolution: int):
    c = (np.arange(resolution) + 0.5) / resolution
    edge = np.array([1e-9, 1.0 - 1e-9])
    s = np.concatenate([edge[:1], c, edge[1:]])
    X, U = np.meshgrid(s, s, indexing="ij")
    return X.ravel(), (U * X).ravel()


def banach_norm(h, resolution: int = 400) -> float:
    """``sup |h|`` (= ``sup |x f|``); a lower bound for analytic functions.

    Grid functions use their stored values.  Analytic functions are sampled on
    a ``resolution``-square cell-centered grid in square coordinates plus the
    edges at distance 1e-9.
    """
    if isinstance(h, GridFunction):
        return float(np.abs(h.values).max())
    x, y = _norm_sample(resolution)
    return float(np.abs(h.h(x, y)).max())


def norm_bound_check(f: BanachFunction, sample_count: int = 2000, seed: int = 0, x_floor: float = 1e-3):
    """Sampled ``||L f|| / ||f||`` and whether it respects the bound 3."""
    rng = np.random.default_rng(seed)
    x = x_floor + (1.0 - x_floor) * rng.random(sample_count)
    u = rng.random(sample_count)
    gx, gy = _norm_sample(40)
    keep = gx >= x_floor
    x = np.concatenate([x, gx[keep]])
    y = np.concatenate([u * x[:sample_count], gy[keep]])
    norm_f = max(banach_norm(f), float(np.abs(f.h(x, y)).max()))
    if norm_f == 0.0:
        return 0.0, True
    mh, _ = branch_sum(f.h, x, y, 1e-10, bound=f.bound)
    ratio = float(np.abs(mh).max()) / norm_f
    return ratio, ratio <= 3.0 + 1e-9


# --- grid functions ------------------------------------------------------------------

def _centers(n):
    return (np.arange(n) + 0.5) / n


def _interp_index(s, n):
    """Cell-centered linear interpolation index and weight, linear extrapolation at the ends."""
    pos = s * n - 0.5
    i0 = np.clip(np.floor(pos).astype(int), 0, n - 2)
    return i0, pos - i0


@dataclass
class GridFunction:
    """Banach coordinate sampled at cell centers of the unit square in (x, u)."""

    values: np.ndarray  # shape (n_x, n_u), values[i, j] = h(x_i, u_j * x_i)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or min(self.values.shape) < 2:
            raise ValueError("grid must be two-dimensional with at least 2 cells per axis")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def n_x(self):
        return self.values.shape[0]

    @property
    def n_u(self):
        return self.values.shape[1]

    @property
    def bound(self):
        return float(np.abs(self.values).max())

    @classmethod
    def from_function(cls, h: Callable, n_x: int, n_u: Optional[int] = None):
        n_u = n_u or n_x
        X, U = np.meshgrid(_centers(n_x), _centers(n_u), indexing="ij")
        return cls(h(X, U * X))

    @classmethod
    def constant(cls, n_x: int, n_u: Optional[int] = None, value: float = 1.0):
        return cls(np.full((n_x, n_u or n_x), value))

    def mesh(self):
        return np.meshgrid(_centers(self.n_x), _centers(self.n_u), indexing="ij")

    def evaluate(self, x, y):
        """Bilinear interpolation in square coordinates (x, u = y/x)."""
        x = np.asarray(x, dtype=float)
        u = y / x
        i, a = _interp_index(x, self.n_x)
        j, b = _interp_index(u, self.n_u)
        v = self.values
        return ((1 - a) * ((1 - b) * v[i, j] + b * v[i, j + 1])
                + a * ((1 - b) * v[i + 1, j] + b * v[i + 1, j + 1]))

    def as_banach(self, name: str = "grid") -> BanachFunction:
        return BanachFunction(self.evaluate, self.bound, name, kind="grid")

    def to_csv(self) -> str:
        X, U = self.mesh()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "u", "h"])
        for xv, uv, hv in zip(X.ravel(), U.ravel(), self.values.ravel()):
            w.writerow([format(xv, ".17g"), format(uv, ".17g"), format(hv, ".17g")])
        return buf.getvalue()


# --- discretized operator and power iteration -------------------------------------------

@numba.njit(cache=True)
def _hurwitz2(a):
    """sum_{m>=0} (m + a)^{-2} for a >= 1 (direct shift to 20, then Euler-Maclaurin)."""
    s = 0.0
    while a < 20.0:
        s += 1.0 / (a * a)
        a += 1.0
    ia = 1.0 / a
    return s + ia + 0.5 * ia * ia + ia**3 / 6.0 - ia**5 / 30.0 + ia**7 / 42.0


@numba.njit(cache=True)
def _build_row_weights(n_x, n_u):
    """Weights R[i, j, r] with (M h)(x_i, u_j x_i) ~ sum_r R[i, j, r] h(x_r, u' = x_i).

    Each branch value is linearly interpolated between the two nearest row
    centers (linear extrapolation past the last center).  Branches landing
    below the first center (x' < 1/(2 n_x)) are summed in closed form and
    placed at their mean abscissa x'_0/2, where the branch weight is uniform
    in x' to leading order.
    """
    dx = 1.0 / n_x
    x_first = 0.5 * dx
    R = np.zeros((n_x, n_u, n_x))
    for i in range(n_x):
        x = (i + 0.5) * dx
        for j in range(n_u):
            y = (j + 0.5) / n_u * x
            m = 0
            while True:
                xp = 1.0 / (1.0 + m * x + y)
                if xp < x_first:
                    break
                wt = x * xp * xp
                s = xp * n_x - 0.5
                r = int(math.floor(s))
                if r > n_x - 2:
                    r = n_x - 2
                a = s - r
                R[i, j, r] += wt * (1.0 - a)
                R[i, j, r + 1] += wt * a
                m += 1
            tail = _hurwitz2(m + (1.0 + y) / x) / x
            R[i, j, 0] += tail * 1.25
            R[i, j, 1] -= tail * 0.25
    return R


@lru_cache(maxsize=2)
def _grid_operator(n_x: int, n_u: int):
    R = _build_row_weights(n_x, n_u)
    R.setflags(write=False)
    # preimage column u' = x_i, interpolated between u-columns
    c0, beta = _interp_index(_centers(n_x), n_u)
    return R, c0, beta


def grid_apply(R, c0, beta, values):
    """One application of the discretized operator to a grid of values."""
    n_x = values.shape[0]
    cols = (1.0 - beta) * values[:, c0] + beta * values[:, c0 + 1]  # cols[r, i] = h(x_r, u'=x_i)
    return np.einsum("ijr,ri->ij", R, cols, optimize=True)


@dataclass
class SpectralReport:
    eigenvalue_estimate: float
    residual_sup: float
    gap_estimate: float
    iterations: int
    history: list
    n_x: int
    n_u: int
    converged: bool
    eigenvalue_history: list = field(default_factory=list)
    residual_sup_full: float = float("nan")
    x_min: float = X_MIN

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "spectral_report",
            "eigenvalue_estimate": self.eigenvalue_estimate,
            "residual_sup": self.residual_sup,
            "residual_sup_full_grid": self.residual_sup_full,
            "residual_region": f"x >= {self.x_min}",
            "gap_estimate": self.gap_estimate,
            "gap_estimate_note": "exploratory: tail ratio of successive correction norms",
            "iterations": self.iterations,
            "converged": self.converged,
            "grid": [self.n_x, self.n_u],
            "history": list(self.history),
            "eigenvalue_history": list(self.eigenvalue_history),
            "metadata": metadata(),
        }

    def to_json(self) -> str:
        return dumps17(self.to_dict())


def _gap_from_history(history, floor=1e-11):
    ratios = [b / a for a, b in zip(history, history[1:]) if a > floor and b > floor]
    if not ratios:
        return float("nan")
    tail = ratios[-5:]
    return float(np.median(tail))


def power_iteration(n_x: int = 256, n_u: Optional[int] = None, max_iters: int = 200, tol: float = 1e-12,
                    start: Optional[GridFunction] = None):
    """Power iteration for the leading eigenpair of the discretized operator.

    Each sweep applies the operator and rescales so the grid average is one;
    the rescaling factor is the eigenvalue estimate (the operator conserves the
    plain average of ``h`` over the square, so the estimate tends to one).
    Stops when successive grids differ by less than ``tol`` in sup norm.
    Returns ``(SpectralReport, GridFunction)``.
    """
    n_u = n_u or n_x
    if min(n_x, n_u) < 2:
        raise ValueError("grid needs at least 2 cells per axis")
    R, c0, beta = _grid_operator(n_x, n_u)
    h = (start or GridFunction.constant(n_x, n_u)).values.copy()
    if h.shape != (n_x, n_u):
        raise ValueError(f"start grid shape {h.shape} does not match ({n_x}, {n_u})")
    if not np.all(h > 0):
        raise ValueError("start grid must be strictly positive")
    h /= h.mean()
    history, lams = [], []
    converged = False
    lam = float("nan")
    for _ in range(max_iters):
        mh = grid_apply(R, c0, beta, h)
        lam = float(mh.mean())
        if not math.isfinite(lam) or abs(lam - 1.0) > 0.5:
            raise InstabilityError(f"renormalization factor {lam} drifted from 1")
        new = mh / lam
        diff = float(np.abs(new - h).max())
        history.append(diff)
        lams.append(lam)
        h = new
        if diff < tol:
            converged = True
            break
    X, U = np.meshgrid(_centers(n_x), _centers(n_u), indexing="ij")
    target = 1.0 / (1.0 + U * X)
    scaled = h * (target.mean() / h.mean())
    dev = np.abs(scaled - target)
    report = SpectralReport(
        eigenvalue_estimate=lam,
        residual_sup=float(dev[X[:, 0] >= X_MIN].max()),
        gap_estimate=_gap_from_history(history),
        iterations=len(history),
        history=history,
        n_x=n_x,
        n_u=n_u,
        converged=converged,
        eigenvalue_history=lams,
        residual_sup_full=float(dev.max()),
    )
    return report, GridFunction(h)


# --- duality ------------------------------------------------------------------------

def duality_check(f: BanachFunction, region: geometry.Rectangle, tol: float = 1e-8, n_branches: int = 40,
                  order: int = 20, max_order: int = 320):
    """Both sides of ``integral_A L f = integral_{T^{-1} A} f``.

    ``lhs`` integrates ``L f`` over ``A``.  ``rhs`` integrates ``f`` over the
    images of ``A`` under the first ``n_branches`` inverse branches and adds
    the remaining branches' contribution, pulled back to ``A`` and summed with
    the branch machinery from index ``n_branches`` on.  The polygon rule order
    is doubled from ``order`` until both sides move by less than tol/10;
    :class:`AccuracyError` is raised if that does not happen by ``max_order``.
    The region must stay away from x = 0 (``region.x0 > 0``).
    """
    if region.x0 <= 0.0:
        raise DomainError("duality_check needs a region with x0 > 0")
    poly = region.polygon()
    if not poly or geometry.polygon_area(poly) == 0.0:
        return 0.0, 0.0

    def lf(x, y):
        v, _ = branch_sum(f.h, x, y, tol / 10, bound=f.bound)
        return v / x

    def lf_tail(x, y):
        v, _ = branch_sum(f.h, x, y, tol / 10, start=n_branches, bound=f.bound)
        return v / x

    images = [geometry.branch_image(k, poly) for k in range(n_branches)]

    def sides(n):
        lhs = geometry.integrate_polygon(lf, poly, n)
        head = math.fsum(geometry.integrate_polygon(f.f, im, n) for im in images)
        return lhs, head + geometry.integrate_polygon(lf_tail, poly, n)

    prev = sides(order)
    n = order
    while n < max_order:
        n *= 2
        cur = sides(n)
        if max(abs(cur[0] - prev[0]), abs(cur[1] - prev[1])) < tol / 10:
            return cur
        prev = cur
    raise AccuracyError(f"duality quadrature unsettled at order {n}", prev[0], abs(prev[0] - prev[1]))
