"""Kernel representation of the transfer operator on hat-transformed densities.

A half-line function ``phi`` on (0, inf) defines a density on the triangle

    phi_hat(x, y) = (1/x) int_0^inf e^{-s y} phi(s) dm(s),   dm = s/(e^s - 1) ds.

Expanding the branch weights of the operator in the basis
``eta_k(s) = s^k e^{-s}/(k+1)!`` gives

    L phi_hat = sum_k <phi, eta_k> E_k,
    E_k(x, y) = (k+1) sum_{m>=0} (1+y+(m-1)x)^k / (1+y+mx)^{k+2}
              = (1/x^2) int_0^inf e^{-t(1-x+y)/x} L_k^1(t) dm(t),

and the kernel ``J_1(2 sqrt(st))/sqrt(st) = sum_k L_k^1(t) eta_k(s)`` links the
two families.  ``phi`` is a function of ``s`` alone; any dependence on ``x``
is frozen before it gets here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .errors import AccuracyError, DomainError, TruncationError
from .map_core import TrianglePoint
from .reporting import SCHEMA_VERSION, dumps17, metadata
from .special_fn import (bessel_kernel, default_dm_rule, eta, integrate_dm, integrate_halfline, laguerre_l1,
                         shifted_zeta)
from .transfer_op import BanachFunction, apply_L


@dataclass(frozen=True)
class HalfLineFunction:
    """A function of ``s`` on the half-line with its squared dm-norm.

    ``phi`` is vectorized over numpy arrays.  ``hat`` optionally gives the
    closed form of the hat transform as a function of ``(x, y)``.
    """

    phi: Callable
    name: str
    norm_sq: float
    hat: Optional[Callable] = None

    def __call__(self, s):
        return self.phi(s)


_REGISTRY: Dict[str, HalfLineFunction] = {}


def register(phi: Callable, name: str, hat: Optional[Callable] = None, tol: float = 1e-12) -> HalfLineFunction:
    """Check that ``<phi, phi>`` is finite and record the function under ``name``."""
    try:
        norm_sq = integrate_dm(lambda s: phi(s) ** 2, tol)
    except AccuracyError as exc:
        raise DomainError(f"{name}: <phi, phi> did not converge ({exc})") from exc
    if not math.isfinite(norm_sq):
        raise DomainError(f"{name}: <phi, phi> is not finite")
    fn = HalfLineFunction(phi, name, norm_sq, hat)
    _REGISTRY[name] = fn
    return fn


def registered(name: str) -> HalfLineFunction:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"no half-line function named {name!r}; known: {sorted(_REGISTRY)}") from None


def _phi_star(s):
    s = np.asarray(s, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(s > 0, -np.expm1(-s) / np.where(s > 0, s, 1.0), 1.0)


def phi_fixed_point() -> HalfLineFunction:
    """(1 - e^{-s})/s, whose hat transform is the invariant density 1/(x(1+y))."""
    return register(_phi_star, "fixed_point", hat=lambda x, y: 1.0 / (x * (1.0 + y)))


def phi_exp() -> HalfLineFunction:
    """e^{-s}; its hat transform is zeta(2, 2+y)/x."""
    return register(lambda s: np.exp(-np.asarray(s, float)), "exp",
                    hat=lambda x, y: shifted_zeta(2.0, 2.0 + y)[0] / x)


def phi_zero() -> HalfLineFunction:
    return register(lambda s: np.zeros(np.shape(s)), "zero", hat=lambda x, y: 0.0 * x)


def phi_eta(j: int) -> HalfLineFunction:
    return register(lambda s: eta(j, s), f"eta_{j}")


def default_suite():
    return [phi_fixed_point(), phi_exp()]


def inner_dm(a: Callable, b: Callable, tol: float = 1e-13) -> float:
    """<a, b> = int_0^inf a(s) b(s) dm(s)."""
    return integrate_dm(lambda s: a(s) * b(s), tol)


# --- hat transform and kernel --------------------------------------------------------

def hat_transform(phi: HalfLineFunction, p: TrianglePoint, tol: float = 1e-12) -> float:
    """phi_hat(x, y) by adaptive dm quadrature, to absolute accuracy ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    x, y = p.x, p.y
    return integrate_dm(lambda s: np.exp(-s * y) * phi(s), tol * x) / x


def hat_function(phi: HalfLineFunction) -> BanachFunction:
    """phi_hat as a Banach function; its coordinate ``x phi_hat`` depends on y alone."""
    rule = default_dm_rule()
    values = phi(rule.nodes)
    bound = float(np.abs(values) @ rule.weights)

    def h(x, y):
        y = np.asarray(y, dtype=float)
        return (np.exp(-np.multiply.outer(y, rule.nodes)) * values) @ rule.weights

    return BanachFunction(h, bound, f"hat({phi.name})")


def kernel_K(phi: HalfLineFunction, t: float, tol: float = 1e-12) -> float:
    """int_0^inf G(s t) phi(s) dm(s), with G(u) = J_1(2 sqrt u)/sqrt u."""
    if t < 0:
        raise DomainError("kernel argument must be non-negative")
    return integrate_dm(lambda s: bessel_kernel(s * t) * phi(s), tol)


def kernel_K_expansion(coefficients, t: float) -> float:
    """sum_k <phi, eta_k> L_k^1(t): the kernel applied through the expansion."""
    return math.fsum(c * laguerre_l1(k, t) for k, c in enumerate(coefficients))


def coefficient(phi: HalfLineFunction, k: int, tol: float = 1e-15) -> float:
    """<phi, eta_k> by adaptive dm quadrature."""
    return integrate_dm(lambda s: phi(s) * eta(k, s), tol, t_min=k + 8.0)


# --- identities -------------------------------------------------------------------

def lerch_identity_check(w: float, k: int, tol: float = 1e-12):
    """Both sides of sum_{n>=0} (n+w)^{-(k+2)} = (1/(k+1)!) int t^k e^{-(w-1)t} dm(t)."""
    if w <= 1:
        raise DomainError("w must exceed 1")
    if k < 0:
        raise DomainError("k must be non-negative")
    series, _ = shifted_zeta(k + 2.0, w)
    lg = math.lgamma(k + 2)

    def integrand(t):
        with np.errstate(divide="ignore"):
            return np.exp(k * np.log(t) - (w - 1.0) * t - lg) if k else np.exp(-(w - 1.0) * t - lg)

    return series, integrate_dm(integrand, tol, t_min=k + 8.0)


def generating_identity_check(s: float, t: float, K: int):
    """G(s t) and its Laguerre partial sum sum_{k<=K} L_k^1(t) eta_k(s)."""
    if K < 0:
        raise DomainError("K must be non-negative")
    if s < 0 or t < 0:
        raise DomainError("s and t must be non-negative")
    left = bessel_kernel(s * t)
    terms = []
    prev, cur = 0.0, 1.0  # L_{-1}, L_0
    for k in range(K + 1):
        terms.append(cur * eta(k, s))
        prev, cur = cur, ((2 * k + 2 - t) * cur - (k + 1) * prev) / (k + 1)
    return left, math.fsum(terms)


# --- the E_k family ---------------------------------------------------------------

_E_MAX_TERMS = 5_000_000


def _e_tail_start(k_max: int, x: float, y: float, tol: float) -> int:
    """First index M of the Euler-Maclaurin tail for E_0..E_{k_max}.

    Requires b_M = 1+y+Mx >= 4(k_max+2)x, beyond which every summand is
    decreasing and convex in m, and 2(k+1)x/b_M^3 / 12 < tol/10, which
    bounds the neglected derivative term.
    """
    b_conv = 4.0 * (k_max + 2) * x
    b_tol = (10.0 * 2.0 * (k_max + 1) * x / (12.0 * tol)) ** (1.0 / 3.0)
    b = max(b_conv, b_tol)
    return max(8, int(math.ceil((b - 1.0 - y) / x)))


def E_series_all(k_max: int, p: TrianglePoint, tol: float = 1e-10):
    """E_0..E_{k_max} at ``p`` from the closed-form series: ``(values, bounds)``.

    Terms ``(k+1) exp(k log1p(-x/b) - 2 log b)`` with ``b = 1+y+mx`` are summed
    directly for ``m < M``.  The rest is ``int_M^inf`` (in closed form,
    ``(1 - (1 - x/b_M)^{k+1}) / x^2``) plus ``g(M)/2 - g'(M)/12``; the
    bound returned is ``|g'(M)|/12``.
    """
    if k_max < 0:
        raise DomainError("k must be non-negative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    x, y = p.x, p.y
    M = _e_tail_start(k_max, x, y, tol)
    if M > _E_MAX_TERMS:
        raise TruncationError(f"E series needs {M} terms at x={x:.3g}", float("nan"), float("inf"))
    b = 1.0 + y + x * np.arange(M, dtype=float)
    lb = np.log(b)
    l1v = np.log1p(-x / b)
    bM = 1.0 + y + M * x
    vM = x / bM
    values = np.empty(k_max + 1)
    bounds = np.empty(k_max + 1)
    for k in range(k_max + 1):
        head = (k + 1) * np.exp(k * l1v - 2.0 * lb)
        # the summand at m = M and its m-derivative
        lg = math.log(k + 1) + k * math.log1p(-vM) - 2.0 * math.log(bM)
        gM = math.exp(lg)
        dgM = x * gM / bM * (k * vM / (1.0 - vM) - 2.0)
        integral = -math.expm1((k + 1) * math.log1p(-vM)) / (x * x)
        values[k] = math.fsum(head.tolist()) + integral + 0.5 * gM - dgM / 12.0
        bounds[k] = abs(dgM) / 12.0
    return values, bounds


def E_series(k: int, p: TrianglePoint, tol: float = 1e-10) -> float:
    """E_k at ``p`` from the closed-form series (see :func:`E_series_all`)."""
    values, bounds = E_series_all(k, p, tol)
    if bounds[k] > tol:
        raise TruncationError(f"E_{k} tail bound {bounds[k]:.3g} exceeds tol", values[k], bounds[k])
    return float(values[k])


def E_quad(k: int, p: TrianglePoint, tol: float = 1e-10) -> float:
    """E_k at ``p`` from its dm-integral definition."""
    if k < 0:
        raise DomainError("k must be non-negative")
    x, y = p.x, p.y
    c = (1.0 - x + y) / x
    return integrate_dm(lambda t: np.exp(-c * t) * laguerre_l1(k, t), tol * x * x) / (x * x)


def growth_ratios(p: TrianglePoint, k_max: int = 50, tol: float = 1e-10):
    """E_k(p) / ((k+1)(1+y)/x^2) for k <= k_max; a constant bounds them all."""
    values, _ = E_series_all(k_max, p, tol)
    k = np.arange(k_max + 1)
    return values / ((k + 1) * (1.0 + p.y) / p.x**2)


def e_l2_dy(k: int, x: float, tol: float = 1e-8) -> float:
    """int_0^x E_k(x, y)^2 dy, finite for each fixed x (Gauss-Legendre in y)."""
    from .special_fn import gl_panel
    ys, ws = gl_panel(0.0, x, 24)
    vals = np.array([E_series(k, TrianglePoint(x, float(yv)), tol) for yv in ys])
    return float(ws @ vals**2)


def e_l2_divergence(k: int = 0, x_mins=(0.2, 0.1, 0.05, 0.025, 0.0125), tol: float = 1e-8):
    """Growth of int_{x > x_min} E_k^2 dx dy as x_min shrinks.

    Each halving of x_min adds a slab whose contribution does not shrink (E_k
    grows like 1/x), so the partial integrals grow without bound; returned as
    ``[(x_min, integral), ...]``.
    """
    from .special_fn import gl_panel
    out = []
    total = 0.0
    hi = 1.0
    for lo in sorted(x_mins, reverse=True):
        xs, ws = gl_panel(lo, hi, 12)
        total += sum(w * e_l2_dy(k, float(xv), tol) for xv, w in zip(xs, ws))
        out.append((lo, float(total)))
        hi = lo
    return out


# --- the expansion ------------------------------------------------------------------

@dataclass
class NuclearExpansion:
    coefficients: list
    K: int
    residual_bound: float
    phi_name: str = ""
    point: tuple = ()
    value: float = float("nan")
    partial_sums: list = field(default_factory=list)
    converged: bool = False
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "nuclear_expansion",
            "phi": self.phi_name,
            "point": list(self.point),
            "K": self.K,
            "coefficients": list(self.coefficients),
            "value": self.value,
            "residual_bound": self.residual_bound,
            "converged": self.converged,
            "warnings": list(self.warnings),
            "metadata": metadata(),
        }

    def to_json(self) -> str:
        return dumps17(self.to_dict())


def _decreasing_tail(mags) -> bool:
    """Magnitudes eventually decrease: true over the last half of the range."""
    tail = [m for m in mags[len(mags) // 2:] if m > 1e-300]
    return all(b <= a for a, b in zip(tail, tail[1:]))


def nuclear_apply(phi: HalfLineFunction, p: TrianglePoint, K: int, tol: float = 1e-10):
    """sum_{k<=K} <phi, eta_k> E_k(p) and the expansion record.

    ``converged`` is set when the last two increments are both below ``tol``;
    ``residual_bound`` is the size of the last increment plus the E-series
    tail bounds, an estimate rather than a certificate.
    """
    if K < 0:
        raise DomainError("K must be non-negative")
    coeffs = [coefficient(phi, k) for k in range(K + 1)]
    E, bounds = E_series_all(K, p, tol)
    terms = np.asarray(coeffs) * E
    partial = np.cumsum(terms).tolist()
    last = np.abs(terms[-2:]).max()
    exp = NuclearExpansion(
        coefficients=coeffs,
        K=K,
        residual_bound=float(abs(terms[-1]) + np.abs(np.asarray(coeffs)) @ bounds),
        phi_name=phi.name,
        point=(p.x, p.y),
        value=float(math.fsum(terms.tolist())),
        partial_sums=partial,
        converged=bool(K >= 1 and last < tol),
    )
    if K >= 4 and not _decreasing_tail(np.abs(coeffs).tolist()):
        exp.warnings.append("coefficient magnitudes not eventually decreasing")
    return exp.value, exp


def direct_value(phi: HalfLineFunction, p: TrianglePoint, tol: float = 1e-12) -> float:
    """L phi_hat at ``p`` through the branch sum of the transfer operator."""
    return apply_L(hat_function(phi), p, tol)


# --- summability -----------------------------------------------------------------

def e_norm(k: int, tol: float = 1e-10) -> float:
    """||L_k^1|| in L^2(dm), using exp(-t/2)-damped Laguerre values."""
    def g(t):
        damped = laguerre_l1(k, t, damp=0.5)
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.where(t > 0, t / -np.expm1(-np.where(t > 0, t, 1.0)), 1.0)  # t e^t/(e^t - 1)
        return damped * damped * w

    return math.sqrt(integrate_halfline(g, tol, t_max=1e5))


def eta_norm(k: int, rel_tol: float = 1e-10) -> float:
    """||eta_k|| in L^2(dm) by quadrature (``rel_tol`` relative to a crude size estimate)."""
    # the integrand s^{2k+1} e^{-3s}/((k+1)!)^2 peaks near s = (2k+1)/3
    s0 = (2 * k + 1) / 3.0
    scale = math.exp((2 * k + 1) * math.log(max(s0, 1e-300)) - 3.0 * s0 - 2.0 * math.lgamma(k + 2)) if k else 1.0
    return math.sqrt(integrate_dm(lambda s: eta(k, s) ** 2, rel_tol * scale, t_min=k + 8.0))


def eta_norm_sq_series(k: int) -> float:
    """||eta_k||^2 = (2k+1)! zeta(2k+2, 3) / ((k+1)!)^2, from expanding 1/(e^s - 1)."""
    z, _ = shifted_zeta(2.0 * k + 2.0, 3.0)
    return math.exp(math.lgamma(2 * k + 2) - 2.0 * math.lgamma(k + 2)) * z


def summability_report(K: int):
    """Partial sums sum_{k<=j} ||e_k|| ||eta_k|| for j = 0..K."""
    if K < 0:
        raise DomainError("K must be non-negative")
    out = []
    acc = 0.0
    for k in range(K + 1):
        acc += e_norm(k) * eta_norm(k)
        out.append(acc)
    return out
