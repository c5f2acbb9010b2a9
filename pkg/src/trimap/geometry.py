"""Planar helpers: rectangles clipped to the triangle and their images under
the inverse branches, with Gauss quadrature on convex polygons.

Inverse branches are projective maps, so they send the convex polygon
``rectangle ∩ triangle`` to the convex polygon spanned by the images of its
vertices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .special_fn import gauss_legendre


@dataclass(frozen=True)
class Rectangle:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 <= self.x1 and self.y0 <= self.y1):
            raise ValueError(f"degenerate corner order in {self}")

    def polygon(self):
        """Vertices of ``self ∩ closed triangle`` in counter-clockwise order."""
        poly = [(self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1)]
        for a, b, c in ((0.0, 1.0, 0.0), (-1.0, 0.0, 1.0), (1.0, -1.0, 0.0)):  # y>=0, x<=1, x-y>=0
            poly = _clip(poly, a, b, c)
            if not poly:
                break
        return poly


WHOLE_TRIANGLE = Rectangle(0.0, 1.0, 0.0, 1.0)


def _clip(poly, a, b, c):
    """Sutherland-Hodgman clip of ``poly`` to the half-plane a*x + b*y + c >= 0."""
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        fp = a * p[0] + b * p[1] + c
        fq = a * q[0] + b * q[1] + c
        if fp >= 0:
            out.append(p)
        if (fp >= 0) != (fq >= 0):
            s = fp / (fp - fq)
            out.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
    # drop repeated vertices produced by clipping through a corner
    dedup = []
    for v in out:
        if not dedup or abs(v[0] - dedup[-1][0]) + abs(v[1] - dedup[-1][1]) > 1e-15:
            dedup.append(v)
    if len(dedup) > 1 and abs(dedup[0][0] - dedup[-1][0]) + abs(dedup[0][1] - dedup[-1][1]) <= 1e-15:
        dedup.pop()
    return dedup if len(dedup) >= 3 else []


def polygon_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    v = np.asarray(poly)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def branch_image(k: int, poly):
    """Image of a polygon under the inverse branch ``t_k``."""
    out = []
    for x, y in poly:
        d = 1.0 + k * x + y
        out.append((1.0 / d, x / d))
    # t_k is projective and orientation preserving, so vertices map in order
    return out


def polygon_rule(poly, n: int = 24):
    """Nodes and weights for integrating over a convex polygon.

    Fan triangulation from the first vertex; each triangle uses the collapsed
    (Duffy) tensor Gauss-Legendre rule of order ``n``.
    """
    if len(poly) < 3:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    g, w = gauss_legendre(n)
    u = 0.5 * (g + 1.0)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    W = np.outer(wu, wu) * U
    xs, ys, ws = [], [], []
    a = np.asarray(poly[0])
    for i in range(1, len(poly) - 1):
        b = np.asarray(poly[i])
        c = np.asarray(poly[i + 1])
        jac = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        px = a[0] + U * (b[0] - a[0]) + U * V * (c[0] - b[0])
        py = a[1] + U * (b[1] - a[1]) + U * V * (c[1] - b[1])
        xs.append(px.ravel())
        ys.append(py.ravel())
        ws.append((W * jac).ravel())
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)


def graded_slabs(poly, ratio: float = 2.0):
    """Cut a convex polygon by vertical lines at x_min * ratio**j.

    Keeps each piece's x-extent comparable to its distance from x = 0, where
    the integrands of interest carry a 1/x factor.
    """
    xs = [v[0] for v in poly]
    lo, hi = min(xs), max(xs)
    if lo <= 0.0 or hi / lo <= ratio:
        return [poly]
    pieces = []
    a = lo
    while a < hi:
        b = min(a * ratio, hi)
        piece = _clip(_clip(poly, 1.0, 0.0, -a), -1.0, 0.0, b)
        if piece:
            pieces.append(piece)
        a = b
    return pieces


def integrate_polygon(f, poly, n: int = 24, graded: bool = True) -> float:
    """Integral of vectorized ``f(x, y)`` over a convex polygon."""
    total = 0.0
    for piece in graded_slabs(poly) if graded and poly else [poly]:
        x, y, w = polygon_rule(piece, n)
        if w.size:
            total += float(np.dot(w, f(x, y)))
    return total


def y_range(poly, x: float):
    """Vertical extent ``(ylo, yhi)`` of a convex polygon at abscissa ``x``."""
    ys = []
    n = len(poly)
    for i in range(n):
        (x0, y0), (x1, y1) = poly[i], poly[(i + 1) % n]
        if x0 == x1:
            if x0 == x:
                ys.extend([y0, y1])
            continue
        if min(x0, x1) <= x <= max(x0, x1):
            s = (x - x0) / (x1 - x0)
            ys.append(y0 + s * (y1 - y0))
    if not ys:
        return None
    return min(ys), max(ys)


def rectangle_suite(count: int = 20, seed: int = 2015, x_min: float = 0.05):
    """Fixed list of rectangles with positive area inside the triangle and x >= x_min."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        xa, xb = np.sort(rng.uniform(x_min, 1.0, 2))
        ya, yb = np.sort(rng.uniform(0.0, 1.0, 2))
        r = Rectangle(float(xa), float(xb), float(ya), float(yb))
        if polygon_area(r.polygon()) > 1e-3:
            out.append(r)
    return out
