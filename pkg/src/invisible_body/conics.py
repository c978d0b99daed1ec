"""Confocal ellipses and hyperbola branches in focal form.

A conic is stored as its two foci and focal constant ``k``.  Every point
of the curve satisfies ``w1*d(p, f1) + w2*d(p, f2) = k`` with weights
``(1, 1)`` for an ellipse and ``(1, -1)`` / ``(-1, 1)`` for the hyperbola
branch wrapped around ``f2`` / ``f1``.  The implicit quadratic form is only
used inside :func:`ray_conic_intersections`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConic, OffCurve, OutOfExtent
from .geom import EPS_GEOM, Ray2, angle_of, as_point, dist, norm, unit

ELLIPSE = "ellipse"
HYPERBOLA = "hyperbola"

#: Smallest accepted ray parameter for an intersection.
EPS_T = 1e-9
#: Relative discriminant below which two roots are merged (tangency).
EPS_DISC = 1e-14

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class Conic:
    kind: str
    f1: np.ndarray
    f2: np.ndarray
    k: float
    branch: int = 0  # hyperbola only: 1 or 2, the focus the branch wraps

    def __post_init__(self):
        object.__setattr__(self, "f1", as_point(self.f1))
        object.__setattr__(self, "f2", as_point(self.f2))
        object.__setattr__(self, "k", float(self.k))
        c = dist(self.f1, self.f2)
        if c <= 0.0:
            raise DegenerateConic("foci coincide")
        if self.kind == ELLIPSE:
            if not self.k > c:
                raise DegenerateConic(f"ellipse needs k > |f1 f2| (k={self.k}, c={c})")
            object.__setattr__(self, "branch", 0)
        elif self.kind == HYPERBOLA:
            if not 0.0 < self.k < c:
                raise DegenerateConic(f"hyperbola needs 0 < k < |f1 f2| (k={self.k}, c={c})")
            if self.branch not in (1, 2):
                raise ValueError("hyperbola branch must be 1 or 2")
        else:
            raise ValueError(f"unknown conic kind {self.kind!r}")

    @property
    def weights(self) -> tuple[float, float]:
        if self.kind == ELLIPSE:
            return 1.0, 1.0
        return (1.0, -1.0) if self.branch == 2 else (-1.0, 1.0)

    @property
    def focal_distance(self) -> float:
        return dist(self.f1, self.f2)

    def focus(self, i: int) -> np.ndarray:
        return self.f1 if i == 1 else self.f2

    def focal_value(self, p) -> float:
        """Signed focal equation ``w1 d1 + w2 d2 - k`` (zero on the curve)."""
        w1, w2 = self.weights
        return w1 * dist(p, self.f1) + w2 * dist(p, self.f2) - self.k

    def exterior_margin(self, p) -> float:
        """Positive outside the convex set bounded by the curve."""
        v = self.focal_value(p)
        return v if self.kind == ELLIPSE else -v

    def gradient(self, p) -> np.ndarray:
        w1, w2 = self.weights
        p = as_point(p)
        return w1 * unit(p - self.f1) + w2 * unit(p - self.f2)

    def mapped(self, fn, scale: float) -> "Conic":
        """Image under a similarity ``fn`` with linear scale factor ``scale``."""
        return Conic(self.kind, fn(self.f1), fn(self.f2), self.k * abs(scale), self.branch)


def conic_through(kind: str, f1, f2, p, branch_focus: int | None = None) -> Conic:
    """The conic of the confocal family ``(f1, f2)`` of the given kind through ``p``.

    For hyperbolas ``branch_focus`` selects the branch; by default the branch
    through ``p`` (the one around the nearer focus).
    """
    f1, f2, p = as_point(f1), as_point(f2), as_point(p)
    d1, d2 = dist(p, f1), dist(p, f2)
    c = dist(f1, f2)
    tol = 1e-12 * max(1.0, c)
    if d1 <= tol or d2 <= tol:
        raise DegenerateConic("point coincides with a focus")
    if kind == ELLIPSE:
        k = d1 + d2
        if k - c <= tol:
            raise DegenerateConic("point lies on the focal segment")
        return Conic(ELLIPSE, f1, f2, k)
    if kind != HYPERBOLA:
        raise ValueError(f"unknown conic kind {kind!r}")
    near = 1 if d1 < d2 else 2
    if branch_focus is not None and branch_focus != near:
        raise DegenerateConic("point is not on the requested branch")
    k = abs(d1 - d2)
    if k <= tol:
        raise DegenerateConic("point lies on the perpendicular bisector of the foci")
    if c - k <= tol:
        raise DegenerateConic("point lies on the focal line outside the focal segment")
    return Conic(HYPERBOLA, f1, f2, k, near)


def focal_residual(c: Conic, p) -> float:
    """``|w1 d1 + w2 d2 - k|``.  A point on the other hyperbola branch has
    residual ``2k``, so the branch is encoded in the value itself."""
    return abs(c.focal_value(p))


def normal_at(c: Conic, p) -> np.ndarray:
    """Unit normal pointing away from the convex set bounded by the curve."""
    if focal_residual(c, p) >= EPS_GEOM:
        raise OffCurve(f"point {p} is not on the conic (residual {focal_residual(c, p):.3g})")
    g = c.gradient(p)
    if c.kind == HYPERBOLA:
        g = -g
    return unit(g)


def tangent_at(c: Conic, p) -> np.ndarray:
    n = normal_at(c, p)
    return np.array([-n[1], n[0]])


def polar_radius(c: Conic, pivot: int, u) -> float:
    """Distance from focus ``pivot`` to the curve along unit direction ``u``;
    ``nan`` when the ray from that focus misses the curve."""
    wp, wq = c.weights if pivot == 1 else c.weights[::-1]
    P, Q = c.focus(pivot), c.focus(3 - pivot)
    cc = dist(P, Q)
    cos_psi = float(np.dot(u, Q - P)) / cc
    den = 2.0 * (wp * c.k - cc * cos_psi)
    if den == 0.0:
        return math.nan
    r = (c.k * c.k - cc * cc) / den
    # the other focal distance must have the sign its weight demands
    if r <= 0.0 or wq * (c.k - wp * r) < -1e-12 * max(1.0, c.k):
        return math.nan
    return r


@dataclass(frozen=True, eq=False)
class ConicArc:
    """A piece of a conic given by its polar-angle extent about one focus."""

    conic: Conic
    pivot: int
    theta_min: float
    theta_max: float
    label: str = ""

    def __post_init__(self):
        if self.pivot not in (1, 2):
            raise ValueError("pivot must be 1 or 2")
        if not self.theta_min < self.theta_max:
            raise ValueError("theta_min must be smaller than theta_max")
        if self.theta_max - self.theta_min > TWO_PI + 1e-12:
            raise ValueError("arc extent exceeds a full turn")

    @classmethod
    def between(cls, conic: Conic, pivot: int, p, q, label: str = "") -> "ConicArc":
        """Arc from ``p`` to ``q`` (both on ``conic``) spanning less than a half turn."""
        P = conic.focus(pivot)
        a = angle_of(as_point(p) - P)
        b = angle_of(as_point(q) - P)
        d = math.remainder(b - a, TWO_PI)
        lo, hi = (a, a + d) if d > 0 else (a + d, a)
        return cls(conic, pivot, lo, hi, label)

    @classmethod
    def full(cls, conic: Conic, pivot: int = 1, label: str = "") -> "ConicArc":
        if conic.kind != ELLIPSE:
            raise ValueError("only an ellipse can be traversed over a full turn")
        return cls(conic, pivot, -math.pi, math.pi, label)

    @property
    def pivot_point(self) -> np.ndarray:
        return self.conic.focus(self.pivot)

    @property
    def width(self) -> float:
        return self.theta_max - self.theta_min

    def relative_angle(self, theta: float) -> float:
        return math.fmod(math.fmod(theta - self.theta_min, TWO_PI) + TWO_PI, TWO_PI)

    def contains_angle(self, theta: float) -> bool:
        if self.width >= TWO_PI:
            return True
        return self.relative_angle(theta) <= self.width

    def angle_of_point(self, p) -> float:
        return angle_of(as_point(p) - self.pivot_point)

    def point_at(self, theta: float) -> np.ndarray:
        return point_at_angle(self, theta)

    @property
    def start(self) -> np.ndarray:
        return self._point(self.theta_min)

    @property
    def end(self) -> np.ndarray:
        return self._point(self.theta_max)

    def _point(self, theta: float) -> np.ndarray:
        u = np.array([math.cos(theta), math.sin(theta)])
        r = polar_radius(self.conic, self.pivot, u)
        if not math.isfinite(r):
            raise OutOfExtent(f"ray at angle {theta} from the pivot misses the conic")
        return self.pivot_point + r * u

    def sample(self, n: int) -> np.ndarray:
        thetas = np.linspace(self.theta_min, self.theta_max, n)
        return np.array([self._point(t) for t in thetas])

    def length(self, n: int = 4097) -> float:
        """Arc length by Richardson-extrapolated polyline sums."""
        def poly(m):
            s = self.sample(m)
            return float(np.sum(np.hypot(*np.diff(s, axis=0).T)))

        fine, coarse = poly(n), poly((n + 1) // 2)
        return fine + (fine - coarse) / 3.0

    def mapped(self, fn, scale: float) -> "ConicArc":
        """Image of the arc under a similarity (possibly orientation reversing)."""
        conic = self.conic.mapped(fn, scale)
        P = conic.focus(self.pivot)
        mid = fn(self._point(0.5 * (self.theta_min + self.theta_max)))
        a = angle_of(fn(self.start) - P)
        m = angle_of(mid - P)
        da = math.remainder(a - m, TWO_PI)
        b = angle_of(fn(self.end) - P)
        db = math.remainder(b - m, TWO_PI)
        lo, hi = sorted((m + da, m + db))
        return ConicArc(conic, self.pivot, lo, hi, self.label)


def point_at_angle(arc: ConicArc, theta: float) -> np.ndarray:
    """The point of the arc at polar angle ``theta`` about the pivot focus."""
    if not arc.theta_min - 1e-15 <= theta <= arc.theta_max + 1e-15:
        raise OutOfExtent(f"angle {theta} outside [{arc.theta_min}, {arc.theta_max}]")
    return arc._point(theta)


def _quadratic_roots(qa: float, qb: float, qc: float) -> tuple[list[float], bool]:
    disc = qb * qb - 4.0 * qa * qc
    scale = qb * qb + abs(4.0 * qa * qc)
    if scale == 0.0:
        return [], False
    if abs(disc) <= EPS_DISC * scale:
        if qa == 0.0:
            return [], True
        return [-qb / (2.0 * qa)], True
    if disc < 0.0:
        return [], False
    q = -0.5 * (qb + math.copysign(math.sqrt(disc), qb))
    roots = []
    if qa != 0.0:
        roots.append(q / qa)
    if q != 0.0:
        roots.append(qc / q)
    return roots, False


def _polish(c: Conic, o, u, t: float, steps: int = 2) -> float:
    w1, w2 = c.weights
    for _ in range(steps):
        p = o + t * u
        a, b = p - c.f1, p - c.f2
        d1, d2 = norm(a), norm(b)
        if d1 == 0.0 or d2 == 0.0:
            break
        g = w1 * d1 + w2 * d2 - c.k
        dg = w1 * float(np.dot(u, a)) / d1 + w2 * float(np.dot(u, b)) / d2
        if abs(dg) < 1e-8:
            break
        t -= g / dg
    return t


def ray_conic_intersections(r: Ray2, c: Conic) -> list[tuple[float, np.ndarray]]:
    """Forward intersections of a ray with the (whole) conic or branch, ascending in ``t``."""
    o, u = r.origin, r.dir
    of1, of2 = o - c.f1, o - c.f2
    n1, n2 = float(np.dot(of1, of1)), float(np.dot(of2, of2))
    A = n1 - n2
    B = 2.0 * float(np.dot(u, c.f2 - c.f1))
    C = n1 + n2
    D = 2.0 * float(np.dot(u, of1 + of2))
    k2 = c.k * c.k
    roots, _ = _quadratic_roots(B * B - 4.0 * k2, 2.0 * A * B - 2.0 * k2 * D, A * A - 2.0 * k2 * C + k2 * k2)
    hits = []
    for t in roots:
        t = _polish(c, o, u, t)
        if not t >= EPS_T:
            continue
        p = o + t * u
        if focal_residual(c, p) < EPS_GEOM:
            hits.append((t, p))
    hits.sort(key=lambda h: h[0])
    out: list[tuple[float, np.ndarray]] = []
    for t, p in hits:
        if out and abs(t - out[-1][0]) <= EPS_T:
            continue
        out.append((t, p))
    return out


def ray_conic_hits(r: Ray2, arc: ConicArc) -> list[tuple[float, np.ndarray]]:
    """Forward intersections of a ray with an arc (right branch and within extent)."""
    return [(t, p) for t, p in ray_conic_intersections(r, arc.conic) if arc.contains_angle(arc.angle_of_point(p))]
