"""Planar primitives: points, rays, lines, segments and the handful of
operations the construction is built from.

Points and directions are plain ``numpy`` arrays of shape ``(2,)``.  All
tolerances are absolute and assume the normalized frame in which
``|A1 A2| = 2`` (see :class:`Frame`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Global geometric tolerance on the normalized scale.
EPS_GEOM = 1e-9
#: Threshold on ``|cross(d1, d2)|`` below which unit directions are parallel.
EPS_PARALLEL = 1e-12
#: Minimal separation of segment endpoints.
EPS_SEGMENT = 1e-12


def point(x: float, y: float) -> np.ndarray:
    return np.array([float(x), float(y)])


def as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(2)
    return a.copy()


def cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def norm(v) -> float:
    return math.hypot(float(v[0]), float(v[1]))


def dist(p, q) -> float:
    return math.hypot(float(p[0] - q[0]), float(p[1] - q[1]))


def unit(v) -> np.ndarray:
    n = norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return np.array([v[0] / n, v[1] / n], dtype=float)


def angle_of(v) -> float:
    return math.atan2(float(v[1]), float(v[0]))


def direction(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def rotate(v, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def wrap_angle(a: float) -> float:
    """Map an angle to ``(-pi, pi]``."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True, eq=False)
class Ray2:
    origin: np.ndarray
    dir: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", as_point(self.origin))
        object.__setattr__(self, "dir", unit(as_point(self.dir)))

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.dir

    @classmethod
    def from_angle(cls, origin, theta: float) -> "Ray2":
        return cls(origin, direction(theta))

    @classmethod
    def through(cls, origin, target) -> "Ray2":
        return cls(origin, as_point(target) - as_point(origin))


@dataclass(frozen=True, eq=False)
class Line2:
    point: np.ndarray
    dir: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", as_point(self.point))
        object.__setattr__(self, "dir", unit(as_point(self.dir)))

    @classmethod
    def through(cls, p, q) -> "Line2":
        return cls(p, as_point(q) - as_point(p))

    def distance_to(self, p) -> float:
        return abs(cross(self.dir, as_point(p) - self.point))


@dataclass(frozen=True, eq=False)
class Segment2:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a, b = as_point(self.a), as_point(self.b)
        if dist(a, b) <= EPS_SEGMENT:
            raise ValueError("segment endpoints coincide")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return dist(self.a, self.b)

    def line(self) -> Line2:
        return Line2.through(self.a, self.b)

    def param_of(self, p) -> float:
        """Projection parameter of ``p`` (0 at ``a``, 1 at ``b``)."""
        d = self.b - self.a
        return float(np.dot(as_point(p) - self.a, d) / np.dot(d, d))

    def contains(self, p, tol: float = EPS_GEOM) -> bool:
        p = as_point(p)
        if self.line().distance_to(p) > tol:
            return False
        s = self.param_of(p)
        slack = tol / self.length
        return -slack <= s <= 1.0 + slack


def intersect_lines(l1: Line2, l2: Line2) -> np.ndarray | None:
    """Unique intersection point of two lines, ``None`` if (nearly) parallel."""
    den = cross(l1.dir, l2.dir)
    if abs(den) < EPS_PARALLEL:
        return None
    t = cross(l2.point - l1.point, l2.dir) / den
    return l1.point + t * l1.dir


def line_params(l1: Line2, l2: Line2) -> tuple[float, float] | None:
    """Parameters ``(t, s)`` with ``l1.point + t l1.dir == l2.point + s l2.dir``."""
    den = cross(l1.dir, l2.dir)
    if abs(den) < EPS_PARALLEL:
        return None
    w = l2.point - l1.point
    return cross(w, l2.dir) / den, cross(w, l1.dir) / den


def reflect_dir(d, n) -> np.ndarray:
    """Specular reflection of direction ``d`` about a mirror with unit normal ``n``."""
    d = as_point(d)
    n = as_point(n)
    r = d - 2.0 * float(np.dot(d, n)) * n
    return r / norm(r)


def reflect_point_across_line(p, line: Line2) -> np.ndarray:
    w = as_point(p) - line.point
    along = float(np.dot(w, line.dir)) * line.dir
    return line.point + 2.0 * along - w


def homothety(center, ratio: float, p) -> np.ndarray:
    if not math.isfinite(ratio) or ratio == 0.0:
        raise ValueError("homothety ratio must be finite and nonzero")
    c = as_point(center)
    return c + ratio * (as_point(p) - c)


def collinearity_residual(p, q, r) -> float:
    """Sine of the angle ``q p r``: ``|cross(q-p, r-p)| / (|q-p| |r-p|)``.

    Zero iff the points are collinear; unchanged by rigid motions and by
    scaling about ``p``.
    """
    p, q, r = as_point(p), as_point(q), as_point(r)
    u, v = q - p, r - p
    return abs(cross(u, v)) / max(norm(u) * norm(v), 1e-300)


def point_in_polygon(p, poly) -> bool:
    """Even-odd test for a simple polygon given as a vertex sequence."""
    x, y = float(p[0]), float(p[1])
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside


def polygon_margin(p, poly) -> float:
    """Signed distance from ``p`` to the polygon boundary, positive inside."""
    p = as_point(p)
    best = math.inf
    n = len(poly)
    for i in range(n):
        a, b = as_point(poly[i]), as_point(poly[(i + 1) % n])
        d = b - a
        s = min(1.0, max(0.0, float(np.dot(p - a, d) / np.dot(d, d))))
        best = min(best, dist(p, a + s * d))
    return best if point_in_polygon(p, poly) else -best


class Frame:
    """Similarity (optionally orientation-reversing) between the caller's
    coordinates and the normalized frame: ``A1 -> (-1, 0)``, ``A2 -> (1, 0)``
    and the construction side (where ``L`` lies) in the upper half-plane.
    """

    def __init__(self, A1, A2, side_point=None):
        A1, A2 = as_point(A1), as_point(A2)
        d = A2 - A1
        length = norm(d)
        if length <= EPS_SEGMENT:
            raise ValueError("A1 and A2 coincide")
        self.origin = 0.5 * (A1 + A2)
        self.scale = 2.0 / length
        c, s = d[0] / length, d[1] / length
        rot = np.array([[c, s], [-s, c]])
        flip = 1.0
        if side_point is not None:
            q = rot @ (as_point(side_point) - self.origin)
            if q[1] < 0.0:
                flip = -1.0
        self.flip = flip
        self._m = np.diag([1.0, flip]) @ rot
        self._minv = self._m.T

    @property
    def reflects(self) -> bool:
        return self.flip < 0.0

    def to_local(self, p) -> np.ndarray:
        return self.scale * (self._m @ (as_point(p) - self.origin))

    def to_world(self, q) -> np.ndarray:
        return self._minv @ as_point(q) / self.scale + self.origin

    def dir_to_local(self, v) -> np.ndarray:
        return unit(self._m @ as_point(v))

    def dir_to_world(self, v) -> np.ndarray:
        return unit(self._minv @ as_point(v))

    def length_to_world(self, x: float) -> float:
        return x / self.scale

    def is_identity(self) -> bool:
        return (
            self.scale == 1.0
            and not self.origin.any()
            and np.array_equal(self._m, np.eye(2))
        )
