"""Body of revolution about the axis ``A1 A2`` (the x axis of body coordinates).

Body coordinates in 3D: the base plane is ``z = 0`` and a point ``(x, y)``
of the planar body at meridian angle ``theta`` sits at
``(x, y cos theta, y sin theta)``.  A ray from a point of the axis stays in
the plane spanned by the axis and its direction, and surfaces of revolution
reflect within that plane, so 3D traces reduce to planar ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .billiard import EXITED, MAX_BOUNCES, TraceResult, trace_batch
from .conics import focal_residual, normal_at
from .construction import Body2D, Piece
from .errors import NotExited, OutsideRevolvedRange
from .geom import EPS_GEOM, Ray2, Segment2

TWO_PI = 2.0 * math.pi
#: Meridian directions closer than this to the end of a partial range are rejected.
RANGE_GUARD = 1e-9


def _reflect_y(p) -> np.ndarray:
    return np.array([p[0], -p[1]])


@dataclass
class Body3D:
    base: Body2D
    angular_range: tuple[float, float] = (0.0, TWO_PI)
    n_theta: int = 64
    n_arc: int = 32
    _meridian: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        t0, t1 = (float(x) for x in self.angular_range)
        if not t0 < t1 or t1 - t0 > TWO_PI + 1e-12:
            raise ValueError("angular_range must satisfy theta0 < theta1 <= theta0 + 2 pi")
        self.angular_range = (t0, t1)

    @property
    def full(self) -> bool:
        return self.angular_range[1] - self.angular_range[0] >= TWO_PI - 1e-12

    def covers(self, theta: float, guard: float = 0.0) -> bool:
        if self.full:
            return True
        t0, t1 = self.angular_range
        rel = math.fmod(math.fmod(theta - t0, TWO_PI) + TWO_PI, TWO_PI)
        return guard <= rel <= (t1 - t0) - guard

    def meridian_body(self, theta: float) -> Body2D:
        """Planar section in the meridian plane of ``theta``: the base body,
        plus its mirror image across the axis when ``theta + pi`` is covered."""
        both = self.covers(theta + math.pi)
        key = bool(both)
        if key not in self._meridian:
            b = self.base
            pieces = list(b.pieces)
            if both:
                for p in b.pieces:
                    if p.kind == "arc":
                        geom = p.geom.mapped(_reflect_y, 1.0)
                    else:
                        geom = Segment2(_reflect_y(p.geom.a), _reflect_y(p.geom.b))
                    pieces.append(Piece(p.kind, geom, (p.ref[0], p.ref[1] + "'", p.ref[2])))
            self._meridian[key] = Body2D(b.params, b.frame, b.points, b.sequences, b.quads, b.report, pieces)
        return self._meridian[key]


def lift(p2, theta: float) -> np.ndarray:
    """Point of the meridian plane ``theta`` with planar coordinates ``p2``
    (negative ``y`` lands in the half-plane ``theta + pi``)."""
    return np.array([p2[0], p2[1] * math.cos(theta), p2[1] * math.sin(theta)])


def rotate_about_axis(v, psi: float) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    v = np.asarray(v, float)
    return np.array([v[0], c * v[1] - s * v[2], s * v[1] + c * v[2]])


@dataclass(frozen=True, eq=False)
class Ray3:
    origin: np.ndarray
    dir: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, float).reshape(3).copy()
        d = np.asarray(self.dir, float).reshape(3)
        n = float(np.linalg.norm(d))
        if n == 0.0:
            raise ValueError("zero direction")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "dir", d / n)


@dataclass
class TraceResult3D:
    initial: Ray3
    theta: float
    planar: TraceResult
    bounces: list[np.ndarray]
    exit: Ray3 | None

    @property
    def status(self) -> str:
        return self.planar.status

    @property
    def n_bounces(self) -> int:
        return len(self.bounces)


def _split(ray: Ray3, body: Body3D):
    """Meridian angle and planar ray of a 3D ray starting on the axis."""
    o, d = ray.origin, ray.dir
    if abs(o[1]) > EPS_GEOM or abs(o[2]) > EPS_GEOM:
        raise ValueError("ray origin must lie on the axis")
    rho = math.hypot(d[1], d[2])
    theta = math.atan2(d[2], d[1]) if rho > 0.0 else body.angular_range[0]
    if theta < 0.0:
        theta += TWO_PI
    return theta, np.array([o[0], 0.0]), np.array([d[0], rho])


def trace3d_batch(rays: list[Ray3], body: Body3D, max_bounces: int = MAX_BOUNCES) -> list[TraceResult3D]:
    groups: dict[bool, list[int]] = {}
    split = []
    for i, r in enumerate(rays):
        theta, o2, d2 = _split(r, body)
        if not body.covers(theta, RANGE_GUARD):
            raise OutsideRevolvedRange(f"meridian angle {theta} is outside {body.angular_range}")
        split.append((theta, o2, d2))
        groups.setdefault(body.covers(theta + math.pi), []).append(i)
    out: list[TraceResult3D | None] = [None] * len(rays)
    for _, idx in sorted(groups.items()):
        mb = body.meridian_body(split[idx[0]][0])
        res = trace_batch(mb, [split[i][1] for i in idx], [split[i][2] for i in idx], max_bounces)
        for i, tr in zip(idx, res):
            theta = split[i][0]
            pts = [lift(p, theta) for p in tr.points]
            ex = None
            if tr.exit is not None:
                ex = Ray3(lift(tr.exit.origin, theta), lift(tr.exit.dir, theta))
            out[i] = TraceResult3D(rays[i], theta, tr, pts, ex)
    return out


def trace3d(ray: Ray3, body: Body3D, max_bounces: int = MAX_BOUNCES) -> TraceResult3D:
    return trace3d_batch([ray], body, max_bounces)[0]


def exit_deviation3d(source, tr: TraceResult3D) -> tuple[float, float]:
    """Angle between the initial and exit directions and distance from the
    source to the exit line."""
    if tr.status != EXITED or tr.exit is None:
        raise NotExited(f"trace status is {tr.status}")
    d0, d1 = tr.initial.dir, tr.exit.dir
    angle = math.atan2(float(np.linalg.norm(np.cross(d0, d1))), float(np.dot(d0, d1)))
    w = np.asarray(source, float) - tr.exit.origin
    distance = float(np.linalg.norm(np.cross(w, d1)))
    return angle, distance


# --- meshes -----------------------------------------------------------------


@dataclass
class MeshGroup:
    label: str
    piece: int
    vertices: slice
    faces: slice


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray
    groups: list[MeshGroup]
    meridian: np.ndarray  # planar (x, y) of every vertex before lifting


def _theta_steps(body: Body3D, n_theta: int) -> int:
    if body.full:
        return n_theta
    span = body.angular_range[1] - body.angular_range[0]
    return max(1, int(round(n_theta * span / TWO_PI)))


def _outward_2d(body: Body2D, piece: Piece, p, q) -> np.ndarray:
    """Planar normal at ``p`` pointing away from the convex side (arcs) or
    out of the quadrangle (segments)."""
    if piece.kind == "arc":
        return normal_at(piece.geom.conic, p)
    seg = piece.geom
    e = seg.b - seg.a
    n = np.array([e[1], -e[0]]) / seg.length
    quad = body.quads[piece.ref[1]]
    probe = 0.5 * (seg.a + seg.b) + 1e-6 * n
    return -n if quad.contains(probe) else n


def revolve_mesh(body: Body3D, n_theta: int | None = None, n_arc: int | None = None) -> TriangleMesh:
    """Triangulated surface of revolution of every boundary piece.

    ``n_theta`` is the resolution of a full turn; partial ranges use the
    proportional number of steps.
    """
    n_theta = body.n_theta if n_theta is None else n_theta
    n_arc = body.n_arc if n_arc is None else n_arc
    if n_theta < 3 or n_arc < 2:
        raise ValueError("need n_theta >= 3 and n_arc >= 2")
    steps = _theta_steps(body, n_theta)
    t0, t1 = body.angular_range
    thetas = np.linspace(t0, t1, steps + 1)
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    base = body.base
    verts, faces, groups, merid = [], [], [], []
    nv = nf = 0
    for k, piece in enumerate(base.pieces):
        if piece.kind == "arc":
            prof = piece.geom.sample(n_arc + 1)
        else:
            s = np.linspace(0.0, 1.0, n_arc + 1)[:, None]
            prof = piece.geom.a + s * (piece.geom.b - piece.geom.a)
        # vertex (i, j) -> profile point i at meridian j
        V = np.empty((n_arc + 1, steps + 1, 3))
        V[..., 0] = prof[:, 0, None]
        V[..., 1] = prof[:, 1, None] * cos_t[None]
        V[..., 2] = prof[:, 1, None] * sin_t[None]
        ii, jj = np.meshgrid(np.arange(n_arc), np.arange(steps), indexing="ij")
        a = (ii * (steps + 1) + jj).ravel()
        b = a + (steps + 1)
        c = b + 1
        d = a + 1
        F = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
        # orient by the first triangle against the outward normal
        Vf = V.reshape(-1, 3)
        tri = Vf[F[0]]
        fn = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        n2 = _outward_2d(base, piece, prof[0], prof[1])
        n3 = np.array([n2[0], n2[1] * cos_t[0], n2[1] * sin_t[0]])
        if float(np.dot(fn, n3)) < 0.0:
            F = F[:, ::-1]
        verts.append(Vf)
        faces.append(F + nv)
        merid.append(np.repeat(prof, steps + 1, axis=0))
        groups.append(MeshGroup(piece.label, k, slice(nv, nv + Vf.shape[0]), slice(nf, nf + F.shape[0])))
        nv += Vf.shape[0]
        nf += F.shape[0]
    return TriangleMesh(np.vstack(verts), np.vstack(faces), groups, np.vstack(merid))


def meridian_residuals(body: Body3D, vertices: np.ndarray, groups: list[MeshGroup]) -> np.ndarray:
    """Per-vertex residual after projecting back to the meridian plane: the
    focal residual for arcs, the distance to the segment for segments."""
    out = np.empty(vertices.shape[0])
    for g in groups:
        piece = body.base.pieces[g.piece]
        V = vertices[g.vertices]
        planar = np.stack([V[:, 0], np.hypot(V[:, 1], V[:, 2])], axis=1)
        if piece.kind == "arc":
            c = piece.geom.conic
            out[g.vertices] = [focal_residual(c, p) for p in planar]
        else:
            seg = piece.geom
            line = seg.line()
            out[g.vertices] = [line.distance_to(p) for p in planar]
    return out


def write_obj(mesh: TriangleMesh, fh) -> None:
    """ASCII OBJ, one object per boundary piece, positions only."""
    fh.write("# surface of revolution about the x axis (body coordinates)\n")
    for g in mesh.groups:
        fh.write(f"o {g.label}\n")
        for v in mesh.vertices[g.vertices]:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in mesh.faces[g.faces]:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def read_obj(fh) -> tuple[np.ndarray, np.ndarray, list[tuple[str, int, int]]]:
    """Vertices, faces (0-based) and ``(name, first vertex, count)`` per object."""
    verts, faces, objs = [], [], []
    for line in fh:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "o":
            objs.append([parts[1], len(verts), 0])
        elif parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
            objs[-1][2] += 1
        elif parts[0] == "f":
            faces.append([int(x) - 1 for x in parts[1:4]])
    return np.array(verts), np.array(faces, dtype=int), [tuple(o) for o in objs]
