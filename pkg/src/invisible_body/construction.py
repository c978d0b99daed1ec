"""Construction of the planar body invisible from two points.

Input: two source points ``A1, A2``, two points ``L, K`` on their
perpendicular bisector ``s`` (``L`` nearer to the line ``A1 A2``), a point
``O`` strictly between them and, optionally, the auxiliary point ``H1``
(plus ``H2``, ``M``, ``N`` for asymmetric bodies).

Everything is computed in the normalized :class:`~invisible_body.geom.Frame`
where ``A1 = (-1, 0)``, ``A2 = (1, 0)`` and the body lies in ``y > 0``.

Naming.  Each of the eight arc sequences is named ``"<source>-<vertex>"``:
its conics have foci ``source`` and ``other`` (an ellipse family around
``B1``/``B2`` or a hyperbola family around ``D1``/``D2``), its base arc
starts at ``vertex`` and is clipped by the line through ``source`` and the
``corner`` point (``N``, ``H1``, ``H2`` or ``M``).  Arc ``i`` runs from
``starts[i]`` (on the segment ``vertex -> other``) to ``ends[i]`` (on the
segment ``other -> ends[0]``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conics import ELLIPSE, HYPERBOLA, Conic, ConicArc, conic_through, ray_conic_hits, ray_conic_intersections
from .errors import ArcClippingFailed, DegenerateConic, InvalidConfiguration, RailExhausted
from .geom import (
    EPS_GEOM,
    Frame,
    Line2,
    Ray2,
    Segment2,
    as_point,
    collinearity_residual,
    dist,
    intersect_lines,
    line_params,
    polygon_margin,
    unit,
)

DEFAULT_DEPTH = 12

# name, source, vertex, kind, other focus, corner
SEQUENCE_TABLE = (
    ("A2-L", "A2", "L", ELLIPSE, "B2", "N"),
    ("A2-C1", "A2", "C1", HYPERBOLA, "D1", "H1"),
    ("A2-C2", "A2", "C2", ELLIPSE, "B2", "H2"),
    ("A2-K", "A2", "K", HYPERBOLA, "D1", "M"),
    ("A1-L", "A1", "L", ELLIPSE, "B1", "N"),
    ("A1-C2", "A1", "C2", HYPERBOLA, "D2", "H2"),
    ("A1-C1", "A1", "C1", ELLIPSE, "B1", "H1"),
    ("A1-K", "A1", "K", HYPERBOLA, "D2", "M"),
)

# (ellipse sequence, hyperbola sequence) pairs serving one sub-cone of a source
SEQUENCE_PAIRS = {
    "A2": (("A2-L", "A2-C1"), ("A2-C2", "A2-K")),
    "A1": (("A1-L", "A1-C2"), ("A1-C1", "A1-K")),
}

# quadrangle -> (vertex, corner, sequence from A1, sequence from A2)
QUAD_TABLE = (
    ("Q_L", "L", "N", "A1-L", "A2-L"),
    ("Q_C1", "C1", "H1", "A1-C1", "A2-C1"),
    ("Q_C2", "C2", "H2", "A1-C2", "A2-C2"),
    ("Q_K", "K", "M", "A1-K", "A2-K"),
)

# the two construction curves through each vertex: (kind, focus a, focus b)
VERTEX_CURVES = {
    "L": ((ELLIPSE, "A1", "B1"), (ELLIPSE, "A2", "B2")),
    "C1": ((ELLIPSE, "A1", "B1"), (HYPERBOLA, "A2", "D1")),
    "C2": ((ELLIPSE, "A2", "B2"), (HYPERBOLA, "A1", "D2")),
    "K": ((HYPERBOLA, "A2", "D1"), (HYPERBOLA, "A1", "D2")),
}

# corner point -> (its vertex, the quadrangle of derived points it must lie in)
CORNER_QUADS = {
    "H1": ("C1", ("O", "B1", "C1", "D1")),
    "M": ("K", ("O", "D1", "K", "D2")),
    "H2": ("C2", ("O", "D2", "C2", "B2")),
    "N": ("L", ("O", "B2", "L", "B1")),
}


def mirror_s(p) -> np.ndarray:
    """Reflection across the bisector ``s`` (the y axis of the normalized frame)."""
    return np.array([-p[0], p[1]])


@dataclass
class ConstructionParams:
    A1: np.ndarray
    A2: np.ndarray
    L: np.ndarray
    K: np.ndarray
    O: np.ndarray
    H1: np.ndarray | None = None
    H2: np.ndarray | None = None
    M: np.ndarray | None = None
    N: np.ndarray | None = None
    depth: int = DEFAULT_DEPTH

    def __post_init__(self):
        for name in ("A1", "A2", "L", "K", "O", "H1", "H2", "M", "N"):
            v = getattr(self, name)
            if v is not None:
                v = as_point(v)
                if not np.all(np.isfinite(v)):
                    raise InvalidConfiguration([f"{name}_finite"])
                setattr(self, name, v)
        if int(self.depth) != self.depth or self.depth < 0:
            raise InvalidConfiguration(["depth_nonnegative_integer"])
        self.depth = int(self.depth)

    @property
    def asymmetric(self) -> bool:
        return self.H2 is not None or self.M is not None or self.N is not None

    @classmethod
    def canonical(cls, depth: int = DEFAULT_DEPTH) -> "ConstructionParams":
        return cls(A1=(-1, 0), A2=(1, 0), L=(0, 1), K=(0, 3), O=(0, 2), depth=depth)

    def frame(self) -> Frame:
        return Frame(self.A1, self.A2, self.L)

    def swapped(self) -> "ConstructionParams":
        """The same configuration with the roles of ``A1`` and ``A2`` exchanged."""
        return ConstructionParams(self.A2, self.A1, self.L, self.K, self.O, self.H1, self.H2, self.M, self.N, self.depth)


@dataclass
class DerivedPoints:
    C1: np.ndarray
    C2: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    N: np.ndarray
    M: np.ndarray
    H2: np.ndarray
    H1: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in ("C1", "C2", "D1", "D2", "B1", "B2", "N", "M", "H1", "H2")}

    def mapped(self, fn) -> "DerivedPoints":
        return DerivedPoints(**{k: fn(v) for k, v in self.as_dict().items()})


@dataclass
class Check:
    name: str
    passed: bool
    margin: float
    required: bool = True

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "margin": self.margin, "required": self.required}


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if c.required and not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"ok": self.ok, "checks": [c.as_dict() for c in self.checks]}


def _line_x(p, q, r, s, name) -> np.ndarray:
    x = intersect_lines(Line2.through(p, q), Line2.through(r, s))
    if x is None:
        raise InvalidConfiguration([f"{name}_exists"])
    return x


def _local_inputs(params: ConstructionParams, frame: Frame) -> dict[str, np.ndarray]:
    pts = {}
    for name in ("A1", "A2", "L", "K", "O", "H1", "H2", "M", "N"):
        v = getattr(params, name)
        if v is not None:
            pts[name] = frame.to_local(v)
    return pts


def _check_inputs(pts: dict[str, np.ndarray]) -> None:
    bad = []
    L, K, O = pts["L"], pts["K"], pts["O"]
    if abs(L[0]) > EPS_GEOM:
        bad.append("L_on_bisector")
    if abs(K[0]) > EPS_GEOM:
        bad.append("K_on_bisector")
    if not (L[1] > EPS_GEOM and K[1] > EPS_GEOM):
        bad.append("L_K_same_side")
    if not K[1] - L[1] > EPS_GEOM:
        bad.append("L_nearer_than_K")
    if abs(O[0]) > EPS_GEOM or not (L[1] + EPS_GEOM < O[1] < K[1] - EPS_GEOM):
        bad.append("O_inside_LK")
    if bad:
        raise InvalidConfiguration(bad)


def _default_H1(C1, B1, D1, O) -> np.ndarray:
    """Midpoint between C1 and the exit of the bisector of angle B1 C1 D1
    from the quadrangle B1 C1 D1 O."""
    bis = Line2(C1, unit(B1 - C1) + unit(D1 - C1))
    best = math.inf
    for a, b in ((D1, O), (O, B1)):
        tp = line_params(bis, Line2.through(a, b))
        if tp is None:
            continue
        t, s = tp
        if t > EPS_GEOM and -1e-12 <= s / dist(a, b) <= 1.0 + 1e-12:
            best = min(best, t)
    if not math.isfinite(best):
        raise InvalidConfiguration(["H1_bisector_exit"])
    return C1 + 0.5 * best * bis.dir


def _derive_local(pts: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    _check_inputs(pts)
    A1, A2, L, K, O = (pts[k] for k in ("A1", "A2", "L", "K", "O"))
    out = dict(pts)
    out["C1"] = _line_x(A1, K, A2, L, "C1")
    out["C2"] = _line_x(A2, K, A1, L, "C2")
    out["D2"] = _line_x(A2, K, A1, O, "D2")
    out["D1"] = _line_x(A1, K, A2, O, "D1")
    out["B1"] = _line_x(A1, out["D2"], out["C1"], L, "B1")
    out["B2"] = _line_x(A2, out["D1"], out["C2"], L, "B2")
    if "H1" not in out:
        out["H1"] = _default_H1(out["C1"], out["B1"], out["D1"], O)
    if "H2" not in out:
        out["H2"] = mirror_s(out["H1"])
    if "N" not in out:
        out["N"] = _line_x(A1, out["H2"], A2, out["H1"], "N")
    if "M" not in out:
        out["M"] = _line_x(A1, out["H1"], A2, out["H2"], "M")
    return out


def _curves_at(pts: dict[str, np.ndarray], vertex: str) -> list[Conic]:
    out = []
    for kind, fa, fb in VERTEX_CURVES[vertex]:
        out.append(conic_through(kind, pts[fa], pts[fb], pts[vertex], 2 if kind == HYPERBOLA else None))
    return out


def _validate_local(pts: dict[str, np.ndarray], asymmetric: bool) -> ValidationReport:
    rep = ValidationReport()
    C1, B1, D1 = pts["C1"], pts["B1"], pts["D1"]
    bis = Line2(C1, unit(B1 - C1) + unit(D1 - C1))
    r = bis.distance_to(pts["H1"])
    rep.checks.append(Check("H1_on_bisector_B1C1D1", r < EPS_GEOM, EPS_GEOM - r, required=not asymmetric))

    for corner, (vertex, quad) in CORNER_QUADS.items():
        m = polygon_margin(pts[corner], [pts[q] for q in quad])
        rep.checks.append(Check(f"{corner}_inside_quadrangle_{''.join(quad)}", m > 0.0, m))

    for corner, (vertex, _) in CORNER_QUADS.items():
        try:
            curves = _curves_at(pts, vertex)
        except DegenerateConic:
            rep.checks.append(Check(f"{corner}_exterior_of_{vertex}_curves", False, -math.inf))
            continue
        m = min(c.exterior_margin(pts[corner]) for c in curves)
        rep.checks.append(Check(f"{corner}_exterior_of_{vertex}_curves", m > 0.0, m))

    for a, b, c in (("A1", "H1", "M"), ("A1", "H2", "N"), ("A2", "M", "H2"), ("A2", "N", "H1")):
        r = collinearity_residual(pts[a], pts[b], pts[c])
        rep.checks.append(Check(f"{a}_{b}_{c}_collinear", r < EPS_GEOM, EPS_GEOM - r))

    if asymmetric is False:
        for name in ("N", "M"):
            r = abs(pts[name][0])
            rep.checks.append(Check(f"{name}_on_KL", bool(r < EPS_GEOM), float(EPS_GEOM - r), required=False))

    # A segment source->corner may only meet the vertex curve that has the
    # source as a focus; crossing the other clipped arc at that vertex would
    # make the quadrangle boundary self-intersect.
    for qname, vertex, corner, s1, s2 in QUAD_TABLE:
        for src, other_seq in (("A1", s2), ("A2", s1)):
            name = f"segment_{src}{corner}_meets_one_{vertex}_curve"
            S, X = pts[src], pts[corner]
            length = dist(S, X)
            try:
                arc = clip_base_arc(pts, other_seq)
            except (InvalidConfiguration, DegenerateConic):
                rep.checks.append(Check(name, False, -math.inf))
                continue
            if length <= EPS_GEOM:
                rep.checks.append(Check(name, False, -math.inf))
                continue
            margin = 1.0
            for t, _ in ray_conic_hits(Ray2.through(S, X), arc):
                margin = min(margin, (t - length) / length)
            rep.checks.append(Check(name, margin > 0.0, margin))
    return rep


def derive_points(params: ConstructionParams, check: bool = True) -> DerivedPoints:
    """All derived points, reported in the caller's frame.

    Raises :class:`InvalidConfiguration` for malformed inputs and, when
    ``check`` is true, for any violated constraint of the validation report.
    """
    frame = params.frame()
    pts = _derive_local(_local_inputs(params, frame))
    if check:
        rep = _validate_local(pts, params.asymmetric)
        if not rep.ok:
            raise InvalidConfiguration(rep.failed())
    return DerivedPoints(**{k: frame.to_world(pts[k]) for k in ("C1", "C2", "D1", "D2", "B1", "B2", "N", "M", "H2", "H1")})


def validate_configuration(params: ConstructionParams, derived: DerivedPoints) -> ValidationReport:
    """Every positional constraint with pass/fail and a margin (normalized units)."""
    frame = params.frame()
    pts = _local_inputs(params, frame)
    pts.update({k: frame.to_local(v) for k, v in derived.as_dict().items()})
    return _validate_local(pts, params.asymmetric)


@dataclass
class ArcSequence:
    name: str
    source: str
    vertex: str
    kind: str
    other: str
    corner: str
    source_point: np.ndarray
    other_point: np.ndarray
    arcs: list[ConicArc]
    starts: list[np.ndarray]
    ends: list[np.ndarray]

    @property
    def vertex_rail(self) -> Segment2:
        return Segment2(self.starts[0], self.other_point)

    @property
    def end_rail(self) -> Segment2:
        return Segment2(self.other_point, self.ends[0])

    @property
    def depth(self) -> int:
        return len(self.arcs) - 1


def clip_base_arc(pts: dict[str, np.ndarray], name: str) -> ConicArc:
    """Base arc of a sequence: from the vertex to the clipping line source->corner.

    For an ellipse the clip point must lie on the segment source->corner, for
    a hyperbola branch (whose convex side faces away from the source) beyond
    the corner on the same ray.
    """
    _, src, vertex, kind, other, corner = _row(name)
    S, F, V, X = pts[src], pts[other], pts[vertex], pts[corner]
    conic = conic_through(kind, S, F, V, 2 if kind == HYPERBOLA else None)
    hits = ray_conic_intersections(Ray2.through(S, X), conic)
    if not hits:
        raise ArcClippingFailed([f"{name}_clip_exists"])
    t, end = hits[0]
    sx = dist(S, X)
    on_segment = t < sx - EPS_GEOM
    if (kind == ELLIPSE) != on_segment:
        raise ArcClippingFailed([f"{name}_clip_position"])
    if dist(end, V) <= EPS_GEOM:
        raise ArcClippingFailed([f"{name}_clip_degenerate"])
    return ConicArc.between(conic, 1, V, end, f"{name}[0]")


def _row(name: str):
    for row in SEQUENCE_TABLE:
        if row[0] == name:
            return row
    raise KeyError(name)


def generate_sequence(base: ConicArc, name: str, source, other, start, end, depth: int):
    """Arcs ``0..depth`` of one sequence, with their start and end points.

    Arc ``i+1`` is the confocal conic through the point where the line from
    the source through the end of arc ``i`` meets the vertex rail
    ``start -> other`` (between the source and that end for ellipses, beyond
    it for hyperbolas).  Its other end is where it crosses the end rail
    ``other -> end``.
    """
    S, F = as_point(source), as_point(other)
    V, E0 = as_point(start), as_point(end)
    kind = base.conic.kind
    starts, ends, arcs = [V], [E0], [base]
    vertex_rail = Line2.through(V, F)
    len_vf = dist(V, F)
    end_dir = E0 - F
    len_fe = dist(F, E0)
    for i in range(depth):
        prev = ends[-1]
        tp = line_params(Line2.through(S, prev), vertex_rail)
        if tp is None:
            raise RailExhausted([f"{name}[{i + 1}]_vertex_rail"])
        t, s = tp
        ratio = t / dist(S, prev)
        ok_side = ratio < 1.0 if kind == ELLIPSE else ratio > 1.0
        if not (ok_side and 0.0 < s < len_vf):
            raise RailExhausted([f"{name}[{i + 1}]_vertex_rail"])
        p = vertex_rail.point + s * vertex_rail.dir
        c = conic_through(kind, S, F, p, 2 if kind == HYPERBOLA else None)
        hits = ray_conic_intersections(Ray2(F, end_dir), c)
        if not hits or not hits[0][0] < len_fe:
            raise RailExhausted([f"{name}[{i + 1}]_end_rail"])
        q = hits[0][1]
        arcs.append(ConicArc.between(c, 1, p, q, f"{name}[{i + 1}]"))
        starts.append(p)
        ends.append(q)
    return arcs, starts, ends


@dataclass
class Quadrangle:
    """Solid region bounded by two base arcs and two straight segments
    meeting at the corner point."""

    name: str
    vertex: np.ndarray
    corner: np.ndarray
    arcs: tuple[ConicArc, ConicArc]
    segments: tuple[Segment2, Segment2]

    def boundary_hits(self, ray: Ray2) -> int:
        n = sum(len(ray_conic_hits(ray, a)) for a in self.arcs)
        for seg in self.segments:
            tp = line_params(Line2(ray.origin, ray.dir), seg.line())
            if tp is not None and tp[0] > 0.0 and 0.0 <= tp[1] <= seg.length:
                n += 1
        return n

    def contains(self, p) -> bool:
        """Even-odd test by casting a ray towards a fixed generic direction."""
        return self.boundary_hits(Ray2(p, (math.cos(0.7231), math.sin(0.7231)))) % 2 == 1

    def outline(self, n: int = 64) -> np.ndarray:
        """Closed boundary polyline: vertex, arc 0, corner, arc 1 reversed."""
        a0 = _oriented_samples(self.arcs[0], self.vertex, n)
        a1 = _oriented_samples(self.arcs[1], self.vertex, n)
        return np.vstack([a0, [self.corner], a1[::-1]])


def _oriented_samples(arc: ConicArc, first, n: int) -> np.ndarray:
    pts = arc.sample(n)
    if dist(pts[-1], first) < dist(pts[0], first):
        pts = pts[::-1]
    return pts


@dataclass
class Piece:
    """One reflecting boundary element with a back-reference into the body."""

    kind: str  # "arc" or "segment"
    geom: ConicArc | Segment2
    ref: tuple  # ("seq", name, index) or ("quad", name, side)

    @property
    def label(self) -> str:
        if self.ref[0] == "seq":
            return f"{self.ref[1]}[{self.ref[2]}]"
        return f"{self.ref[1]}.seg{self.ref[2]}"

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "arc":
            return self.geom.start, self.geom.end
        return self.geom.a, self.geom.b


@dataclass
class Body2D:
    params: ConstructionParams
    frame: Frame
    points: dict[str, np.ndarray]
    sequences: dict[str, ArcSequence]
    quads: dict[str, Quadrangle]
    report: ValidationReport
    pieces: list[Piece] = field(default_factory=list)

    def __post_init__(self):
        if not self.pieces:
            for name, seq in self.sequences.items():
                for i, arc in enumerate(seq.arcs):
                    self.pieces.append(Piece("arc", arc, ("seq", name, i)))
            for qname, q in self.quads.items():
                for j, seg in enumerate(q.segments):
                    self.pieces.append(Piece("segment", seg, ("quad", qname, j)))

    @property
    def depth(self) -> int:
        return self.params.depth

    def source(self, name: str) -> np.ndarray:
        return self.points[name]

    def inside(self, p) -> str | None:
        """Name of the quadrangle containing ``p``, if any."""
        for name, q in self.quads.items():
            if q.contains(p):
                return name
        return None

    def arc_count(self) -> int:
        return sum(1 for p in self.pieces if p.kind == "arc")

    def segment_count(self) -> int:
        return sum(1 for p in self.pieces if p.kind == "segment")

    def world_points(self) -> dict[str, np.ndarray]:
        return {k: self.frame.to_world(v) for k, v in self.points.items()}


def base_arcs(pts: dict[str, np.ndarray]) -> dict[str, ConicArc]:
    """The eight base arcs, keyed by sequence name."""
    return {row[0]: clip_base_arc(pts, row[0]) for row in SEQUENCE_TABLE}


def _assemble(params: ConstructionParams, frame: Frame, pts, report, bases) -> Body2D:
    sequences = {}
    for name, src, vertex, kind, other, corner in SEQUENCE_TABLE:
        base = bases[name]
        V = pts[vertex]
        E0 = base.end if dist(base.start, V) < dist(base.end, V) else base.start
        arcs, starts, ends = generate_sequence(base, name, pts[src], pts[other], V, E0, params.depth)
        sequences[name] = ArcSequence(name, src, vertex, kind, other, corner, pts[src], pts[other], arcs, starts, ends)
    quads = {}
    for qname, vertex, corner, s1, s2 in QUAD_TABLE:
        X = pts[corner]
        segs = (Segment2(sequences[s1].ends[0], X), Segment2(sequences[s2].ends[0], X))
        quads[qname] = Quadrangle(qname, pts[vertex], X, (sequences[s1].arcs[0], sequences[s2].arcs[0]), segs)
    return Body2D(params, frame, pts, sequences, quads, report)


def build_body(params: ConstructionParams) -> Body2D:
    """Validate the configuration and build the body (in the normalized frame)."""
    frame = params.frame()
    pts = _derive_local(_local_inputs(params, frame))
    report = _validate_local(pts, params.asymmetric)
    if not report.ok:
        raise InvalidConfiguration(report.failed())
    return _assemble(params, frame, pts, report, base_arcs(pts))


def perturb_body(body: Body2D, sequence: str, index: int, rel: float) -> Body2D:
    """Copy of ``body`` with the focal constant of one sequence arc scaled by
    ``1 + rel``, keeping its angular extent (a deliberately broken body)."""
    seq = body.sequences[sequence]
    arc = seq.arcs[index]
    c = arc.conic
    conic = Conic(c.kind, c.f1, c.f2, c.k * (1.0 + rel), c.branch)
    new_arc = ConicArc(conic, arc.pivot, arc.theta_min, arc.theta_max, arc.label)
    arcs = list(seq.arcs)
    arcs[index] = new_arc
    seqs = dict(body.sequences)
    seqs[sequence] = ArcSequence(
        seq.name, seq.source, seq.vertex, seq.kind, seq.other, seq.corner,
        seq.source_point, seq.other_point, arcs, seq.starts, seq.ends,
    )
    quads = dict(body.quads)
    if index == 0:
        for qname, q in body.quads.items():
            q_arcs = tuple(new_arc if a is arc else a for a in q.arcs)
            quads[qname] = Quadrangle(q.name, q.vertex, q.corner, q_arcs, q.segments)
    return Body2D(body.params, body.frame, body.points, seqs, quads, body.report)
