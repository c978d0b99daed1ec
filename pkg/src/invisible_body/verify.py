"""Invisibility sweeps and construction audits.

A ray from a source is *handled* by the truncated body when it starts
inside the angular span of an ellipse arc ``i < depth`` (and of its paired
hyperbola arc): it then meets arc ``i``, arc ``i + 1`` of the same family
and the paired hyperbola arcs ``i + 1``, ``i``.  Spans are shrunk by
``DELTA_CONE`` so that rays through arc endpoints are excluded.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .billiard import DEGENERATE, EXITED, MAX_BOUNCES, exit_deviation, trace_batch
from .conics import HYPERBOLA, Conic, conic_through, focal_residual, tangent_at
from .construction import SEQUENCE_PAIRS, Body2D, mirror_s
from .errors import NoIntersection
from .geom import EPS_GEOM, Line2, Segment2, collinearity_residual, dist, homothety, intersect_lines, polygon_margin
from .lemma import ellipse_hyperbola_meet

DELTA_CONE = 1e-6
TAU_INV = 1e-8
AUDIT_TOL = 1e-9
PRNG = "PCG64"

MIRROR_SEQUENCES = {"A2-L": "A1-L", "A2-C1": "A1-C2", "A2-C2": "A1-C1", "A2-K": "A1-K"}


def _source_name(body: Body2D, source) -> str:
    if isinstance(source, str):
        if source not in ("A1", "A2"):
            raise ValueError("source must be A1 or A2")
        return source
    for name in ("A1", "A2"):
        if dist(body.points[name], source) < EPS_GEOM:
            return name
    raise ValueError("source must be A1 or A2")


def _angle(S, p) -> float:
    return math.atan2(p[1] - S[1], p[0] - S[0])


def full_cones(body: Body2D, source) -> list[tuple[float, float]]:
    """The two sub-cones of the source served by arc sequences, split at ``O``."""
    src = _source_name(body, source)
    S = body.points[src]
    out = []
    for e_name, _ in SEQUENCE_PAIRS[src]:
        v = body.points[body.sequences[e_name].vertex]
        a, b = _angle(S, v), _angle(S, body.points["O"])
        out.append((min(a, b), max(a, b)))
    return sorted(out)


def handled_cone(body: Body2D, source, delta: float = DELTA_CONE) -> list[tuple[float, float]]:
    """Sorted angular intervals (body coordinates) of handled directions."""
    src = _source_name(body, source)
    out = []
    for e_name, h_name in SEQUENCE_PAIRS[src]:
        e, h = body.sequences[e_name], body.sequences[h_name]
        for i in range(min(e.depth, h.depth)):
            ae, ah = e.arcs[i], h.arcs[i]
            lo = max(ae.theta_min, ah.theta_min) + delta
            hi = min(ae.theta_max, ah.theta_max) - delta
            if lo < hi:
                out.append((lo, hi))
    return sorted(out)


def cone_coverage(body: Body2D, source) -> list[float]:
    """Covered fraction of each full sub-cone (ordered as :func:`full_cones`)."""
    hc = handled_cone(body, source, 0.0)
    res = []
    for lo, hi in full_cones(body, source):
        inside = sum(max(0.0, min(b, hi) - max(a, lo)) for a, b in hc)
        res.append(inside / (hi - lo))
    return res


def sample_directions(intervals, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform angles over a union of disjoint intervals."""
    if not intervals:
        return np.zeros(0)
    lo = np.array([a for a, _ in intervals])
    w = np.array([b - a for a, b in intervals])
    cum = np.concatenate([[0.0], np.cumsum(w)])
    x = rng.uniform(0.0, cum[-1], n)
    j = np.clip(np.searchsorted(cum, x, side="right") - 1, 0, len(w) - 1)
    return lo[j] + (x - cum[j])


def focal_line_residuals(body: Body2D, src: str, tr) -> float:
    """Distance of the expected focus from each of the three inner segments."""
    first = body.pieces[tr.bounces[0].piece]
    name = first.ref[1]
    pair = next(p for p in SEQUENCE_PAIRS[src] if name in p)
    e, h = body.sequences[pair[0]], body.sequences[pair[1]]
    targets = (e.other_point, body.points[src], h.other_point)
    P = tr.points
    worst = 0.0
    for j, X in enumerate(targets):
        worst = max(worst, Line2.through(P[j], P[j + 1]).distance_to(X))
    return worst


@dataclass
class SweepReport:
    source: str
    source_point: list[float]
    n_rays: int
    seed: int
    handled_cone: list[tuple[float, float]]
    coverage: list[float]
    status_counts: dict[str, int]
    bounce_histogram: dict[str, int]
    max_deviation: float
    mean_deviation: float
    max_angle: float
    max_distance: float
    max_collinearity: float
    max_focal_line: float
    degenerate: int
    segment_hits: int
    passed: bool
    tau: float = TAU_INV
    prng: str = PRNG
    wall_time: float = field(default=0.0, compare=False)

    def as_dict(self) -> dict:
        """JSON-ready report.  Wall time is left out so that reports are
        reproducible byte for byte."""
        return {
            "source": self.source,
            "source_point": self.source_point,
            "n_rays": self.n_rays,
            "seed": self.seed,
            "prng": self.prng,
            "tau": self.tau,
            "handled_cone": [list(iv) for iv in self.handled_cone],
            "coverage": self.coverage,
            "status_counts": self.status_counts,
            "bounce_histogram": self.bounce_histogram,
            "max_deviation": self.max_deviation,
            "mean_deviation": self.mean_deviation,
            "max_angle": self.max_angle,
            "max_distance": self.max_distance,
            "max_collinearity": self.max_collinearity,
            "max_focal_line": self.max_focal_line,
            "degenerate": self.degenerate,
            "segment_hits": self.segment_hits,
            "passed": self.passed,
        }


def invisibility_sweep(
    body: Body2D,
    source,
    n_rays: int,
    seed: int,
    tau: float = TAU_INV,
    chunk: int = 4096,
    return_traces: bool = False,
):
    """Trace ``n_rays`` seeded, uniformly distributed handled directions.

    PASS iff every non-degenerate ray exits with all deviation metrics below
    ``tau`` and no ray touches a straight quadrangle side.
    """
    if n_rays < 1:
        raise ValueError("n_rays must be positive")
    t0 = time.perf_counter()
    src = _source_name(body, source)
    S = body.points[src]
    cone = handled_cone(body, src)
    rng = np.random.default_rng(seed)
    theta = sample_directions(cone, n_rays, rng)
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    traces = []
    for k in range(0, theta.size, chunk):
        d = dirs[k:k + chunk]
        traces.extend(trace_batch(body, np.tile(S, (d.shape[0], 1)), d, MAX_BOUNCES, check=(k == 0)))

    counts = {EXITED: 0, "MaxBounces": 0, DEGENERATE: 0}
    hist: dict[str, int] = {}
    devs, angs, dists, cols = [], [], [], []
    focal = 0.0
    seg_hits = 0
    for tr in traces:
        counts[tr.status] = counts.get(tr.status, 0) + 1
        key = str(tr.n_bounces)
        hist[key] = hist.get(key, 0) + 1
        seg_hits += tr.segment_hits(body)
        if tr.status != EXITED:
            continue
        m = exit_deviation(S, tr)
        devs.append(m.worst)
        angs.append(m.angle)
        dists.append(m.distance)
        cols.append(m.collinearity)
        if tr.n_bounces == 4:
            focal = max(focal, focal_line_residuals(body, src, tr))
    max_dev = max(devs) if devs else math.inf
    passed = (
        counts.get("MaxBounces", 0) == 0
        and counts[EXITED] > 0
        and max_dev < tau
        and seg_hits == 0
    )
    report = SweepReport(
        source=src,
        source_point=[float(x) for x in body.frame.to_world(S)],
        n_rays=n_rays,
        seed=seed,
        handled_cone=[(float(a), float(b)) for a, b in cone],
        coverage=[float(c) for c in cone_coverage(body, src)],
        status_counts=counts,
        bounce_histogram=dict(sorted(hist.items(), key=lambda kv: int(kv[0]))),
        max_deviation=float(max_dev),
        mean_deviation=float(np.mean(devs)) if devs else math.inf,
        max_angle=float(max(angs, default=math.inf)),
        max_distance=float(max(dists, default=math.inf)),
        max_collinearity=float(max(cols, default=math.inf)),
        max_focal_line=float(focal),
        degenerate=counts[DEGENERATE],
        segment_hits=seg_hits,
        passed=bool(passed),
        tau=tau,
        wall_time=time.perf_counter() - t0,
    )
    if return_traces:
        return report, traces
    return report


def sweep_both(body: Body2D, n_rays: int, seed: int, tau: float = TAU_INV) -> dict:
    reports = {s: invisibility_sweep(body, s, n_rays, seed, tau) for s in ("A1", "A2")}
    return {
        "passed": all(r.passed for r in reports.values()),
        "reports": {s: r.as_dict() for s, r in reports.items()},
    }


def report_json(obj) -> str:
    """Canonical JSON text (sorted keys, shortest round-trip floats)."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# --- construction audit ---------------------------------------------------


@dataclass
class AuditCheck:
    name: str
    worst: float
    tol: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "worst": self.worst, "tol": self.tol, "passed": self.passed, "detail": self.detail}


@dataclass
class AuditReport:
    checks: list[AuditCheck]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AuditCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"ok": self.ok, "checks": [c.as_dict() for c in self.checks]}


def _residual_check(name: str, values, tol: float = AUDIT_TOL) -> AuditCheck:
    worst = float(max(values, default=0.0))
    return AuditCheck(name, worst, tol, bool(worst < tol), f"{len(values)} values")


def _paired_collinearity(body: Body2D) -> list[float]:
    out = []
    for src, pairs in SEQUENCE_PAIRS.items():
        S = body.points[src]
        for e_name, h_name in pairs:
            e, h = body.sequences[e_name], body.sequences[h_name]
            for i in range(min(e.depth, h.depth) + 1):
                pts = [e.ends[i], h.ends[i]]
                if i + 1 <= e.depth:
                    pts.append(e.starts[i + 1])
                if i + 1 <= h.depth:
                    pts.append(h.starts[i + 1])
                for a in pts:
                    for b in pts:
                        if a is not b:
                            out.append(collinearity_residual(S, a, b))
    return out


def _dilation(body: Body2D, e_name: str, h_name: str):
    e, h = body.sequences[e_name], body.sequences[h_name]
    S = e.source_point
    ratio = dist(S, e.other_point) / dist(S, h.other_point)
    return S, ratio


def _homothety_transport(body: Body2D) -> list[float]:
    """Sample points of each hyperbola arc, dilated from the source so that
    its far focus lands on the ellipse family's focus, must lie on the
    hyperbola of the new confocal family through the image of the arc start."""
    out = []
    for pairs in SEQUENCE_PAIRS.values():
        for e_name, h_name in pairs:
            e, h = body.sequences[e_name], body.sequences[h_name]
            S, ratio = _dilation(body, e_name, h_name)
            img_focus = homothety(S, ratio, h.other_point)
            out.append(dist(img_focus, e.other_point))
            for arc, start in zip(h.arcs, h.starts):
                target = conic_through(HYPERBOLA, S, e.other_point, homothety(S, ratio, start))
                for p in arc.sample(9):
                    out.append(focal_residual(target, homothety(S, ratio, p)))
    return out


def _family_lemma(body: Body2D) -> list[float]:
    """Meeting points of ellipse ``i`` with the dilated hyperbola ``i`` are
    collinear with the ellipse family's second focus, for every ``i``."""
    out = []
    for pairs in SEQUENCE_PAIRS.values():
        for e_name, h_name in pairs:
            e, h = body.sequences[e_name], body.sequences[h_name]
            S, ratio = _dilation(body, e_name, h_name)
            F = e.other_point
            us = []
            for i in range(min(e.depth, h.depth) + 1):
                E = e.arcs[i].conic
                c = h.arcs[i].conic
                H = Conic(HYPERBOLA, S, F, c.k * ratio, c.branch)
                try:
                    us.append(ellipse_hyperbola_meet(E, H))
                except NoIntersection:
                    out.append(math.inf)
            for i in range(1, len(us)):
                out.append(collinearity_residual(F, us[0], us[i]))
    return out


def _vertex_tangency(body: Body2D) -> list[float]:
    out = []
    for q in body.quads.values():
        t1 = tangent_at(q.arcs[0].conic, q.vertex)
        t2 = tangent_at(q.arcs[1].conic, q.vertex)
        out.append(abs(t1[0] * t2[1] - t1[1] * t2[0]))
    return out


def _rail_membership(body: Body2D) -> list[float]:
    out = []
    for seq in body.sequences.values():
        vr = Segment2(seq.starts[0], seq.other_point)
        er = Segment2(seq.other_point, seq.ends[0])
        for i, arc in enumerate(seq.arcs):
            p, q = seq.starts[i], seq.ends[i]
            out.append(_off_segment(vr, p))
            out.append(_off_segment(er, q))
            out.append(focal_residual(arc.conic, p))
            out.append(focal_residual(arc.conic, q))
            ends = (arc.start, arc.end)
            out.append(min(dist(p, ends[0]), dist(p, ends[1])))
            out.append(min(dist(q, ends[0]), dist(q, ends[1])))
            if i > 0:
                # next start on the line source -> previous end, on the prescribed side
                prev = seq.ends[i - 1]
                out.append(Line2.through(seq.source_point, prev).distance_to(p))
                s = Segment2(seq.source_point, prev).param_of(p)
                inside = 0.0 < s < 1.0
                out.append(0.0 if inside == (seq.kind != HYPERBOLA) else 1.0)
    return out


def _off_segment(seg: Segment2, p) -> float:
    d = seg.line().distance_to(p)
    s = seg.param_of(p)
    return max(d, -s * seg.length, (s - 1.0) * seg.length, 0.0)


def _vanishing_lengths(body: Body2D) -> AuditCheck:
    worst_ratio = 0.0
    ok = True
    for seq in body.sequences.values():
        lengths = [a.length(513) for a in seq.arcs]
        if any(b >= a for a, b in zip(lengths, lengths[1:])):
            ok = False
        for i in range(1, len(lengths)):
            worst_ratio = max(worst_ratio, (lengths[i] / lengths[0]) ** (1.0 / i))
    ok = ok and worst_ratio < 1.0
    return AuditCheck("vanishing_lengths", worst_ratio, 1.0, bool(ok), "fitted geometric ratio r")


def diagonal_quadrangle(body: Body2D, name: str) -> list:
    """The cell with diagonal ``corner -> other focus`` holding arcs ``1, 2, ...``."""
    seq = body.sequences[name]
    P = body.points
    src, other_src = seq.source, ("A1" if seq.source == "A2" else "A2")
    X, F = P[seq.corner], seq.other_point
    a = intersect_lines(Line2.through(P[src], X), Line2.through(seq.starts[0], F))
    b = intersect_lines(Line2.through(P[other_src], X), Line2.through(P[src], F))
    return [X, a, F, b]


def _containment(body: Body2D) -> list[float]:
    out = []
    for name, seq in body.sequences.items():
        poly = diagonal_quadrangle(body, name)
        for arc in seq.arcs[1:]:
            for p in arc.sample(17):
                out.append(max(0.0, -polygon_margin(p, poly)))
    return out


def _mirror_symmetry(body: Body2D) -> list[float]:
    out = []
    for a, b in MIRROR_SEQUENCES.items():
        sa, sb = body.sequences[a], body.sequences[b]
        for pa, pb in zip(sa.starts + sa.ends, sb.starts + sb.ends):
            out.append(dist(mirror_s(pa), pb))
        out.append(abs(len(sa.arcs) - len(sb.arcs)))
    return out


def construction_audit(body: Body2D) -> AuditReport:
    """Worst residual of every construction invariant."""
    checks = [
        _residual_check("paired_collinearity", _paired_collinearity(body)),
        _residual_check("homothety_transport", _homothety_transport(body)),
        _residual_check("family_lemma_collinearity", _family_lemma(body)),
        _residual_check("vertex_tangency", _vertex_tangency(body)),
        _residual_check("rail_membership", _rail_membership(body)),
        _residual_check("diagonal_containment", _containment(body)),
        _vanishing_lengths(body),
    ]
    if not body.params.asymmetric:
        checks.append(_residual_check("mirror_symmetry", _mirror_symmetry(body), 1e-12))
    return AuditReport(checks)
