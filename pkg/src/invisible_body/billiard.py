"""Billiard ray tracer in the complement of a :class:`Body2D`.

The kernel is vectorized over rays x boundary pieces: every reflecting
piece is packed once into flat arrays (:class:`PieceTable`) and a batch of
rays advances in lock-step, one reflection per iteration.  Coordinates are
body coordinates, i.e. the normalized frame of ``body.frame``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .conics import EPS_DISC, EPS_T, HYPERBOLA
from .construction import Body2D
from .errors import InsideBody, NotExited
from .geom import EPS_GEOM, Ray2, as_point, collinearity_residual, dist

#: Hits closer than this to a piece endpoint are treated as exceptional.
EPS_END = 1e-7
MAX_BOUNCES = 16

EXITED = "Exited"
MAX_BOUNCES_STATUS = "MaxBounces"
DEGENERATE = "DegenerateHit"

TWO_PI = 2.0 * math.pi


class PieceTable:
    """Flat arrays describing all pieces of a body (arcs first, then segments)."""

    def __init__(self, body: Body2D):
        arcs = [(i, p) for i, p in enumerate(body.pieces) if p.kind == "arc"]
        segs = [(i, p) for i, p in enumerate(body.pieces) if p.kind == "segment"]
        self.arc_index = np.array([i for i, _ in arcs], dtype=int)
        self.seg_index = np.array([i for i, _ in segs], dtype=int)

        geo = [p.geom for _, p in arcs]
        self.f1 = np.array([a.conic.f1 for a in geo]).reshape(-1, 2)
        self.f2 = np.array([a.conic.f2 for a in geo]).reshape(-1, 2)
        self.k = np.array([a.conic.k for a in geo])
        w = np.array([a.conic.weights for a in geo]).reshape(-1, 2)
        self.w1, self.w2 = w[:, 0], w[:, 1]
        self.sign = np.array([-1.0 if a.conic.kind == HYPERBOLA else 1.0 for a in geo])
        self.pivot = np.array([a.pivot_point for a in geo]).reshape(-1, 2)
        self.theta_min = np.array([a.theta_min for a in geo])
        self.width = np.array([a.width for a in geo])
        self.arc_start = np.array([a.start for a in geo]).reshape(-1, 2)
        self.arc_end = np.array([a.end for a in geo]).reshape(-1, 2)

        # bounding circles for the candidate prefilter
        centers, radii = [], []
        for a in geo:
            pts = a.sample(33)
            c = pts.mean(axis=0)
            r = float(np.max(np.hypot(*(pts - c).T)))
            chord = float(np.max(np.hypot(*np.diff(pts, axis=0).T)))
            centers.append(c)
            radii.append(r + chord + 1e-6)
        self.center = np.array(centers).reshape(-1, 2)
        self.radius = np.array(radii)

        self.seg_a = np.array([s.geom.a for _, s in segs]).reshape(-1, 2)
        self.seg_b = np.array([s.geom.b for _, s in segs]).reshape(-1, 2)

    @classmethod
    def of(cls, body: Body2D) -> "PieceTable":
        table = body.__dict__.get("_piece_table")
        if table is None:
            table = cls(body)
            body.__dict__["_piece_table"] = table
        return table


def _arc_candidates(tab: PieceTable, O: np.ndarray, U: np.ndarray):
    """(ray, arc) pairs whose bounding circles the ray may reach."""
    w = tab.center[None] - O[:, None, :]
    tp = np.sum(w * U[:, None, :], axis=-1)
    d2 = np.sum(w * w, axis=-1) - tp * tp
    r = tab.radius[None]
    mask = (d2 <= r * r) & (tp >= -r)
    return np.nonzero(mask)


def _arc_hits(tab: PieceTable, O: np.ndarray, U: np.ndarray):
    """Nearest valid arc hit per ray: ``t`` (inf on miss), arc index, point, tangency flag."""
    R = O.shape[0]
    best_t = np.full(R, np.inf)
    best_a = np.full(R, -1)
    best_p = np.full((R, 2), np.nan)
    best_tan = np.zeros(R, bool)
    if tab.k.size == 0:
        return best_t, best_a, best_p, best_tan
    ri, ai = _arc_candidates(tab, O, U)
    if ri.size == 0:
        return best_t, best_a, best_p, best_tan
    o, u = O[ri], U[ri]
    f1, f2, k = tab.f1[ai], tab.f2[ai], tab.k[ai]
    of1, of2 = o - f1, o - f2
    n1 = np.sum(of1 * of1, axis=-1)
    n2 = np.sum(of2 * of2, axis=-1)
    A = n1 - n2
    B = 2.0 * np.sum(u * (f2 - f1), axis=-1)
    C = n1 + n2
    D = 2.0 * np.sum(u * (of1 + of2), axis=-1)
    k2 = k * k
    qa = B * B - 4.0 * k2
    qb = 2.0 * A * B - 2.0 * k2 * D
    qc = A * A - 2.0 * k2 * C + k2 * k2

    disc = qb * qb - 4.0 * qa * qc
    scale = qb * qb + np.abs(4.0 * qa * qc)
    tangent = np.abs(disc) <= EPS_DISC * scale
    sq = np.sqrt(np.where(tangent, 0.0, np.maximum(disc, 0.0)))
    sgn = np.where(qb >= 0.0, 1.0, -1.0)
    q = -0.5 * (qb + sgn * sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(qa != 0.0, q / qa, np.nan)
        r2 = np.where(q != 0.0, qc / q, np.nan)
    real = (disc >= 0.0) | tangent
    T = np.stack([r1, r2], axis=-1)
    T[~real] = np.nan

    # Newton polish on the focal equation along the ray
    w1, w2 = tab.w1[ai, None], tab.w2[ai, None]
    kk = k[:, None]
    o3, u3 = o[:, None, :], u[:, None, :]
    g1, g2 = f1[:, None, :], f2[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(2):
            P = o3 + T[..., None] * u3
            a, b = P - g1, P - g2
            d1 = np.sqrt(np.sum(a * a, axis=-1))
            d2 = np.sqrt(np.sum(b * b, axis=-1))
            g = w1 * d1 + w2 * d2 - kk
            dg = w1 * np.sum(u3 * a, axis=-1) / d1 + w2 * np.sum(u3 * b, axis=-1) / d2
            T = T - np.where(np.abs(dg) >= 1e-8, g / dg, 0.0)
        P = o3 + T[..., None] * u3
        a, b = P - g1, P - g2
        resid = np.abs(w1 * np.sqrt(np.sum(a * a, -1)) + w2 * np.sqrt(np.sum(b * b, -1)) - kk)
        v = P - tab.pivot[ai, None, :]
        theta = np.arctan2(v[..., 1], v[..., 0])
        rel = np.mod(theta - tab.theta_min[ai, None], TWO_PI)
        ok = (T >= EPS_T) & (resid < EPS_GEOM) & (rel <= tab.width[ai, None])
    T = np.where(ok, T, np.inf)
    j = np.argmin(T, axis=1)
    rows = np.arange(T.shape[0])
    t = T[rows, j]
    p = P[rows, j]
    found = np.isfinite(t)
    ri, ai, t, p, tangent = ri[found], ai[found], t[found], p[found], tangent[found]
    # keep the smallest t per ray
    order = np.lexsort((t, ri))
    ri, ai, t, p, tangent = ri[order], ai[order], t[order], p[order], tangent[order]
    first = np.ones(ri.size, bool)
    first[1:] = ri[1:] != ri[:-1]
    ri, ai, t, p, tangent = ri[first], ai[first], t[first], p[first], tangent[first]
    best_t[ri], best_a[ri], best_p[ri], best_tan[ri] = t, ai, p, tangent
    return best_t, best_a, best_p, best_tan


def _segment_hits(tab: PieceTable, O: np.ndarray, U: np.ndarray):
    R = O.shape[0]
    if tab.seg_a.shape[0] == 0:
        return np.full((R, 0), np.inf), np.zeros((R, 0))
    e = (tab.seg_b - tab.seg_a)[None]
    w = tab.seg_a[None] - O[:, None, :]
    u = U[:, None, :]
    den = u[..., 0] * e[..., 1] - u[..., 1] * e[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[..., 0] * e[..., 1] - w[..., 1] * e[..., 0]) / den
        s = (w[..., 0] * u[..., 1] - w[..., 1] * u[..., 0]) / den
    ok = (np.abs(den) > 1e-15) & (t >= EPS_T) & (s >= 0.0) & (s <= 1.0)
    return np.where(ok, t, np.inf), s


def first_hits(body: Body2D, O, U):
    """Nearest hit for a batch of rays.

    Returns ``(t, piece, point, normal, degenerate)``; ``t`` is ``inf`` and
    ``piece`` is ``-1`` for rays that escape.
    """
    tab = PieceTable.of(body)
    O = np.asarray(O, float).reshape(-1, 2)
    U = np.asarray(U, float).reshape(-1, 2)
    R = O.shape[0]
    ta, aa, pa, tang = _arc_hits(tab, O, U)
    ts, ss = _segment_hits(tab, O, U)
    rows = np.arange(R)
    js = np.argmin(ts, axis=1) if ts.shape[1] else np.zeros(R, int)
    tseg = ts[rows, js] if ts.shape[1] else np.full(R, np.inf)
    t = np.minimum(ta, tseg)
    piece = np.full(R, -1)
    point = np.full((R, 2), np.nan)
    normal = np.full((R, 2), np.nan)
    degenerate = np.zeros(R, bool)

    is_arc = np.isfinite(ta) & (ta <= tseg)
    if is_arc.any():
        r = rows[is_arc]
        a = aa[r]
        p = pa[r]
        point[r] = p
        piece[r] = tab.arc_index[a]
        g = tab.w1[a, None] * _unit_rows(p - tab.f1[a]) + tab.w2[a, None] * _unit_rows(p - tab.f2[a])
        normal[r] = tab.sign[a, None] * _unit_rows(g)
        near = np.minimum(
            np.hypot(*(p - tab.arc_start[a]).T), np.hypot(*(p - tab.arc_end[a]).T)
        )
        degenerate[r] = (near < EPS_END) | tang[r]
    is_seg = np.isfinite(tseg) & (tseg < ta)
    if is_seg.any():
        r = rows[is_seg]
        s = js[r]
        point[r] = O[r] + t[r, None] * U[r]
        piece[r] = tab.seg_index[s]
        e = tab.seg_b[s] - tab.seg_a[s]
        normal[r] = _unit_rows(np.stack([e[:, 1], -e[:, 0]], axis=1))
        length = np.hypot(e[:, 0], e[:, 1])
        sp = ss[r, s]
        degenerate[r] = (np.minimum(sp, 1.0 - sp) * length) < EPS_END
    return t, piece, point, normal, degenerate


def _unit_rows(v: np.ndarray) -> np.ndarray:
    return v / np.hypot(v[:, 0], v[:, 1])[:, None]


@dataclass
class Hit:
    t: float
    point: np.ndarray
    piece: int
    normal: np.ndarray
    degenerate: bool = False


@dataclass
class TraceResult:
    initial: Ray2
    bounces: list[Hit] = field(default_factory=list)
    exit: Ray2 | None = None
    status: str = EXITED
    labels: list[str] = field(default_factory=list)

    @property
    def points(self) -> list[np.ndarray]:
        return [h.point for h in self.bounces]

    @property
    def n_bounces(self) -> int:
        return len(self.bounces)

    def segment_hits(self, body: Body2D) -> int:
        return sum(1 for h in self.bounces if body.pieces[h.piece].kind == "segment")

    def as_dict(self) -> dict:
        d = {
            "origin": _fl(self.initial.origin),
            "dir": _fl(self.initial.dir),
            "status": self.status,
            "bounces": [_fl(h.point) for h in self.bounces],
            "pieces": list(self.labels),
        }
        if self.exit is not None:
            d["exit"] = {"origin": _fl(self.exit.origin), "dir": _fl(self.exit.dir)}
        return d


def _fl(v) -> list[float]:
    return [float(x) for x in v]


def _check_outside(body: Body2D, origins: np.ndarray) -> None:
    for o in np.unique(origins, axis=0):
        q = body.inside(o)
        if q is not None:
            raise InsideBody(f"ray origin {o.tolist()} lies inside {q}")


def trace_batch(body: Body2D, origins, dirs, max_bounces: int = MAX_BOUNCES, check: bool = True) -> list[TraceResult]:
    """Trace many rays at once (body coordinates)."""
    O = np.array(origins, float).reshape(-1, 2)
    U = np.array(dirs, float).reshape(-1, 2)
    U = _unit_rows(U)
    if check:
        _check_outside(body, O)
    R = O.shape[0]
    results = [TraceResult(Ray2(O[i], U[i])) for i in range(R)]
    active = np.arange(R)
    cur_o, cur_u = O.copy(), U.copy()
    for _ in range(max_bounces + 1):
        if active.size == 0:
            break
        t, piece, point, normal, degen = first_hits(body, cur_o[active], cur_u[active])
        escaped = ~np.isfinite(t)
        for i in active[escaped]:
            res = results[i]
            res.status = EXITED
            res.exit = res.initial if not res.bounces else Ray2(res.bounces[-1].point, cur_u[i])
        keep = ~escaped
        idx = active[keep]
        if idx.size == 0:
            active = idx
            break
        t, piece, point, normal, degen = t[keep], piece[keep], point[keep], normal[keep], degen[keep]
        d = cur_u[idx]
        dn = np.sum(d * normal, axis=1)
        new_u = _unit_rows(d - 2.0 * dn[:, None] * normal)
        for n, i in enumerate(idx):
            res = results[i]
            res.bounces.append(Hit(float(t[n]), point[n].copy(), int(piece[n]), normal[n].copy(), bool(degen[n])))
            res.labels.append(body.pieces[piece[n]].label)
        still = np.ones(idx.size, bool)
        for n, i in enumerate(idx):
            res = results[i]
            if degen[n]:
                res.status = DEGENERATE
                still[n] = False
            elif len(res.bounces) > max_bounces:
                res.status = MAX_BOUNCES_STATUS
                res.bounces.pop()
                res.labels.pop()
                still[n] = False
        cur_u[idx] = new_u
        cur_o[idx] = point + EPS_T * new_u
        active = idx[still]
    return results


def trace(ray: Ray2, body: Body2D, max_bounces: int = MAX_BOUNCES) -> TraceResult:
    """Follow one ray until it escapes, hits degenerately or runs out of bounces."""
    return trace_batch(body, [ray.origin], [ray.dir], max_bounces)[0]


def first_hit(ray: Ray2, body: Body2D) -> Hit | None:
    _check_outside(body, ray.origin[None])
    t, piece, point, normal, degen = first_hits(body, ray.origin, ray.dir)
    if not np.isfinite(t[0]):
        return None
    return Hit(float(t[0]), point[0], int(piece[0]), normal[0], bool(degen[0]))


@dataclass(frozen=True)
class DeviationMetrics:
    angle: float
    distance: float
    collinearity: float

    @property
    def worst(self) -> float:
        return max(self.angle, self.distance, self.collinearity)

    def as_dict(self) -> dict:
        return {"angle": self.angle, "distance": self.distance, "collinearity": self.collinearity}


def exit_deviation(source, tr: TraceResult) -> DeviationMetrics:
    """How far the exit ray is from continuing the initial ray through ``source``."""
    if tr.status != EXITED or tr.exit is None:
        raise NotExited(f"trace status is {tr.status}")
    S = as_point(source)
    d0, d1 = tr.initial.dir, tr.exit.dir
    angle = math.atan2(abs(d0[0] * d1[1] - d0[1] * d1[0]), float(np.dot(d0, d1)))
    w = S - tr.exit.origin
    distance = abs(float(w[0] * d1[1] - w[1] * d1[0]))
    far = tr.exit.origin + max(1.0, dist(S, tr.exit.origin)) * d1
    col = max(
        collinearity_residual(tr.initial.origin, tr.initial.origin + d0, tr.exit.origin),
        collinearity_residual(tr.initial.origin, tr.initial.origin + d0, far),
    )
    return DeviationMetrics(angle, distance, col)


def write_jsonl(traces, fh, source=None) -> None:
    """One JSON object per trace; adds deviation metrics for exited traces
    when ``source`` is given."""
    for tr in traces:
        d = tr.as_dict()
        if source is not None and tr.status == EXITED:
            d["metrics"] = exit_deviation(source, tr).as_dict()
        fh.write(json.dumps(d, sort_keys=True) + "\n")
