"""Deterministic SVG drawings of a body and ray traces (body coordinates)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .billiard import TraceResult
from .conics import HYPERBOLA, ConicArc
from .construction import Body2D

LABELLED = ("A1", "A2", "L", "K", "O", "C1", "C2", "D1", "D2", "B1", "B2", "H1", "H2", "M", "N")


@dataclass
class SceneStyle:
    stroke: float = 0.006
    trace_stroke: float = 0.004
    ellipse_color: str = "#1f5fbf"
    hyperbola_color: str = "#b8402a"
    segment_color: str = "#333333"
    quad_fill: str = "#d9d9d9"
    rail_color: str = "#999999"
    trace_color: str = "#d62728"
    point_color: str = "#000000"
    min_samples: int = 16
    sagitta: float = 1e-3  # relative to the view box size
    padding: float = 0.08
    labels: bool = True
    rails: bool = True
    width_px: int = 800

    def __post_init__(self):
        if self.min_samples < 16:
            raise ValueError("at least 16 samples per arc are required")


#: Coordinates below this magnitude are rounding noise and print as 0.
SNAP = 1e-12


def fmt(x: float) -> str:
    """9 significant digits, locale independent."""
    x = float(x)
    if abs(x) < SNAP:
        return "0"
    return f"{x:.9g}"


def adaptive_arc(arc: ConicArc, tol: float, n0: int = 16, max_depth: int = 20) -> np.ndarray:
    """Polyline through the arc refined until every chord's sagitta is below ``tol``."""
    thetas = list(np.linspace(arc.theta_min, arc.theta_max, n0))
    pts = [arc.point_at(min(t, arc.theta_max)) for t in thetas]
    out_t, out_p = [thetas[0]], [pts[0]]
    for i in range(len(thetas) - 1):
        _refine(arc, thetas[i], pts[i], thetas[i + 1], pts[i + 1], tol, max_depth, out_t, out_p)
    return np.array(out_p)


def _refine(arc, ta, pa, tb, pb, tol, depth, out_t, out_p):
    tm = 0.5 * (ta + tb)
    pm = arc.point_at(tm)
    chord = pb - pa
    n = math.hypot(*chord)
    sag = abs(chord[0] * (pm[1] - pa[1]) - chord[1] * (pm[0] - pa[0])) / n if n > 0 else 0.0
    if sag > tol and depth > 0:
        _refine(arc, ta, pa, tm, pm, tol, depth - 1, out_t, out_p)
        _refine(arc, tm, pm, tb, pb, tol, depth - 1, out_t, out_p)
    else:
        out_t.append(tb)
        out_p.append(pb)


def _bounds(body: Body2D, traces) -> tuple[float, float, float, float]:
    pts = [p for p in body.points.values()]
    for piece in body.pieces:
        if piece.kind == "arc":
            pts.extend(piece.geom.sample(5))
        else:
            pts.extend([piece.geom.a, piece.geom.b])
    for tr in traces:
        pts.append(tr.initial.origin)
        pts.extend(tr.points)
    P = np.array(pts)
    lo, hi = P.min(axis=0), P.max(axis=0)
    return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


def _clip_to_box(o, d, box) -> float:
    """Largest ``t`` keeping ``o + t d`` inside the box (``o`` inside)."""
    x0, y0, x1, y1 = box
    t = math.inf
    for k, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
        if d[k] > 0:
            t = min(t, (hi - o[k]) / d[k])
        elif d[k] < 0:
            t = min(t, (lo - o[k]) / d[k])
    return max(0.0, t)


def trace_polyline(tr: TraceResult, box) -> np.ndarray:
    """Origin, bounce points and the exit (or last ray) cut at the box edge."""
    pts = [tr.initial.origin] + list(tr.points)
    ray = tr.exit if tr.exit is not None else None
    if ray is None and tr.bounces:
        return np.array(pts)
    o = pts[-1]
    d = ray.dir if ray is not None else tr.initial.dir
    pts.append(o + _clip_to_box(o, d, box) * d)
    return np.array(pts)


def _poly(points: np.ndarray) -> str:
    return " ".join(f"{fmt(x)},{fmt(-y)}" for x, y in points)


def render_svg(body: Body2D, traces: list[TraceResult] | None = None, style: SceneStyle | None = None) -> str:
    traces = list(traces or [])
    style = style or SceneStyle()
    x0, y0, x1, y1 = _bounds(body, traces)
    size = max(x1 - x0, y1 - y0)
    pad = style.padding * size
    box = (x0 - pad, y0 - pad, x1 + pad, y1 + pad)
    vw, vh = box[2] - box[0], box[3] - box[1]
    tol = style.sagitta * max(vw, vh)
    height_px = int(round(style.width_px * vh / vw))
    # SVG y grows downwards: draw (x, -y)
    vb = f"{fmt(box[0])} {fmt(-box[3])} {fmt(vw)} {fmt(vh)}"
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{style.width_px}" height="{height_px}" viewBox="{vb}">',
        "<defs>",
        f'<marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto">'
        f'<path d="M0,0 L10,5 L0,10 z" fill="{style.trace_color}"/></marker>',
        "</defs>",
        '<g id="quadrangles">',
    ]
    for name, q in body.quads.items():
        out.append(f'<polygon id="{name}" points="{_poly(q.outline(style.min_samples))}" fill="{style.quad_fill}" stroke="none"/>')
    out.append("</g>")
    if style.rails:
        out.append(f'<g id="rails" stroke="{style.rail_color}" stroke-width="{fmt(style.stroke / 3)}" stroke-dasharray="{fmt(style.stroke)}" fill="none">')
        for name, seq in body.sequences.items():
            for a, b in ((seq.starts[0], seq.other_point), (seq.other_point, seq.ends[0])):
                out.append(f'<polyline points="{_poly(np.array([a, b]))}"/>')
        out.append("</g>")
    out.append(f'<g id="pieces" stroke-width="{fmt(style.stroke)}" fill="none" stroke-linecap="round">')
    for piece in body.pieces:
        if piece.kind == "arc":
            color = style.hyperbola_color if piece.geom.conic.kind == HYPERBOLA else style.ellipse_color
            pts = adaptive_arc(piece.geom, tol, style.min_samples)
        else:
            color = style.segment_color
            pts = np.array([piece.geom.a, piece.geom.b])
        out.append(f'<polyline id="{piece.label}" stroke="{color}" points="{_poly(pts)}"/>')
    out.append("</g>")
    if traces:
        out.append(f'<g id="traces" stroke="{style.trace_color}" stroke-width="{fmt(style.trace_stroke)}" fill="none">')
        for k, tr in enumerate(traces):
            pts = trace_polyline(tr, box)
            out.append(f'<polyline id="trace{k}" points="{_poly(pts)}" marker-end="url(#arrow)"/>')
        out.append("</g>")
    out.append(f'<g id="points" fill="{style.point_color}">')
    r = 1.5 * style.stroke
    for name in LABELLED:
        if name not in body.points:
            continue
        p = body.points[name]
        out.append(f'<circle cx="{fmt(p[0])}" cy="{fmt(-p[1])}" r="{fmt(r)}"/>')
        if style.labels:
            out.append(
                f'<text x="{fmt(p[0] + 2 * r)}" y="{fmt(-p[1] - 2 * r)}" font-size="{fmt(0.025 * size)}" '
                f'font-family="sans-serif">{name}</text>'
            )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
