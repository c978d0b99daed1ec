import itertools
import math

import numpy as np
import pytest

from invisible_body.conics import ELLIPSE, HYPERBOLA, focal_residual, tangent_at
from invisible_body.construction import (
    SEQUENCE_TABLE,
    ConstructionParams,
    base_arcs,
    build_body,
    clip_base_arc,
    derive_points,
    generate_sequence,
    mirror_s,
    validate_configuration,
)
from invisible_body.errors import ArcClippingFailed, InvalidConfiguration, RailExhausted
from invisible_body.geom import Segment2, cross, dist, rotate

EXPECTED = {
    "C1": (-0.5, 1.5),
    "C2": (0.5, 1.5),
    "D1": (-0.2, 2.4),
    "D2": (0.2, 2.4),
    "B1": (-1 / 3, 4 / 3),
    "B2": (1 / 3, 4 / 3),
}


def _similar(p, theta=0.7, scale=2.5, shift=(3.0, -1.0)):
    return scale * rotate(np.asarray(p, float), theta) + np.asarray(shift)


def test_derived_points_canonical(canonical_params):
    d = derive_points(canonical_params).as_dict()
    for name, xy in EXPECTED.items():
        assert np.allclose(d[name], xy, atol=1e-14), name
    # N, M on the symmetry axis, between the vertices
    assert abs(d["N"][0]) < 1e-14 and 1.0 < d["N"][1] < 2.0
    assert abs(d["M"][0]) < 1e-14 and 2.0 < d["M"][1] < 3.0
    assert np.allclose(d["N"], [0, 1.12898], atol=1e-5)
    assert np.allclose(d["M"], [0, 2.38957], atol=1e-5)


def test_derived_points_follow_a_similarity(canonical_params):
    moved = ConstructionParams(*(_similar(getattr(canonical_params, k)) for k in ("A1", "A2", "L", "K", "O")))
    d0 = derive_points(canonical_params).as_dict()
    d1 = derive_points(moved).as_dict()
    for k in d0:
        assert np.allclose(d1[k], _similar(d0[k]), atol=1e-12), k


def test_default_h1_bisects_the_corner(canonical_params):
    d = derive_points(canonical_params)
    C1, B1, D1, H1 = d.C1, d.B1, d.D1, d.H1
    u, v, w = B1 - C1, D1 - C1, H1 - C1
    a1 = math.atan2(abs(cross(u, w)), np.dot(u, w))
    a2 = math.atan2(abs(cross(v, w)), np.dot(v, w))
    assert abs(a1 - a2) < 1e-12


def test_validation_passes_with_margins(canonical_params):
    d = derive_points(canonical_params)
    rep = validate_configuration(canonical_params, d)
    assert rep.ok
    for c in rep.checks:
        if c.name.endswith(("inside_quadrangle_OB1C1D1", "exterior_of_C1_curves", "exterior_of_L_curves")):
            assert c.margin > 0, c.name


def test_h1_at_c1_fails_inside_with_zero_margin(canonical_params):
    p = ConstructionParams(canonical_params.A1, canonical_params.A2, canonical_params.L, canonical_params.K, canonical_params.O, H1=(-0.5, 1.5))
    d = derive_points(p, check=False)
    rep = validate_configuration(p, d)
    c = rep["H1_inside_quadrangle_OB1C1D1"]
    assert not c.passed
    assert abs(c.margin) < 1e-12
    with pytest.raises(InvalidConfiguration) as exc:
        derive_points(p)
    assert "H1_inside_quadrangle_OB1C1D1" in exc.value.constraints


def test_o_equal_k_is_rejected():
    with pytest.raises(InvalidConfiguration):
        build_body(ConstructionParams((-1, 0), (1, 0), (0, 1), (0, 3), (0, 3)))


@pytest.mark.parametrize(
    "kw",
    [
        dict(A1=(-1, 0), A2=(-1, 0), L=(0, 1), K=(0, 3), O=(0, 2)),
        dict(A1=(-1, 0), A2=(1, 0), L=(0, 1), K=(0, 3), O=(0, 0.5)),
        dict(A1=(-1, 0), A2=(1, 0), L=(0, 1), K=(0.5, 3), O=(0.2, 2)),
        dict(A1=(-1, 0), A2=(1, 0), L=(0, 1), K=(0, 3), O=(0, 2), depth=-1),
        dict(A1=(-1, 0), A2=(1, 0), L=(0, 1), K=(0, float("nan")), O=(0, 2)),
    ],
)
def test_bad_inputs_are_rejected(kw):
    with pytest.raises((InvalidConfiguration, ValueError)):
        build_body(ConstructionParams(**kw))


def test_h1_off_bisector_rejected_when_symmetric(canonical_params):
    d = derive_points(canonical_params)
    p = ConstructionParams(
        canonical_params.A1, canonical_params.A2, canonical_params.L, canonical_params.K, canonical_params.O,
        H1=d.H1 + np.array([0.004, 0.002]),
    )
    with pytest.raises(InvalidConfiguration) as exc:
        build_body(p)
    assert "H1_on_bisector_B1C1D1" in exc.value.constraints


def test_base_arcs_on_curve_and_tangent_at_vertices(body):
    pts = body.points
    arcs = base_arcs(pts)
    assert len(arcs) == 8
    for name, arc in arcs.items():
        for p in (arc.start, arc.end):
            assert focal_residual(arc.conic, p) < 1e-12
    # the ellipse through L with foci A2, B2 has k = |LA2| + |LB2|
    k = dist(pts["L"], pts["A2"]) + dist(pts["L"], pts["B2"])
    assert arcs["A2-L"].conic.k == pytest.approx(k, abs=1e-15)
    tl = [tangent_at(arcs[n].conic, pts["L"]) for n in ("A1-L", "A2-L")]
    assert abs(cross(*tl)) < 1e-10


def test_base_arcs_end_on_clipping_segments(body):
    pts = body.points
    for name, src, vertex, kind, other, corner in SEQUENCE_TABLE:
        arc = clip_base_arc(pts, name)
        far = arc.end if dist(arc.start, pts[vertex]) < dist(arc.end, pts[vertex]) else arc.start
        seg = Segment2(pts[src], pts[corner])
        assert seg.line().distance_to(far) < 1e-12
        s = seg.param_of(far)
        assert (0 < s < 1) if kind == ELLIPSE else (s > 1)


def test_clip_failure_when_corner_inside_ellipse(body):
    pts = dict(body.points)
    pts["N"] = 0.5 * (pts["L"] + pts["B2"])
    with pytest.raises(ArcClippingFailed):
        clip_base_arc(pts, "A2-L")


def test_rail_exhausted_on_short_rail(body):
    seq = body.sequences["A2-L"]
    # a rail that stops just after the vertex cannot host arc 1
    other = seq.starts[0] + 1e-3 * (seq.other_point - seq.starts[0])
    with pytest.raises(RailExhausted):
        generate_sequence(seq.arcs[0], "A2-L", seq.source_point, other, seq.starts[0], seq.ends[0], 3)


def test_piece_counts(body):
    assert body.arc_count() == 104
    assert body.segment_count() == 8
    assert len(body.quads) == 4
    assert all(len(s.arcs) == 13 for s in body.sequences.values())


def test_depth_zero_keeps_base_arcs():
    b0 = build_body(ConstructionParams.canonical(depth=0))
    assert b0.arc_count() == 8 and b0.segment_count() == 8
    b12 = build_body(ConstructionParams.canonical())
    for name, seq in b0.sequences.items():
        a, b = seq.arcs[0], b12.sequences[name].arcs[0]
        assert a.conic.k == b.conic.k and a.theta_min == b.theta_min and a.theta_max == b.theta_max


def test_sequence_rails_and_monotonicity(body):
    for name, seq in body.sequences.items():
        vr, er = seq.vertex_rail, seq.end_rail
        d_other = [dist(p, seq.other_point) for p in seq.starts]
        assert all(b < a for a, b in zip(d_other, d_other[1:])), name
        for i, (p, q) in enumerate(zip(seq.starts, seq.ends)):
            assert vr.contains(p) and er.contains(q), (name, i)
            assert focal_residual(seq.arcs[i].conic, p) < 1e-12
            assert focal_residual(seq.arcs[i].conic, q) < 1e-12
        for i in range(seq.depth):
            # next start on the line from the source through the previous end
            s = Segment2(seq.source_point, seq.ends[i])
            assert s.line().distance_to(seq.starts[i + 1]) < 1e-12
            t = s.param_of(seq.starts[i + 1])
            assert (0 < t < 1) if seq.kind == ELLIPSE else (t > 1)
        lengths = [a.length(513) for a in seq.arcs]
        assert all(b < a for a, b in zip(lengths, lengths[1:])), name


def test_lambda_approaches_b2(body):
    seq = body.sequences["A2-L"]
    d = [dist(p, body.points["B2"]) for p in seq.starts]
    assert all(b < a for a, b in zip(d, d[1:]))
    assert d[-1] < 0.2 * d[0]


def test_quadrangle_boundaries_close(body):
    for q in body.quads.values():
        for arc, seg in zip(q.arcs, q.segments):
            ends = (arc.start, arc.end)
            assert min(dist(e, q.vertex) for e in ends) < 1e-9
            assert min(dist(e, seg.a) for e in ends) < 1e-9
            assert dist(seg.b, q.corner) < 1e-15


def _crossings(P, Q):
    a, b = P[:-1, None], P[1:, None]
    c, d = Q[None, :-1], Q[None, 1:]
    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])
    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return int(np.sum((o1 * o2 < -1e-18) & (o3 * o4 < -1e-18)))


def test_pieces_meet_only_at_endpoints(shallow_body):
    polys = []
    for piece in shallow_body.pieces:
        if piece.kind == "arc":
            pts = piece.geom.sample(40)
        else:
            pts = np.array([piece.geom.a, piece.geom.b])
        # trim the ends so shared endpoints do not count
        e = pts[-1] - pts[-2]
        s = pts[1] - pts[0]
        pts = pts.copy()
        pts[0] += 1e-6 * s / np.linalg.norm(s)
        pts[-1] -= 1e-6 * e / np.linalg.norm(e)
        polys.append(pts)
    for i, j in itertools.combinations(range(len(polys)), 2):
        assert _crossings(polys[i], polys[j]) == 0, (shallow_body.pieces[i].label, shallow_body.pieces[j].label)


def test_symmetric_body_is_mirror_symmetric(body):
    pairs = {"A2-L": "A1-L", "A2-C1": "A1-C2", "A2-C2": "A1-C1", "A2-K": "A1-K"}
    for a, b in pairs.items():
        sa, sb = body.sequences[a], body.sequences[b]
        for p, q in zip(sa.starts + sa.ends, sb.starts + sb.ends):
            assert dist(mirror_s(p), q) < 1e-12
        for x, y in zip(sa.arcs, sb.arcs):
            assert x.conic.k == pytest.approx(y.conic.k, abs=1e-12)


def test_swapped_input_gives_the_mirror_body(canonical_params, body):
    swapped = build_body(canonical_params.swapped())
    wa, wb = body.world_points(), swapped.world_points()
    for name, p in wa.items():
        assert dist(mirror_s(p), wb[name]) < 1e-12, name
    # piece by piece, the swapped body in world coordinates is the mirror image
    assert [p.label for p in swapped.pieces] == [p.label for p in body.pieces]
    for x, y in zip(body.pieces, swapped.pieces):
        if x.kind == "arc":
            px = x.geom.sample(9)
            py = y.geom.sample(9)
        else:
            px = np.array([x.geom.a, x.geom.b])
            py = np.array([y.geom.a, y.geom.b])
        wx = np.array([mirror_s(body.frame.to_world(p)) for p in px])
        wy = np.array([swapped.frame.to_world(p) for p in py])
        assert np.max(np.abs(wx - wy)) < 1e-12, x.label


def test_asymmetric_configuration_builds(canonical_params, asymmetric_body):
    b = asymmetric_body
    assert b.params.asymmetric
    assert b.report.ok
    assert not b.report["H1_on_bisector_B1C1D1"].passed
    assert not b.report["H1_on_bisector_B1C1D1"].required
    assert dist(b.points["H1"], b.params.H1) < 1e-15
    # N and M leave the symmetry axis
    assert abs(b.points["N"][0]) > 1e-3 and abs(b.points["M"][0]) > 1e-3
    assert b.arc_count() == 104


def test_build_is_deterministic(canonical_params):
    a, b = build_body(canonical_params), build_body(canonical_params)
    for x, y in zip(a.pieces, b.pieces):
        for p, q in zip(x.endpoints, y.endpoints):
            assert np.array_equal(p, q)


def test_hyperbola_sequences_use_branch_near_source(body):
    for seq in body.sequences.values():
        if seq.kind == HYPERBOLA:
            for arc in seq.arcs:
                assert arc.conic.branch == 2  # wraps the far focus, away from the source
