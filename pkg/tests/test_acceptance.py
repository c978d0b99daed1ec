"""Acceptance criteria 1-8.  Each test records one PASS/FAIL line, printed in
the terminal summary of the pytest run."""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from invisible_body.billiard import exit_deviation, trace_batch
from invisible_body.cli import body_from_config, load_config, run, shipped_config
from invisible_body.lemma import (
    LemmaConfig,
    check_lemma_a,
    check_lemma_b,
    phi_by_construction,
    phi_closed_form,
    sample_lemma_a,
    sample_lemma_b,
    sample_phi_pair,
)
from invisible_body.render import render_svg
from invisible_body.revolve import Body3D, Ray3, exit_deviation3d, meridian_residuals, revolve_mesh, rotate_about_axis, trace3d_batch
from invisible_body.verify import construction_audit, handled_cone, invisibility_sweep, sample_directions

CANONICAL = str(shipped_config("canonical"))
PERTURBED = str(shipped_config("perturbed"))
GOLDEN = Path(__file__).parent / "golden" / "canonical.svg"


def record(k: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def canonical():
    return body_from_config(load_config(CANONICAL))


def test_criterion_1_appendix_formula():
    rng = np.random.default_rng(2001)
    t0 = time.perf_counter()
    err = spread = 0.0
    for _ in range(200):
        alpha, beta, gammas = sample_phi_pair(rng, 10)
        closed = phi_closed_form(alpha, beta)
        phis = [phi_by_construction(LemmaConfig((0.0, 0.0), (1.0, 0.0), alpha, beta, g)) for g in gammas]
        err = max(err, max(abs(p - closed) for p in phis))
        spread = max(spread, float(np.std(phis)))
    dt = time.perf_counter() - t0
    ok = err < 1e-9 and spread < 1e-9 and dt < 10.0
    record(1, ok, f"200 pairs x 10 gamma: max |phi - closed| = {err:.2e}, max stdev = {spread:.2e}, {dt:.2f} s")


def test_criterion_2_lemma():
    rng = np.random.default_rng(2002)
    t0 = time.perf_counter()
    ra = max(check_lemma_a(*sample_lemma_a(rng)) for _ in range(1000))
    rb = max(check_lemma_b(*sample_lemma_b(rng)) for _ in range(1000))
    dt = time.perf_counter() - t0
    ok = ra < 1e-9 and rb < 1e-9 and dt < 10.0
    record(2, ok, f"1000 + 1000 configs: lemma (a) {ra:.2e}, lemma (b) {rb:.2e}, {dt:.2f} s")


def test_criterion_3_construction_audit(canonical):
    rep = construction_audit(canonical)
    names = ("paired_collinearity", "homothety_transport", "vertex_tangency", "rail_membership")
    worst = {n: rep[n].worst for n in names}
    vl = rep["vanishing_lengths"]
    ok = all(v < 1e-9 for v in worst.values()) and vl.passed and rep.ok
    detail = ", ".join(f"{n} {v:.1e}" for n, v in worst.items()) + f", length ratio r = {vl.worst:.3f}"
    record(3, ok, detail)


def test_criterion_4_invisibility_2d(canonical):
    t0 = time.perf_counter()
    reps = [invisibility_sweep(canonical, s, 10_000, 42) for s in ("A2", "A1")]
    dt = time.perf_counter() - t0
    ok = dt < 30.0
    for r in reps:
        ok &= r.status_counts["Exited"] == 10_000 and r.bounce_histogram == {"4": 10_000}
        ok &= r.max_angle < 1e-8 and r.max_distance < 1e-8 and r.max_focal_line < 1e-8
    dev = max(max(r.max_angle, r.max_distance) for r in reps)
    focal = max(r.max_focal_line for r in reps)
    record(4, ok, f"2 x 10^4 rays: all Exited with 4 bounces, max deviation {dev:.1e}, focal lines {focal:.1e}, {dt:.2f} s")


def test_criterion_5_negative_control(capsys):
    body = body_from_config(load_config(PERTURBED))
    rep = invisibility_sweep(body, "A2", 10_000, 42)
    code = run(["verify", "-c", PERTURBED, "--n", "2000"])
    capsys.readouterr()
    ok = not rep.passed and rep.max_deviation > 1e-3 and code == 1
    record(5, ok, f"1% focal-constant perturbation: verify exit {code}, max deviation {rep.max_deviation:.3f}")


def test_criterion_6_invisibility_3d(canonical):
    b3 = Body3D(canonical)
    rng = np.random.default_rng(2006)
    dev = equi = 0.0
    for src in ("A1", "A2"):
        S = np.array([canonical.points[src][0], 0.0, 0.0])
        th = sample_directions(handled_cone(canonical, src), 1000, rng)
        psi = rng.uniform(0.0, 2 * math.pi, th.size)
        rays = [Ray3(S, (math.cos(t), math.sin(t) * math.cos(p), math.sin(t) * math.sin(p))) for t, p in zip(th, psi)]
        res = trace3d_batch(rays, b3)
        for tr in res:
            dev = max(dev, *exit_deviation3d(S, tr))
        turn = rng.uniform(0.0, 2 * math.pi, th.size)
        rot = trace3d_batch([Ray3(S, rotate_about_axis(r.dir, a)) for r, a in zip(rays, turn)], b3)
        for a, b, ang in zip(res, rot, turn):
            if a.n_bounces != b.n_bounces:
                equi = math.inf
                continue
            for p, q in zip(a.bounces, b.bounces):
                equi = max(equi, float(np.linalg.norm(rotate_about_axis(p, ang) - q)))
    mesh = revolve_mesh(b3, 64, 32)
    mres = float(meridian_residuals(b3, mesh.vertices, mesh.groups).max())
    ok = dev < 1e-8 and equi < 1e-10 and mres < 1e-9
    record(6, ok, f"2 x 10^3 rays: max deviation {dev:.1e}, equivariance {equi:.1e}, mesh residual {mres:.1e}")


def test_criterion_7_time_reversal(canonical):
    rng = np.random.default_rng(2007)
    worst = 0.0
    ok = True
    for src, n in (("A2", 500), ("A1", 500)):
        th = sample_directions(handled_cone(canonical, src), n, rng)
        fwd = trace_batch(canonical, np.tile(canonical.points[src], (n, 1)), np.stack([np.cos(th), np.sin(th)], 1))
        back = trace_batch(canonical, [t.exit.origin + 3.0 * t.exit.dir for t in fwd], [-t.exit.dir for t in fwd])
        for f, b in zip(fwd, back):
            ok &= f.status == b.status == "Exited" and f.n_bounces == b.n_bounces
            for p, q in zip(f.points, reversed(b.points)):
                worst = max(worst, float(np.linalg.norm(p - q)))
            worst = max(worst, float(np.linalg.norm(b.exit.dir + f.initial.dir)))
    ok = ok and worst < 1e-8
    record(7, ok, f"10^3 exited traces reversed: max bounce mismatch {worst:.1e}")


def test_criterion_8_determinism(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    ca = run(["verify", "-c", CANONICAL, "-o", str(a)])
    cb = run(["verify", "-c", CANONICAL, "-o", str(b)])
    same = a.read_bytes() == b.read_bytes()
    svg = render_svg(body_from_config(load_config(CANONICAL)), [])
    golden = svg == GOLDEN.read_text(encoding="utf-8")
    ok = ca == cb == 0 and same and golden
    record(8, ok, f"two full verify runs byte-identical: {same}; render matches golden file: {golden}")
