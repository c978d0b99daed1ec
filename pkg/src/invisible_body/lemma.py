"""Numeric checks of the confocal collinearity lemma and its closed form.

Conventions: rays from ``F1`` are given by the angle ``gamma`` they make
with ``F1 -> F2``, rays from ``F2`` by the angle they make with
``F2 -> F1``.  All rays turn towards the left side of ``F1 -> F2`` so that
every constructed point lies in that open half-plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .conics import ELLIPSE, HYPERBOLA, Conic, conic_through, polar_radius
from .errors import DegenerateConic, DomainError, NoIntersection
from .geom import as_point, collinearity_residual, dist, rotate, unit

#: Angular tolerance of the bracketing root search for ``u``.
ANGLE_TOL = 1e-13


def _angle_at(vertex, p, q) -> float:
    """Unsigned angle ``p vertex q``."""
    u = as_point(p) - as_point(vertex)
    v = as_point(q) - as_point(vertex)
    return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), float(np.dot(u, v)))


def ray_from_f1(F1, F2, gamma: float) -> np.ndarray:
    return rotate(unit(as_point(F2) - as_point(F1)), gamma)


def ray_from_f2(F1, F2, angle: float) -> np.ndarray:
    return rotate(unit(as_point(F1) - as_point(F2)), -angle)


def _meet(F1, d1, F2, d2) -> np.ndarray:
    """Intersection of the rays ``F1 + s d1`` and ``F2 + t d2``."""
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(den) < 1e-14:
        raise NoIntersection("rays are parallel")
    w = as_point(F2) - as_point(F1)
    s = (w[0] * d2[1] - w[1] * d2[0]) / den
    t = (w[0] * d1[1] - w[1] * d1[0]) / den
    if s <= 0.0 or t <= 0.0:
        raise NoIntersection("rays do not meet")
    return as_point(F1) + s * d1


@dataclass
class LemmaConfig:
    F1: np.ndarray
    F2: np.ndarray
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        self.F1, self.F2 = as_point(self.F1), as_point(self.F2)
        if dist(self.F1, self.F2) <= 0.0:
            raise DomainError("foci coincide")
        a, b, g = self.alpha, self.beta, self.gamma
        if not (a > 0.0 and b > 0.0 and g > 0.0 and a + g < math.pi and b + g < math.pi):
            raise DomainError("angles do not form the two triangles F1 F2 h, F1 F2 e")

    @property
    def f(self) -> float:
        return dist(self.F1, self.F2)

    @property
    def h(self) -> np.ndarray:
        return _meet(self.F1, ray_from_f1(self.F1, self.F2, self.gamma), self.F2, ray_from_f2(self.F1, self.F2, self.alpha))

    @property
    def e(self) -> np.ndarray:
        return _meet(self.F1, ray_from_f1(self.F1, self.F2, self.gamma), self.F2, ray_from_f2(self.F1, self.F2, self.beta))

    def lengths(self) -> dict[str, float]:
        """Measured ``a1 = F1h, a2 = F1e, b1 = F2h, b2 = F2e, f``."""
        h, e = self.h, self.e
        return {"a1": dist(self.F1, h), "a2": dist(self.F1, e), "b1": dist(self.F2, h), "b2": dist(self.F2, e), "f": self.f}

    def sine_law_lengths(self) -> dict[str, float]:
        a, b, g, f = self.alpha, self.beta, self.gamma, self.f
        return {
            "a1": f * math.sin(a) / math.sin(a + g),
            "b1": f * math.sin(g) / math.sin(a + g),
            "a2": f * math.sin(b) / math.sin(b + g),
            "b2": f * math.sin(g) / math.sin(b + g),
        }


def phi_closed_form(alpha: float, beta: float) -> float:
    den = math.cos(0.5 * (alpha - beta))
    if abs(den) <= 1e-12:
        raise DomainError("cos((alpha - beta)/2) vanishes")
    ratio = math.cos(0.5 * (alpha + beta)) / den
    if abs(ratio) > 1.0 + 1e-15:
        raise DomainError(f"cos(phi) = {ratio} outside [-1, 1]")
    return math.acos(max(-1.0, min(1.0, ratio)))


def hyperbola_level(F1, F2, p) -> Conic:
    """The level set ``d(., F1) - d(., F2) = const`` through ``p`` (one branch)."""
    return conic_through(HYPERBOLA, F1, F2, p)


def ellipse_hyperbola_meet(E: Conic, H: Conic) -> np.ndarray:
    """Intersection of a confocal ellipse and hyperbola branch on the left side
    of ``F1 -> F2``."""
    return ellipse_level_meet(E, H.weights[0] * H.k)


def ellipse_level_meet(E: Conic, level: float) -> np.ndarray:
    """Point of the ellipse, left of ``F1 -> F2``, where ``d(., F1) - d(., F2)``
    equals ``level``; found by a bracketing search over the polar angle at
    ``F2``.  Level 0 is the perpendicular bisector of the foci."""
    F1, F2 = E.f1, E.f2

    def point(phi):
        u = ray_from_f2(F1, F2, phi)
        return F2 + polar_radius(E, 2, u) * u

    def g(phi):
        p = point(phi)
        return dist(p, F1) - dist(p, F2) - level

    lo, hi = 0.0, math.pi
    if g(lo) * g(hi) > 0.0:
        raise NoIntersection("ellipse and hyperbola branch do not meet")
    phi = brentq(g, lo, hi, xtol=ANGLE_TOL, rtol=4.0 * np.finfo(float).eps, maxiter=200)
    return point(phi)


def construct_u(cfg: LemmaConfig) -> np.ndarray:
    """The point ``u`` of the ellipse through ``e`` and the level curve of
    ``d(., F1) - d(., F2)`` through ``h`` (a hyperbola branch, or the
    perpendicular bisector of the foci when ``h`` is equidistant)."""
    try:
        E = conic_through(ELLIPSE, cfg.F1, cfg.F2, cfg.e)
    except DegenerateConic as exc:
        raise NoIntersection(str(exc)) from exc
    h = cfg.h
    return ellipse_level_meet(E, dist(h, cfg.F1) - dist(h, cfg.F2))


def phi_by_construction(cfg: LemmaConfig) -> float:
    return _angle_at(cfg.F2, cfg.F1, construct_u(cfg))


def appendix_identities(cfg: LemmaConfig) -> dict[str, float]:
    """Residuals of the intermediate identities of the closed-form derivation."""
    m = cfg.lengths()
    sl = cfg.sine_law_lengths()
    u = construct_u(cfg)
    c = dist(cfg.F2, u)
    phi = _angle_at(cfg.F2, cfg.F1, u)
    a1, a2, b1, b2, f = m["a1"], m["a2"], m["b1"], m["b2"], m["f"]
    return {
        "c_formula": abs(c - 0.5 * (-a1 + b1 + a2 + b2)),
        "F1u_formula": abs(math.sqrt(f * f + c * c - 2.0 * c * f * math.cos(phi)) - 0.5 * (a1 - b1 + a2 + b2)),
        "sine_law": max(abs(sl[k] - m[k]) for k in sl),
    }


def check_lemma_a(F1, F2, gamma1: float, gamma2: float, alpha: float, beta: float) -> float:
    """Collinearity residual of ``u1``, ``u2`` and ``F2``, where ``u_j`` is the
    meeting point of the ellipse through ``e_j`` and the branch through ``h_j``,
    and ``e_j, h_j`` lie on the ``j``-th ray from ``F1``."""
    u1 = construct_u(LemmaConfig(F1, F2, alpha, beta, gamma1))
    u2 = construct_u(LemmaConfig(F1, F2, alpha, beta, gamma2))
    return collinearity_residual(F2, u1, u2)


def _polar_point(c: Conic, pivot: int, d) -> np.ndarray:
    r = polar_radius(c, pivot, d)
    if not math.isfinite(r):
        raise NoIntersection("ray misses the conic")
    return c.focus(pivot) + r * d


def check_lemma_b(F1, F2, phi: float, c1: float, c2: float, gamma: float) -> float:
    """Collinearity residual of ``e2``, ``h2`` and ``F1``.

    ``u_j`` sits at distance ``c_j`` from ``F2`` on the ray at angle ``phi``;
    the ray from ``F1`` at angle ``gamma`` meets the curves through ``u1`` at
    ``e1, h1`` and the rays ``F2 e1``, ``F2 h1`` meet the curves through
    ``u2`` at ``e2, h2``.
    """
    F1, F2 = as_point(F1), as_point(F2)
    if not (0.0 < gamma < math.pi):
        raise DomainError("the ray from F1 must leave the focal axis")
    d = ray_from_f2(F1, F2, phi)
    u1, u2 = F2 + c1 * d, F2 + c2 * d
    try:
        E1, H1 = conic_through(ELLIPSE, F1, F2, u1), hyperbola_level(F1, F2, u1)
        E2, H2 = conic_through(ELLIPSE, F1, F2, u2), hyperbola_level(F1, F2, u2)
    except DegenerateConic as exc:
        raise NoIntersection(str(exc)) from exc
    g = ray_from_f1(F1, F2, gamma)
    e1, h1 = _polar_point(E1, 1, g), _polar_point(H1, 1, g)
    e2 = _polar_point(E2, 2, unit(e1 - F2))
    h2 = _polar_point(H2, 2, unit(h1 - F2))
    return collinearity_residual(F1, e2, h2)


def random_frame(rng: np.random.Generator):
    """Random focus pair (uniform position, scale and orientation)."""
    F1 = rng.uniform(-3.0, 3.0, 2)
    F2 = F1 + rng.uniform(0.3, 3.0) * np.array([math.cos(t := rng.uniform(0, 2 * math.pi)), math.sin(t)])
    return F1, F2


def _angles_ok(alpha, beta, gamma, margin) -> bool:
    return alpha + gamma < math.pi - margin and beta + gamma < math.pi - margin


def sample_lemma_a(rng: np.random.Generator, margin: float = 0.05):
    """``(F1, F2, gamma1, gamma2, alpha, beta)`` with all four points well defined."""
    while True:
        F1, F2 = random_frame(rng)
        alpha, beta = rng.uniform(margin, math.pi - 3 * margin, 2)
        gamma1, gamma2 = rng.uniform(margin, math.pi - 2 * margin, 2)
        if not all(_angles_ok(alpha, beta, g, margin) for g in (gamma1, gamma2)):
            continue
        if abs(alpha - beta) < margin:
            continue
        try:
            check_lemma_a(F1, F2, gamma1, gamma2, alpha, beta)
        except (NoIntersection, DomainError):
            continue
        return F1, F2, gamma1, gamma2, alpha, beta


def sample_lemma_b(rng: np.random.Generator, margin: float = 0.05):
    """``(F1, F2, phi, c1, c2, gamma)`` for which every point exists."""
    while True:
        F1, F2 = random_frame(rng)
        f = dist(F1, F2)
        phi = rng.uniform(margin, math.pi - margin)
        c1, c2 = f * rng.uniform(0.1, 3.0, 2)
        gamma = rng.uniform(margin, math.pi - margin)
        try:
            check_lemma_b(F1, F2, phi, c1, c2, gamma)
        except (NoIntersection, DomainError):
            continue
        return F1, F2, phi, c1, c2, gamma


def lemma_sweep(samples: int = 1000, seed: int = 7, gammas: int = 10) -> dict:
    """Seeded sweeps of both lemma statements and of the closed form."""
    rng = np.random.default_rng(seed)
    res_a = [check_lemma_a(*sample_lemma_a(rng)) for _ in range(samples)]
    res_b = [check_lemma_b(*sample_lemma_b(rng)) for _ in range(samples)]
    n_pairs = max(1, samples // 5)
    err, spread, ident = 0.0, 0.0, 0.0
    for _ in range(n_pairs):
        alpha, beta, gs = sample_phi_pair(rng, gammas)
        closed = phi_closed_form(alpha, beta)
        phis = []
        for g in gs:
            cfg = LemmaConfig((0.0, 0.0), (1.0, 0.0), alpha, beta, g)
            phis.append(phi_by_construction(cfg))
            ident = max(ident, max(appendix_identities(cfg).values()))
        err = max(err, max(abs(p - closed) for p in phis))
        spread = max(spread, float(np.std(phis)))
    return {
        "seed": seed,
        "prng": "PCG64",
        "lemma_a": {"samples": samples, "max_residual": max(res_a)},
        "lemma_b": {"samples": samples, "max_residual": max(res_b)},
        "closed_form": {"pairs": n_pairs, "gammas": gammas, "max_error": err, "max_stdev": spread, "max_identity_residual": ident},
    }


def sample_phi_pair(rng: np.random.Generator, gammas: int = 10, margin: float = 0.05):
    """Random ``(alpha, beta)`` with ``gammas`` admissible values of ``gamma``."""
    while True:
        alpha, beta = rng.uniform(margin, math.pi - 3 * margin, 2)
        top = math.pi - max(alpha, beta) - margin
        if top > 2 * margin and abs(alpha - beta) > 1e-6:
            break
    gs = np.linspace(margin, top, gammas)
    return float(alpha), float(beta), [float(g) for g in gs]
