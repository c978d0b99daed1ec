"""Command line interface: ``invisible-body <command> ...``.

Exit codes: 0 success / PASS, 1 verification FAIL, 2 invalid configuration,
3 I/O error.  Errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from .billiard import trace, write_jsonl
from .construction import Body2D, ConstructionParams, build_body, perturb_body
from .errors import InvalidConfiguration, InvisibleBodyError
from .geom import Ray2
from .lemma import lemma_sweep
from .render import render_svg
from .revolve import Body3D, revolve_mesh, write_obj
from .verify import construction_audit, invisibility_sweep, report_json

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
LEMMA_TOL = 1e-9


class CliError(Exception):
    def __init__(self, code: int, payload: dict):
        super().__init__(payload.get("message", ""))
        self.code = code
        self.payload = payload


def schema() -> dict:
    text = resources.files("invisible_body").joinpath("configs/config.schema.json").read_text()
    return json.loads(text)


def shipped_config(name: str) -> Path:
    """Path of a config shipped with the package (``canonical`` or ``perturbed``)."""
    return Path(str(resources.files("invisible_body").joinpath(f"configs/{name}.json")))


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_IO, {"error": "IOError", "message": str(exc), "path": path}) from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_CONFIG, {"error": "InvalidConfiguration", "constraints": ["json_syntax"], "message": str(exc)}) from exc
    try:
        jsonschema.validate(cfg, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise CliError(
            EXIT_CONFIG,
            {"error": "InvalidConfiguration", "constraints": [f"schema:{where}"], "message": exc.message},
        ) from exc
    return cfg


def params_from_config(cfg: dict) -> ConstructionParams:
    kw = {k: cfg[k] for k in ("A1", "A2", "L", "K", "O", "H1", "H2", "M", "N") if k in cfg}
    return ConstructionParams(depth=cfg.get("depth", 12), **kw)


def body_from_config(cfg: dict) -> Body2D:
    body = build_body(params_from_config(cfg))
    p = cfg.get("perturbation")
    if p:
        body = perturb_body(body, p["sequence"], p["index"], p["relative"])
    return body


def _fl(v) -> list[float]:
    return [float(x) for x in v]


def describe_body(body: Body2D) -> dict:
    """Body description: named points in the input frame, pieces in body
    coordinates (the normalized frame)."""
    fr = body.frame
    seqs = {}
    for name, seq in body.sequences.items():
        seqs[name] = {
            "kind": seq.kind,
            "source": seq.source,
            "other_focus": seq.other,
            "vertex": seq.vertex,
            "corner": seq.corner,
            "arcs": [
                {
                    "k": a.conic.k,
                    "branch": a.conic.branch,
                    "theta_min": a.theta_min,
                    "theta_max": a.theta_max,
                    "start": _fl(s),
                    "end": _fl(e),
                }
                for a, s, e in zip(seq.arcs, seq.starts, seq.ends)
            ],
        }
    quads = {
        name: {"vertex": _fl(q.vertex), "corner": _fl(q.corner), "segments": [[_fl(s.a), _fl(s.b)] for s in q.segments]}
        for name, q in body.quads.items()
    }
    return {
        "frame": {"origin": _fl(fr.origin), "scale": fr.scale, "reflects": fr.reflects},
        "points": {k: _fl(v) for k, v in sorted(body.world_points().items())},
        "points_body": {k: _fl(v) for k, v in sorted(body.points.items())},
        "validation": body.report.as_dict(),
        "sequences": seqs,
        "quadrangles": quads,
        "arc_count": body.arc_count(),
        "segment_count": body.segment_count(),
    }


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, {"error": "IOError", "message": str(exc), "path": path}) from exc


def cmd_construct(args) -> int:
    body = body_from_config(load_config(args.config))
    _write_text(args.output, report_json(describe_body(body)))
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    body = body_from_config(cfg)
    n = args.n if args.n is not None else cfg.get("n_rays", 10000)
    seed = args.seed if args.seed is not None else cfg.get("seed", 42)
    sources = ("A1", "A2") if args.source == "both" else (args.source,)
    reports = {s: invisibility_sweep(body, s, n, seed) for s in sources}
    passed = all(r.passed for r in reports.values())
    out = {"passed": passed, "reports": {s: r.as_dict() for s, r in reports.items()}}
    _write_text(args.output, report_json(out))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_lemma(args) -> int:
    rep = lemma_sweep(args.samples, args.seed)
    worst = max(rep["lemma_a"]["max_residual"], rep["lemma_b"]["max_residual"], rep["closed_form"]["max_error"], rep["closed_form"]["max_stdev"])
    rep["passed"] = bool(worst < LEMMA_TOL)
    _write_text(args.output, report_json(rep))
    return EXIT_OK if rep["passed"] else EXIT_FAIL


def cmd_trace(args) -> int:
    body = body_from_config(load_config(args.config))
    S = body.points[args.source]
    tr = trace(Ray2.from_angle(S, args.angle), body)
    buf = io.StringIO()
    write_jsonl([tr], buf, source=S)
    _write_text(args.output, buf.getvalue())
    return EXIT_OK


def _read_traces(path: str, body: Body2D):
    out = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip()]
    except OSError as exc:
        raise CliError(EXIT_IO, {"error": "IOError", "message": str(exc), "path": path}) from exc
    for ln in lines:
        d = json.loads(ln)
        out.append(trace(Ray2(d["origin"], d["dir"]), body))
    return out


def cmd_render(args) -> int:
    body = body_from_config(load_config(args.config))
    traces = _read_traces(args.traces, body) if args.traces else []
    _write_text(args.output, render_svg(body, traces))
    return EXIT_OK


def cmd_mesh(args) -> int:
    cfg = load_config(args.config)
    body = body_from_config(cfg)
    rng = tuple(cfg.get("angular_range", (0.0, 2.0 * math.pi)))
    try:
        b3 = Body3D(body, rng)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, {"error": "InvalidConfiguration", "constraints": ["angular_range"], "message": str(exc)}) from exc
    mesh = revolve_mesh(b3, args.ntheta, args.narc)
    buf = io.StringIO()
    write_obj(mesh, buf)
    _write_text(args.output, buf.getvalue())
    return EXIT_OK


def cmd_audit(args) -> int:
    body = body_from_config(load_config(args.config))
    rep = construction_audit(body)
    _write_text(args.output, report_json(rep.as_dict()))
    return EXIT_OK if rep.ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="invisible-body", description="Bodies invisible from two points: construction and verification.")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("-c", "--config", required=True, help="JSON configuration file")
        sp.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
        return sp

    sp = with_config(sub.add_parser("construct", help="build the body and emit its description"))
    sp.set_defaults(func=cmd_construct)

    sp = with_config(sub.add_parser("verify", help="invisibility sweep; exit 0 iff PASS"))
    sp.add_argument("--source", choices=("A1", "A2", "both"), default="both")
    sp.add_argument("--n", type=int, default=None, help="rays per source (default: config n_rays)")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("lemma", help="lemma and closed-form sweeps")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("-o", "--output", default=None)
    sp.set_defaults(func=cmd_lemma)

    sp = with_config(sub.add_parser("trace", help="trace one ray, JSONL output"))
    sp.add_argument("--angle", type=float, required=True, help="direction angle in radians (body coordinates)")
    sp.add_argument("--source", choices=("A1", "A2"), default="A2")
    sp.set_defaults(func=cmd_trace)

    sp = with_config(sub.add_parser("render", help="SVG drawing"))
    sp.add_argument("--traces", default=None, help="JSONL file of traces to overlay")
    sp.set_defaults(func=cmd_render)

    sp = with_config(sub.add_parser("mesh", help="OBJ mesh of the body of revolution"))
    sp.add_argument("--ntheta", type=int, default=128)
    sp.add_argument("--narc", type=int, default=32)
    sp.set_defaults(func=cmd_mesh)

    sp = with_config(sub.add_parser("audit", help="construction invariants"))
    sp.set_defaults(func=cmd_audit)
    return p


def _error(code: int, payload: dict) -> int:
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        return _error(exc.code, exc.payload)
    except InvalidConfiguration as exc:
        return _error(EXIT_CONFIG, {"error": type(exc).__name__, "constraints": exc.constraints, "message": str(exc)})
    except InvisibleBodyError as exc:
        return _error(EXIT_CONFIG, {"error": type(exc).__name__, "constraints": [], "message": str(exc)})
    except OSError as exc:
        return _error(EXIT_IO, {"error": "IOError", "message": str(exc)})


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
