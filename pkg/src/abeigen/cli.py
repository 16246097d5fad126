"""Command-line front end: ``abeigen solve | analyze | sweep | verify | mesh-export``.

Exit codes: 0 success, 1 numerical failure, 2 configuration error (including
invalid geometry such as a pole outside the domain).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys

import jsonschema
import numpy as np

from .errors import ABError, ConfigError, GeometryError
from .geometry import DomainSpec, PoleFluxParams
from .mesh import RefinementSpec, build_mesh

log = logging.getLogger("abeigen")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POINT = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "domain": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["disk", "square", "sector", "polygon"]},
                "radius": _POS, "side": _POS, "aperture": _POS,
                "vertices": {"type": "array", "items": _POINT, "minItems": 3},
            },
        },
        "pole": _POINT,
        "alpha": _NUM,
        "k": {"type": "integer", "minimum": 1},
        "cluster": {"type": "integer", "minimum": 0},
        "refinement": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h_max": _POS,
                "pole_depth": {"type": "integer", "minimum": 4},
                "order": {"enum": [1, 2]},
                "n_theta": {"type": "integer", "minimum": 8},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"solver": _POS, "cluster": _POS, "kreal": _POS, "fit": _POS},
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"enum": ["line", "axis", "diagonal", "alpha", "grid"]},
                "start": _POINT, "end": _POINT,
                "steps": {"type": "integer", "minimum": 1},
                "alphas": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
                "rho_a": _POS, "rho_alpha": _POS,
                "n": {"type": "integer", "minimum": 1},
            },
        },
        "output": {"type": "string"},
        "verbosity": {"type": "integer", "minimum": 0, "maximum": 2},
    },
}

DEFAULTS = {
    "domain": {"kind": "disk"},
    "alpha": 0.5,
    "k": 6,
    "refinement": {},
    "tolerances": {"solver": 1e-8, "cluster": 1e-3, "kreal": 1e-5, "fit": 0.1},
    "verbosity": 0,
}


def default_pole(domain: DomainSpec):
    if domain.kind == "sector":
        return [0.5 * domain.radius, 0.0]
    if domain.kind == "polygon":
        v = np.asarray(domain.vertices)
        return v.mean(axis=0).tolist()
    return [0.0, 0.0]


def _pair(text):
    try:
        x, y = (float(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from exc
    return [x, y]


def _triple(text):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'a,b,c', got {text!r}") from exc
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return vals


def _vertices(text):
    try:
        return [[float(t) for t in p.split(",")] for p in text.split(";")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("vertices as 'x,y;x,y;...'") from exc


def build_config(args):
    """Merge the optional JSON config file with command-line overrides and validate."""
    cfg = json.loads(json.dumps(DEFAULTS))
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            jsonschema.validate(user, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config schema error: {exc.message}") from exc
        for key, val in user.items():
            if isinstance(val, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(val)
            else:
                cfg[key] = val
    dom = cfg["domain"]
    if getattr(args, "domain", None):
        if args.domain != dom.get("kind"):
            dom = {"kind": args.domain}
    for name in ("radius", "side", "aperture", "vertices"):
        val = getattr(args, name, None)
        if val is not None:
            dom[name] = val
    cfg["domain"] = dom
    for name in ("alpha", "k", "cluster", "output"):
        val = getattr(args, name, None)
        if val is not None:
            cfg[name] = val
    if getattr(args, "pole", None) is not None:
        cfg["pole"] = args.pole
    ref = cfg["refinement"]
    for name in ("h_max", "pole_depth", "order", "n_theta"):
        val = getattr(args, name, None)
        if val is not None:
            ref[name] = val
    tol = cfg["tolerances"]
    for name, attr in (("solver", "tol"), ("cluster", "rtol_cluster"), ("kreal", "tol_kreal"),
                       ("fit", "tol_fit")):
        val = getattr(args, attr, None)
        if val is not None:
            tol[name] = val
    if getattr(args, "verbose", 0):
        cfg["verbosity"] = args.verbose
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema error: {exc.message}") from exc
    try:
        domain = DomainSpec.from_dict(cfg["domain"])
        RefinementSpec(**cfg["refinement"])
    except (ABError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.setdefault("pole", default_pole(domain))
    return cfg


def report_config(cfg):
    """The config as embedded in reports: output paths do not affect results."""
    return {k: v for k, v in cfg.items() if k != "output"}


def config_hash(cfg):
    return hashlib.sha1(json.dumps(report_config(cfg), sort_keys=True).encode()).hexdigest()[:16]


def _objects(cfg):
    domain = DomainSpec.from_dict(cfg["domain"])
    ref = RefinementSpec(**cfg["refinement"])
    return domain, ref, cfg["pole"], float(cfg["alpha"])


def _emit(report, path):
    text = json.dumps(report, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_solve(cfg):
    from .eigensolver import solve_eigs
    from .operator import assemble_branch_cut
    domain, ref, pole, alpha = _objects(cfg)
    mesh = build_mesh(domain, pole, ref)
    pen = assemble_branch_cut(mesh, PoleFluxParams(pole, alpha))
    b = solve_eigs(pen, cfg["k"], tol=cfg["tolerances"]["solver"],
                   rtol_cluster=cfg["tolerances"]["cluster"])
    rep = b.to_dict()
    rep["params"].pop("seconds", None)
    rep.update({"config": report_config(cfg), "config_hash": config_hash(cfg),
                "mesh_fingerprint": mesh.fingerprint,
                "cluster_sizes": b.cluster_sizes()})
    _emit(rep, cfg.get("output"))
    return 0


def cmd_analyze(cfg):
    from .eigensolver import solve_eigs
    from .operator import assemble_branch_cut
    from .perturbation import theorem_report
    domain, ref, pole, alpha = _objects(cfg)
    mesh = build_mesh(domain, pole, ref)
    pen = assemble_branch_cut(mesh, PoleFluxParams(pole, alpha))
    b = solve_eigs(pen, max(cfg["k"], 2) + 2, tol=cfg["tolerances"]["solver"],
                   rtol_cluster=cfg["tolerances"]["cluster"])
    cluster = b.cluster_of(cfg.get("cluster", 0))
    tol = cfg["tolerances"]
    rep = theorem_report(pen, b, cluster, tol_kreal=tol["kreal"], tol_fit=tol["fit"])
    print(rep.summary(), file=sys.stderr)
    out = rep.to_dict()
    out.update({"config": report_config(cfg), "config_hash": config_hash(cfg),
                "mesh_fingerprint": mesh.fingerprint})
    _emit(out, cfg.get("output"))
    return 0


def _sweep_plan(cfg, domain, ref, pole, alpha):
    from .sweep import SweepPlan
    sw = cfg.get("sweep", {})
    path = sw.get("path", "line")
    steps = sw.get("steps", 20)
    margin = 2.2 * ref.h_max
    if path == "axis":
        if domain.kind != "sector":
            raise ConfigError("the 'axis' path is defined for the sector")
        b = 0.5 * domain.aperture
        t0 = margin / math.sin(b)
        return SweepPlan.line(domain, (t0, 0.0), (domain.radius - margin, 0.0), steps, alpha,
                              k=cfg["k"], refinement=ref)
    if path == "diagonal":
        if domain.kind != "square":
            raise ConfigError("the 'diagonal' path is defined for the square")
        e = 0.5 * domain.side - margin * math.sqrt(2)
        return SweepPlan.line(domain, (0.0, 0.0), (e, e), steps, alpha, k=cfg["k"], refinement=ref)
    if path == "alpha":
        lo, hi, n = sw.get("alphas", [0.1, 0.9, 17])
        return SweepPlan.alpha_path(domain, pole, np.linspace(lo, hi, int(n)), k=cfg["k"],
                                    refinement=ref)
    if "start" not in sw or "end" not in sw:
        raise ConfigError("a line sweep needs start and end points")
    return SweepPlan.line(domain, sw["start"], sw["end"], steps, alpha, k=cfg["k"],
                          refinement=ref)


def cmd_sweep(cfg, args=None):
    from .sweep import isolation_check, sweep, write_csv, write_jsonl, write_long_csv
    domain, ref, pole, alpha = _objects(cfg)
    sw = cfg.get("sweep", {})
    cache = getattr(args, "cache", None)
    workers = getattr(args, "workers", None)
    if sw.get("path") == "grid":
        res = isolation_check(domain, tuple(pole), alpha, sw.get("rho_a", 0.05),
                              sw.get("rho_alpha", 0.05), sw.get("n", 5), ref=ref,
                              workers=workers, cache_path=cache)
        out = res.to_dict()
        out["config_hash"] = config_hash(cfg)
        _emit(out, cfg.get("output"))
        records = res.records
    else:
        plan = _sweep_plan(cfg, domain, ref, pole, alpha)
        records = sweep(plan, workers=workers, cache_path=cache)
        write_csv(records, cfg.get("output") or sys.stdout)
    if args is not None and args.jsonl:
        write_jsonl(records, args.jsonl)
    if args is not None and args.long_csv:
        write_long_csv(records, args.long_csv)
    failed = [r for r in records if r.error]
    for r in failed:
        log.error("point %d failed: %s", r.index, r.error)
    return 1 if failed else 0


def cmd_verify(suite):
    from .acceptance import run_suite
    results = run_suite(suite)
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed")
    return 1 if n_fail else 0


def cmd_mesh_export(cfg, fmt):
    domain, ref, pole, _ = _objects(cfg)
    mesh = build_mesh(domain, pole, ref)
    path = cfg.get("output")
    if not path:
        raise ConfigError("mesh-export needs --out")
    if fmt == "json":
        mesh.to_json(path)
    else:
        mesh.to_text(path)
    print(f"{mesh.n_vertices} vertices, {len(mesh.triangles)} triangles, "
          f"fingerprint {mesh.fingerprint}")
    return 0


def _common(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--domain", choices=["disk", "square", "sector", "polygon"])
    p.add_argument("--radius", type=float)
    p.add_argument("--side", type=float)
    p.add_argument("--aperture", type=float)
    p.add_argument("--vertices", type=_vertices, help="polygon as 'x,y;x,y;...'")
    p.add_argument("--pole", type=_pair, help="pole position 'x,y'")
    p.add_argument("--alpha", type=float)
    p.add_argument("-k", "--k", type=int, dest="k")
    p.add_argument("--h-max", type=float, dest="h_max")
    p.add_argument("--pole-depth", type=int, dest="pole_depth")
    p.add_argument("--order", type=int, choices=[1, 2])
    p.add_argument("--n-theta", type=int, dest="n_theta")
    p.add_argument("--tol", type=float)
    p.add_argument("--rtol-cluster", type=float, dest="rtol_cluster")
    p.add_argument("--tol-kreal", type=float, dest="tol_kreal")
    p.add_argument("--tol-fit", type=float, dest="tol_fit", help="max harmonic fit residual")
    p.add_argument("--out", dest="output")
    p.add_argument("-v", "--verbose", action="count", default=0)


def make_parser():
    parser = argparse.ArgumentParser(prog="abeigen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="eigenvalues for one (pole, alpha)")
    _common(p)
    p = sub.add_parser("analyze", help="condition report for a double cluster")
    _common(p)
    p.add_argument("--cluster", type=int, help="index of an eigenvalue in the target cluster")
    p = sub.add_parser("sweep", help="eigenvalues along a path or on a grid")
    _common(p)
    p.add_argument("--path", choices=["line", "axis", "diagonal", "alpha"])
    p.add_argument("--grid", type=_triple, metavar="RHO_A,RHO_ALPHA,N",
                   help="isolation grid about the pole")
    p.add_argument("--start", type=_pair)
    p.add_argument("--end", type=_pair)
    p.add_argument("--steps", type=int)
    p.add_argument("--alphas", type=_triple, metavar="LO,HI,N")
    p.add_argument("--jsonl", help="also write records as JSON lines")
    p.add_argument("--long-csv", dest="long_csv", help="also write long-format CSV")
    p.add_argument("--cache", help="JSON-lines cache of solved points")
    p.add_argument("--workers", type=int, help="worker processes (default $ABEIGEN_WORKERS)")
    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--suite", choices=["quick", "full"], default="quick")
    p = sub.add_parser("mesh-export", help="write the cut mesh to disk")
    _common(p)
    p.add_argument("--format", choices=["text", "json"], default="text")
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.suite)
        cfg = build_config(args)
        if cfg["verbosity"]:
            log.setLevel(logging.INFO if cfg["verbosity"] == 1 else logging.DEBUG)
        if args.command == "sweep":
            sw = cfg.setdefault("sweep", {})
            if args.grid:
                sw.update({"path": "grid", "rho_a": args.grid[0], "rho_alpha": args.grid[1],
                           "n": int(args.grid[2])})
            for name in ("path", "start", "end", "steps"):
                if getattr(args, name) is not None:
                    sw[name] = getattr(args, name)
            if args.alphas:
                sw["alphas"] = args.alphas
                sw.setdefault("path", "alpha")
            try:
                jsonschema.validate(cfg, CONFIG_SCHEMA)
            except jsonschema.ValidationError as exc:
                raise ConfigError(f"config schema error: {exc.message}") from exc
            return cmd_sweep(cfg, args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "analyze":
            return cmd_analyze(cfg)
        return cmd_mesh_export(cfg, args.format)
    except (ConfigError, GeometryError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ABError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
