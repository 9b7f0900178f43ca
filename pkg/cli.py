#!/usr/bin/env python3
"""
chemdist command line

Subcommands:
    generate     sample one realization and write vertex/edge CSVs
    distance     chemical distance between two vertices, or a distance-ratio profile
    longedges    Monte Carlo estimate of P(L(m, n))
    renorm       Monte Carlo estimate of psi_K(n), or one classification with --verdicts
    mixing       covariance of a local event in two distant boxes
    experiment   run a YAML experiment config or a canned preset

Exit status: 0 ok, 2 config/usage error, 3 resource guard.
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

import utils

from chemdist.core.config import (
    load_experiment_config,
    log_level,
    merge_overrides,
    parse_experiment_config,
    parse_model_spec,
)
from chemdist.core.errors import ChemdistError, UsageError
from chemdist.core.experiments import run_experiment
from chemdist.core.graph import write_edges_csv
from chemdist.core.graph_core import chemical_distance, distance_ratio_profile, write_profile_csv
from chemdist.core.long_edges import estimate_P_L
from chemdist.core.mixing import estimate_mixing, get_event
from chemdist.core.models import realize, resolve_pad
from chemdist.core.point_process import Window, write_vertices_csv
from chemdist.core.renorm import BoxClassifier, ScaleLadder, estimate_psi, psi_window, write_verdicts_csv

logger = logging.getLogger("chemdist.cli")

MODEL_FLAGS = {
    "model": str,
    "dim": int,
    "intensity": float,
    "retention": float,
    "gamma": float,
    "gamma_prime": float,
    "delta": str,
    "amplitude": float,
    "beta": float,
    "window": float,
    "pad": str,
    "method": str,
}


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument("--model-preset", help="named preset from config/models.yaml")
    for name, kind in MODEL_FLAGS.items():
        group.add_argument("--" + name.replace("_", "-"), dest=name, type=kind)
    group.add_argument("--seed", type=int, help="master seed")


def _model_data(args: argparse.Namespace) -> Dict[str, Any]:
    data = {name: getattr(args, name, None) for name in MODEL_FLAGS}
    return {k: v for k, v in data.items() if v is not None}


def _model_spec(args: argparse.Namespace):
    base: Dict[str, Any] = {}
    if getattr(args, "model_preset", None):
        base = utils.model_preset(args.model_preset)
    data = {**base, **_model_data(args)}
    if args.seed is not None:
        data["seed"] = args.seed
    return parse_model_spec(data)


def _emit(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2, default=str))


def cmd_generate(args: argparse.Namespace) -> int:
    spec = _model_spec(args)
    window = Window(dim=spec.dim, side=spec.window, pad=resolve_pad(spec, spec.window))
    graph = realize(spec, window, spec.seed)
    os.makedirs(args.out, exist_ok=True)
    vertices = write_vertices_csv(graph.cloud, os.path.join(args.out, "vertices.csv"))
    edges = write_edges_csv(graph, os.path.join(args.out, "edges.csv"))
    _emit({
        "model": spec.label(),
        "pad": graph.cloud.window.pad,
        "vertices": graph.vertex_count,
        "edges": graph.edge_count,
        "meanDegree": graph.mean_degree(window.box),
        "files": [vertices, edges],
    })
    return 0


def cmd_distance(args: argparse.Namespace) -> int:
    spec = _model_spec(args)
    window = Window(dim=spec.dim, side=spec.window, pad=resolve_pad(spec, spec.window))
    graph = realize(spec, window, spec.seed)
    if args.source is not None and args.target is not None:
        _emit({"source": args.source, "target": args.target, "distance": chemical_distance(graph, args.source, args.target)})
        return 0
    if not args.radii:
        raise UsageError("give --source and --target, or --radii")
    rows = distance_ratio_profile(graph, args.radii, args.samples, spec.seed)
    payload: Dict[str, Any] = {"model": spec.label(), "profile": [asdict(row) for row in rows]}
    if args.out:
        payload["file"] = write_profile_csv(rows, args.out)
    _emit(payload)
    return 0


def cmd_longedges(args: argparse.Namespace) -> int:
    spec = _model_spec(args)
    n = args.n if args.n is not None else args.m
    est = estimate_P_L(spec, args.m, n, args.reps, spec.seed)
    _emit({"model": spec.label(), "m": args.m, "n": n, **est.as_dict()})
    return 0


def cmd_renorm(args: argparse.Namespace) -> int:
    spec = _model_spec(args)
    ladder = ScaleLadder(args.K, args.stage)
    if args.verdicts:
        window = psi_window(spec, ladder, args.stage)
        graph = realize(spec, window, spec.seed)
        classifier = BoxClassifier(graph, ladder)
        verdict = classifier.classify(window.center, args.stage)
        write_verdicts_csv([verdict], args.verdicts)
        _emit({"stage": args.stage, "K_n": ladder.size(args.stage), **verdict.row(), "file": args.verdicts})
        return 0
    est = estimate_psi(spec, ladder, args.stage, args.reps, spec.seed)
    _emit({"model": spec.label(), "K": args.K, "stage": args.stage, "K_n": ladder.size(args.stage), **est.as_dict()})
    return 0


def cmd_mixing(args: argparse.Namespace) -> int:
    spec = _model_spec(args)
    params = json.loads(args.event_params) if args.event_params else {}
    event = get_event(args.event, **params)
    x = args.x[0] if len(args.x) == 1 else args.x
    est = estimate_mixing(spec, event, args.m, x, args.reps, spec.seed)
    _emit({
        "model": spec.label(), "event": est.event, "m": est.m, "x": list(est.x),
        "covariance": est.covariance, "stderr": est.stderr, "significant": est.significant,
        "replicates": est.replicates, "pFirst": est.p_first, "pSecond": est.p_second,
    })
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    overrides: Dict[str, Any] = {
        "replicates": args.reps,
        "seed": args.seed,
        "output": args.out,
        "model": _model_data(args),
    }
    if args.preset:
        config = parse_experiment_config(merge_overrides(utils.experiment_preset(args.preset), overrides))
    elif args.config:
        config = load_experiment_config(args.config, overrides)
    else:
        raise UsageError("give --config or --preset")
    result = run_experiment(config, resume=args.resume)
    payload: Dict[str, Any] = {
        "experiment": config.resolved_name,
        "summary": result.summary_csv,
        "replicates": result.replicate_csv,
        "fit": result.fit_csv,
        "fits": result.fits,
    }
    if args.report:
        payload["report"] = utils.generate_report(result)
    _emit(payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chemdist", description="Spatial random graph laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample one realization")
    _add_model_flags(p)
    p.add_argument("--out", default="outputs/graph")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("distance", help="chemical distance or distance-ratio profile")
    _add_model_flags(p)
    p.add_argument("--source", type=int)
    p.add_argument("--target", type=int)
    p.add_argument("--radii", type=float, nargs="+")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--out")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("longedges", help="estimate P(L(m, n))")
    _add_model_flags(p)
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--n", type=float, help="edge length threshold (defaults to m)")
    p.add_argument("--reps", type=int, default=1000)
    p.set_defaults(func=cmd_longedges)

    p = sub.add_parser("renorm", help="estimate psi_K(n)")
    _add_model_flags(p)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--stage", type=int, default=1)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--verdicts", help="classify B_stage(o) once and write the verdict CSV here")
    p.set_defaults(func=cmd_renorm)

    p = sub.add_parser("mixing", help="covariance of a local event in two boxes")
    _add_model_flags(p)
    p.add_argument("--event", default="stage0-bad")
    p.add_argument("--event-params", help="JSON object of event parameters")
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--x", type=float, nargs="+", default=[4.0], help="displacement (scalar or vector)")
    p.add_argument("--reps", type=int, default=1000)
    p.set_defaults(func=cmd_mixing)

    p = sub.add_parser("experiment", help="run an experiment config")
    _add_model_flags(p)
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--preset", help="canned experiment from config/experiments.yaml")
    p.add_argument("--reps", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--resume", action="store_true", help="keep replicates already on disk")
    p.add_argument("--report", action="store_true", help="also write a PDF report")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    logging.basicConfig(
        level=log_level(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ChemdistError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
