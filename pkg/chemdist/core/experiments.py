"""
Experiments - orchestration of the canned experiment kinds

Every kind streams per-replicate rows to <output>/replicates.csv, then aggregates that file
into <output>/summary.csv and, where an exponent applies, <output>/fit.csv. Aggregating
from disk makes a resumed run produce the same summary as an uninterrupted one.
"""
import logging
import math
import os
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from chemdist.core.config import ExperimentConfig, ModelSpec
from chemdist.core.errors import FitError, UsageError
from chemdist.core.graph_core import (
    DistanceEventSpec,
    DEventResult,
    check_D_event,
    sample_distance_ratios,
    summarize_ratios,
)
from chemdist.core.kernels import zeta_negative_region
from chemdist.core.long_edges import bracket_integral, sample_long_edge
from chemdist.core.mixing import as_displacement, covariance_estimate, get_event, mixing_window, sample_indicators
from chemdist.core.models import expected_degree, model_exponents, realize, resolve_pad
from chemdist.core.point_process import Window
from chemdist.core.renorm import ScaleLadder, psi_window, sample_psi
from chemdist.core.runner import CsvSink, format_value, map_replicates, read_csv_rows, replicate_seed, write_table
from chemdist.core.seeding import mix_seed
from chemdist.core.stats import ExponentFit, ProportionEstimate, fit_exponent, proportion, unreliable_fit

logger = logging.getLogger(__name__)

FIT_FIELDS = ["quantity", "slope", "stderr", "intercept", "r2", "points", "excluded", "prediction", "reliable"]


@dataclass
class ExperimentResult:
    """Paths of the CSVs written by one experiment plus their parsed contents."""

    config: ExperimentConfig
    directory: str
    summary_csv: str
    replicate_csv: Optional[str] = None
    fit_csv: Optional[str] = None
    summary: List[Dict[str, Any]] = field(default_factory=list)
    fits: List[Dict[str, Any]] = field(default_factory=list)


def _fit_row(quantity: str, points: Sequence[Tuple[float, float]], prediction: float) -> Dict[str, Any]:
    try:
        fit = fit_exponent(points)
    except FitError:
        usable = [p for p in points if p[1] > 0]
        fit = unreliable_fit(usable, [p for p in points if not p[1] > 0])
    row = {"quantity": quantity, **fit.as_dict(), "prediction": float(prediction)}
    return row


def _stream(
    sink: CsvSink,
    task: Callable[[int], Any],
    replicates: int,
    key: Callable[[int], tuple],
    many: bool = False,
) -> None:
    """Run the replicates not yet on disk and append their rows in index order."""
    pending = [i for i in range(replicates) if key(i) not in sink.completed]
    if len(pending) < replicates:
        logger.info("Skipping %d replicates already on disk", replicates - len(pending))
    for result in map_replicates(task, pending):
        for row in (result if many else [result]):
            sink.write(row)


def _key(*values: Any) -> tuple:
    return tuple(format_value(v) for v in values)


def _proportion_columns(est: ProportionEstimate) -> Dict[str, Any]:
    return {
        "replicates": est.replicates,
        "estimate": est.estimate,
        "ci_lo": est.ci_lo,
        "ci_hi": est.ci_hi,
        "cp_upper": est.upper_bound,
    }


# longedge-scaling

def _longedge_row(spec: ModelSpec, m: float, n: float, seed: int, index: int) -> Dict[str, Any]:
    check = sample_long_edge(spec, m, n, seed, index)
    return {"m": m, "n": n, "replicate": index, "found": check.found, "longest": check.longest}


def _run_longedge(config: ExperimentConfig, out: str, resume: bool) -> ExperimentResult:
    spec = config.model
    path = os.path.join(out, "replicates.csv")
    scales = [(k, m, config.n_factor * m) for k, m in enumerate(config.scales)]
    with CsvSink(path, ["m", "n", "replicate", "found", "longest"], resume, key_fields=("m", "replicate")) as sink:
        for k, m, n in scales:
            logger.info("L(m, n): m=%g n=%g", m, n)
            task = partial(_longedge_row, spec, m, n, mix_seed(config.seed, k))
            _stream(sink, task, config.replicates, lambda i, m=m: _key(m, i))

    rows = read_csv_rows(path)
    summary = []
    for k, m, n in scales:
        found = [int(r["found"]) for r in rows if float(r["m"]) == m and int(r["replicate"]) < config.replicates]
        est = proportion(sum(found), len(found))
        summary.append({"m": m, "n": n, "successes": est.successes, **_proportion_columns(est), "seed": config.seed})
    fields = ["m", "n", "replicates", "successes", "estimate", "ci_lo", "ci_hi", "seed", "cp_upper"]
    exps = model_exponents(spec)
    fits = [_fit_row("P_L", [(r["m"], r["estimate"]) for r in summary], exps.d_zeta)]
    return _finish(config, out, path, fields, summary, fits)


# psi-curve

def _psi_row(spec: ModelSpec, ladder: ScaleLadder, stage: int, window: Window, seed: int, index: int) -> Dict[str, Any]:
    bad = sample_psi(spec, ladder, stage, window, seed, index)
    return {"K": ladder.K, "stage": stage, "replicate": index, "bad": bad}


def _run_psi(config: ExperimentConfig, out: str, resume: bool) -> ExperimentResult:
    spec = config.model
    ladder = ScaleLadder(config.K, max(config.stages))
    path = os.path.join(out, "replicates.csv")
    with CsvSink(path, ["K", "stage", "replicate", "bad"], resume, key_fields=("stage", "replicate")) as sink:
        for stage in config.stages:
            window = psi_window(spec, ladder, stage)
            logger.info("psi_K(%d): K_n=%d, window %g", stage, ladder.size(stage), window.side)
            task = partial(_psi_row, spec, ladder, stage, window, mix_seed(config.seed, stage))
            _stream(sink, task, config.replicates, lambda i, s=stage: _key(s, i))

    rows = read_csv_rows(path)
    summary = []
    for stage in config.stages:
        bad = [int(r["bad"]) for r in rows if int(r["stage"]) == stage and int(r["replicate"]) < config.replicates]
        est = proportion(sum(bad), len(bad))
        summary.append({
            "K": config.K, "stage": stage, "replicates": est.replicates, "bad_count": est.successes,
            "estimate": est.estimate, "ci_lo": est.ci_lo, "ci_hi": est.ci_hi,
        })
    fields = ["K", "stage", "replicates", "bad_count", "estimate", "ci_lo", "ci_hi"]
    return _finish(config, out, path, fields, summary, [])


# distance-profile

def _profile_rows(spec: ModelSpec, window: Window, radii: List[float], samples: int, seed: int, index: int):
    rep_seed = replicate_seed(seed, index)
    graph = realize(spec, window, rep_seed)
    ratios = sample_distance_ratios(graph, radii, samples, rep_seed)
    return [
        {"radius": r, "replicate": index, "pair": p, "ratio": value}
        for r, values in zip(radii, ratios)
        for p, value in enumerate(values)
    ]


def _run_profile(config: ExperimentConfig, out: str, resume: bool) -> ExperimentResult:
    spec = config.model
    radii = list(config.scales)
    side = spec.window
    if 1.1 * max(radii) > side * math.sqrt(spec.dim):
        raise UsageError(f"largest radius {max(radii):g} does not fit window {side:g}")
    window = Window(dim=spec.dim, side=side, pad=resolve_pad(spec, side))
    path = os.path.join(out, "replicates.csv")
    with CsvSink(path, ["radius", "replicate", "pair", "ratio"], resume) as sink:
        task = partial(_profile_rows, spec, window, radii, config.samples, config.seed)
        _stream(sink, task, config.replicates, lambda i: _key(i), many=True)

    rows = read_csv_rows(path)
    summary = []
    for r in radii:
        ratios = [float(row["ratio"]) for row in rows if float(row["radius"]) == r and int(row["replicate"]) < config.replicates]
        profile = summarize_ratios(r, ratios)
        summary.append({
            "radius": r, "count": profile.count, "median_ratio": profile.median_ratio,
            "q25": profile.q25, "q75": profile.q75,
        })
    fields = ["radius", "count", "median_ratio", "q25", "q75"]
    exps = model_exponents(spec)
    # linear distances give a flat profile when zeta < 0
    prediction = 0.0 if exps.zeta < 0 else math.nan
    fits = [_fit_row("median_ratio", [(r["radius"], r["median_ratio"]) for r in summary], prediction)]
    return _finish(config, out, path, fields, summary, fits)


# D-event-decay

def sample_neg_D(spec: ModelSpec, event: DistanceEventSpec, side: float, seed: int, index: int) -> DEventResult:
    """One replicate of the event D for a window of side `side` with full boundary pad."""
    window = Window(dim=spec.dim, side=side, pad=resolve_pad(spec, side))
    graph = realize(spec, window, replicate_seed(seed, index))
    return check_D_event(graph, event)


def _d_event_row(spec: ModelSpec, event: DistanceEventSpec, side: float, seed: int, index: int) -> Dict[str, Any]:
    result = sample_neg_D(spec, event, side, seed, index)
    witness = result.witness
    return {
        "m": event.m,
        "replicate": index,
        "holds": result.holds,
        "witness_distance": witness.distance if witness else None,
        "witness_euclidean": witness.euclidean if witness else None,
    }


@dataclass
class NegDTable:
    rows: List[Dict[str, Any]]
    fit: Optional[ExponentFit]
    prediction: float


def estimate_neg_D_prob(
    spec: ModelSpec,
    events: Sequence[DistanceEventSpec],
    replicates: int,
    seed: int,
    window_factor: float = 4.0,
) -> NegDTable:
    """
    Monte Carlo estimate of P(not D^eta_L(m)) per event, with the log-log fit across m.

    Each event is simulated on a window of side window_factor * m (at least 4 m).
    """
    if window_factor < 4.0:
        raise UsageError(f"window_factor must be >= 4, got {window_factor}")
    rows = []
    for k, event in enumerate(events):
        task = partial(sample_neg_D, spec, event, window_factor * event.m, mix_seed(seed, k))
        failures = sum(not r.holds for r in map_replicates(task, range(replicates)))
        est = proportion(failures, replicates)
        rows.append({"m": event.m, "L": event.L, "eta": event.eta, "failures": failures, **_proportion_columns(est), "seed": seed})
    prediction = model_exponents(spec).rate
    try:
        fit = fit_exponent([(r["m"], r["estimate"]) for r in rows])
    except FitError:
        fit = None
    return NegDTable(rows, fit, prediction)


def _run_d_event(config: ExperimentConfig, out: str, resume: bool) -> ExperimentResult:
    spec = config.model
    eta = config.resolved_eta()
    events = [DistanceEventSpec(config.L_factor * m, m, eta) for m in config.scales]
    path = os.path.join(out, "replicates.csv")
    fields = ["m", "replicate", "holds", "witness_distance", "witness_euclidean"]
    with CsvSink(path, fields, resume, key_fields=("m", "replicate")) as sink:
        for k, event in enumerate(events):
            side = config.window_factor * event.m
            logger.info("D event: L=%g m=%g eta=%g window %g", event.L, event.m, eta, side)
            task = partial(_d_event_row, spec, event, side, mix_seed(config.seed, k))
            _stream(sink, task, config.replicates, lambda i, m=event.m: _key(m, i))

    rows = read_csv_rows(path)
    summary = []
    for event in events:
        holds = [int(r["holds"]) for r in rows if float(r["m"]) == event.m and int(r["replicate"]) < config.replicates]
        failures = len(holds) - sum(holds)
        est = proportion(failures, len(holds))
        summary.append({
            "m": event.m, "L": event.L, "eta": eta, "failures": failures,
            **_proportion_columns(est), "seed": config.seed,
        })
    fields = ["m", "L", "eta", "replicates", "failures", "estimate", "ci_lo", "ci_hi", "seed", "cp_upper"]
    fits = [_fit_row("P_not_D", [(r["m"], r["estimate"]) for r in summary], model_exponents(spec).rate)]
    return _finish(config, out, path, fields, summary, fits)


# mixing-decay

def _mixing_row(spec, event, m, x, window, seed, index) -> Dict[str, Any]:
    first, second = sample_indicators(spec, event, m, x, window, seed, index)
    return {"m": m, "x_norm": float(np.linalg.norm(x)), "replicate": index, "first": first, "second": second}


def _run_mixing(config: ExperimentConfig, out: str, resume: bool) -> ExperimentResult:
    spec = config.model
    event = get_event(config.event, **config.event_params)
    grid = [(k, m, j, as_displacement(x, spec.dim)) for k, m in enumerate(config.scales) for j, x in enumerate(config.displacements)]
    path = os.path.join(out, "replicates.csv")
    fields = ["m", "x_norm", "replicate", "first", "second"]
    with CsvSink(path, fields, resume, key_fields=("m", "x_norm", "replicate")) as sink:
        for k, m, j, x in grid:
            window = mixing_window(spec, m, x)
            logger.info("Mixing %s: m=%g |x|=%g", event.label, m, np.linalg.norm(x))
            task = partial(_mixing_row, spec, event, m, x, window, mix_seed(config.seed, k, j))
            norm = float(np.linalg.norm(x))
            _stream(sink, task, config.replicates, lambda i, m=m, norm=norm: _key(m, norm, i))

    rows = read_csv_rows(path)
    summary = []
    for k, m, j, x in grid:
        norm = float(np.linalg.norm(x))
        sel = [
            r for r in rows
            if float(r["m"]) == m and float(r["x_norm"]) == norm and int(r["replicate"]) < config.replicates
        ]
        a = np.array([int(r["first"]) for r in sel], dtype=float)
        b = np.array([int(r["second"]) for r in sel], dtype=float)
        cov, stderr = covariance_estimate(a, b)
        summary.append({
            "event": event.label, "m": m, "x_norm": norm, "replicates": len(sel),
            "covariance": cov, "stderr": stderr,
        })
    fields = ["event", "m", "x_norm", "replicates", "covariance", "stderr"]
    xi = model_exponents(spec).xi
    fits = []
    for norm in sorted({r["x_norm"] for r in summary}):
        cells = [r for r in summary if r["x_norm"] == norm]
        significant = [(r["m"], abs(r["covariance"])) for r in cells if abs(r["covariance"]) > 3.0 * r["stderr"]]
        row = _fit_row(f"covariance@x={norm:g}", significant, xi)
        row["excluded"] += len(cells) - len(significant)
        fits.append(row)
    return _finish(config, out, path, fields, summary, fits)


# bracket-oracle

def _run_bracket(config: ExperimentConfig, out: str, resume: bool) -> ExperimentResult:
    spec = config.model
    kernel = spec.kernel()
    summary = []
    for r in config.scales:
        value = bracket_integral(kernel, r, spec.dim)
        summary.append({"r": r, "value": value, "log_corrected": value / math.log(r)})
    exps = model_exponents(spec)
    fits = [
        _fit_row("bracket", [(s["r"], s["value"]) for s in summary], exps.d_zeta),
        _fit_row("bracket_log_corrected", [(s["r"], s["log_corrected"]) for s in summary], exps.d_zeta),
    ]
    if not zeta_negative_region(spec.delta, spec.gamma, spec.gamma_prime):
        logger.warning("zeta >= 0 for %s; the bracket slope has no decay prediction", spec.label())
    return _finish(config, out, None, ["r", "value", "log_corrected"], summary, fits)


# degree-check

def _degree_row(spec: ModelSpec, window: Window, seed: int, index: int) -> Dict[str, Any]:
    graph = realize(spec, window, replicate_seed(seed, index))
    inside = graph.cloud.inside(window.box)
    return {"replicate": index, "vertices": len(inside), "mean_degree": graph.mean_degree(window.box)}


def _run_degree(config: ExperimentConfig, out: str, resume: bool) -> ExperimentResult:
    spec = config.model
    side = spec.window
    window = Window(dim=spec.dim, side=side, pad=resolve_pad(spec, side))
    path = os.path.join(out, "replicates.csv")
    with CsvSink(path, ["replicate", "vertices", "mean_degree"], resume) as sink:
        task = partial(_degree_row, spec, window, config.seed)
        _stream(sink, task, config.replicates, lambda i: _key(i))

    rows = [r for r in read_csv_rows(path) if int(r["replicate"]) < config.replicates]
    means = np.array([float(r["mean_degree"]) for r in rows])
    vertices = sum(int(r["vertices"]) for r in rows)
    stderr = float(means.std(ddof=1) / math.sqrt(len(means))) if len(means) > 1 else math.nan
    expected = expected_degree(spec.kernel(), spec.intensity, spec.dim)
    mean = float(means.mean()) if len(means) else math.nan
    summary = [{
        "replicates": len(rows), "vertices": vertices, "mean_degree": mean, "stderr": stderr,
        "expected": expected, "z_score": (mean - expected) / stderr if stderr and stderr > 0 else math.nan,
    }]
    fields = ["replicates", "vertices", "mean_degree", "stderr", "expected", "z_score"]
    return _finish(config, out, path, fields, summary, [])


def _finish(
    config: ExperimentConfig,
    out: str,
    replicate_csv: Optional[str],
    fields: List[str],
    summary: List[Dict[str, Any]],
    fits: List[Dict[str, Any]],
) -> ExperimentResult:
    summary_csv = write_table(os.path.join(out, "summary.csv"), fields, summary)
    fit_csv = write_table(os.path.join(out, "fit.csv"), FIT_FIELDS, fits) if fits else None
    for fit in fits:
        logger.info(
            "%s: slope %.4g +- %.2g (prediction %.4g)", fit["quantity"], fit["slope"], fit["stderr"], fit["prediction"]
        )
    return ExperimentResult(config, out, summary_csv, replicate_csv, fit_csv, summary, fits)


_RUNNERS: Dict[str, Callable[[ExperimentConfig, str, bool], ExperimentResult]] = {
    "longedge-scaling": _run_longedge,
    "psi-curve": _run_psi,
    "distance-profile": _run_profile,
    "D-event-decay": _run_d_event,
    "mixing-decay": _run_mixing,
    "bracket-oracle": _run_bracket,
    "degree-check": _run_degree,
}


def run_experiment(config: ExperimentConfig, resume: bool = False) -> ExperimentResult:
    """
    Execute one experiment.

    Args:
        config: Validated experiment config
        resume: Keep rows already in the replicate CSV and run only the missing replicates

    Returns:
        ExperimentResult with the written CSV paths
    """
    out = config.output_path()
    os.makedirs(out, exist_ok=True)
    logger.info("Experiment %s (%s) on %s -> %s", config.resolved_name, config.kind, config.model.label(), out)
    return _RUNNERS[config.kind](config, out, resume)
