"""Command-line entry point.

Subcommands: fit, infer, multiview, carve, simulate, oracle1d.
Exit codes: 0 ok, 2 argument error, 3 numeric failure, 4 rare-event guard.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__, exact1d, harness, multiview, selectors
from .errors import DegenerateError, RareEventError, SolverError
from .pivots import InferenceResult
from .randomization import RandomizationDist
from .samplers import SamplerConfig
from .selectors import AffineReconstruction, compose_views

log = logging.getLogger("selboot")

RECORD_SCHEMA = "selboot.selection"
RECORD_VERSION = 1
REPORT_SCHEMA = "selboot.report"
REPORT_VERSION = 1
STREAMS = {"fit": 0, "chain": 1, "bootstrap": 2}

EXIT_OK, EXIT_ARGS, EXIT_NUMERIC, EXIT_RARE = 0, 2, 3, 4

DEFAULT_CONFIG = {
    "randomization": {"family": "logistic", "scale": 1.0},
    "sampler": {"n_samples": 5000, "burnin": 2000, "eta": "auto", "n_chains": 50, "thin": 5,
                "min_ess": 200},
    "bootstrap": {"reps": 1000, "weights": "normal"},
}


class UsageError(ValueError):
    pass


# data ---------------------------------------------------------------------------

@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    columns: list
    response: str
    center: np.ndarray
    scale: np.ndarray
    standardized: bool
    path: str = ""
    sha256: str = ""

    @property
    def n(self):
        return self.X.shape[0]

    def raw_X(self):
        return self.X * self.scale + self.center


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def ingest_csv(path, response_column, standardize=True) -> Dataset:
    """Read a numeric CSV with a header row; scale columns by 1/sqrt(n).

    With ``standardize`` each predictor is centered and divided by its
    standard deviation first, so every column has mean 0 and squared norm 1.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    if response_column not in header:
        raise UsageError(f"response column {response_column!r} not found in {path}")
    missing = [i + 2 for i, r in enumerate(body)
               if len(r) != len(header) or any(c.strip().lower() in ("", "na", "nan") for c in r)]
    if missing:
        raise UsageError(f"missing values in rows {missing[:20]} of {path}")
    data = np.empty((len(body), len(header)))
    for j, name in enumerate(header):
        for i, r in enumerate(body):
            try:
                data[i, j] = float(r[j])
            except ValueError:
                raise UsageError(f"non-numeric value {r[j]!r} in column {name!r} (row {i + 2})") from None
    k = header.index(response_column)
    y = data[:, k]
    cols = [h for i, h in enumerate(header) if i != k]
    Xraw = np.delete(data, k, axis=1)
    n, p = Xraw.shape
    if p < 1:
        raise UsageError("need at least one predictor column")
    if standardize:
        center = Xraw.mean(0)
        sd = Xraw.std(0)
        if np.any(sd == 0):
            bad = [c for c, s in zip(cols, sd) if s == 0]
            raise UsageError(f"constant columns cannot be standardized: {bad}")
    else:
        center = np.zeros(p)
        sd = np.ones(p)
    scale = sd * np.sqrt(n)
    X = (Xraw - center) / scale
    return Dataset(X, y, cols, response_column, center, scale, standardize, str(path),
                   file_sha256(path))


# configuration and seeds ------------------------------------------------------------

def load_config(path=None):
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    if path:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise UsageError("config file must hold a mapping")
        for section, values in user.items():
            if section not in cfg:
                raise UsageError(f"unknown config section {section!r}")
            cfg[section].update(values or {})
    return cfg


def substream(seed, name):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[name],)))


def sampler_config(cfg, seed):
    return SamplerConfig.from_dict(cfg["sampler"], seed=substream(seed, "chain"))


# records ------------------------------------------------------------------------

def make_record(ds: Dataset, method, params, seed, views_result, randomization):
    views = [{"recon": v.to_dict(), "randomization": {"family": d.family, "scale": d.scale,
                                                      "dim": d.dim}}
             for v, d in zip(views_result.recon.views, views_result.recon.dists)]
    outcomes = []
    for outs in views_result.outcomes:
        for o in outs:
            outcomes.append({"method": o.method, "active": o.active_set.tolist(),
                             "signs": o.signs.tolist(), "observed_opt": o.observed_opt.tolist(),
                             "omega": o.observed_omega.tolist()})
    return {
        "schema": RECORD_SCHEMA, "version": RECORD_VERSION, "selboot": __version__,
        "method": method, "params": params, "seed": seed, "randomization": randomization,
        "data": {"path": ds.path, "sha256": ds.sha256, "response": ds.response,
                 "standardize": ds.standardized, "columns": ds.columns},
        "active": views_result.active.tolist(), "loss": views_result.loss,
        "views": views, "outcomes": outcomes, "info": _jsonable(views_result.info),
    }


def load_record(path):
    with open(path) as fh:
        rec = json.load(fh)
    if rec.get("schema") != RECORD_SCHEMA:
        raise UsageError(f"{path} is not a selection record")
    if rec.get("version") != RECORD_VERSION:
        raise UsageError(f"unsupported selection record version {rec.get('version')!r}")
    return rec


def record_views(rec):
    views = [AffineReconstruction.from_dict(v["recon"]) for v in rec["views"]]
    dists = [RandomizationDist(v["randomization"]["family"], v["randomization"]["scale"],
                               v["randomization"]["dim"]) for v in rec["views"]]
    return compose_views(views, dists)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# report -------------------------------------------------------------------------

TABLE_COLUMNS = ("coef", "pivot", "p", "ci_lo", "ci_hi", "ess")


def report(results, fmt="json") -> bytes:
    """Serialize inference results as JSON or a fixed-width table."""
    if fmt == "json":
        doc = {"schema": REPORT_SCHEMA, "version": REPORT_VERSION,
               "results": [_jsonable(r.to_dict()) for r in results]}
        return (json.dumps(doc, indent=2) + "\n").encode()
    if fmt != "table":
        raise UsageError(f"unknown report format {fmt!r}")
    lines = [f"{'coef':<12}" + "".join(f"{c:>10}" for c in TABLE_COLUMNS[1:])]
    for r in results:
        ess = r.diagnostics.get("ess")
        vals = [r.pivot, r.p_value, r.ci_lo, r.ci_hi]
        cells = "".join(f"{v:>10.4f}" for v in vals)
        cells += f"{ess:>10.1f}" if ess is not None else f"{'-':>10}"
        lines.append(f"{str(r.coef):<12}" + cells)
    return ("\n".join(lines) + "\n").encode()


def load_report(data: bytes):
    doc = json.loads(data)
    if doc.get("schema") != REPORT_SCHEMA or doc.get("version") != REPORT_VERSION:
        raise UsageError("not a selboot report")
    return [InferenceResult.from_dict(d) for d in doc["results"]]


def _name_results(results, columns):
    for r in results:
        if isinstance(r.coef, int) and 0 <= r.coef < len(columns):
            r.coef = columns[r.coef]
    return results


def _emit(args, payload: bytes, summary: bytes | None = None):
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(payload)
        if summary is not None:
            sys.stdout.buffer.write(summary)
    else:
        sys.stdout.buffer.write(summary if summary is not None and args.format == "table" else payload)


# subcommands ----------------------------------------------------------------------

def _view_spec(args, cfg):
    spec = {"procedure": args.method, "loss": args.loss, "randomization": cfg["randomization"]}
    if args.method in ("lasso", "carve"):
        spec["lam"] = "default" if args.lam is None else args.lam
        if args.eps is not None:
            spec["eps"] = args.eps
    if args.method == "screen":
        if args.c is None:
            raise UsageError("--c is required for screening")
        spec["c"] = args.c
    if args.method == "stepwise":
        spec["steps"] = args.steps
    if args.method == "carve":
        spec["rho"] = args.rho
        spec["bootstrap_reps"] = int(cfg["bootstrap"]["reps"])
    return spec


def cmd_fit(args, cfg):
    ds = ingest_csv(args.data, args.response, not args.no_standardize)
    spec = _view_spec(args, cfg)
    plan = multiview.ViewPlan([spec])
    vr = multiview.run_views(ds.X, ds.y, plan, substream(args.seed, "fit"))
    rec = make_record(ds, args.method, spec, args.seed, vr, cfg["randomization"])
    payload = (json.dumps(rec, indent=1) + "\n").encode()
    summary = (f"method={args.method} active={[ds.columns[i] for i in vr.active]} "
               f"max_reconstruction_error={max(vr.info['reconstruction_errors'], default=0):.2e}\n").encode()
    _emit(args, payload, summary)
    return EXIT_OK


def _coords(spec, active):
    if spec in (None, "all"):
        return None
    try:
        idx = [int(c) for c in spec.split(",")]
    except ValueError:
        raise UsageError("--coords takes 'all' or a comma-separated list of model positions") from None
    if any(not 0 <= i < len(active) for i in idx):
        raise UsageError("--coords positions must index the selected model")
    return idx


def _infer(args, cfg, ds, vr_recon, active, loss):
    results = multiview.infer(ds.X, ds.y, vr_recon, active, loss, coords=_coords(args.coords, active),
                              method=args.infer_method, level=args.level,
                              config=sampler_config(cfg, args.seed),
                              bootstrap_reps=int(cfg["bootstrap"]["reps"]),
                              rng=substream(args.seed, "bootstrap"),
                              target_draw_source=args.target_draws)
    return _name_results(results, ds.columns)


def cmd_infer(args, cfg):
    rec = load_record(args.record)
    d = rec["data"]
    path = args.data or d["path"]
    ds = ingest_csv(path, d["response"], d["standardize"])
    if ds.sha256 != d["sha256"]:
        raise UsageError(f"data file {path} does not match the record's sha256")
    active = np.asarray(rec["active"], dtype=int)
    if active.size == 0:
        raise UsageError("the recorded selection is empty; nothing to infer")
    results = _infer(args, cfg, ds, record_views(rec), active, rec["loss"])
    _emit(args, report(results, "json"), report(results, args.format))
    return EXIT_OK


def cmd_multiview(args, cfg):
    ds = ingest_csv(args.data, args.response, not args.no_standardize)
    with open(args.plan) as fh:
        plan_doc = yaml.safe_load(fh)
    for v in plan_doc.get("views", []):
        v.setdefault("randomization", cfg["randomization"])
    plan = multiview.ViewPlan.from_dict(plan_doc)
    vr = multiview.run_views(ds.X, ds.y, plan, substream(args.seed, "fit"))
    if vr.active.size == 0:
        raise UsageError("the chosen final model is empty")
    results = _infer(args, cfg, ds, vr.recon, vr.active, vr.loss)
    _emit(args, report(results, "json"), report(results, args.format))
    return EXIT_OK


def cmd_carve(args, cfg):
    ds = ingest_csv(args.data, args.response, not args.no_standardize)
    args.method = "carve"
    spec = _view_spec(args, cfg)
    vr = multiview.run_views(ds.X, ds.y, multiview.ViewPlan([spec]), substream(args.seed, "fit"))
    if vr.active.size == 0:
        raise UsageError("carving selected no variables")
    results = _infer(args, cfg, ds, vr.recon, vr.active, vr.loss)
    held = np.setdiff1d(np.arange(ds.n), vr.outcomes[0][0].info["subsample"])
    for pos, r in zip(_coords(args.coords, vr.active) or range(vr.active.size), results):
        lo, hi = harness.split_interval(ds.X, ds.y, vr.active, pos, held, vr.loss, args.level)
        r.diagnostics.update(split_ci_lo=float(lo), split_ci_hi=float(hi))
    _emit(args, report(results, "json"), report(results, args.format))
    return EXIT_OK


def _summary_table(name, result):
    rows = [(k, v) for k, v in result.items() if not isinstance(v, (list, dict))]
    for k, v in result.items():
        if isinstance(v, dict):
            rows += [(f"{k}.{kk}", vv) for kk, vv in v.items() if not isinstance(vv, (list, dict))]
    width = max(len(k) for k, _ in rows) if rows else 10
    lines = [f"experiment: {name}"]
    for k, v in rows:
        lines.append(f"  {k:<{width}}  {v:.4f}" if isinstance(v, float) else f"  {k:<{width}}  {v}")
    return ("\n".join(lines) + "\n").encode()


def cmd_simulate(args, cfg):
    with open(args.scenario) as fh:
        doc = yaml.safe_load(fh)
    experiment = args.experiment or doc.pop("experiment", "uniformity")
    doc.pop("experiment", None)
    scen_doc = doc.get("scenario", doc)
    if args.seed is not None and "seed" not in scen_doc:
        scen_doc["seed"] = args.seed
    scenario = harness.Scenario.from_dict(scen_doc)
    if experiment not in harness.EXPERIMENTS:
        raise UsageError(f"unknown experiment {experiment!r}")
    result = harness.EXPERIMENTS[experiment](scenario)
    payload = {"experiment": experiment, "scenario": scenario.to_dict(), "result": result}
    data = (json.dumps(_jsonable(payload), indent=1) + "\n").encode()
    summary = _summary_table(experiment, result)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    sys.stdout.buffer.write(summary)
    if result.get("rare_event"):
        return EXIT_RARE
    return EXIT_OK


def cmd_oracle1d(args, cfg):
    family = args.family or cfg["randomization"]["family"]
    scale = args.scale if args.scale is not None else cfg["randomization"]["scale"]
    g = RandomizationDist(family, scale, 1)
    y = None
    if args.data:
        ds = ingest_csv(args.data, args.column, standardize=False)
        y = ds.y
    ex = exact1d.SimpleExample(args.n if y is None else len(y), args.threshold, args.mu, g, y)
    ts = [float(t) for t in args.t.split(",")]
    exact = np.atleast_1d(exact1d.exact_plugin_cdf(ex, ts))
    rows = {"t": ts, "exact_plugin_cdf": exact.tolist()}
    if y is not None:
        rng = substream(args.seed, "bootstrap")
        rows["boot_cdf"] = np.atleast_1d(exact1d.exact_boot_cdf(ex, ts, args.B, rng)).tolist()
        rows["wild_cdf"] = np.atleast_1d(exact1d.simple_wild_cdf(ex, ts, "direct", args.B,
                                                                 rng)).tolist()
    doc = {"n": ex.n, "threshold": ex.threshold, "mu": ex.mu, "family": family, "scale": scale,
           "selection_probability": exact1d.selection_probability(ex), "table": rows}
    lines = ["t".rjust(8) + "".join(k.rjust(18) for k in rows if k != "t")]
    for i, t in enumerate(ts):
        lines.append(f"{t:8.3f}" + "".join(f"{rows[k][i]:18.10f}" for k in rows if k != "t"))
    summary = ("\n".join(lines) + "\n").encode()
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=1)
    sys.stdout.buffer.write(summary)
    return EXIT_OK


# parser ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--config", default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="selboot", parents=[common],
                                description="Randomized selective inference.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("--data", required=True)
        sp.add_argument("--response", required=True)
        sp.add_argument("--no-standardize", action="store_true")
        sp.add_argument("--loss", choices=("gaussian", "logistic"), default="gaussian")

    def infer_args(sp):
        sp.add_argument("--level", type=float, default=0.9)
        sp.add_argument("--method", dest="infer_method", choices=("plugin", "wild", "weighted"),
                        default="weighted")
        sp.add_argument("--coords", default="all")
        sp.add_argument("--format", choices=("json", "table"), default="json")
        sp.add_argument("--target-draws", choices=("gaussian", "pairs_bootstrap"),
                        default="gaussian")

    def sel_args(sp, methods=True):
        if methods:
            sp.add_argument("--method", choices=("lasso", "screen", "stepwise", "carve"),
                            default="lasso")
        sp.add_argument("--lam", type=float)
        sp.add_argument("--eps", type=float)
        sp.add_argument("--c", type=float)
        sp.add_argument("--steps", type=int, default=1)
        sp.add_argument("--rho", type=float, default=0.5)

    sp = sub.add_parser("fit", parents=[common], help="run a randomized selection")
    data_args(sp)
    sel_args(sp)
    sp.add_argument("--format", choices=("json", "table"), default="json")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("infer", parents=[common], help="selective inference from a record")
    sp.add_argument("--record", required=True)
    sp.add_argument("--data", help="override the data path stored in the record")
    infer_args(sp)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("multiview", parents=[common], help="several views, one final model")
    data_args(sp)
    sp.add_argument("--plan", required=True)
    infer_args(sp)
    sp.set_defaults(func=cmd_multiview)

    sp = sub.add_parser("carve", parents=[common], help="data carving with a split comparison")
    data_args(sp)
    sel_args(sp, methods=False)
    infer_args(sp)
    sp.set_defaults(func=cmd_carve, loss="logistic")

    sp = sub.add_parser("simulate", parents=[common], help="run a simulation scenario")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--experiment", choices=tuple(harness.EXPERIMENTS))
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("oracle1d", parents=[common], help="exact one-dimensional pivot table")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--threshold", type=float, default=0.0)
    sp.add_argument("--mu", type=float, default=0.0)
    sp.add_argument("--family", choices=("gaussian", "laplace", "logistic"))
    sp.add_argument("--scale", type=float)
    sp.add_argument("--t", default="-2,-1,0,1,2")
    sp.add_argument("--data", help="CSV with a data column for the bootstrap variants")
    sp.add_argument("--column", default="y")
    sp.add_argument("--B", type=int, default=2000)
    sp.set_defaults(func=cmd_oracle1d)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("seed", None), ("config", None), ("out", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if args.command != "simulate" and args.seed is None:
        args.seed = 0
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except RareEventError as err:
        log.error("rare event: %s", err)
        return EXIT_RARE
    except (SolverError, np.linalg.LinAlgError, FloatingPointError, DegenerateError) as err:
        log.error("numeric failure: %s", err)
        return EXIT_NUMERIC
    except (UsageError, ValueError, KeyError, FileNotFoundError, yaml.YAMLError) as err:
        log.error("%s", err)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
