"""Command-line interface: ``gnpn <subcommand> ...``.

Every subcommand writes JSON (and, where tabular, a sibling CSV). Matrices
use ``{"dim": d, "rows": [[...], ...]}``. Errors from the library exit with
status 2 and a one-line message on stderr.
"""
import argparse
import csv
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from .errors import GnpnError
from .exactcov import exact_sigma_pi, predict
from .experiments import MODES, ExperimentConfig, run_experiment, sample_gaussian, score
from .graphgen import (
    ErConfig,
    GraphStructure,
    GwConfig,
    PrecisionModel,
    circle_precision,
    gen_erdos_renyi,
    gen_galton_watson,
)
from .learner import LearnOptions, learn
from .matcore import invert_spd, matrix_to_json, rng_stream
from .transforms import apply_transforms, resolve_transforms

PROFILES = {
    "desk": {"n_trials": 200},
    "full": {"n_trials": 1000},
}
# the sample-size sweep uses 500 trials per grid point at full scale
SWEEP_PROFILES = {
    "desk": {"n_trials": 50},
    "full": {"n_trials": 500},
}


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _dump_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _sibling(path, suffix):
    stem = path[:-5] if path.endswith(".json") else path
    return stem + suffix


def read_csv_matrix(path):
    """Read a header-row CSV of floats; return ``(names, array)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def write_csv_matrix(path, names, data):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in np.asarray(data):
            writer.writerow([repr(float(v)) for v in row])


def _parse_transform(text):
    """A builtin name, an inline JSON object, or a path to a JSON file."""
    if text.lstrip().startswith("{"):
        return json.loads(text)
    if os.path.isfile(text):
        return _load_json(text)
    return text


def _load_model(path):
    return PrecisionModel.from_json(_load_json(path))


def _load_graph(path):
    obj = _load_json(path)
    if "graph" in obj:
        obj = obj["graph"]
    if "edges" in obj:
        return GraphStructure.from_json(obj)
    return PrecisionModel.from_json(obj).structure()


def cmd_gen_graph(args):
    rng = rng_stream(args.seed)
    if args.kind == "circle":
        model = circle_precision(args.dim, args.alpha)
    elif args.kind == "galton_watson":
        cfg = GwConfig(args.weight_scale, args.scale_is_variance, enforce_b_norm=not args.no_b_norm)
        model = gen_galton_watson(args.dim, args.gw_lambda, rng, cfg)
    else:
        cfg = ErConfig(weight_scale=args.weight_scale, scale_is_variance=args.scale_is_variance,
                       enforce_b_norm=not args.no_b_norm)
        model = gen_erdos_renyi(args.dim, rng, cfg)
    _dump_json(model.to_json(), args.out)


def cmd_sample(args):
    model = _load_model(args.model)
    x = sample_gaussian(model, args.n, rng_stream(args.seed))
    write_csv_matrix(args.out, [f"x{j}" for j in range(model.dim)], x)


def cmd_transform(args):
    names, x = read_csv_matrix(args.input)
    sigmas = None
    if args.model:
        sigmas = np.sqrt(np.diag(invert_spd(_load_model(args.model).gamma_rho)))
    specs = resolve_transforms(_parse_transform(args.transform), x.shape[1], rng_stream(args.seed), sigmas)
    write_csv_matrix(args.out, names, apply_transforms(x, specs))


def cmd_exact_cov(args):
    model = _load_model(args.model)
    sigmas = np.sqrt(np.diag(invert_spd(model.gamma_rho)))
    specs = resolve_transforms(_parse_transform(args.transform), model.dim, rng_stream(args.seed), sigmas)
    sigma_pi, paths = exact_sigma_pi(model, specs, full_output=True)
    out = {"transforms": [s.to_json() for s in specs], "sigma_pi": matrix_to_json(sigma_pi),
           "paths": paths.tolist()}
    if all(s.has_derivatives for s in specs):
        pred = predict(model, specs)
        out.update(kappa=pred.kappa.tolist(), lambda_vec=pred.lambda_vec.tolist(),
                   sigma_pi_first_order=matrix_to_json(pred.sigma_pi_first_order),
                   gamma_pi_first_order=matrix_to_json(pred.gamma_pi_first_order))
    _dump_json(out, args.out)


def cmd_learn(args):
    _, z = read_csv_matrix(args.input)
    opts = LearnOptions(strict=args.strict, threshold=args.threshold, sensitivity=args.sensitivity,
                        online=not args.offline, precision_from=args.precision_from)
    result = learn(z, opts)
    _dump_json(result.to_json(), args.out)
    tri_path = args.triangle_out or (_sibling(args.out, "_gamma_triangle.csv") if args.out not in (None, "-") else None)
    if tri_path:
        with open(tri_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rank", "i", "j", "magnitude"])
            for k, i, j, v in result.gamma_triangle.to_csv_rows():
                writer.writerow([k, i, j, repr(v)])


def experiment_config(args):
    """Merge profile defaults, the JSON config file and explicit flags, in that order."""
    obj = {}
    if args.config:
        obj.update(_load_json(args.config))
    mode = args.mode or obj.get("mode", "erdos_renyi")
    profile = (SWEEP_PROFILES if mode == "sample_efficiency" else PROFILES)[args.profile]
    merged = dict(profile)
    merged.update(obj)
    merged["mode"] = mode
    for key in ("seed", "n_trials", "n_samples", "dim", "workers"):
        value = getattr(args, key)
        if value is not None:
            merged[key] = value
    if args.transform is not None:
        merged["transform"] = _parse_transform(args.transform)
    if args.out is not None:
        merged["output"] = args.out
    return ExperimentConfig.from_json(merged)


def cmd_experiment(args):
    cfg = experiment_config(args)
    report = run_experiment(cfg)
    if not cfg.output:
        sys.stdout.write(report.dumps() + "\n")


def cmd_score(args):
    metrics = score(_load_graph(args.truth), _load_graph(args.learned))
    _dump_json(asdict(metrics), args.out)


def build_parser():
    p = argparse.ArgumentParser(prog="gnpn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-graph", help="generate a sparse unit-diagonal precision matrix")
    g.add_argument("--kind", choices=("erdos_renyi", "galton_watson", "circle"), default="erdos_renyi")
    g.add_argument("--dim", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--alpha", type=float, default=1 / 22, help="edge weight of the circle graph")
    g.add_argument("--gw-lambda", type=float, default=2.0)
    g.add_argument("--weight-scale", type=float, default=0.3)
    g.add_argument("--scale-is-variance", action="store_true", help="read --weight-scale as a variance")
    g.add_argument("--no-b-norm", action="store_true", help="do not require ||B|| < 1")
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_gen_graph)

    s = sub.add_parser("sample", help="draw Gaussian samples from a precision model")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    t = sub.add_parser("transform", help="apply per-column marginal transforms to a sample CSV")
    t.add_argument("--input", required=True)
    t.add_argument("--transform", required=True, help="builtin name, inline JSON, or JSON file")
    t.add_argument("--model", help="model JSON supplying marginal std devs to power/cdf")
    t.add_argument("--seed", type=int, default=0, help="seed for mixed-pool draws")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_transform)

    e = sub.add_parser("exact-cov", help="exact transformed covariance and first-order predictions")
    e.add_argument("--model", required=True)
    e.add_argument("--transform", required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default="-")
    e.set_defaults(func=cmd_exact_cov)

    lp = sub.add_parser("learn", help="recover the conditional-independence graph from samples")
    lp.add_argument("--input", required=True, help="CSV with a header row, one observation per line")
    mode = lp.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=True)
    mode.add_argument("--permissive", dest="strict", action="store_false")
    lp.add_argument("--threshold", type=float, help="fixed threshold, bypassing knee detection")
    lp.add_argument("--sensitivity", type=float, default=1.0)
    lp.add_argument("--offline", action="store_true", help="return the first knee instead of the last")
    lp.add_argument("--precision-from", choices=("correlation", "covariance"), default="correlation")
    lp.add_argument("--out", default="-")
    lp.add_argument("--triangle-out", help="CSV path for the sorted magnitudes (default: <out>_gamma_triangle.csv)")
    lp.set_defaults(func=cmd_learn)

    x = sub.add_parser("experiment", help="run a synthetic experiment and write JSON and CSV reports")
    x.add_argument("--config", help="JSON file with ExperimentConfig fields")
    x.add_argument("--mode", choices=MODES)
    x.add_argument("--profile", choices=tuple(PROFILES), default="desk")
    x.add_argument("--seed", type=int)
    x.add_argument("--n-trials", dest="n_trials", type=int)
    x.add_argument("--n-samples", dest="n_samples", type=int)
    x.add_argument("--dim", type=int)
    x.add_argument("--transform")
    x.add_argument("--workers", type=int)
    x.add_argument("--out")
    x.set_defaults(func=cmd_experiment)

    c = sub.add_parser("score", help="compare a learned graph against the truth")
    c.add_argument("--truth", required=True, help="model or graph JSON")
    c.add_argument("--learned", required=True, help="learn result or graph JSON")
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_score)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (GnpnError, OSError, ValueError, KeyError) as exc:
        print(f"gnpn {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0
