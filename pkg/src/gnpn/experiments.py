"""Scoring and the synthetic experiment harness.

Every trial draws from its own random stream, keyed by the trial index
(and the sweep value for sweeps), so a report is a pure function of
``(seed, config)`` whatever the execution order or worker count.
"""
import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ApplicabilityFailed,
    DimensionMismatch,
    NoKnee,
    RetriesExhausted,
    SingularCorrelation,
)
from .graphgen import ErConfig, GwConfig, gen_erdos_renyi, gen_galton_watson
from .learner import LearnOptions, applicability_check, empirical_correlation, learn
from .matcore import invert_spd, rng_stream
from .transforms import apply_transforms, resolve_transforms

MODES = ("erdos_renyi", "galton_watson", "applicability_study", "applicability_proportion", "sample_efficiency")
METRICS = ("accuracy", "recall", "precision")
DEFAULT_SAMPLE_SIZES = (100, 500) + tuple(range(1000, 10001, 500))


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    recall: float
    precision: float
    recall_defined: bool = True
    precision_defined: bool = True


def score(truth, learned):
    """Confusion counts over unordered off-diagonal pairs.

    Recall with no true edges and precision with no learned edges are
    reported as 1 and flagged as undefined.
    """
    if truth.dim != learned.dim:
        raise DimensionMismatch(f"graphs of dimension {truth.dim} and {learned.dim}")
    d = truth.dim
    total = d * (d - 1) // 2
    tp = len(truth.edges & learned.edges)
    fp = len(learned.edges - truth.edges)
    fn = len(truth.edges - learned.edges)
    tn = total - tp - fp - fn
    recall_defined = tp + fn > 0
    precision_defined = tp + fp > 0
    return MetricsReport(
        tp, fp, tn, fn,
        accuracy=(tp + tn) / total if total else 1.0,
        recall=tp / (tp + fn) if recall_defined else 1.0,
        precision=tp / (tp + fp) if precision_defined else 1.0,
        recall_defined=recall_defined,
        precision_defined=precision_defined,
    )


def sample_gaussian(model, n, rng):
    """``n`` draws from ``N(0, Gamma_rho^-1)`` as an ``(n, d)`` array."""
    if n < 1:
        raise ValueError("n must be at least 1")
    gamma = np.asarray(getattr(model, "gamma_rho", model), dtype=float)
    sigma = invert_spd(gamma)
    chol = np.linalg.cholesky(sigma)
    z = rng.standard_normal((n, gamma.shape[0]))
    return np.einsum("nk,ik->ni", z, chol, optimize=False)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "erdos_renyi"
    dim: int = 10
    n_samples: int = 50_000
    n_trials: int = 200
    transform: object = "cube"
    seed: int = 0
    # None means the mode default: on, except for the applicability modes
    enforce_b_norm: Optional[bool] = None
    gw_lambda: float = 2.0
    dims: Tuple[int, ...] = (5, 10, 15, 20)
    sample_sizes: Tuple[int, ...] = DEFAULT_SAMPLE_SIZES
    max_regenerations: int = 1000
    weight_scale: float = 0.3
    scale_is_variance: bool = False
    workers: int = 1
    output: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if self.mode not in ("applicability_proportion", "sample_efficiency") and self.n_samples < self.dim + 1:
            raise ValueError("n_samples must exceed dim")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))

    @property
    def b_norm_enforced(self):
        if self.enforce_b_norm is not None:
            return self.enforce_b_norm
        return self.mode not in ("applicability_study", "applicability_proportion")

    def to_json(self):
        out = asdict(self)
        out["dims"] = list(self.dims)
        out["sample_sizes"] = list(self.sample_sizes)
        return out

    @classmethod
    def from_json(cls, obj):
        obj = dict(obj)
        for key in ("dims", "sample_sizes"):
            if key in obj:
                obj[key] = tuple(obj[key])
        return cls(**obj)


@dataclass
class ExperimentReport:
    config: dict
    rows: list
    aggregates: dict = field(default_factory=dict)

    def to_json(self):
        return {"config": self.config, "aggregates": self.aggregates, "rows": self.rows}

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def to_csv(self):
        if not self.rows:
            return ""
        keys = list(self.rows[0])
        for row in self.rows[1:]:
            keys += [k for k in row if k not in keys]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows)
        return buf.getvalue()

    def write(self, path):
        """Write ``<path>`` as JSON and a sibling ``.csv`` with one row per trial."""
        with open(path, "w") as fh:
            fh.write(self.dumps())
        stem = path[:-5] if path.endswith(".json") else path
        with open(stem + ".csv", "w", newline="") as fh:
            fh.write(self.to_csv())


def _generate(cfg, dim, rng):
    enforce = cfg.b_norm_enforced
    if cfg.mode == "galton_watson":
        gw = GwConfig(cfg.weight_scale, cfg.scale_is_variance, enforce_b_norm=enforce)
        return gen_galton_watson(dim, cfg.gw_lambda, rng, gw)
    er = ErConfig(weight_scale=cfg.weight_scale, scale_is_variance=cfg.scale_is_variance, enforce_b_norm=enforce)
    return gen_erdos_renyi(dim, rng, er)


def _transformed_sample(cfg, model, n, rng):
    x = sample_gaussian(model, n, rng)
    sigmas = np.sqrt(np.diag(invert_spd(model.gamma_rho)))
    specs = resolve_transforms(cfg.transform, model.dim, rng, sigmas)
    return apply_transforms(x, specs), specs


def _blank_row(trial):
    return {"trial": trial, "status": "ok", "regenerations": 0, "b_norm": math.nan, "applicability_norm": math.nan,
            "threshold": math.nan, "n_edges_true": 0, "n_edges_learned": 0, "tp": 0, "fp": 0, "tn": 0, "fn": 0,
            "accuracy": math.nan, "recall": math.nan, "precision": math.nan,
            "recall_defined": True, "precision_defined": True}


def _learning_trial(cfg, trial, n_samples, stream):
    """Generate, sample, transform and learn until the applicability check passes."""
    rng = rng_stream(cfg.seed, stream)
    row = _blank_row(trial)
    for regen in range(cfg.max_regenerations):
        row["regenerations"] = regen
        try:
            model = _generate(cfg, cfg.dim, rng)
        except RetriesExhausted:
            row["status"] = "retries_exhausted"
            return row
        z, specs = _transformed_sample(cfg, model, n_samples, rng)
        row["b_norm"] = model.b_norm
        row["transforms"] = "|".join(s.name for s in specs)
        try:
            result = learn(z, LearnOptions(strict=True))
        except ApplicabilityFailed as exc:
            row["applicability_norm"] = exc.norm
            continue
        except NoKnee:
            row["status"] = "no_knee"
            row["applicability_norm"] = applicability_check(empirical_correlation(z))[1]
            return row
        except SingularCorrelation:
            row["status"] = "singular"
            return row
        metrics = score(model.structure(), result.graph)
        row.update(asdict(metrics))
        row.update(applicability_norm=result.applicability_norm, threshold=result.knee.threshold,
                   n_edges_true=len(model.edges), n_edges_learned=len(result.graph.edges))
        return row
    row["status"] = "regenerations_exhausted"
    return row


def _proportion_trial(cfg, trial, dim, stream):
    rng = rng_stream(cfg.seed, stream)
    row = {"trial": trial, "dim": dim, "status": "ok", "b_norm": math.nan, "applicability_norm": math.nan,
           "b_norm_ok": False, "r_check_ok": False, "applicable": False}
    try:
        model = _generate(cfg, dim, rng)
    except RetriesExhausted:
        row["status"] = "retries_exhausted"
        return row
    z, _ = _transformed_sample(cfg, model, cfg.n_samples, rng)
    passed, norm = applicability_check(empirical_correlation(z))
    row.update(b_norm=model.b_norm, applicability_norm=norm, b_norm_ok=bool(model.b_norm < 1.0),
               r_check_ok=bool(passed), applicable=bool(model.b_norm < 1.0 and passed))
    return row


def _task(args):
    kind, cfg, trial, extra, stream = args
    if kind == "learn":
        return _learning_trial(cfg, trial, extra, stream)
    return _proportion_trial(cfg, trial, extra, stream)


def _run_tasks(cfg, tasks):
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * cfg.workers))))
    return [_task(t) for t in tasks]


def _mean_std(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {"mean": math.nan, "std": math.nan, "n": 0}
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return {"mean": float(values.mean()), "std": std, "n": int(values.size)}


def aggregate_metrics(rows):
    """Mean and sample std (over successful trials) of each metric, plus status counts."""
    ok = [r for r in rows if r["status"] == "ok"]
    out = {m: _mean_std([r[m] for r in ok]) for m in METRICS}
    counts = {}
    for r in rows:
        counts[r["status"]] = counts.get(r["status"], 0) + 1
    out["status_counts"] = dict(sorted(counts.items()))
    out["n_trials"] = len(rows)
    return out


def run_table_experiment(cfg):
    """Repeated generate/sample/transform/learn/score trials (Erdős–Rényi or Galton–Watson)."""
    if cfg.mode not in ("erdos_renyi", "galton_watson"):
        cfg = replace(cfg, mode="erdos_renyi")
    tasks = [("learn", cfg, t, cfg.n_samples, t) for t in range(cfg.n_trials)]
    rows = _run_tasks(cfg, tasks)
    return ExperimentReport(cfg.to_json(), rows, aggregate_metrics(rows))


def run_applicability_study(cfg):
    """As :func:`run_table_experiment` without the ``||B|| < 1`` filter.

    Reports the share of trials that pass the check on ``R`` although
    ``||B|| >= 1`` (the false-pass rate) and metrics over passing trials.
    """
    cfg = replace(cfg, mode="applicability_study")
    tasks = [("learn", cfg, t, cfg.n_samples, t) for t in range(cfg.n_trials)]
    rows = _run_tasks(cfg, tasks)
    for r in rows:
        r["false_pass"] = bool(r["status"] in ("ok", "no_knee") and r["b_norm"] >= 1.0)
    passed = [r for r in rows if r["status"] in ("ok", "no_knee")]
    agg = aggregate_metrics(rows)
    agg["false_pass_rate"] = float(np.mean([r["false_pass"] for r in passed])) if passed else math.nan
    agg["n_passed"] = len(passed)
    return ExperimentReport(cfg.to_json(), rows, agg)


def run_applicability_proportion(cfg):
    """Share of generated models with both ``||B|| < 1`` and ``||R - I|| < 1``, per dimension."""
    cfg = replace(cfg, mode="applicability_proportion")
    tasks = [("proportion", cfg, t, d, (d, t)) for d in cfg.dims for t in range(cfg.n_trials)]
    rows = _run_tasks(cfg, tasks)
    per_dim = {}
    for d in cfg.dims:
        sub = [r for r in rows if r["dim"] == d and r["status"] == "ok"]
        per_dim[str(d)] = {
            "proportion": float(np.mean([r["applicable"] for r in sub])) if sub else math.nan,
            "b_norm_ok": float(np.mean([r["b_norm_ok"] for r in sub])) if sub else math.nan,
            "r_check_ok": float(np.mean([r["r_check_ok"] for r in sub])) if sub else math.nan,
            "n": len(sub),
        }
    return ExperimentReport(cfg.to_json(), rows, {"per_dim": per_dim})


def run_sample_efficiency(cfg):
    """Metric curves over a grid of sample sizes."""
    cfg = replace(cfg, mode="sample_efficiency")
    tasks = [("learn", cfg, t, n, (n, t)) for n in cfg.sample_sizes for t in range(cfg.n_trials)]
    rows = _run_tasks(cfg, tasks)
    per_n = {}
    for (_, _, _, n, _), row in zip(tasks, rows):
        row["n_samples"] = n
    for n in cfg.sample_sizes:
        per_n[str(n)] = aggregate_metrics([r for r in rows if r["n_samples"] == n])
    return ExperimentReport(cfg.to_json(), rows, {"per_n_samples": per_n})


def run_experiment(cfg):
    runner = {
        "erdos_renyi": run_table_experiment,
        "galton_watson": run_table_experiment,
        "applicability_study": run_applicability_study,
        "applicability_proportion": run_applicability_proportion,
        "sample_efficiency": run_sample_efficiency,
    }[cfg.mode]
    report = runner(cfg)
    if cfg.output:
        report.write(cfg.output)
    return report
