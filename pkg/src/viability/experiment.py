"""Reproducible runs: oracle, learning, seed sweeps, scoring and artifacts.

Output layout under the run directory::

    oracle/   q_viable.csv s_viable.csv measure.csv q_measure.csv summary.json
    learn/    trace.jsonl report.json timing.json config.yaml
              snapshot_NNNN_{opt,caut,measure,mean,variance}.csv
    sweep/    seed_NNNN/... (one learn/ layout per seed) aggregate.json

``report.json`` and ``trace.jsonl`` are byte-identical across reruns of the
same config; wall-clock times go to ``timing.json`` only.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from viability.config import ConfigError, ExperimentConfig, ModelMean
from viability.gp import GridMean, estimate_hyperparameters
from viability.grids import (IndicatorField, ProductGrid, ScalarField, measure_field,
                             read_field_csv, write_field_csv)
from viability.learner import GpConfig, learn
from viability.oracle import GroundTruth, ground_truth

logger = logging.getLogger(__name__)

ORACLE_FILES = {
    "q_viable": ("q_viable.csv", False, True),
    "s_viable": ("s_viable.csv", True, True),
    "measure": ("measure.csv", True, False),
    "q_measure": ("q_measure.csv", False, False),
}


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- oracle ------------------------------------------------------------------

def cmd_oracle(config: ExperimentConfig, out_dir=None) -> Path:
    """Brute-force ground truth written as CSV fields plus a summary."""
    out = Path(out_dir if out_dir is not None else config.output_dir) / "oracle"
    system, grid = config.make_system(), config.make_grid()
    gt = ground_truth(system, grid)
    out.mkdir(parents=True, exist_ok=True)
    write_field_csv(out / "q_viable.csv", gt.q_viable, "q_viable")
    write_field_csv(out / "s_viable.csv", gt.s_viable, "s_viable")
    write_field_csv(out / "measure.csv", gt.measure, "measure")
    write_field_csv(out / "q_measure.csv", gt.q_measure, "q_measure")
    summary = {"system": config.system_id, **gt.summary()}
    (out / "summary.json").write_text(_dump_json(summary))
    return out


@dataclass(frozen=True)
class OracleFields:
    q_viable: IndicatorField
    s_viable: IndicatorField
    measure: ScalarField
    q_measure: ScalarField


def load_oracle(directory, grid: ProductGrid) -> OracleFields:
    directory = Path(directory)
    fields = {}
    for key, (name, over_states, boolean) in ORACLE_FILES.items():
        path = directory / name
        if not path.exists():
            raise FileNotFoundError(f"missing oracle file {path}; run the 'oracle' command first")
        fields[key] = read_field_csv(path, grid, over_states=over_states, boolean=boolean)
    return OracleFields(**fields)


# -- scoring -----------------------------------------------------------------

def precision_recall(estimate: IndicatorField, truth: IndicatorField):
    """Cell-count precision and recall; precision of an empty estimate is ``None``."""
    est, tru = estimate.values, truth.values
    hit = int(np.sum(est & tru))
    precision = hit / int(est.sum()) if est.any() else None
    recall = hit / int(tru.sum()) if tru.any() else None
    return precision, recall


@dataclass(frozen=True)
class ScoreReport:
    samples: int
    failure_count: int
    failure_rate: float
    caut_precision: float | None
    caut_recall: float | None
    opt_precision: float | None
    opt_recall: float | None
    measure_error: float | None
    failures_bottom_quartile: float | None
    resets_to_s0: int

    def to_dict(self):
        return asdict(self)


def score_trace(trace, truth: OracleFields | GroundTruth, grid: ProductGrid) -> ScoreReport:
    sets = trace.final_sets
    cp, cr = precision_recall(sets.caut, truth.q_viable)
    op, orc = precision_recall(sets.opt, truth.q_viable)
    viable = truth.s_viable.values
    lam_hat = measure_field(sets.opt).values
    err = float(np.mean(np.abs(lam_hat - truth.measure.values)[viable])) if viable.any() else None
    failed_states = np.array([r["state"][0] for r in trace.records if r["failed"]])
    ax = grid.state_axes[0]
    band = ax.lower + 0.25 * (ax.upper - ax.lower)
    bottom = float(np.mean(failed_states < band)) if len(failed_states) else None
    return ScoreReport(
        samples=len(trace.records), failure_count=trace.failure_count, failure_rate=trace.failure_rate,
        caut_precision=cp, caut_recall=cr, opt_precision=op, opt_recall=orc, measure_error=err,
        failures_bottom_quartile=bottom,
        resets_to_s0=sum(1 for r in trace.records if r.get("reset_fallback")),
    )


# -- learning ----------------------------------------------------------------

@lru_cache(maxsize=8)
def _low_fidelity(key: str):
    cfg = ExperimentConfig(json.loads(key))
    settings = cfg.gp_settings()
    base = cfg.system_params()
    defaults = cfg.make_system()
    params = {}
    for name, scale in settings["estimate_from"].items():
        value = base.get(name, getattr(defaults.params, name))
        params[name] = value * scale
    low_fi = cfg.make_system(**params)
    gt = ground_truth(low_fi, cfg.make_grid())
    kernel, noise = estimate_hyperparameters(gt.q_measure, settings["smoothness"], settings["noise_fraction"])
    return kernel, noise, gt.q_measure


def gp_config(config: ExperimentConfig) -> GpConfig:
    """Kernel, noise and prior mean; estimated from a perturbed model if configured."""
    settings = config.gp_settings()
    if settings["estimate_from"] is not None:
        # only the parts that shape the low-fidelity oracle go into the cache key
        key = json.dumps({k: config.raw.get(k) for k in ("system", "grid", "gp")}, sort_keys=True)
        kernel, noise, low_fi_measure = _low_fidelity(key)
        noise = settings.get("noise_variance", noise)
    else:
        kernel, noise = settings["kernel"], settings["noise_variance"]
    prior = settings["prior_mean"]
    if isinstance(prior, ModelMean):
        prior = GridMean(low_fi_measure, prior.scale, prior.offset)
    return GpConfig(kernel, noise, prior)


def run_learning(config: ExperimentConfig):
    """Run the learner in memory; returns the trace."""
    system, grid = config.make_system(), config.make_grid()
    return learn(system, grid, gp_config(config), config.schedule(), config.s0, config.n,
                 seed=config.seed, snapshot_at=config.snapshots)


def _record_json(record) -> str:
    return json.dumps(record, sort_keys=True)


def write_snapshot(out: Path, k: int, sets):
    stem = out / f"snapshot_{k:04d}"
    write_field_csv(f"{stem}_opt.csv", sets.opt, "opt")
    write_field_csv(f"{stem}_caut.csv", sets.caut, "caut")
    write_field_csv(f"{stem}_measure.csv", sets.measure(), "measure")
    grid = sets.grid
    write_field_csv(f"{stem}_mean.csv", _Raw(grid, sets.mean), "mean")
    write_field_csv(f"{stem}_variance.csv", _Raw(grid, sets.variance), "variance")


@dataclass(frozen=True)
class _Raw:
    """Real-valued field that may be negative (posterior mean)."""

    grid: ProductGrid
    values: np.ndarray
    over_states: bool = False


def cmd_learn(config: ExperimentConfig, out_dir=None, score: bool = True, oracle_dir=None) -> dict:
    """Learn, write trace/snapshots/report; returns the report dict.

    Scoring reads the oracle files from ``oracle_dir`` (default:
    ``<output_dir>/oracle``), computing and writing them first if absent.
    """
    base = Path(out_dir if out_dir is not None else config.output_dir)
    out = base / "learn"
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "config.yaml")
    grid = config.make_grid()
    truth = None
    if score:
        odir = Path(oracle_dir) if oracle_dir is not None else base / "oracle"
        if not (odir / "q_viable.csv").exists():
            logger.info("no oracle files in %s; computing them", odir)
            cmd_oracle(config, odir.parent)
            odir = odir.parent / "oracle"
        truth = load_oracle(odir, grid)

    t0 = time.perf_counter()
    trace_path = out / "trace.jsonl"
    with open(trace_path, "w") as fh:
        def flush(i, record, sets):
            fh.write(_record_json(record) + "\n")
        system = config.make_system()
        trace = learn(system, grid, gp_config(config), config.schedule(), config.s0, config.n,
                      seed=config.seed, snapshot_at=config.snapshots, callback=flush)
    runtime = time.perf_counter() - t0
    for k, sets in sorted(trace.snapshots.items()):
        write_snapshot(out, k, sets)
    write_snapshot(out, len(trace.records), trace.final_sets)
    report = {"system": config.system_id, "seed": config.seed, "n": config.n}
    if truth is not None:
        report.update(score_trace(trace, truth, grid).to_dict())
    else:
        report.update({"samples": len(trace.records), "failure_count": trace.failure_count,
                       "failure_rate": trace.failure_rate})
    (out / "report.json").write_text(_dump_json(report))
    (out / "timing.json").write_text(_dump_json({"runtime_s": runtime}))
    return report


# -- sweeps ------------------------------------------------------------------

def _quantiles(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    q1, med, q3 = np.percentile(vals, [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3), "iqr": float(q3 - q1), "count": len(vals)}


AGGREGATED = ("failure_rate", "caut_precision", "caut_recall", "opt_precision", "opt_recall",
              "measure_error", "failures_bottom_quartile")


def aggregate(rows) -> dict:
    ok = [r for r in rows if "error" not in r]
    summary = {key: _quantiles([r.get(key) for r in ok]) for key in AGGREGATED}
    return {"seeds": [r["seed"] for r in rows], "rows": rows, "summary": summary,
            "errors": [r for r in rows if "error" in r]}


def _sweep_one(args):
    raw, seed, out, score, oracle_dir = args
    cfg = ExperimentConfig.from_dict(raw).with_overrides(seed=seed)
    try:
        return cmd_learn(cfg, out_dir=out, score=score, oracle_dir=oracle_dir)
    except (ConfigError, FileNotFoundError):
        raise
    except Exception as exc:  # one bad seed must not abort the sweep
        logger.exception("seed %d failed", seed)
        return {"seed": seed, "error": f"{type(exc).__name__}: {exc}"}


def cmd_sweep(config: ExperimentConfig, seeds, out_dir=None, score: bool = True, workers: int = 1) -> dict:
    """``cmd_learn`` for every seed, then median/IQR aggregation."""
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("seeds", "need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds", "seeds must be unique")
    base = Path(out_dir if out_dir is not None else config.output_dir)
    sweep = base / "sweep"
    sweep.mkdir(parents=True, exist_ok=True)
    oracle_dir = base / "oracle"
    if score and not (oracle_dir / "q_viable.csv").exists():
        cmd_oracle(config, base)
    jobs = [(config.raw, s, sweep / f"seed_{s:04d}", score, oracle_dir) for s in seeds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    result = aggregate(rows)
    (sweep / "aggregate.json").write_text(_dump_json(result))
    return result
