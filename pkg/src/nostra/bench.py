"""Replicated benchmark runs and EHVI convergence curves.

Command line::

    nostra bench --problem branin-currin --methods baseline,elbow \\
        --reps 20 --budget 40 --noise 0.05 --seed 7 --out results/
    nostra sweep --problem branin-currin --noise 0.05,0.10,0.15,0.20 --out sweep/

``--budget`` counts evaluations after the initial design. Each
(method, noise, replication) cell writes a JSON record; each (method, noise)
pair writes a CSV curve with columns ``iteration, mean_ehvi, se, lo, hi``
where ``lo``/``hi`` are the mean minus/plus two standard errors of the
unweighted EHVI of the selected candidate. All methods of one replication
share its seed, hence its initial design and noise streams.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .exceptions import NostraError
from .optimizer import ExperimentRecord, OptimizerConfig, run
from .problems import NOISE_PRESETS, PROBLEM_NAMES, get_problem

log = logging.getLogger(__name__)

__all__ = [
    "METHODS",
    "CSV_COLUMNS",
    "BenchConfig",
    "CurveSummary",
    "aggregate",
    "cell_seed",
    "run_cell",
    "run_bench",
    "noise_sweep",
    "noise_label",
    "main",
]

METHODS = {
    "baseline": "none",
    "fixed1": 1,
    "fixed4": 4,
    "fixed10": 10,
    "elbow": "elbow",
}

CSV_COLUMNS = ("iteration", "mean_ehvi", "se", "lo", "hi")


@dataclass(frozen=True)
class BenchConfig:
    problem: str = "branin-currin"
    methods: tuple = ("baseline", "fixed4", "fixed10", "elbow")
    replications: int = 20
    budget: int = 40
    noise: tuple = (0.05,)
    seed: int = 0
    out: str | None = None
    pool_size: int = 500
    mc_prob: int = 256
    mc_ehvi: int = 128
    fixed_pool: bool = False
    restarts: int = 8
    workers: int = 1
    classical: bool = False
    timings: bool = False

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "noise", tuple(float(v) for v in self.noise))
        if self.problem not in PROBLEM_NAMES or self.problem in ("branin", "currin"):
            raise ValueError(f"unknown bi-objective problem {self.problem!r}")
        if not self.methods:
            raise ValueError("at least one method is required")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if not self.noise or any(not 0.0 <= v < 1.0 for v in self.noise):
            raise ValueError("noise fractions must be a nonempty list in [0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(frozen=True, eq=False)
class CurveSummary:
    iteration: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    n_reps: int
    label: str = ""

    @property
    def lo(self):
        return self.mean - 2.0 * self.se

    @property
    def hi(self):
        return self.mean + 2.0 * self.se

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in zip(self.iteration, self.mean, self.se, self.lo, self.hi):
            writer.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()


def noise_label(noise: float) -> str:
    return f"Error: {noise * 100:g}%"


def _noise_tag(noise: float) -> str:
    return f"err{noise * 100:g}".replace(".", "p")


def aggregate(records, label: str = "") -> CurveSummary:
    """Per-iteration mean and standard error of the selected-candidate EHVI.

    The standard error is the sample standard deviation over replications
    divided by the square root of their number; one replication gives 0.
    """
    curves = [r.ehvi_curve if isinstance(r, ExperimentRecord) else np.asarray(r, float)
              for r in records]
    if not curves:
        raise ValueError("nothing to aggregate")
    lengths = {c.shape[0] for c in curves}
    if len(lengths) != 1:
        raise ValueError(f"records have mismatched lengths {sorted(lengths)}")
    stack = np.vstack(curves) if curves[0].shape[0] else np.empty((len(curves), 0))
    n = stack.shape[0]
    # sort each column so the result does not depend on record order
    stack = np.sort(stack, axis=0)
    mean = stack.mean(axis=0)
    if n > 1:
        se = stack.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        se = np.zeros_like(mean)
    return CurveSummary(np.arange(1, stack.shape[1] + 1), mean, se, n, label)


def cell_seed(master: int, noise_index: int, rep: int) -> int:
    """Replication seed; shared by every method so they start identically."""
    ss = np.random.SeedSequence(int(master), spawn_key=(int(noise_index), int(rep)))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _optimizer_config(cfg: BenchConfig, method: str, seed: int) -> OptimizerConfig:
    return OptimizerConfig(
        d=2,
        budget=2 * 2 + cfg.budget,
        cluster_mode=METHODS[method],
        pool_size=cfg.pool_size,
        n_prob=cfg.mc_prob,
        n_ehvi=cfg.mc_ehvi,
        restarts=cfg.restarts,
        fixed_pool=cfg.fixed_pool,
        seed=seed,
    )


def run_cell(cfg: BenchConfig, method: str, noise: float, seed: int):
    """One replication; returns ``(record, None)`` or ``(None, error_text)``."""
    problem = get_problem(cfg.problem, noise, classical=cfg.classical)
    try:
        return run(_optimizer_config(cfg, method, seed), problem), None
    except (NostraError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _run_cell_star(args):
    return run_cell(*args)


@dataclass
class BenchResult:
    config: BenchConfig
    curves: dict
    records: dict
    failures: dict

    @property
    def ok(self) -> bool:
        return not self.failures


def _cells(cfg: BenchConfig):
    for ni, noise in enumerate(cfg.noise):
        for method in cfg.methods:
            for rep in range(cfg.replications):
                yield method, ni, noise, rep, cell_seed(cfg.seed, ni, rep)


def run_bench(cfg: BenchConfig) -> BenchResult:
    """Run every (method, noise, replication) cell and aggregate the curves."""
    cells = list(_cells(cfg))
    jobs = [(cfg, m, noise, seed) for m, _, noise, _, seed in cells]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_cell_star, jobs))
    else:
        outcomes = []
        for i, job in enumerate(jobs):
            log.info("cell %d/%d: %s noise=%g", i + 1, len(jobs), job[1], job[2])
            outcomes.append(run_cell(*job))

    records, failures, grouped = {}, {}, {}
    for (method, _, noise, rep, seed), (record, error) in zip(cells, outcomes):
        key = (method, noise, rep)
        if error is not None:
            failures[key] = {"seed": seed, "error": error}
            continue
        records[key] = record
        grouped.setdefault((method, noise), []).append(record)
    curves = {
        key: aggregate(recs, label=f"{key[0]} {noise_label(key[1])}")
        for key, recs in grouped.items()
    }
    result = BenchResult(cfg, curves, records, failures)
    if cfg.out:
        write_outputs(result, Path(cfg.out))
    return result


def _record_payload(cfg, method, noise, rep, seed, record=None, error=None):
    payload = {
        "problem": cfg.problem,
        "method": method,
        "noise": noise,
        "label": noise_label(noise),
        "replication": rep,
        "seed": seed,
        "master_seed": cfg.seed,
        "status": "ok" if error is None else "failed",
    }
    if error is not None:
        payload["error"] = error
    else:
        payload["record"] = record.to_dict(include_timing=cfg.timings)
    return payload


def curve_path(out: Path, problem: str, method: str, noise: float) -> Path:
    return out / f"curve_{problem}_{method}_{_noise_tag(noise)}.csv"


def write_outputs(result: BenchResult, out: Path) -> None:
    cfg = result.config
    out.mkdir(parents=True, exist_ok=True)
    echo = asdict(cfg)
    echo["budget_semantics"] = "evaluations after the initial design"
    (out / "config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    for method, ni, noise, rep, seed in _cells(cfg):
        key = (method, noise, rep)
        if key in result.records:
            payload = _record_payload(cfg, method, noise, rep, seed, result.records[key])
        else:
            payload = _record_payload(cfg, method, noise, rep, seed,
                                      error=result.failures[key]["error"])
        name = f"record_{cfg.problem}_{method}_{_noise_tag(noise)}_rep{rep:03d}.json"
        (out / name).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n",
                                encoding="utf-8")
    for (method, noise), curve in sorted(result.curves.items()):
        curve_path(out, cfg.problem, method, noise).write_text(curve.to_csv(), encoding="utf-8")


def noise_sweep(cfg: BenchConfig) -> dict:
    """Elbow-mode runs at each noise fraction.

    Returns ``(curves, result)`` where ``curves`` maps labels such as
    ``"Error: 5%"`` to :class:`CurveSummary` and ``result`` is the underlying
    :class:`BenchResult`.
    """
    cfg = replace(cfg, methods=("elbow",))
    result = run_bench(cfg)
    curves = {}
    for noise in cfg.noise:
        curve = result.curves.get(("elbow", noise))
        if curve is not None:
            curves[noise_label(noise)] = curve
    if cfg.out:
        index = {
            noise_label(noise): curve_path(Path(cfg.out), cfg.problem, "elbow", noise).name
            for noise in cfg.noise if ("elbow", noise) in result.curves
        }
        (Path(cfg.out) / "sweep_index.json").write_text(
            json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return curves, result


def _comma_list(text, cast=str):
    return tuple(cast(v.strip()) for v in str(text).split(",") if v.strip())


def _parser():
    parser = argparse.ArgumentParser(prog="nostra", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("bench", "compare methods over replications"),
                            ("sweep", "elbow-mode runs across noise levels")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--problem", default="branin-currin")
        p.add_argument("--methods", default="baseline,fixed4,fixed10,elbow")
        p.add_argument("--reps", type=int, default=20)
        p.add_argument("--budget", type=int, default=40,
                       help="evaluations after the initial design")
        p.add_argument("--noise", default=("0.05" if name == "bench"
                                           else ",".join(str(v) for v in NOISE_PRESETS)))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="results")
        p.add_argument("--config", help="JSON file whose keys override the flags")
        p.add_argument("--pool-size", type=int, default=500)
        p.add_argument("--mc-prob", type=int, default=256)
        p.add_argument("--mc-ehvi", type=int, default=128)
        p.add_argument("--fixed-pool", action="store_true")
        p.add_argument("--restarts", type=int, default=8)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--classical", action="store_true",
                       help="classical Bohachevsky variant")
        p.add_argument("--timings", action="store_true",
                       help="include wall-clock times in records (not reproducible)")
    return parser


_FLAG_TO_FIELD = {"reps": "replications", "pool_size": "pool_size", "mc_prob": "mc_prob",
                  "mc_ehvi": "mc_ehvi", "fixed_pool": "fixed_pool"}


def config_from_args(args) -> BenchConfig:
    values = {
        "problem": args.problem,
        "methods": _comma_list(args.methods),
        "replications": args.reps,
        "budget": args.budget,
        "noise": _comma_list(args.noise, float),
        "seed": args.seed,
        "out": args.out,
        "pool_size": args.pool_size,
        "mc_prob": args.mc_prob,
        "mc_ehvi": args.mc_ehvi,
        "fixed_pool": args.fixed_pool,
        "restarts": args.restarts,
        "workers": args.workers,
        "classical": args.classical,
        "timings": args.timings,
    }
    if args.config:
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(overrides, dict):
            raise ValueError("config file must hold a JSON object")
        known = {f.name for f in fields(BenchConfig)}
        for key, value in overrides.items():
            name = key.replace("-", "_")
            name = _FLAG_TO_FIELD.get(name, name)
            if name not in known:
                raise ValueError(f"unknown config key {key!r}")
            if name in ("methods", "noise") and isinstance(value, str):
                value = _comma_list(value, float if name == "noise" else str)
            values[name] = value
    if args.command == "sweep":
        values["methods"] = ("elbow",)
    return BenchConfig(**values)


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        cfg = config_from_args(args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"nostra: bad configuration: {exc}", file=sys.stderr)
        return 2
    if args.command == "sweep":
        _, result = noise_sweep(cfg)
    else:
        result = run_bench(cfg)
    for key, failure in sorted(result.failures.items()):
        print(f"nostra: cell {key} failed: {failure['error']}", file=sys.stderr)
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
