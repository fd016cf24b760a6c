"""Multi-seed experiments: run the meta-learner per seed, aggregate the
fronts into Table-style distributions, averaged Pareto fronts, hyperparameter
effects and convergence curves, and export plot-ready artifacts.

All aggregation follows the replicated protocol: every seed gets its own
learn/validation/test partition and an independent random stream, so seeds
can execute in parallel without changing a single output byte.  Front CSVs
carry full-precision floats (they round-trip exactly); the distribution
tables are formatted at 5 decimals.
"""

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .datasets import load_dataset, load_schema, preprocess, split_checked
from .errors import ConfigError, DataError
from .metalearn import EAParams, GenerationTrace, run
from .metrics import COMPAS_POSITIVE_SCORES, ObjectiveVector, compas_baseline
from .svgplot import SvgPlot
from .util import round_half_up

SUMMARY_ROWS = ("min", "q1", "q2", "q3", "max")
SUMMARY_POSITIONS = (0.0, 0.25, 0.5, 0.75, 1.0)

#: default CSV file per bundled schema id
DATA_FILES = {
    "adult": "adult.csv",
    "german": "german.csv",
    "propublica": "propublica-recidivism.csv",
    "propublica-violent": "propublica-violent-recidivism.csv",
    "ricci": "ricci.csv",
}


@dataclass(frozen=True)
class FrontSolution:
    """One Pareto-front member as persisted to fronts.csv."""

    seed: int
    error_validation: float
    unfairness_validation: float
    error_test: float
    unfairness_test: float
    criterion: str
    max_depth: int
    min_samples_split: int
    max_leaf_nodes: int
    class_weight: float
    tree_depth: int
    tree_leaves: int

    @classmethod
    def from_individual(cls, seed, ind):
        return cls(
            seed=seed,
            error_validation=ind.objectives.f1,
            unfairness_validation=ind.objectives.f2,
            error_test=ind.test_objectives.f1,
            unfairness_test=ind.test_objectives.f2,
            criterion=ind.hp.criterion,
            max_depth=ind.hp.max_depth,
            min_samples_split=ind.hp.min_samples_split,
            max_leaf_nodes=ind.hp.max_leaf_nodes,
            class_weight=ind.hp.class_weight,
            tree_depth=ind.tree_depth,
            tree_leaves=ind.tree_leaves,
        )


@dataclass
class AveragedFront:
    """Run-averaged Pareto front sampled at n evenly spread percentiles."""

    n: int
    positions: np.ndarray             # percentile positions, 0..100
    error_validation: np.ndarray
    unfairness_validation: np.ndarray
    error_validation_q1: np.ndarray   # interquartile band of the error
    error_validation_q3: np.ndarray
    error_test: np.ndarray
    unfairness_test: np.ndarray


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str                      # bundled schema id or path to a schema YAML
    data_path: Path = None            # CSV location (default: data dir + known name)
    params: EAParams = EAParams()
    seeds: tuple = tuple(range(10))
    out_dir: Path = None
    compas: bool = False
    compas_positive: tuple = COMPAS_POSITIVE_SCORES
    jobs: int = 1
    stratify: bool = False
    checkpoint_every: int = 0
    per_gene_mutation: bool = False

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


@dataclass
class RunResult:
    config: ExperimentConfig
    fronts: dict                      # seed -> [FrontSolution]
    traces: dict                      # seed -> [GenerationTrace]
    compas: dict                      # seed -> {partition: ObjectiveVector} (or {})
    summary: list = field(default_factory=list)
    averaged: AveragedFront = None
    effects: list = field(default_factory=list)
    convergence: list = field(default_factory=list)
    converged_at: int = None
    files: list = field(default_factory=list)

    def compas_mean(self, partition="test") -> ObjectiveVector:
        pairs = [self.compas[s][partition] for s in self.config.seeds]
        return ObjectiveVector(
            f1=float(np.mean([p.f1 for p in pairs])),
            f2=float(np.mean([p.f2 for p in pairs])),
        )


def _front_points(front):
    """Distinct solutions of one run, sorted by ascending validation error."""
    seen = set()
    points = []
    ordered = sorted(front, key=lambda s: (s.error_validation, s.unfairness_validation,
                                           s.tree_leaves))
    for sol in ordered:
        key = (sol.error_validation, sol.unfairness_validation)
        if key not in seen:
            seen.add(key)
            points.append(sol)
    return points


_NUMERIC_FIELDS = ("error_validation", "unfairness_validation", "error_test",
                   "unfairness_test", "tree_depth", "tree_leaves")


def _interp_front(points, t):
    """Linear interpolation of every numeric column at fractional rank t."""
    ranks = np.arange(len(points), dtype=float)
    return {name: float(np.interp(t, ranks, [getattr(p, name) for p in points]))
            for name in _NUMERIC_FIELDS}


def summarize_fronts(fronts) -> list:
    """Table-style distribution: min/Q1/Q2/Q3/max of validation error per
    run (linear interpolation between adjacent ranks), averaged across runs,
    carrying the co-located unfairness, test scores and tree complexity."""
    per_run = []
    for front in fronts:
        points = _front_points(front)
        if not points:
            raise DataError("cannot summarize an empty front")
        rows = []
        for position in SUMMARY_POSITIONS:
            rows.append(_interp_front(points, position * (len(points) - 1)))
        per_run.append(rows)
    table = []
    for i, label in enumerate(SUMMARY_ROWS):
        row = {"row": label}
        for name in _NUMERIC_FIELDS:
            row[name] = float(np.mean([rows[i][name] for rows in per_run]))
        table.append(row)
    return table


def averaged_pareto(fronts) -> AveragedFront:
    """The run-averaged front: n = rounded mean number of distinct solutions,
    every run resampled at n evenly spread percentile positions."""
    runs = [_front_points(front) for front in fronts]
    if any(not points for points in runs):
        raise DataError("cannot average an empty front")
    n = max(round_half_up(float(np.mean([len(p) for p in runs]))), 1)
    positions = np.linspace(0.0, 100.0, n) if n > 1 else np.array([0.0])
    samples = {name: [] for name in _NUMERIC_FIELDS}
    for points in runs:
        t = positions / 100.0 * (len(points) - 1)
        ranks = np.arange(len(points), dtype=float)
        for name in _NUMERIC_FIELDS:
            samples[name].append(np.interp(t, ranks, [getattr(p, name) for p in points]))
    stacked = {name: np.vstack(arrs) for name, arrs in samples.items()}
    return AveragedFront(
        n=n,
        positions=positions,
        error_validation=stacked["error_validation"].mean(axis=0),
        unfairness_validation=stacked["unfairness_validation"].mean(axis=0),
        error_validation_q1=np.percentile(stacked["error_validation"], 25, axis=0),
        error_validation_q3=np.percentile(stacked["error_validation"], 75, axis=0),
        error_test=stacked["error_test"].mean(axis=0),
        unfairness_test=stacked["unfairness_test"].mean(axis=0),
    )


_EFFECT_AXES = ("min_samples_split", "class_weight", "criterion", "tree_depth", "tree_leaves")
_EFFECT_BINS = 10


def hyperparameter_effect_stats(fronts) -> list:
    """Mean +/- std of the test scores per hyperparameter-value bin, over all
    Pareto solutions of all runs.  class_weight rows also carry the
    positive/negative weight ratio of the bin center."""
    solutions = [sol for front in fronts for sol in _front_points(front)]
    table = []
    for axis in _EFFECT_AXES:
        values = [getattr(s, axis) for s in solutions]
        if axis == "criterion":
            bins = [(c, [s for s, v in zip(solutions, values) if v == c])
                    for c in ("gini", "entropy")]
            groups = [(label, None, None, members) for label, members in bins if members]
        else:
            lo, hi = float(min(values)), float(max(values))
            if lo == hi:
                groups = [(f"{lo:g}", lo, hi, solutions)]
            else:
                edges = np.linspace(lo, hi, _EFFECT_BINS + 1)
                which = np.clip(np.digitize(values, edges) - 1, 0, _EFFECT_BINS - 1)
                groups = []
                for b in range(_EFFECT_BINS):
                    members = [s for s, w in zip(solutions, which) if w == b]
                    if members:
                        groups.append((f"[{edges[b]:g}, {edges[b + 1]:g}]",
                                       float(edges[b]), float(edges[b + 1]), members))
        for label, lo, hi, members in groups:
            err = np.array([m.error_test for m in members])
            unf = np.array([m.unfairness_test for m in members])
            row = {
                "parameter": axis,
                "bin": label,
                "count": len(members),
                "error_test_mean": float(err.mean()),
                "error_test_std": float(err.std()),
                "unfairness_test_mean": float(unf.mean()),
                "unfairness_test_std": float(unf.std()),
                "weight_ratio": "",
            }
            if axis == "class_weight" and lo is not None:
                center = (lo + hi) / 2.0
                row["weight_ratio"] = (f"{center / (1.0 - center):.5f}"
                                       if center < 1.0 else "inf")
            table.append(row)
    return table


_TRACE_FIELDS = ("front_size", "f1_mean", "f1_q1", "f1_q3", "f2_mean", "f2_q1", "f2_q3")


def convergence_report(traces_per_seed):
    """Average the generation traces across seeds and flag full convergence:
    the first generation after which no averaged value changes any more
    (None when the final generation still moves)."""
    lengths = {len(t) for t in traces_per_seed}
    if not traces_per_seed or lengths == {0}:
        raise DataError("no traces to report")
    if len(lengths) != 1:
        raise DataError("seeds ran different generation counts")
    rows = []
    for step in range(lengths.pop()):
        row = {"generation": traces_per_seed[0][step].generation}
        for name in _TRACE_FIELDS:
            row[name] = float(np.mean([getattr(t[step], name) for t in traces_per_seed]))
        rows.append(row)
    converged_at = None
    if len(rows) > 1:
        last = rows[-1]
        cut = len(rows) - 1
        while cut > 0 and all(rows[cut - 1][k] == last[k] for k in _TRACE_FIELDS):
            cut -= 1
        if cut < len(rows) - 1:
            converged_at = rows[cut]["generation"]
    return rows, converged_at


def _seed_job(payload):
    (data, seed, params, stratify, per_gene, scores, compas_positive,
     checkpoint, checkpoint_every) = payload
    bundle = split_checked(data, seed, stratify=stratify)
    front, traces = run(bundle, replace(params, seed=seed), per_gene_mutation=per_gene,
                        checkpoint_path=checkpoint, checkpoint_every=checkpoint_every)
    solutions = [FrontSolution.from_individual(seed, ind) for ind in front]
    compas = {}
    if scores is not None:
        for name, part in bundle.parts().items():
            compas[name] = compas_baseline(part, scores[part.row_indices], compas_positive)
    return seed, solutions, traces, compas


def resolve_data_path(dataset: str, data_dir=None) -> Path:
    """Default CSV location for a bundled dataset id."""
    import os
    if dataset not in DATA_FILES:
        raise ConfigError(f"no default data file known for dataset {dataset!r}")
    base = Path(data_dir or os.environ.get("FAIRTREES_DATA", "data"))
    return base / DATA_FILES[dataset]


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Full protocol: one meta-learning run per seed, then all aggregates."""
    schema = load_schema(cfg.dataset)
    data_path = cfg.data_path or resolve_data_path(cfg.dataset)
    raw = load_dataset(data_path, schema)
    data = preprocess(raw, schema)

    scores = None
    if cfg.compas:
        if not schema.score_column:
            raise ConfigError(f"dataset {schema.name!r} has no score column for the "
                              "COMPAS baseline")
        scores = raw.frame[schema.score_column].to_numpy(dtype=object)

    checkpoint_dir = None
    if cfg.out_dir is not None and cfg.checkpoint_every > 0:
        checkpoint_dir = Path(cfg.out_dir) / "checkpoints"
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    payloads = []
    for seed in cfg.seeds:
        checkpoint = None
        if checkpoint_dir is not None:
            checkpoint = str(checkpoint_dir / f"seed_{seed}.json")
        params = replace(cfg.params, seed=seed)
        payloads.append((data, seed, params, cfg.stratify, cfg.per_gene_mutation,
                         scores, cfg.compas_positive, checkpoint))

    if cfg.jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(_seed_job, payloads))
    else:
        outcomes = [_seed_job(p) for p in payloads]

    by_seed = {seed: (front, traces, compas) for seed, front, traces, compas in outcomes}
    fronts = {seed: by_seed[seed][0] for seed in cfg.seeds}
    traces = {seed: by_seed[seed][1] for seed in cfg.seeds}
    compas = {seed: by_seed[seed][2] for seed in cfg.seeds}

    front_lists = [fronts[s] for s in cfg.seeds]
    trace_lists = [traces[s] for s in cfg.seeds]
    convergence, converged_at = convergence_report(trace_lists)
    result = RunResult(
        config=cfg,
        fronts=fronts,
        traces=traces,
        compas=compas,
        summary=summarize_fronts(front_lists),
        averaged=averaged_pareto(front_lists),
        effects=hyperparameter_effect_stats(front_lists),
        convergence=convergence,
        converged_at=converged_at,
    )
    if cfg.out_dir is not None:
        export(result, cfg.out_dir)
    return result


# ---------------------------------------------------------------------------
# persistence

def _repr_float(x):
    return repr(float(x))


def _f5(x):
    return f"{float(x):.5f}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


FRONTS_HEADER = ["seed", "solution", "error_validation", "unfairness_validation",
                 "error_test", "unfairness_test", "criterion", "max_depth",
                 "min_samples_split", "max_leaf_nodes", "class_weight",
                 "tree_depth", "tree_leaves"]

SUMMARY_HEADER = ["row", "error_validation", "unfairness_validation",
                  "error_test", "unfairness_test", "depth", "leaves"]


def write_fronts_csv(path, fronts: dict):
    rows = []
    for seed, front in fronts.items():
        for i, s in enumerate(front):
            rows.append([seed, i, _repr_float(s.error_validation),
                         _repr_float(s.unfairness_validation),
                         _repr_float(s.error_test), _repr_float(s.unfairness_test),
                         s.criterion, s.max_depth, s.min_samples_split,
                         s.max_leaf_nodes, _repr_float(s.class_weight),
                         s.tree_depth, s.tree_leaves])
    _write_csv(path, FRONTS_HEADER, rows)


def read_fronts_csv(path) -> dict:
    fronts = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            sol = FrontSolution(
                seed=int(rec["seed"]),
                error_validation=float(rec["error_validation"]),
                unfairness_validation=float(rec["unfairness_validation"]),
                error_test=float(rec["error_test"]),
                unfairness_test=float(rec["unfairness_test"]),
                criterion=rec["criterion"],
                max_depth=int(rec["max_depth"]),
                min_samples_split=int(rec["min_samples_split"]),
                max_leaf_nodes=int(rec["max_leaf_nodes"]),
                class_weight=float(rec["class_weight"]),
                tree_depth=int(rec["tree_depth"]),
                tree_leaves=int(rec["tree_leaves"]),
            )
            fronts.setdefault(sol.seed, []).append(sol)
    return fronts


def write_traces_csv(path, traces: dict):
    header = ["seed", "generation", "front_size", "f1_mean", "f1_q1", "f1_q3",
              "f2_mean", "f2_q1", "f2_q3"]
    rows = []
    for seed, trace in traces.items():
        for t in trace:
            rows.append([seed, t.generation, t.front_size,
                         _repr_float(t.f1_mean), _repr_float(t.f1_q1), _repr_float(t.f1_q3),
                         _repr_float(t.f2_mean), _repr_float(t.f2_q1), _repr_float(t.f2_q3)])
    _write_csv(path, header, rows)


def read_traces_csv(path) -> dict:
    traces = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            trace = GenerationTrace(
                generation=int(rec["generation"]),
                front_size=int(rec["front_size"]),
                f1_mean=float(rec["f1_mean"]), f1_q1=float(rec["f1_q1"]),
                f1_q3=float(rec["f1_q3"]), f2_mean=float(rec["f2_mean"]),
                f2_q1=float(rec["f2_q1"]), f2_q3=float(rec["f2_q3"]),
            )
            traces.setdefault(int(rec["seed"]), []).append(trace)
    return traces


def export(result: RunResult, out_dir) -> list:
    """Write every CSV/JSON/SVG artifact; returns the list of files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    def emit(name, writer, *args):
        path = out / name
        writer(path, *args)
        files.append(path)

    emit("fronts.csv", write_fronts_csv, result.fronts)
    emit("traces.csv", write_traces_csv, result.traces)

    emit("summary.csv", _write_csv, SUMMARY_HEADER,
         [[row["row"], _f5(row["error_validation"]), _f5(row["unfairness_validation"]),
           _f5(row["error_test"]), _f5(row["unfairness_test"]),
           _f5(row["tree_depth"]), _f5(row["tree_leaves"])]
          for row in result.summary])

    av = result.averaged
    emit("averaged_front.csv", _write_csv,
         ["position", "error_validation", "unfairness_validation",
          "error_validation_q1", "error_validation_q3", "error_test", "unfairness_test"],
         [[_f5(av.positions[i]), _f5(av.error_validation[i]),
           _f5(av.unfairness_validation[i]), _f5(av.error_validation_q1[i]),
           _f5(av.error_validation_q3[i]), _f5(av.error_test[i]),
           _f5(av.unfairness_test[i])] for i in range(av.n)])

    emit("effects.csv", _write_csv,
         ["parameter", "bin", "count", "error_test_mean", "error_test_std",
          "unfairness_test_mean", "unfairness_test_std", "weight_ratio"],
         [[row["parameter"], row["bin"], row["count"], _f5(row["error_test_mean"]),
           _f5(row["error_test_std"]), _f5(row["unfairness_test_mean"]),
           _f5(row["unfairness_test_std"]), row["weight_ratio"]]
          for row in result.effects])

    emit("convergence.csv", _write_csv,
         ["generation"] + list(_TRACE_FIELDS),
         [[row["generation"]] + [_f5(row[k]) for k in _TRACE_FIELDS]
          for row in result.convergence])

    if any(result.compas.values()):
        emit("compas.csv", _write_csv,
             ["seed", "partition", "error", "unfairness"],
             [[seed, part, _f5(pair.f1), _f5(pair.f2)]
              for seed in result.config.seeds
              for part, pair in result.compas[seed].items()])

    info = {
        "dataset": result.config.dataset,
        "seeds": list(result.config.seeds),
        "params": {
            "generations": result.config.params.generations,
            "population": result.config.params.population,
            "crossover_prob": result.config.params.crossover_prob,
            "mutation_prob": result.config.params.mutation_prob,
            "mutation_mu": result.config.params.mutation_mu,
        },
        "front_sizes": {str(s): len(result.fronts[s]) for s in result.config.seeds},
        "converged_at": result.converged_at,
        "compas_test_mean": (list(result.compas_mean("test"))
                             if any(result.compas.values()) else None),
    }
    path = out / "runinfo.json"
    path.write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    files.append(path)

    files.extend(write_plots(result, out))
    result.files = files
    return files


def write_plots(result: RunResult, out_dir) -> list:
    out = Path(out_dir)
    files = []
    av = result.averaged
    seeds = result.config.seeds

    front_v = SvgPlot(title=f"{result.config.dataset}: validation Pareto fronts",
                      xlabel="error (1 - G-mean)", ylabel="unfairness (FPR difference)")
    front_v.add_band(list(av.error_validation), list(av.error_validation_q1),
                     list(av.error_validation_q3), color="#bbbbbb", opacity=0.45)
    xs = [s.error_validation for seed in seeds for s in result.fronts[seed]]
    ys = [s.unfairness_validation for seed in seeds for s in result.fronts[seed]]
    front_v.add_points(xs, ys, color="#e8701a", radius=2.5, opacity=0.75)
    front_v.add_line(list(av.error_validation), list(av.unfairness_validation), color="#333333")
    front_v.add_points(list(av.error_validation), list(av.unfairness_validation),
                       color="#333333", radius=3.0)
    if any(result.compas.values()):
        front_v.add_points([result.compas[s]["validation"].f1 for s in seeds],
                           [result.compas[s]["validation"].f2 for s in seeds],
                           color="#cc2222", radius=3.0)
    front_v.write(out / "fronts_validation.svg")
    files.append(out / "fronts_validation.svg")

    front_t = SvgPlot(title=f"{result.config.dataset}: test Pareto fronts",
                      xlabel="error (1 - G-mean)", ylabel="unfairness (FPR difference)")
    xs = [s.error_test for seed in seeds for s in result.fronts[seed]]
    ys = [s.unfairness_test for seed in seeds for s in result.fronts[seed]]
    front_t.add_points(xs, ys, color="#e8701a", radius=2.5, opacity=0.75)
    front_t.add_line(list(av.error_test), list(av.unfairness_test), color="#333333")
    front_t.add_points(list(av.error_test), list(av.unfairness_test),
                       color="#333333", radius=3.0)
    if any(result.compas.values()):
        front_t.add_points([result.compas[s]["test"].f1 for s in seeds],
                           [result.compas[s]["test"].f2 for s in seeds],
                           color="#cc2222", radius=3.0)
    front_t.write(out / "fronts_test.svg")
    files.append(out / "fronts_test.svg")

    conv = SvgPlot(title=f"{result.config.dataset}: convergence",
                   xlabel="generation", ylabel="objective value")
    gens = [row["generation"] for row in result.convergence]
    conv.add_band(gens, [r["f1_q1"] for r in result.convergence],
                  [r["f1_q3"] for r in result.convergence], color="#7799dd", opacity=0.35)
    conv.add_band(gens, [r["f2_q1"] for r in result.convergence],
                  [r["f2_q3"] for r in result.convergence], color="#dd7777", opacity=0.35)
    conv.add_line(gens, [r["f1_mean"] for r in result.convergence], color="#2244aa", width=2.0)
    conv.add_line(gens, [r["f2_mean"] for r in result.convergence], color="#aa2222", width=2.0)
    conv.write(out / "convergence.svg")
    files.append(out / "convergence.svg")
    return files
