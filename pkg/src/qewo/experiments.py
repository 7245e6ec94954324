"""Experiment definitions and the runner that turns them into CSV files.

An experiment is a list of cells (optimizer plus settings), each trained for
``runs`` independent runs. Run ``r`` draws its initial weights from
``RngStream(seed).child(r, 0)`` and its training randomness from
``child(r, 1)``, so every optimizer in an experiment starts run ``r`` from the
same weights and results never depend on execution order.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import baselines, data, nn, report, stats, trainer
from .qsim import NoiseModel, RngStream

log = logging.getLogger("qewo")

EXPERIMENTS = ("exp1", "exp2", "exp3", "exp4", "exp5")

WINE_SIZES = (13, 32, 3)
DIGITS_SIZES = (64, 64, 32, 16, 10)

# QEWO trainer defaults per dataset; spec.qewo overrides both. Candidates are
# scored without dropout: a shared mask makes every grid chase one random
# sub-network. On Digits the mini-batch loss is noisy, so alpha would keep
# widening and undo earlier progress unless capped at its starting value.
WINE_QEWO = {"batch_size": None, "dropout_p": 0.0}
DIGITS_QEWO = {"batch_size": 128, "dropout_p": 0.0, "alpha_min": 0.05, "alpha_max": 0.1}

RUN_COLUMNS = ["group", "optimizer", "resolution", "init", "activation", "noise", "run",
               "epoch", "train_loss", "test_loss", "train_acc", "test_acc", "grover_fallbacks"]


@dataclass
class ExperimentSpec:
    id: str
    dataset: str
    sizes: tuple
    optimizers: tuple = ("qewo",)
    runs: int = 10
    seed: int = 42
    epochs: int = 10
    resolutions: tuple = (32,)
    init_schemes: tuple = ("uniform",)
    activations: tuple = ("tanh",)
    noise: bool = False
    noise_p1: float = 0.005
    noise_p2: float = 0.02
    compare_runs: int = 0
    compare_resolution: int = 19
    reference: bool = False
    subsample: int | None = None
    qewo: dict = field(default_factory=dict)
    adam: dict = field(default_factory=dict)
    ga: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.id!r}; choose from {EXPERIMENTS}")
        if self.runs < 1:
            raise ValueError("run count must be >= 1")
        if self.dataset not in data.SCHEMAS:
            raise ValueError(f"unknown dataset {self.dataset!r}")
        self.sizes = tuple(int(s) for s in self.sizes)
        self.resolutions = tuple(int(r) for r in self.resolutions)

    def noise_model(self) -> NoiseModel:
        return NoiseModel.depolarizing(self.noise_p1, self.noise_p2)

    def qewo_config(self, resolution: int) -> trainer.QewoConfig:
        base = {"epochs": self.epochs}
        base.update(WINE_QEWO if self.dataset == "wine" else DIGITS_QEWO)
        base.update(self.qewo)
        base["n_candidates_hidden"] = resolution
        return trainer.QewoConfig(**base)

    def adam_config(self) -> baselines.AdamConfig:
        base = {"epochs": self.epochs, "batch_size": 16 if self.dataset == "wine" else 128}
        base.update(self.adam)
        return baselines.AdamConfig(**base)

    def ga_config(self) -> baselines.GaConfig:
        base = {"generations": self.epochs}
        base.update(self.ga)
        return baselines.GaConfig(**base)


def default_spec(exp_id: str, **overrides) -> ExperimentSpec:
    """The stock configuration of each experiment; keyword args replace fields."""
    if exp_id == "exp1":
        spec = ExperimentSpec("exp1", "wine", WINE_SIZES, ("qewo", "adam"), runs=10,
                              resolutions=(32,))
    elif exp_id == "exp2":
        spec = ExperimentSpec("exp2", "digits", DIGITS_SIZES, ("qewo",), runs=1,
                              resolutions=tuple(range(17, 33)), compare_runs=10)
    elif exp_id == "exp3":
        spec = ExperimentSpec("exp3", "digits", DIGITS_SIZES, ("qewo",), runs=10,
                              resolutions=(19,), init_schemes=("uniform", "xavier", "kaiming"))
    elif exp_id == "exp4":
        spec = ExperimentSpec("exp4", "digits", DIGITS_SIZES, ("qewo",), runs=10,
                              resolutions=(19,), activations=("tanh", "gelu", "swish"))
    elif exp_id == "exp5":
        spec = ExperimentSpec("exp5", "digits", DIGITS_SIZES, ("qewo",), runs=15,
                              resolutions=(19,), noise=True, reference=True)
    else:
        raise ValueError(f"unknown experiment {exp_id!r}; choose from {EXPERIMENTS}")
    return dataclasses.replace(spec, **overrides) if overrides else spec


@dataclass(frozen=True)
class Cell:
    group: str
    optimizer: str
    resolution: int | None
    init: str = "uniform"
    activation: str = "tanh"
    noise: bool = False
    runs: int = 1


def plan(spec: ExperimentSpec) -> list[Cell]:
    cells = []
    if spec.id == "exp1":
        res = spec.resolutions[0]
        for opt in spec.optimizers:
            cells.append(Cell(opt, opt, res if opt == "qewo" else None,
                              noise=spec.noise and opt == "qewo", runs=spec.runs))
    elif spec.id == "exp2":
        for res in spec.resolutions:
            cells.append(Cell(f"res{res}", "qewo", res, noise=spec.noise, runs=spec.runs))
        if spec.compare_runs:
            for opt in ("qewo", "adam", "ga"):
                cells.append(Cell(opt, opt, spec.compare_resolution if opt == "qewo" else None,
                                  noise=spec.noise and opt == "qewo", runs=spec.compare_runs))
    elif spec.id == "exp3":
        for init in spec.init_schemes:
            cells.append(Cell(init, "qewo", spec.resolutions[0], init=init, noise=spec.noise,
                              runs=spec.runs))
    elif spec.id == "exp4":
        for act in spec.activations:
            cells.append(Cell(act, "qewo", spec.resolutions[0], activation=act, noise=spec.noise,
                              runs=spec.runs))
    elif spec.id == "exp5":
        res = spec.resolutions[0]
        cells.append(Cell("noisy", "qewo", res, noise=True, runs=spec.runs))
        if spec.reference:
            cells.append(Cell("ideal", "qewo", res, noise=False, runs=spec.runs))
    return cells


@dataclass
class RunResult:
    cell: Cell
    run: int
    history: list
    wall_time_ms: float


def run_cell(spec: ExperimentSpec, cell: Cell, run: int, split: data.SplitDataset) -> RunResult:
    train_set = (split.train.X, split.train.onehot())
    test_set = (split.test.X, split.test.onehot())
    root = RngStream(spec.seed).child(run)
    shapes = nn.shape_plan(list(spec.sizes))
    start = time.perf_counter()

    def progress(m):
        log.info("%s %s run %d epoch %d: test acc %.2f loss %.4f", spec.id, cell.group, run,
                 m.epoch, m.test_acc, m.test_loss)

    if cell.optimizer == "qewo":
        model = nn.init_weights(shapes, cell.init, root.child(0), cell.activation)
        noise = spec.noise_model() if cell.noise else NoiseModel.off()
        state = trainer.train(model, train_set, test_set, spec.qewo_config(cell.resolution),
                              noise, root.child(1), progress)
        history = state.epoch_metrics
    elif cell.optimizer == "adam":
        model = nn.init_weights(shapes, cell.init, root.child(0), cell.activation)
        _, history = baselines.adam_train(model, train_set, test_set, spec.adam_config(),
                                          root.child(1), progress)
    elif cell.optimizer == "ga":
        _, history = baselines.ga_train(shapes, train_set, test_set, spec.ga_config(),
                                        root.child(1), cell.activation, progress)
    else:
        raise ValueError(f"unknown optimizer {cell.optimizer!r}")
    return RunResult(cell, run, history, (time.perf_counter() - start) * 1000.0)


def best_run(results: list[RunResult]) -> RunResult:
    """Highest final test accuracy, then lowest final test loss, then lowest ordinal."""
    return min(results, key=lambda r: (-r.history[-1].test_acc, r.history[-1].test_loss, r.run))


def _cell_key(c: Cell) -> list:
    return [c.group, c.optimizer, c.resolution, c.init, c.activation, c.noise]


def _run_rows(results):
    rows = []
    for r in results:
        for m in r.history:
            rows.append(_cell_key(r.cell) + [r.run, m.epoch, m.train_loss, m.test_loss,
                                             m.train_acc, m.test_acc, m.grover_fallback_count])
    return rows


def _ci(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), float("nan"), float("nan")
    ci = stats.student_t_ci(values)
    return ci.mean, ci.margin, ci.t_value


def _curve_rows(cell, results):
    rows = []
    for e in range(len(results[0].history)):
        acc = [r.history[e].test_acc for r in results]
        loss = [r.history[e].test_loss for r in results]
        mean_acc, acc_margin, _ = _ci(acc)
        mean_loss, loss_margin, _ = _ci(loss)
        rows.append([cell.group, cell.optimizer, e + 1, len(results), mean_acc, acc_margin,
                     mean_loss, loss_margin,
                     float(np.mean([r.history[e].train_acc for r in results])),
                     float(np.mean([r.history[e].train_loss for r in results]))])
    return rows


def _summary_row(cell, results):
    acc = [r.history[-1].test_acc for r in results]
    loss = [r.history[-1].test_loss for r in results]
    mean_acc, acc_margin, t = _ci(acc)
    mean_loss, loss_margin, _ = _ci(loss)
    return _cell_key(cell) + [len(results), mean_acc, acc_margin, mean_acc - acc_margin,
                              mean_acc + acc_margin, mean_loss, loss_margin, max(acc), t]


def _tables_rows(classic: RunResult, quantum: RunResult):
    rows = []
    for c, q in zip(classic.history, quantum.history):
        rows.append([
            c.epoch,
            c.train_loss, q.train_loss, stats.loss_reduction(c.train_loss, q.train_loss),
            stats.loss_improvement_pct(c.train_loss, q.train_loss),
            c.test_loss, q.test_loss, stats.loss_reduction(c.test_loss, q.test_loss),
            stats.loss_improvement_pct(c.test_loss, q.test_loss),
            c.train_acc, q.train_acc, q.train_acc - c.train_acc,
            stats.accuracy_improvement_pct(c.train_acc, q.train_acc),
            c.test_acc, q.test_acc, q.test_acc - c.test_acc,
            stats.accuracy_improvement_pct(c.test_acc, q.test_acc),
        ])
    return rows


TABLES_COLUMNS = [
    "epoch",
    "classic_train_loss", "quantum_train_loss", "train_loss_reduction", "train_loss_improvement_pct",
    "classic_test_loss", "quantum_test_loss", "test_loss_reduction", "test_loss_improvement_pct",
    "classic_train_acc", "quantum_train_acc", "train_acc_improvement", "train_acc_improvement_pct",
    "classic_test_acc", "quantum_test_acc", "test_acc_improvement", "test_acc_improvement_pct",
]
CURVE_COLUMNS = ["group", "optimizer", "epoch", "runs", "mean_test_acc", "test_acc_margin",
                 "mean_test_loss", "test_loss_margin", "mean_train_acc", "mean_train_loss"]
SUMMARY_COLUMNS = ["group", "optimizer", "resolution", "init", "activation", "noise", "runs",
                   "mean_final_test_acc", "final_test_acc_margin", "final_test_acc_low",
                   "final_test_acc_high", "mean_final_test_loss", "final_test_loss_margin",
                   "best_final_test_acc", "t_value"]


def spec_meta(spec: ExperimentSpec, split: data.SplitDataset | None = None) -> dict:
    meta = {}
    for f in dataclasses.fields(spec):
        value = getattr(spec, f.name)
        if isinstance(value, dict):
            continue
        meta[f.name] = ",".join(map(str, value)) if isinstance(value, tuple) else value
    qcfg = dataclasses.asdict(spec.qewo_config(spec.resolutions[0]))
    qcfg.pop("n_candidates_hidden")
    meta.update({f"qewo.{k}": v for k, v in qcfg.items()})
    if "adam" in spec.optimizers or spec.compare_runs:
        meta.update({f"adam.{k}": v for k, v in dataclasses.asdict(spec.adam_config()).items()})
    if "ga" in spec.optimizers or spec.compare_runs:
        meta.update({f"ga.{k}": v for k, v in dataclasses.asdict(spec.ga_config()).items()})
    meta["normalization"] = "zscore(train statistics)"
    meta["split"] = "stratified 80/20"
    meta["run_streams"] = f"RngStream({spec.seed}).child(run, 0|1)"
    if split is not None:
        meta["train_rows"] = len(split.train)
        meta["test_rows"] = len(split.test)
        meta["data_sha256"] = split.train.provenance.get("sha256", "")
    return meta


def run_experiment(spec: ExperimentSpec, out_dir) -> list[Path]:
    """Train every cell of ``spec`` and write its CSV files into ``out_dir``."""
    out_dir = Path(out_dir)
    split = data.prepare(spec.dataset, spec.seed, spec.subsample)
    cells = plan(spec)
    results: dict[Cell, list[RunResult]] = {}
    for cell in cells:
        results[cell] = [run_cell(spec, cell, r, split) for r in range(cell.runs)]

    base = {"experiment": spec.id}
    base.update(spec_meta(spec, split))
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    all_results = [r for rs in results.values() for r in rs]

    def meta(table, **extra):
        m = {"experiment": spec.id, "table": table, "generated": stamp}
        m.update({k: v for k, v in base.items() if k != "experiment"})
        m.update(extra)
        return m

    walls = ";".join(f"{r.cell.group}/{r.run}:{r.wall_time_ms:.0f}" for r in all_results)
    written = [
        report.write_csv(out_dir / "runs.csv", meta("runs", wall_time_ms=walls), RUN_COLUMNS,
                         _run_rows(all_results)),
        report.write_csv(out_dir / "best.csv", meta("best", selection="final test acc desc, "
                                                    "final test loss asc"),
                         RUN_COLUMNS, _run_rows([best_run(rs) for rs in results.values()])),
        report.write_csv(out_dir / "curves.csv", meta("curves"), CURVE_COLUMNS,
                         [row for c, rs in results.items() for row in _curve_rows(c, rs)]),
        report.write_csv(out_dir / "summary.csv", meta("summary"), SUMMARY_COLUMNS,
                         [_summary_row(c, rs) for c, rs in results.items()]),
    ]
    by_group = {c.group: rs for c, rs in results.items()}
    if spec.id == "exp1" and "qewo" in by_group and "adam" in by_group:
        written.append(report.write_csv(
            out_dir / "tables.csv",
            meta("tables", pairing="best ADAM run vs best QEWO run"),
            TABLES_COLUMNS, _tables_rows(best_run(by_group["adam"]), best_run(by_group["qewo"]))))
    if spec.id == "exp2":
        sweep_cells = [c for c in cells if c.group.startswith("res")]
        rows = []
        for c in sweep_cells:
            s = _summary_row(c, results[c])
            rows.append([c.resolution, s[6], s[7], s[8], s[11], s[12]])
        acc = [r[2] for r in rows if r[0] <= 31]
        extra = {"sweep_key": "resolution", "ci_max": 31}
        if len(acc) >= 2:
            ci = stats.student_t_ci(acc)
            extra["ci_final_test_acc"] = f"{ci.mean:.4f}+-{ci.margin:.4f}"
        written.append(report.write_csv(
            out_dir / "sweep.csv", meta("sweep", **extra),
            ["resolution", "runs", "mean_final_test_acc", "final_test_acc_margin",
             "mean_final_test_loss", "final_test_loss_margin"], rows))
    return written


def parse_resolution_range(text: str) -> tuple:
    """'17..32' -> (17, ..., 32); a single number is a one-element range."""
    lo, sep, hi = text.partition("..")
    try:
        lo_i = int(lo)
        hi_i = int(hi) if sep else lo_i
    except ValueError:
        raise ValueError(f"resolution range must look like A..B, got {text!r}") from None
    if lo_i < 2 or hi_i < lo_i:
        raise ValueError(f"bad resolution range {text!r}")
    return tuple(range(lo_i, hi_i + 1))


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", "null"):
        return None
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_overrides(path) -> dict:
    """Read ``key=value`` lines (``#`` comments) or a JSON object.

    Dotted keys such as ``qewo.alpha_min`` go to the trainer sections.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        flat = json.loads(text)
    else:
        flat = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            flat[key.strip()] = _parse_value(value)
    out: dict = {}
    for key, value in flat.items():
        section, dot, name = key.partition(".")
        if dot:
            if section not in ("qewo", "adam", "ga"):
                raise ValueError(f"unknown config section {section!r}")
            out.setdefault(section, {})[name] = value
        elif isinstance(value, dict):
            out.setdefault(key, {}).update(value)
        else:
            out[key] = tuple(value) if isinstance(value, list) else value
    return out


def apply_overrides(spec: ExperimentSpec, overrides: dict) -> ExperimentSpec:
    known = {f.name for f in dataclasses.fields(ExperimentSpec)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    merged = {}
    for key, value in overrides.items():
        if key in ("qewo", "adam", "ga"):
            merged[key] = {**getattr(spec, key), **value}
        else:
            merged[key] = value
    new = dataclasses.replace(spec, **merged)
    # surface bad trainer keys now rather than mid-run
    new.qewo_config(new.resolutions[0])
    new.adam_config()
    new.ga_config()
    return new
