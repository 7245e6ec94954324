"""CSV artifacts and SVG figures for experiment results.

Every CSV starts with ``#`` comment lines holding ``key=value`` metadata,
followed by a plain header row and data rows. Anything that changes between
identical reruns (timestamps, wall times) lives in the comment block, so the
bodies of two reruns compare byte for byte.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VOLATILE_KEYS = ("generated", "wall_time_ms")


class ReportError(ValueError):
    pass


@dataclass
class Table:
    meta: dict
    columns: list
    rows: list

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def floats(self, name: str) -> np.ndarray:
        return np.array([float(v) for v in self.column(name)])

    def where(self, **match) -> "Table":
        idx = {k: self.columns.index(k) for k in match}
        keep = [r for r in self.rows if all(r[idx[k]] == str(v) for k, v in match.items())]
        return Table(self.meta, self.columns, keep)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6f}"
    return str(value)


def render(meta: dict, columns, rows) -> str:
    buf = io.StringIO()
    for key, value in meta.items():
        text = str(value).replace("\n", " ")
        buf.write(f"# {key}={text}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ReportError(f"row has {len(row)} fields, header has {len(columns)}")
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, meta: dict, columns, rows) -> Path:
    """Write atomically: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = render(meta, columns, rows)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path


def body(path) -> str:
    """File contents without the comment block."""
    lines = Path(path).read_text().splitlines(keepends=True)
    return "".join(ln for ln in lines if not ln.startswith("#"))


def read_csv(path) -> Table:
    path = Path(path)
    meta, data_lines = {}, []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise ReportError(f"{path}:{lineno}: comment line without key=value")
            meta[key] = value
        elif line.strip():
            data_lines.append(line)
    if not data_lines:
        raise ReportError(f"{path}: no header row")
    reader = csv.reader(data_lines)
    columns = next(reader)
    rows = []
    for k, row in enumerate(reader, start=2):
        if len(row) != len(columns):
            raise ReportError(f"{path}: data row {k} has {len(row)} fields, expected {len(columns)}")
        rows.append(row)
    return Table(meta, columns, rows)


# ---------------------------------------------------------------- figures

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "qewo"
    return plt


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path


def _plot_tables(t: Table, out_dir: Path, stem: str) -> list[Path]:
    plt = _pyplot()
    epoch = t.floats("epoch")
    written = []
    for metric, ylabel in (("loss", "loss"), ("acc", "accuracy (%)")):
        fig, ax = plt.subplots(figsize=(6, 4))
        for split, style in (("train", "-"), ("test", "--")):
            for side, color in (("classic", "tab:orange"), ("quantum", "tab:blue")):
                col = f"{side}_{split}_{metric}"
                if col in t.columns:
                    ax.plot(epoch, t.floats(col), style, color=color, marker="o", ms=3,
                            label=f"{'ADAM' if side == 'classic' else 'QEWO'} {split}")
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend()
        name = "loss" if metric == "loss" else "accuracy"
        written.append(_save(fig, out_dir / f"{stem}_{name}.svg"))
    return written


def _plot_curves(t: Table, out_dir: Path, stem: str) -> list[Path]:
    plt = _pyplot()
    groups = []
    for g, o in zip(t.column("group"), t.column("optimizer")):
        if (g, o) not in groups:
            groups.append((g, o))
    written = []
    for metric, ylabel in (("test_acc", "test accuracy (%)"), ("test_loss", "test loss")):
        fig, ax = plt.subplots(figsize=(6, 4))
        for g, o in groups:
            sub = t.where(group=g, optimizer=o)
            ep = sub.floats("epoch")
            mean = sub.floats(f"mean_{metric}")
            margin = sub.floats(f"{metric}_margin")
            line, = ax.plot(ep, mean, marker="o", ms=3, label=g if g == o else f"{o} {g}")
            ok = np.isfinite(margin)
            if ok.any():
                ax.fill_between(ep[ok], (mean - margin)[ok], (mean + margin)[ok],
                                color=line.get_color(), alpha=0.2)
        ax.set_xlabel("epoch (one GA generation per epoch)" if "ga" in t.column("optimizer") else "epoch")
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
        written.append(_save(fig, out_dir / f"{stem}_{metric}.svg"))
    return written


def _plot_sweep(t: Table, out_dir: Path, stem: str) -> list[Path]:
    """Final metric per sweep value, with the mean and its 95% band."""
    plt = _pyplot()
    written = []
    sweep = t.meta.get("sweep_key")
    if sweep is None or sweep not in t.columns:
        return written
    x = t.floats(sweep)
    ci_max = float(t.meta.get("ci_max", "inf"))
    for metric, ylabel, color in (("final_test_acc", "final test accuracy (%)", "tab:blue"),
                                  ("final_test_loss", "final test loss", "tab:red")):
        col = f"mean_{metric}"
        if col not in t.columns:
            continue
        y = t.floats(col)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(x, y, "o", color=color, label=f"per {sweep}")
        in_ci = y[x <= ci_max]
        if in_ci.size >= 2:
            from .stats import student_t_ci

            ci = student_t_ci(in_ci)
            ax.axhline(ci.mean, ls="--", color="k", lw=1, label=f"mean {ci.mean:.4g}")
            ax.axhspan(ci.low, ci.high, color=color, alpha=0.15, label="95% CI")
        ax.set_xlabel(sweep)
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
        written.append(_save(fig, out_dir / f"{stem}_{metric}.svg"))
    return written


_PLOTTERS = {"tables": _plot_tables, "curves": _plot_curves, "sweep": _plot_sweep}


def emit_plots(csv_files, out_dir) -> list[Path]:
    """Render the figures each CSV supports; bad or empty files are skipped with a warning."""
    out_dir = Path(out_dir)
    written = []
    for path in map(Path, csv_files):
        try:
            t = read_csv(path)
        except (OSError, ReportError, ValueError) as exc:
            warnings.warn(f"skipping {path}: {exc}", stacklevel=2)
            continue
        if not t.rows:
            warnings.warn(f"skipping {path}: no data rows", stacklevel=2)
            continue
        plotter = _PLOTTERS.get(t.meta.get("table", ""))
        if plotter is None:
            continue
        stem = f"{t.meta.get('experiment', 'exp')}_{path.stem}"
        try:
            written.extend(plotter(t, out_dir, stem))
        except (KeyError, ValueError) as exc:
            warnings.warn(f"skipping {path}: {exc}", stacklevel=2)
    return written
