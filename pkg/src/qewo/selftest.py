"""Fast invariant checks, runnable without pytest (``qewo selftest``)."""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data, nn, report, trainer
from .experiments import default_spec, run_experiment
from .qsim import NoiseModel, RngStream, StateVector, apply_depolarizing, apply_diffusion, \
    apply_phase_oracle, init_uniform


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""
    seconds: float = 0.0


def _random_state(n, rng):
    a = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(n, a / np.linalg.norm(a))


def check_normalization():
    rng = RngStream(1)
    noise = NoiseModel.depolarizing(0.3, 0.3)
    worst = 0.0
    for trial in range(200):
        n = int(rng.integers(1, 7))
        s = init_uniform(n)
        for _ in range(10):
            s = apply_diffusion(apply_phase_oracle(s, rng.integers(0, 2**n, size=3)))
            s, _ = apply_depolarizing(s, [int(rng.integers(n))], noise, rng)
            worst = max(worst, abs(s.norm() - 1.0))
    return worst <= 1e-10, f"max |norm-1| = {worst:.2e}"


def check_oracle_involution():
    rng = RngStream(2)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        s = _random_state(n, rng)
        marked = set(rng.integers(0, 2**n, size=int(rng.integers(0, 2**n + 1))).tolist())
        if not np.array_equal(apply_phase_oracle(apply_phase_oracle(s, marked), marked).amplitudes,
                              s.amplitudes):
            return False, f"oracle twice != identity for marked={sorted(marked)}"
    return True, "200 random states"


def check_diffusion_reflection():
    rng = RngStream(3)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        s = _random_state(n, rng)
        dim = 2**n
        D = 2.0 / dim * np.ones((dim, dim)) - np.eye(dim)
        if not np.allclose(apply_diffusion(s).amplitudes, D @ s.amplitudes, atol=1e-12):
            return False, "diffusion differs from 2|s><s| - I"
        if not np.allclose(apply_diffusion(apply_diffusion(s)).amplitudes, s.amplitudes, atol=1e-10):
            return False, "diffusion is not an involution"
    return True, "100 random states"


def check_grid_geometry():
    rng = RngStream(4)
    for _ in range(1000):
        w = rng.uniform(-5, 5)
        g = trainer.build_grid(w, rng.uniform(0.01, 1.0), rng.uniform(1e-3, 3.0), int(rng.integers(2, 65)))
        half = g.alpha * g.sigma
        if abs(g.values[0] - (w - half)) > 1e-12 or abs(g.values[-1] - (w + half)) > 1e-12:
            return False, f"endpoints off for w={w}"
        if abs((g.values[0] + g.values[-1]) / 2 - w) > 1e-12:
            return False, f"midpoint off for w={w}"
    return True, "1000 grids"


def check_weight_restoration():
    rng = RngStream(5)
    model = nn.init_weights(nn.shape_plan([5, 6, 3]), "uniform", rng.child(0))
    X = rng.normal(size=(10, 5))
    Y = np.eye(3)[np.arange(10) % 3]
    cfg = trainer.QewoConfig()
    state = trainer.TrainerState.start(model, cfg)
    mask = nn.sample_dropout_mask(model, 0.2, rng.child(1), 10)
    before = [w.copy() for w in model.layers]
    for t, W in enumerate(model.layers):
        for i, j in [(0, 0), (W.shape[0] - 1, W.shape[1] - 1)]:
            grid = trainer.build_grid(W[i, j], 0.5, trainer.layer_sigma(W), 8)
            trainer.evaluate_candidates(state, t, i, j, grid, X, Y, mask, cfg)
    same = all(np.array_equal(a, b) for a, b in zip(model.layers, before))
    return same, "model bit-identical after candidate evaluation"


def check_alpha_clamping():
    cfg = trainer.QewoConfig()
    rng = RngStream(6)
    a = cfg.alpha0
    for _ in range(5000):
        a = trainer.update_alpha(a, bool(rng.random() < 0.5), cfg)
        if not cfg.alpha_min <= a <= cfg.alpha_max:
            return False, f"alpha {a} escaped [{cfg.alpha_min}, {cfg.alpha_max}]"
    a = cfg.alpha0
    for _ in range(500):
        a = trainer.update_alpha(a, True, cfg)
    b = cfg.alpha0
    for _ in range(500):
        b = trainer.update_alpha(b, False, cfg)
    ok = a == cfg.alpha_min and b == cfg.alpha_max
    return ok, f"floor {a}, ceiling {b}"


def check_split_disjointness():
    for schema in data.SCHEMAS:
        ds = data.load(schema)
        for seed in range(3):
            parts = data.split(ds, 0.8, seed=seed)
            tr, te = set(parts.train_index.tolist()), set(parts.test_index.tolist())
            if tr & te or len(tr | te) != len(ds):
                return False, f"{schema} seed {seed}: overlap or missing rows"
    return True, "wine and digits, 3 seeds each"


def check_softmax_rows():
    rng = RngStream(7)
    for _ in range(200):
        z = rng.normal(0, 300, size=(int(rng.integers(1, 6)), int(rng.integers(1, 12))))
        P = nn.softmax(z)
        if not (np.all(P >= 0) and np.allclose(P.sum(axis=1), 1.0, atol=1e-12)):
            return False, "row sums differ from 1"
    return True, "200 logit matrices"


def check_determinism(runs: int = 2):
    """Two identical-seed exp1 runs must give byte-identical CSV bodies."""
    spec = default_spec("exp1", runs=runs)
    with tempfile.TemporaryDirectory() as tmp:
        a = run_experiment(spec, Path(tmp) / "a")
        b = run_experiment(spec, Path(tmp) / "b")
        for pa, pb in zip(a, b):
            if report.body(pa) != report.body(pb):
                return False, f"{pa.name} bodies differ"
    return True, f"{len(a)} CSV files, {runs} runs per optimizer"


CHECKS = [
    ("statevector normalization", check_normalization),
    ("oracle involution", check_oracle_involution),
    ("diffusion reflection", check_diffusion_reflection),
    ("grid geometry", check_grid_geometry),
    ("weight restoration", check_weight_restoration),
    ("alpha clamping", check_alpha_clamping),
    ("split disjointness", check_split_disjointness),
    ("softmax row sums", check_softmax_rows),
    ("exp1 determinism", check_determinism),
]


def run(include_determinism: bool = True, echo=None) -> list[Check]:
    out = []
    for name, fn in CHECKS:
        if not include_determinism and fn is check_determinism:
            continue
        start = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        c = Check(name, bool(ok), detail, time.perf_counter() - start)
        out.append(c)
        if echo is not None:
            echo(f"{'PASS' if c.ok else 'FAIL'}  {c.name:28s} {c.detail} ({c.seconds:.1f}s)")
    return out
