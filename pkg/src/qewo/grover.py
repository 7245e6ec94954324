"""Grover search over a marked index set and Durr-Hoyer minimum finding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qsim import (
    MAX_QUBITS,
    NoiseModel,
    RngStream,
    StateVector,
    charge_gate_noise,
    phase_flip,
    reflect_about_mean,
    sample_index,
)

FIXED = "fixed"
RANDOMIZED = "randomized"

# growth factor of the iteration bound in the randomized schedule
_BBHT_LAMBDA = 6.0 / 5.0


@dataclass(frozen=True)
class GroverConfig:
    max_retries: int = 5
    iteration_rule: str = FIXED

    def __post_init__(self):
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if self.iteration_rule not in (FIXED, RANDOMIZED):
            raise ValueError(f"unknown iteration rule {self.iteration_rule!r}")


@dataclass
class SearchOutcome:
    index: int
    grover_iterations_used: int
    retries_used: int
    measured_in_marked: bool


@dataclass
class MinimumTrace:
    """Provisional indices visited by one minimum search, in order."""

    index: int
    provisional: list[int] = field(default_factory=list)
    searches: list[SearchOutcome] = field(default_factory=list)

    @property
    def fallbacks(self) -> int:
        return sum(not s.measured_in_marked for s in self.searches)


def register_width(n_candidates: int) -> int:
    """Index qubits needed to address ``n_candidates`` basis states."""
    if n_candidates < 2:
        raise ValueError("need at least 2 candidates")
    return int(math.ceil(math.log2(n_candidates)))


def qubit_budget(n_candidates: int) -> int:
    """Index qubits plus the single oracle ancilla."""
    return register_width(n_candidates) + 1


def iteration_count(n_states: int, n_marked: int) -> int:
    if n_marked < 1:
        raise ValueError("empty oracle: no marked states")
    if n_marked > n_states:
        raise ValueError("more marked states than basis states")
    if n_marked == n_states:
        return 0
    # integer k maximizing sin^2((2k+1) theta); equals floor(pi/4 sqrt(N/m))
    # for sparse oracles and never overshoots dense ones
    theta = math.asin(math.sqrt(n_marked / n_states))
    return max(0, int(math.floor(math.pi / (4.0 * theta))))


def success_probability(n_states: int, n_marked: int, iterations: int) -> float:
    """Closed form sin^2((2k+1) theta) with theta = asin(sqrt(m/N))."""
    theta = math.asin(math.sqrt(n_marked / n_states))
    return math.sin((2 * iterations + 1) * theta) ** 2


def amplify_amplitudes(n_qubits: int, marked: np.ndarray, iterations: int,
                       noise: NoiseModel | None = None, rng: RngStream | None = None) -> np.ndarray:
    """Raw amplitudes after preparing |s> and ``iterations`` Grover rounds.

    Noise-free runs stay real-valued; a Y error promotes the array to complex.
    """
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}]")
    noise = noise or NoiseModel.off()
    dim = 2**n_qubits
    amps = np.full(dim, 1.0 / math.sqrt(dim))
    noisy = noise.active
    if noisy:
        # the initial Hadamard layer is charged like a diffusion's
        amps = charge_gate_noise(amps, n_qubits, noise, rng)
    for _ in range(iterations):
        phase_flip(amps, marked)
        reflect_about_mean(amps)
        if noisy:
            amps = charge_gate_noise(amps, n_qubits, noise, rng)
    return amps


def amplify(n_qubits: int, marked, iterations: int,
            noise: NoiseModel | None = None, rng: RngStream | None = None) -> StateVector:
    amps = amplify_amplitudes(n_qubits, np.asarray(list(marked), dtype=int), iterations, noise, rng)
    return StateVector(n_qubits, amps)


def _normalize_marked(marked, n_candidates: int) -> np.ndarray:
    idx = np.unique(np.asarray(list(marked) if isinstance(marked, (set, frozenset)) else marked,
                               dtype=int).reshape(-1))
    if idx.size == 0:
        raise ValueError("marked set is empty")
    if idx[0] < 0 or idx[-1] >= n_candidates:
        raise ValueError(f"marked index out of range for {n_candidates} candidates")
    return idx


def grover_search(n_candidates: int, marked, cfg: GroverConfig | None = None,
                  noise: NoiseModel | None = None,
                  rng: RngStream | None = None) -> SearchOutcome:
    """Amplify and measure until a marked index comes out.

    Non power-of-two candidate counts are padded up to the next power of two;
    padding indices are never marked, so measuring one counts as a miss.
    After ``1 + max_retries`` misses a uniformly random marked index is
    returned with ``measured_in_marked=False``.
    """
    cfg = cfg or GroverConfig()
    noise = noise or NoiseModel.off()
    if rng is None:
        raise ValueError("grover_search needs an RngStream")
    idx = _normalize_marked(marked, n_candidates)
    n_qubits = register_width(max(n_candidates, 2))
    dim = 2**n_qubits
    is_marked = np.zeros(dim, dtype=bool)
    is_marked[idx] = True

    total_iters = 0
    bound = 1.0
    for attempt in range(cfg.max_retries + 1):
        if cfg.iteration_rule == FIXED:
            k = iteration_count(dim, idx.size)
        else:
            k = int(rng.integers(0, int(math.ceil(bound))))
            bound = min(_BBHT_LAMBDA * bound, math.sqrt(dim))
        amps = amplify_amplitudes(n_qubits, idx, k, noise, rng)
        total_iters += k
        outcome = sample_index(amps, rng)
        if is_marked[outcome]:
            return SearchOutcome(outcome, total_iters, attempt, True)
    fallback = int(idx[int(rng.integers(idx.size))])
    return SearchOutcome(fallback, total_iters, cfg.max_retries, False)


def minimum_search(values, cfg: GroverConfig | None = None,
                   noise: NoiseModel | None = None, rng: RngStream | None = None,
                   start: int | None = None) -> MinimumTrace:
    """Durr-Hoyer loop; returns the full provisional-index trace.

    Only strict improvements move the provisional index, so the visited values
    are strictly decreasing and the loop always terminates.
    """
    cfg = cfg or GroverConfig(iteration_rule=RANDOMIZED)
    values = np.asarray(values, dtype=float).reshape(-1)
    n = values.size
    if n == 0:
        raise ValueError("values must be nonempty")
    if rng is None:
        raise ValueError("minimum_search needs an RngStream")
    k = int(rng.integers(n)) if start is None else int(start)
    trace = MinimumTrace(index=k, provisional=[k])
    if n == 1:
        return trace
    cap = int(math.ceil(3.0 * math.sqrt(n))) + 10
    for _ in range(cap):
        below = np.flatnonzero(values < values[k])
        if below.size == 0:
            break
        out = grover_search(n, below, cfg, noise, rng)
        trace.searches.append(out)
        if values[out.index] < values[k]:
            k = out.index
            trace.provisional.append(k)
    trace.index = k
    return trace


def grover_min(values, cfg: GroverConfig | None = None, noise: NoiseModel | None = None,
               rng: RngStream | None = None) -> int:
    return minimum_search(values, cfg, noise, rng).index
