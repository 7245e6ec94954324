"""Exact statevector simulation of the Grover index register.

The register is tiny (at most 7 qubits in any experiment), so every operator
acts directly on the amplitude vector. The oracle ancilla is never stored:
phase kickback is applied as a sign flip on the marked amplitudes.

Qubit ``q`` corresponds to bit ``q`` of the basis index (little endian).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 16
NORM_TOL = 1e-10


class RngStream:
    """Seeded random stream with deterministic child derivation.

    Children are keyed by integer tuples, so a child for ``(epoch, batch)``
    is the same regardless of how many draws the parent has made.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def child(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(key))

    def random(self, size=None):
        return self.generator.random(size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size=size)

    def choice(self, a, size=None):
        return self.generator.choice(a, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def permutation(self, x):
        return self.generator.permutation(x)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"


@dataclass
class NoiseModel:
    """Depolarizing error rates per single- and two-qubit gate."""

    p1: float = 0.0
    p2: float = 0.0
    enabled: bool = False

    def __post_init__(self):
        for name in ("p1", "p2"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")

    @classmethod
    def off(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def depolarizing(cls, p1: float = 0.005, p2: float = 0.02) -> "NoiseModel":
        return cls(p1=p1, p2=p2, enabled=True)

    @property
    def active(self) -> bool:
        return self.enabled and (self.p1 > 0.0 or self.p2 > 0.0)


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def probabilities(self) -> np.ndarray:
        return self.amplitudes.real**2 + self.amplitudes.imag**2

    def norm(self) -> float:
        return float(np.sqrt(self.probabilities().sum()))

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


def init_uniform(n_qubits: int) -> StateVector:
    """Hadamard on every qubit of |0...0>."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    dim = 2**n_qubits
    return StateVector(n_qubits, np.full(dim, 1.0 / np.sqrt(dim), dtype=complex))


def _check_indices(state: StateVector, marked) -> np.ndarray:
    idx = np.asarray(sorted(marked) if isinstance(marked, (set, frozenset)) else marked, dtype=int)
    idx = idx.reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= state.dim):
        raise ValueError(f"marked index out of range for a {state.dim}-state register")
    return idx


def phase_flip(amps: np.ndarray, idx: np.ndarray) -> None:
    """In-place oracle kernel."""
    amps[idx] *= -1.0


def reflect_about_mean(amps: np.ndarray) -> None:
    """In-place diffusion kernel: a -> 2<a> - a."""
    np.subtract(2.0 * amps.mean(), amps, out=amps)


def apply_phase_oracle(state: StateVector, marked) -> StateVector:
    idx = _check_indices(state, marked)
    amps = state.amplitudes.copy()
    phase_flip(amps, idx)
    return StateVector(state.n_qubits, amps)


def apply_diffusion(state: StateVector) -> StateVector:
    """Reflect about the uniform superposition: 2|s><s| - I."""
    amps = state.amplitudes.copy()
    reflect_about_mean(amps)
    return StateVector(state.n_qubits, amps)


def _apply_pauli(amps: np.ndarray, n_qubits: int, qubit: int, pauli: str) -> np.ndarray:
    if pauli == "I":
        return amps
    # axis 0 of the reshaped view is the most significant bit
    view = amps.reshape((2,) * n_qubits)
    axis = n_qubits - 1 - qubit
    if pauli in ("Z", "Y"):
        sl = [slice(None)] * n_qubits
        sl[axis] = 1
        view = view.copy()
        view[tuple(sl)] *= -1.0
    if pauli in ("X", "Y"):
        view = np.flip(view, axis=axis)
    out = view.reshape(-1)
    if pauli == "Y":
        # Y = iXZ
        out = 1j * out
    return np.ascontiguousarray(out)


_PAULIS = ("X", "Y", "Z")
_PAULI_PAIRS = tuple((a, b) for a in "IXYZ" for b in "IXYZ" if (a, b) != ("I", "I"))


def depolarize(amps: np.ndarray, n_qubits: int, qubits, noise: NoiseModel, rng: RngStream):
    """Trajectory kernel on a raw amplitude array; returns (amps, error)."""
    if not noise.enabled:
        return amps, None
    p = noise.p1 if len(qubits) == 1 else noise.p2
    if p <= 0.0 or rng.random() >= p:
        return amps, None
    if len(qubits) == 1:
        paulis = (_PAULIS[int(rng.integers(3))],)
    else:
        paulis = _PAULI_PAIRS[int(rng.integers(len(_PAULI_PAIRS)))]
    amps = amps.astype(complex, copy=False)
    for q, pauli in zip(qubits, paulis):
        amps = _apply_pauli(amps, n_qubits, q, pauli)
    return amps, "".join(paulis)


def apply_depolarizing(state: StateVector, qubit_indices, noise: NoiseModel, rng: RngStream):
    """One Monte-Carlo trajectory step of the depolarizing channel.

    With probability p1 (one qubit) or p2 (two qubits) a uniformly chosen
    non-identity Pauli string hits the given qubits. Returns
    ``(state, error)`` where ``error`` names the Pauli string or is None.
    """
    qubits = list(qubit_indices)
    if len(qubits) not in (1, 2):
        raise ValueError("depolarizing noise acts on one or two qubits")
    for q in qubits:
        if not 0 <= q < state.n_qubits:
            raise ValueError(f"qubit {q} out of range")
    amps, err = depolarize(state.amplitudes, state.n_qubits, qubits, noise, rng)
    if err is None:
        return state, None
    return StateVector(state.n_qubits, amps), err


def sample_index(amps: np.ndarray, rng: RngStream) -> int:
    """Draw a basis index with probability |a_k|^2."""
    probs = amps.real**2 + amps.imag**2 if np.iscomplexobj(amps) else amps * amps
    cdf = np.cumsum(probs)
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(k, amps.shape[0] - 1)


def measure(state: StateVector, rng: RngStream) -> int:
    return sample_index(state.amplitudes, rng)


def charge_gate_noise(amps: np.ndarray, n_qubits: int, noise: NoiseModel, rng: RngStream):
    """Noise charged to one diffusion-sized block of gates.

    Stand-in accounting, since the algebraic operators have no gate list:
    one single-qubit event per qubit (a Hadamard layer) followed by one
    two-qubit event on qubits (0, 1) for the multi-controlled reflection.
    """
    if not noise.active:
        return amps
    for q in range(n_qubits):
        amps, _ = depolarize(amps, n_qubits, (q,), noise, rng)
    if n_qubits >= 2:
        amps, _ = depolarize(amps, n_qubits, (0, 1), noise, rng)
    return amps


def diffusion_noise(state: StateVector, noise: NoiseModel, rng: RngStream) -> StateVector:
    amps = charge_gate_noise(state.amplitudes, state.n_qubits, noise, rng)
    if amps is state.amplitudes:
        return state
    return StateVector(state.n_qubits, amps)
