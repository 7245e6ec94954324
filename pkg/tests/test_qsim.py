import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qewo.grover import amplify, success_probability
from qewo.qsim import (
    NoiseModel,
    RngStream,
    StateVector,
    apply_depolarizing,
    apply_diffusion,
    apply_phase_oracle,
    init_uniform,
    measure,
)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def random_state(n, seed):
    g = np.random.default_rng(seed)
    a = g.standard_normal(2**n) + 1j * g.standard_normal(2**n)
    return StateVector(n, a / np.linalg.norm(a))


def dense_pauli(n_qubits, ops):
    """Kronecker-product operator; ``ops`` maps qubit -> Pauli letter (qubit 0 = LSB)."""
    factors = [PAULI[ops.get(q, "I")] for q in reversed(range(n_qubits))]
    return reduce(np.kron, factors)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_init_uniform(n):
    s = init_uniform(n)
    assert s.amplitudes.shape == (2**n,)
    np.testing.assert_allclose(s.amplitudes, np.full(2**n, 1 / math.sqrt(2**n)), atol=1e-15)
    assert np.all(s.amplitudes.imag == 0)


def test_init_uniform_values():
    np.testing.assert_allclose(init_uniform(2).amplitudes.real, [0.5] * 4)
    assert init_uniform(5).amplitudes[0].real == pytest.approx(0.17678, abs=1e-5)


@pytest.mark.parametrize("n", [0, 17, -1])
def test_init_uniform_rejects_bad_width(n):
    with pytest.raises(ValueError):
        init_uniform(n)


def test_oracle_examples():
    s = init_uniform(2)
    np.testing.assert_allclose(apply_phase_oracle(s, {2}).amplitudes.real, [0.5, 0.5, -0.5, 0.5])
    np.testing.assert_array_equal(apply_phase_oracle(s, set()).amplitudes, s.amplitudes)
    np.testing.assert_allclose(apply_phase_oracle(s, {0, 1, 2, 3}).amplitudes.real, [-0.5] * 4)


def test_oracle_out_of_range():
    with pytest.raises(ValueError):
        apply_phase_oracle(init_uniform(2), {4})


def test_diffusion_fixed_point_and_n4_case():
    s = init_uniform(3)
    np.testing.assert_allclose(apply_diffusion(s).amplitudes, s.amplitudes, atol=1e-15)
    marked = StateVector(2, [0.5, 0.5, -0.5, 0.5])
    np.testing.assert_allclose(apply_diffusion(marked).amplitudes, [0, 0, 1, 0], atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_diffusion_matches_dense_reflection(seed):
    n = 4
    s = random_state(n, seed)
    dim = 2**n
    D = 2.0 / dim * np.ones((dim, dim)) - np.eye(dim)
    out = apply_diffusion(s)
    np.testing.assert_allclose(out.amplitudes, D @ s.amplitudes, atol=1e-12)
    assert abs(out.norm() - 1) < 1e-10


@pytest.mark.parametrize("pauli", ["X", "Y", "Z"])
@pytest.mark.parametrize("qubit", [0, 1, 2])
def test_single_pauli_matches_kronecker(pauli, qubit):
    s = random_state(3, 11)

    class Forced:
        # first draw fires the error, second picks the Pauli
        def __init__(self):
            self.calls = 0

        def random(self):
            return 0.0

        def integers(self, high):
            return "XYZ".index(pauli)

    out, err = apply_depolarizing(s, [qubit], NoiseModel(p1=1.0, enabled=True), Forced())
    assert err == pauli
    expected = dense_pauli(3, {qubit: pauli}) @ s.amplitudes
    np.testing.assert_allclose(out.amplitudes, expected, atol=1e-14)


def test_two_qubit_pauli_pairs_match_kronecker():
    s = random_state(3, 5)
    from qewo.qsim import _PAULI_PAIRS

    assert len(_PAULI_PAIRS) == 15
    for k, (a, b) in enumerate(_PAULI_PAIRS):
        class Forced:
            def random(self):
                return 0.0

            def integers(self, high):
                return k

        out, err = apply_depolarizing(s, [0, 2], NoiseModel(p2=1.0, enabled=True), Forced())
        assert err == a + b
        expected = dense_pauli(3, {0: a, 2: b}) @ s.amplitudes
        np.testing.assert_allclose(out.amplitudes, expected, atol=1e-14)


def test_depolarizing_zero_rate_is_identity():
    s = random_state(2, 0)
    rng = RngStream(1)
    for _ in range(200):
        out, err = apply_depolarizing(s, [0], NoiseModel(p1=0.0, enabled=True), rng)
        assert err is None and out is s


def test_depolarizing_disabled_is_noop():
    s = random_state(2, 0)
    out, err = apply_depolarizing(s, [0], NoiseModel(p1=1.0, enabled=False), RngStream(0))
    assert err is None and out is s


def test_forced_error_picks_paulis_uniformly():
    s = init_uniform(1)
    rng = RngStream(7)
    counts = {"X": 0, "Y": 0, "Z": 0}
    trials = 10_000
    for _ in range(trials):
        _, err = apply_depolarizing(s, [0], NoiseModel(p1=1.0, enabled=True), rng)
        counts[err] += 1
    for c in counts.values():
        assert abs(c / trials - 1 / 3) <= 0.02


def test_error_rate_binomial():
    s = init_uniform(1)
    rng = RngStream(3)
    noise = NoiseModel(p1=0.005, enabled=True)
    errors = sum(apply_depolarizing(s, [0], noise, rng)[1] is not None for _ in range(10_000))
    assert 35 <= errors <= 65


def test_noise_model_validates():
    with pytest.raises(ValueError):
        NoiseModel(p1=1.5)
    with pytest.raises(ValueError):
        NoiseModel(p2=-0.1)


def test_measure_uniform_frequencies():
    s = init_uniform(2)
    rng = RngStream(0)
    counts = np.bincount([measure(s, rng) for _ in range(40_000)], minlength=4)
    np.testing.assert_allclose(counts / 40_000, 0.25, atol=0.01)


def test_measure_deterministic_state():
    s = StateVector(2, [0, 0, 1, 0])
    rng = RngStream(0)
    assert all(measure(s, rng) == 2 for _ in range(100))


def test_measure_after_grover_n32():
    s = amplify(5, [13], 4)
    rng = RngStream(42)
    hits = sum(measure(s, rng) == 13 for _ in range(10_000))
    assert abs(hits / 10_000 - 0.999) <= 0.005


def test_rng_stream_children_are_stable():
    a = RngStream(9)
    a.random(100)
    b = RngStream(9)
    assert a.child(1, 2).random() == b.child(1, 2).random()
    assert RngStream(9).child(1).random() != RngStream(9).child(2).random()


ops = st.lists(
    st.one_of(
        st.tuples(st.just("oracle"), st.sets(st.integers(0, 15), max_size=16)),
        st.tuples(st.just("diffusion"), st.none()),
        st.tuples(st.just("noise"), st.integers(0, 3)),
    ),
    max_size=20,
)


@settings(max_examples=60, deadline=None)
@given(ops, st.integers(0, 2**32 - 1))
def test_norm_is_conserved(sequence, seed):
    rng = RngStream(seed)
    noise = NoiseModel(p1=0.5, p2=0.5, enabled=True)
    s = init_uniform(4)
    for op, arg in sequence:
        if op == "oracle":
            s = apply_phase_oracle(s, arg)
        elif op == "diffusion":
            s = apply_diffusion(s)
        else:
            qubits = [arg] if arg % 2 else [arg, (arg + 1) % 4]
            s, _ = apply_depolarizing(s, qubits, noise, rng)
        assert abs(s.norm() - 1.0) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.data())
def test_oracle_involution_and_diffusion_reflection(n, data):
    s = random_state(n, data.draw(st.integers(0, 10_000)))
    marked = data.draw(st.sets(st.integers(0, 2**n - 1)))
    twice = apply_phase_oracle(apply_phase_oracle(s, marked), marked)
    np.testing.assert_array_equal(twice.amplitudes, s.amplitudes)
    np.testing.assert_allclose(apply_diffusion(apply_diffusion(s)).amplitudes, s.amplitudes, atol=1e-10)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 7), st.data())
def test_marked_mass_follows_closed_form(n, data):
    dim = 2**n
    m = data.draw(st.integers(1, dim))
    marked = data.draw(st.permutations(range(dim)))[:m]
    k = data.draw(st.integers(0, 12))
    s = amplify(n, marked, k)
    mass = s.probabilities()[list(marked)].sum()
    assert mass == pytest.approx(success_probability(dim, m, k), abs=1e-9)
