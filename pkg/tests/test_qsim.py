"""Statevector engine: gates, registers, QFT, Dicke, measurement."""
import math

import numpy as np
import pytest

from qtopo import fem, qsim


def test_hadamard_on_zero():
    lay = qsim.RegisterLayout((("a", 1),))
    s = qsim.apply(qsim.QuantumState(lay), qsim.hadamard(0))
    assert np.allclose(s.amplitudes, [1 / math.sqrt(2)] * 2)


def test_controlled_x():
    lay = qsim.RegisterLayout((("r", 2),))
    s = qsim.basis_state(lay, r=0b10)
    qsim.apply(s, qsim.pauli_x(1, controls=((0, 1),)))
    assert np.argmax(np.abs(s.amplitudes)) == 0b11


def test_open_controlled_x():
    lay = qsim.RegisterLayout((("r", 2),))
    s = qsim.basis_state(lay, r=0b00)
    qsim.apply(s, qsim.pauli_x(1, controls=((0, 0),)))
    assert np.argmax(np.abs(s.amplitudes)) == 0b01


def test_overlapping_targets_rejected():
    with pytest.raises(ValueError):
        qsim.pauli_x(0, controls=((0, 1),))


def test_norm_preserved_long_circuit():
    rng = np.random.default_rng(7)
    lay = qsim.RegisterLayout((("r", 6),))
    s = qsim.QuantumState(lay)
    for _ in range(300):
        q = int(rng.integers(0, 6))
        kind = rng.integers(0, 3)
        if kind == 0:
            qsim.apply(s, qsim.hadamard(q))
        elif kind == 1:
            ctrl = int(rng.integers(0, 6))
            if ctrl != q:
                qsim.apply(s, qsim.pauli_x(q, controls=((ctrl, 1),)))
        else:
            qsim.apply(s, qsim.rz_exp(q, float(rng.normal())))
    assert abs(s.norm() - 1.0) <= 1e-8


class TestDicke:
    def test_width4_k2(self):
        lay = qsim.RegisterLayout((("c", 4),))
        s = qsim.prepare_dicke(qsim.QuantumState(lay), "c", 2)
        probs = qsim.marginal_probabilities(s, "c")
        nz = probs[probs > 1e-15]
        assert len(nz) == 6
        assert np.allclose(nz, 1 / 6)

    def test_width9_k5_support(self):
        lay = qsim.RegisterLayout((("c", 9),))
        s = qsim.prepare_dicke(qsim.QuantumState(lay), "c", 5)
        probs = qsim.marginal_probabilities(s, "c")
        assert int(np.sum(probs > 1e-15)) == 126

    def test_k0_identity(self):
        lay = qsim.RegisterLayout((("c", 3),))
        s = qsim.prepare_dicke(qsim.QuantumState(lay), "c", 0)
        assert s.amplitudes[0] == pytest.approx(1.0)

    def test_nonzero_register_rejected(self):
        lay = qsim.RegisterLayout((("c", 3),))
        s = qsim.basis_state(lay, c=1)
        with pytest.raises(ValueError):
            qsim.prepare_dicke(s, "c", 1)


class TestAdder:
    def test_shift(self):
        lay = qsim.RegisterLayout((("r", 3),))
        s = qsim.basis_state(lay, r=3)
        qsim.apply(s, qsim.adder_permutation(1, lay.qubits("r")))
        assert np.argmax(np.abs(s.amplitudes)) == 4

    def test_modular_wrap(self):
        lay = qsim.RegisterLayout((("r", 3),))
        s = qsim.basis_state(lay, r=7)
        qsim.apply(s, qsim.adder_permutation(1, lay.qubits("r")))
        assert np.argmax(np.abs(s.amplitudes)) == 0

    def test_inverse_composition_all_basis_states(self):
        lay = qsim.RegisterLayout((("r", 4),))
        fwd = qsim.adder_permutation(-4, lay.qubits("r"))
        back = qsim.adder_permutation(4, lay.qubits("r"))
        cols = np.eye(16, dtype=complex)
        out = qsim.apply_to_columns(lay, qsim.product(fwd, back), cols)
        assert np.allclose(out, np.eye(16), atol=1e-14)


class TestQft:
    def test_uniform_to_zero(self):
        lay = qsim.RegisterLayout((("p", 4),))
        s = qsim.QuantumState(lay)
        for q in lay.qubits("p"):
            qsim.apply(s, qsim.hadamard(q))
        qsim.inverse_qft(s, "p")
        assert abs(s.amplitudes[0]) == pytest.approx(1.0, abs=1e-12)

    def test_phase_eight_over_32(self):
        lay = qsim.RegisterLayout((("p", 5),))
        s = qsim.QuantumState(lay)
        j = np.arange(32)
        s.amplitudes = np.exp(2j * np.pi * j * (8 / 32)) / math.sqrt(32)
        qsim.inverse_qft(s, "p")
        probs = qsim.marginal_probabilities(s, "p")
        assert np.argmax(probs) == 8
        assert probs[8] == pytest.approx(1.0, abs=1e-12)

    def test_inverse_then_forward_is_identity(self):
        lay = qsim.RegisterLayout((("p", 4),))
        rng = np.random.default_rng(1)
        amps = rng.normal(size=16) + 1j * rng.normal(size=16)
        amps /= np.linalg.norm(amps)
        s = qsim.QuantumState(lay, amps.copy())
        qsim.inverse_qft(s, "p")
        qsim.qft(s, "p")
        assert np.max(np.abs(s.amplitudes - amps)) <= 1e-12

    def test_matches_dense_dft(self):
        lay = qsim.RegisterLayout((("p", 3),))
        mat = qsim.operator_matrix(lay, qsim.qft_operator(lay.qubits("p")))
        n = 8
        dft = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / math.sqrt(n)
        assert np.max(np.abs(mat - dft)) <= 1e-12


class TestMeasurement:
    def test_product_state(self):
        lay = qsim.RegisterLayout((("a", 1), ("b", 1)))
        s = qsim.basis_state(lay, a=0, b=1)
        assert qsim.measure_distribution(s, "b") == {"0": 0.0, "1": 1.0}

    def test_bell_marginal(self):
        lay = qsim.RegisterLayout((("a", 1), ("b", 1)))
        s = qsim.QuantumState(lay)
        qsim.apply(s, qsim.hadamard(0))
        qsim.apply(s, qsim.pauli_x(1, controls=((0, 1),)))
        d = qsim.measure_distribution(s, "a")
        assert d["0"] == pytest.approx(0.5) and d["1"] == pytest.approx(0.5)

    def test_seeded_sampling_within_binomial_bounds(self):
        lay = qsim.RegisterLayout((("a", 1), ("b", 1)))
        s = qsim.QuantumState(lay)
        qsim.apply(s, qsim.hadamard(0))
        qsim.apply(s, qsim.pauli_x(1, controls=((0, 1),)))
        shots = 20000
        counts = qsim.sample_register(s, "a", shots, seed=3)
        sigma = math.sqrt(shots * 0.25)
        assert abs(counts["0"] - shots / 2) <= 5 * sigma
        assert counts == qsim.sample_register(s, "a", shots, seed=3)

    def test_marginals_sum_to_one(self):
        lay = qsim.RegisterLayout((("a", 2), ("b", 3)))
        rng = np.random.default_rng(5)
        amps = rng.normal(size=32) + 1j * rng.normal(size=32)
        s = qsim.QuantumState(lay, amps / np.linalg.norm(amps))
        assert qsim.marginal_probabilities(s, "b").sum() == pytest.approx(1.0, abs=1e-10)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(11)
        amps = rng.normal(size=32) + 1j * rng.normal(size=32)
        amps /= np.linalg.norm(amps)
        lay1 = qsim.RegisterLayout((("a", 2), ("b", 3)))
        lay2 = qsim.RegisterLayout((("b", 3), ("a", 2)))
        s1 = qsim.QuantumState(lay1, amps.copy())
        # permute amplitudes so register contents agree under lay2
        moved = amps.reshape((2,) * 5)
        moved = np.moveaxis(moved, (0, 1, 2, 3, 4), (3, 4, 0, 1, 2)).reshape(-1)
        s2 = qsim.QuantumState(lay2, moved)
        for reg in ("a", "b"):
            assert np.allclose(qsim.marginal_probabilities(s1, reg),
                               qsim.marginal_probabilities(s2, reg), atol=1e-12)


class TestReflection:
    def test_axis_is_fixed_point(self):
        lay = qsim.RegisterLayout((("r", 1),))
        s = qsim.basis_state(lay, r=0)
        qsim.apply(s, qsim.reflection_about(np.array([1.0, 0.0]), (0,)))
        assert s.amplitudes[0] == pytest.approx(1.0)

    def test_orthogonal_negated(self):
        lay = qsim.RegisterLayout((("r", 1),))
        s = qsim.basis_state(lay, r=1)
        qsim.apply(s, qsim.reflection_about(np.array([1.0, 0.0]), (0,)))
        assert s.amplitudes[1] == pytest.approx(-1.0)

    def test_uniform_self_reflection(self):
        lay = qsim.RegisterLayout((("r", 2),))
        psi = qsim.uniform_vector(2)
        s = qsim.QuantumState(lay, psi.copy())
        qsim.apply(s, qsim.reflection_about(psi, lay.qubits("r")))
        assert np.allclose(s.amplitudes, psi, atol=1e-12)

    def test_involution(self):
        lay = qsim.RegisterLayout((("r", 3),))
        rng = np.random.default_rng(0)
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi /= np.linalg.norm(psi)
        refl = qsim.reflection_about(psi, lay.qubits("r"))
        mat = qsim.operator_matrix(lay, qsim.product(refl, refl))
        assert np.max(np.abs(mat - np.eye(8))) <= 1e-12

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError):
            qsim.reflection_about(np.array([1.0, 1.0]), (0,))


class TestLayoutGuards:
    def test_qubit_guard(self):
        with pytest.raises(fem.GuardError):
            qsim.RegisterLayout((("c", 27),))

    def test_unique_names(self):
        with pytest.raises(ValueError):
            qsim.RegisterLayout((("c", 2), ("c", 1)))

    def test_register_lookup(self):
        lay = qsim.RegisterLayout((("c", 3), ("p", 2)))
        assert lay.qubits("p") == (3, 4)
        assert lay.width("c") == 3


class TestStructuredOps:
    def test_selected_matches_controlled_dense(self):
        rng = np.random.default_rng(2)
        mats = np.stack([np.linalg.qr(rng.normal(size=(4, 4))
                                      + 1j * rng.normal(size=(4, 4)))[0]
                         for _ in range(4)])
        lay = qsim.RegisterLayout((("s", 2), ("d", 2)))
        sel = qsim.selected_op(mats, lay.qubits("s"), lay.qubits("d"))
        got = qsim.operator_matrix(lay, sel)
        expect = np.zeros((16, 16), dtype=complex)
        for s in range(4):
            expect[4 * s:4 * s + 4, 4 * s:4 * s + 4] = mats[s]
        assert np.max(np.abs(got - expect)) <= 1e-12

    def test_selected_householder_matches_dense(self):
        rng = np.random.default_rng(3)
        vec = rng.normal(size=4) + 1j * rng.normal(size=4)
        vec /= np.linalg.norm(vec)
        vecs = np.zeros((2, 4), dtype=complex)
        vecs[1] = vec
        lay = qsim.RegisterLayout((("s", 1), ("d", 2)))
        op = qsim.selected_householder(vecs, lay.qubits("s"), lay.qubits("d"))
        got = qsim.operator_matrix(lay, op)
        expect = np.eye(8, dtype=complex)
        expect[4:, 4:] = np.eye(4) - 2 * np.outer(vec, vec.conj())
        assert np.max(np.abs(got - expect)) <= 1e-12

    def test_adjoint_roundtrip(self):
        lay = qsim.RegisterLayout((("r", 3),))
        rng = np.random.default_rng(4)
        ops = [
            qsim.dense_op(np.linalg.qr(rng.normal(size=(2, 2))
                                       + 1j * rng.normal(size=(2, 2)))[0], (1,)),
            qsim.adder_permutation(3, lay.qubits("r")),
            qsim.diagonal_op(np.exp(1j * rng.normal(size=4)), (0, 2)),
        ]
        composite = qsim.product(*ops)
        mat = qsim.operator_matrix(lay, qsim.product(composite, composite.adjoint()))
        assert np.max(np.abs(mat - np.eye(8))) <= 1e-12
