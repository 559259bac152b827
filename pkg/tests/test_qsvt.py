"""Filter targets, Chebyshev fitting, matrix emulation, circuit QSVT."""
import math

import numpy as np
import pytest

from qtopo import blockenc, fem, qsim, qsvt


class TestTargets:
    def test_even_values(self, spec_2x2):
        assert qsvt.target_even(0.0, spec_2x2) == pytest.approx(1.0)
        assert qsvt.target_even(spec_2x2.mu, spec_2x2) == pytest.approx(spec_2x2.y0)
        assert qsvt.target_even(1.0, spec_2x2) == pytest.approx(spec_2x2.y0 * spec_2x2.mu)

    def test_even_symmetric(self, spec_2x2):
        xs = np.array([0.3, 0.001, 0.7])
        assert np.array_equal(qsvt.target_even(xs, spec_2x2),
                              qsvt.target_even(-xs, spec_2x2))

    def test_odd_values(self):
        mu = 0.01
        assert qsvt.target_odd(1.0, mu) == pytest.approx(mu / 2)
        assert qsvt.target_odd(mu / 4, mu) == 0.0
        assert qsvt.target_odd(-1.0, mu) == pytest.approx(-mu / 2)
        # ramp endpoints
        assert qsvt.target_odd(mu / 2, mu) == pytest.approx(0.0, abs=1e-15)
        assert qsvt.target_odd(mu, mu) == pytest.approx(0.5)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            qsvt.PolySpec(0.0, 0.5, 1e-3)
        with pytest.raises(ValueError):
            qsvt.PolySpec(0.01, 0.5, 0.6)


class TestFit:
    def test_reference_degree_382(self):
        poly = qsvt.fit_even_poly(qsvt.PolySpec(0.01, 0.5, 1e-3))
        assert abs(poly.degree - 382) <= 0.2 * 382

    def test_reference_degree_6610(self, poly_2x2):
        assert abs(poly_2x2.degree - 6610) <= 0.2 * 6610

    def test_degree_doubles_when_mu_halves(self):
        d1 = qsvt.fit_even_poly(qsvt.PolySpec(0.02, 0.5, 1e-3)).degree
        d2 = qsvt.fit_even_poly(qsvt.PolySpec(0.01, 0.5, 1e-3)).degree
        assert 1.6 <= d2 / d1 <= 2.4

    def test_degree_mu_product_constant(self):
        mus = (0.04, 0.02, 0.01, 0.005)
        prods = [qsvt.fit_even_poly(qsvt.PolySpec(mu, 0.5, 1e-3)).degree * mu
                 for mu in mus]
        assert max(prods) / min(prods) <= 1.3

    def test_degree_monotone_in_eps(self):
        degs = [qsvt.fit_even_poly(qsvt.PolySpec(0.01, 0.5, eps)).degree
                for eps in (1e-2, 1e-3, 1e-4)]
        assert degs[0] < degs[1] < degs[2]

    def test_fit_error_away_from_crossover(self):
        # chop-tolerance construction: the error is near eps away from the
        # crossover band but can exceed it inside (see decisions ledger)
        spec = qsvt.PolySpec(0.01, 0.5, 1e-3)
        poly = qsvt.fit_even_poly(spec)
        xs = np.array([0.2, 0.5, 0.9, 1.0])
        err = np.abs(qsvt.eval_poly(poly, xs) - qsvt.target_even(xs, spec))
        assert np.max(err) <= spec.eps

    def test_bounded_with_small_overshoot(self, poly_2x2):
        poly382 = qsvt.fit_even_poly(qsvt.PolySpec(0.01, 0.5, 1e-3))
        for poly in (poly_2x2, poly382):
            assert qsvt.sup_abs(poly) <= 1.0 + 50 * poly.spec.eps
        # clipping keeps every filter application a contraction
        assert np.max(np.abs(qsvt.filter_values(poly382, np.linspace(-1, 1, 2001)))) <= 1.0


class TestEval:
    def test_against_target_at_half(self):
        spec = qsvt.PolySpec(0.01, 0.5, 1e-3)
        poly = qsvt.fit_even_poly(spec)
        assert abs(qsvt.eval_poly(poly, 0.5) - qsvt.target_even(0.5, spec)) <= spec.eps

    def test_exactly_even(self, poly_2x2):
        assert qsvt.eval_poly(poly_2x2, 0.3) == qsvt.eval_poly(poly_2x2, -0.3)

    def test_constant_series(self, spec_2x2):
        poly = qsvt.FilterPoly(spec_2x2, np.array([0.7]))
        assert qsvt.eval_poly(poly, 0.123) == pytest.approx(0.7)
        assert poly.degree == 0

    def test_clenshaw_matches_numpy(self, spec_2x2):
        rng = np.random.default_rng(8)
        coeffs = rng.normal(size=40)
        poly = qsvt.FilterPoly(spec_2x2, coeffs)
        xs = rng.uniform(-1, 1, size=17)
        expect = np.polynomial.chebyshev.chebval(2 * xs**2 - 1, coeffs)
        assert np.allclose(qsvt.eval_poly(poly, xs), expect, atol=1e-12)


class TestApplyMatrix:
    def test_identity_matrix(self, poly_2x2):
        out = qsvt.apply_qsvt_matrix(fem.SymMatrix(np.eye(4)), 1.0, poly_2x2)
        expect = qsvt.eval_poly(poly_2x2, 1.0)
        assert np.allclose(out.entries, expect * np.eye(4), atol=1e-12)

    def test_zero_matrix_saturates(self, poly_2x2):
        out = qsvt.apply_qsvt_matrix(fem.SymMatrix(np.zeros((3, 3))), 1.0, poly_2x2)
        assert out.entries[0, 0] == pytest.approx(1.0, abs=5 * poly_2x2.spec.eps)

    def test_norm_violation(self, poly_2x2):
        with pytest.raises(ValueError):
            qsvt.apply_qsvt_matrix(fem.SymMatrix(3.0 * np.eye(2)), 1.0, poly_2x2)

    def test_exact_vs_polynomial_spectral_gap(self, spec_2x2, poly_2x2):
        # eigenvalues kept off the crossover band, where the fit is eps-close
        rng = np.random.default_rng(3)
        q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
        eigs = np.array([0.02, 0.1, 0.3, 0.5, 0.8, 1.0])
        m = fem.SymMatrix((q * eigs) @ q.T + ((q * eigs) @ q.T).T)
        m = fem.SymMatrix(m.entries / 2)
        a = qsvt.apply_qsvt_matrix(m, 1.0, spec_2x2).entries
        b = qsvt.apply_qsvt_matrix(m, 1.0, poly_2x2).entries
        assert np.abs(np.linalg.eigvalsh(a - b)).max() <= spec_2x2.eps

    def test_outputs_are_contractions(self, domain22, poly_2x2):
        k = fem.reduce_free(
            fem.assemble_global(domain22, fem.StructureConfig.all_solid(4)),
            domain22.fixed_dofs)
        out = qsvt.apply_qsvt_matrix(k, 4 * fem.element_norm(domain22.material),
                                     poly_2x2)
        assert np.abs(np.linalg.eigvalsh(out.entries)).max() <= 1.0 + 1e-12


class TestProjectorPhase:
    @staticmethod
    def _layout():
        return qsim.RegisterLayout((("q", 1), ("l", 1), ("v", 1), ("z", 1),
                                    ("b", 1), ("d", 3)))

    def test_phi_zero_is_identity(self):
        lay = self._layout()
        op = qsvt.projector_phase(lay, (1, 3), 0.0)
        mat = qsim.operator_matrix(lay, op)
        assert np.max(np.abs(mat - np.eye(2**lay.total_qubits))) <= 1e-12

    def test_phi_half_pi_signs(self):
        lay = self._layout()
        op = qsvt.projector_phase(lay, (1, 3), math.pi / 2)
        mat = qsim.operator_matrix(lay, op)
        diag = np.diag(mat)
        assert np.max(np.abs(mat - np.diag(diag))) <= 1e-12
        assert np.allclose(np.abs(diag.real), 0.0, atol=1e-12)
        # in-projector index: ancillas 0, d = 0 (not fixed) -> +i
        assert diag[0] == pytest.approx(1j)
        # fixed index d = 1 -> -i
        assert diag[1] == pytest.approx(-1j)

    def test_fixed_index_gets_conjugate_phase(self):
        lay = self._layout()
        phi = 0.37
        op = qsvt.projector_phase(lay, (5,), phi)
        st = qsim.basis_state(lay, d=5)
        qsim.apply(st, op)
        idx = st.register_value_index({"d": 5})
        assert st.amplitudes[idx] == pytest.approx(np.exp(-1j * phi))
        st2 = qsim.basis_state(lay, d=2)
        qsim.apply(st2, op)
        idx2 = st2.register_value_index({"d": 2})
        assert st2.amplitudes[idx2] == pytest.approx(np.exp(1j * phi))

    def test_ancilla_nonzero_outside_projector(self):
        lay = self._layout()
        phi = 0.81
        op = qsvt.projector_phase(lay, (), phi)
        st = qsim.basis_state(lay, v=1, d=2)
        qsim.apply(st, op)
        idx = st.register_value_index({"v": 1, "d": 2})
        assert st.amplitudes[idx] == pytest.approx(np.exp(-1j * phi))


class TestCircuitQsvt:
    @staticmethod
    def _encoding(m):
        u = blockenc.dilate_contraction(m)
        lay = qsim.RegisterLayout((("q", 1), ("b", 1), ("d", 2)))
        op = qsim.dense_op(u, lay.qubits("b") + lay.qubits("d"))
        spec = blockenc.ProjectorSpec(("b",), ())
        return blockenc.BlockEncoding(op, lay, spec, 1.0, 1.0, None), lay

    @staticmethod
    def _random_contraction(seed, norm=0.8):
        rng = np.random.default_rng(seed)
        m = rng.normal(size=(4, 4))
        m = (m + m.T) / 2
        return m * (norm / np.abs(np.linalg.eigvalsh(m)).max())

    def test_empty_phases_rejected(self, domain22):
        be = blockenc.global_blockencoding(domain22)
        with pytest.raises(ValueError):
            qsvt.circuit_qsvt(be, [])

    def test_degree_one_reproduces_block(self):
        m = self._random_contraction(1)
        be, lay = self._encoding(m)
        seq = qsvt.circuit_qsvt(be, qsvt.chebyshev_phases(1), lay)
        mat = qsim.operator_matrix(lay, seq)
        assert np.max(np.abs(mat[:4, :4] - m)) <= 1e-8

    def test_degree_two_chebyshev(self):
        m = self._random_contraction(2)
        be, lay = self._encoding(m)
        seq = qsvt.circuit_qsvt(be, qsvt.chebyshev_phases(2), lay)
        mat = qsim.operator_matrix(lay, seq)
        expect = 2 * m @ m - np.eye(4)
        assert np.max(np.abs(mat[:4, :4] - expect)) <= 1e-8

    def test_degree_three_chebyshev(self):
        m = self._random_contraction(5)
        be, lay = self._encoding(m)
        seq = qsvt.circuit_qsvt(be, qsvt.chebyshev_phases(3), lay)
        mat = qsim.operator_matrix(lay, seq)
        expect = 4 * np.linalg.matrix_power(m, 3) - 3 * m
        assert np.max(np.abs(mat[:4, :4] - expect)) <= 1e-8

    def test_on_global_encoding_with_modified_projector(self, domain22):
        # degree-2 sequence on U_K itself: block transforms as T2 of the
        # fixed-DoF-projected matrix on the projector subspace
        be = blockenc.global_blockencoding(domain22)
        lay = qsim.RegisterLayout((("q", 1),) + tuple(
            (n, w) for n, w in be.layout.registers if n != "c"))
        cfg = fem.StructureConfig.all_solid(4)
        op, red_lay = blockenc.config_operator(be, cfg)
        red_with_q = qsim.RegisterLayout((("q", 1),) + red_lay.registers)
        import dataclasses

        def shift(o):
            if o.kind == "product":
                return dataclasses.replace(
                    o, factors=tuple(shift(f) for f in o.factors))
            return dataclasses.replace(
                o, targets=tuple(t + 1 for t in o.targets),
                controls=tuple((c + 1, p) for c, p in o.controls))

        shifted = shift(op)
        be_q = blockenc.BlockEncoding(shifted, red_with_q,
                                      blockenc.ProjectorSpec(("l", "v", "z", "b"),
                                                             domain22.fixed_dofs),
                                      be.scale, be.delta, domain22)
        seq = qsvt.circuit_qsvt(be_q, qsvt.chebyshev_phases(2), red_with_q)
        nd = 2**red_with_q.width("d")
        cols = np.zeros((2**red_with_q.total_qubits, nd), dtype=complex)
        cols[np.arange(nd), np.arange(nd)] = 1.0
        got = qsim.apply_to_columns(red_with_q, seq, cols)[:nd, :]
        k = fem.assemble_global(domain22, cfg).entries
        keep = np.ones(18, dtype=bool)
        keep[list(domain22.fixed_dofs)] = False
        a = np.zeros((nd, nd))
        a[:18, :18] = np.where(np.outer(keep, keep), k, 0.0) / be.scale
        expect = 2 * a @ a - np.eye(nd)
        # compare on the projector subspace (ancillas 0, d outside fixed set)
        live = np.ones(nd, dtype=bool)
        live[list(domain22.fixed_dofs)] = False
        assert np.max(np.abs(got[np.ix_(live, live)]
                             - expect[np.ix_(live, live)])) <= 1e-8


def test_chebyshev_phase_lists():
    assert qsvt.chebyshev_phases(1) == [0.0]
    assert qsvt.chebyshev_phases(2) == [math.pi / 2, -math.pi / 2]
    assert len(qsvt.chebyshev_phases(7)) == 7
