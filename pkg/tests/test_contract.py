import itertools

import numpy as np
import pytest

from gradedtn import (
    ContractionPlan,
    GradedSpace,
    GradedTensor,
    contract,
    dense_evaluate,
    parity_space,
    to_dense,
)

from _util import interleave, rand_feasible_tensor, rand_network, rand_space
from _word_oracle import word_contract


def _dense_of(result):
    if isinstance(result, GradedTensor):
        return to_dense(result)
    return np.asarray(result)


class TestTraces:
    def test_supertrace_of_identity(self):
        # the ket-bra identity closes into the supertrace: d_even - d_odd
        ident = GradedTensor.identity(parity_space(1, 1))
        assert contract(ident, [1, 1]).item() == pytest.approx(0.0)
        ident = GradedTensor.identity(parity_space(3, 1))
        assert contract(ident, [1, 1]).item() == pytest.approx(2.0)

    def test_standard_trace_needs_bra_ket_order(self):
        # an identity defined with the bra leg first closes into the
        # standard trace d_even + d_odd; note that merely permuting the
        # ket-bra identity picks up the Koszul sign and keeps the supertrace
        v = parity_space(1, 1)
        blocks = {
            ((0,), (0,)): np.eye(1, dtype=complex),
            ((1,), (1,)): np.eye(1, dtype=complex),
        }
        ident_rev = GradedTensor((v.dualize(), v), blocks)
        assert contract(ident_rev, [1, 1]).item() == pytest.approx(2.0)
        permuted = GradedTensor.identity(v).permute([1, 0])
        assert contract(permuted, [1, 1]).item() == pytest.approx(0.0)

    def test_parity_dressing_restores_trace(self):
        v = parity_space(2, 3)
        ident = GradedTensor.identity(v)
        dressed = ident.apply_parity()
        assert contract(dressed, [1, 1]).item() == pytest.approx(5.0)

    def test_supertrace_of_parity_operator(self):
        v = parity_space(2, 3)
        pop = GradedTensor.parity_operator(v)
        assert contract(pop, [1, 1]).item() == pytest.approx(5.0)


class TestWorkedExample:
    """The three-tensor density-matrix update used as the motivating
    network: rho' = contract(B, [-1,3,1], rho, [1,2], A, [2,3,-2])."""

    def _tensors(self, seed, arrows):
        rng = np.random.default_rng(seed)
        av, bv, pv = arrows
        vr = rand_space(rng, n_u1=0, max_sectors=2, max_dim=2, dual=pv)
        vp = rand_space(rng, n_u1=0, max_sectors=2, max_dim=2, dual=av)
        vl = rand_space(rng, n_u1=0, max_sectors=2, max_dim=2, dual=bv)
        for _ in range(100):
            b = GradedTensor.random_even(
                [rand_space(rng, 0, 2, 2), vp.dualize(), vr.dualize()], rng
            )
            rho = GradedTensor.random_even([vr, vl], rng)
            a = GradedTensor.random_even(
                [vl.dualize(), vp, rand_space(rng, 0, 2, 2)], rng
            )
            if b.blocks and rho.blocks and a.blocks:
                return b, rho, a
        raise RuntimeError

    @pytest.mark.parametrize("arrows", list(itertools.product([False, True], repeat=3)))
    def test_argument_order_irrelevant(self, arrows):
        b, rho, a = self._tensors(42, arrows)
        args = [(b, [-1, 3, 1]), (rho, [1, 2]), (a, [2, 3, -2])]
        results = []
        for perm in itertools.permutations(args):
            flat = []
            for t, l in perm:
                flat += [t, l]
            results.append(contract(*flat))
        for r in results[1:]:
            assert (r - results[0]).norm() < 1e-13

    def test_matches_dense_oracle(self):
        b, rho, a = self._tensors(7, (False, True, False))
        out = contract(b, [-1, 3, 1], rho, [1, 2], a, [2, 3, -2])
        ref = dense_evaluate(b, [-1, 3, 1], rho, [1, 2], a, [2, 3, -2])
        assert np.allclose(to_dense(out), ref, atol=1e-13)


class TestOracleEquivalence:
    @pytest.mark.parametrize("n_u1", [0, 1])
    def test_random_networks(self, n_u1):
        rng = np.random.default_rng(100 + n_u1)
        for _ in range(60):
            tensors, labels = rand_network(rng, n_u1=n_u1)
            res = contract(*interleave(tensors, labels))
            ref = dense_evaluate(*interleave(tensors, labels))
            got = _dense_of(res)
            scale = max(np.abs(ref).max(), 1.0)
            assert np.abs(got - ref).max() <= 1e-12 * scale

    def test_argument_reordering(self):
        rng = np.random.default_rng(200)
        for _ in range(25):
            tensors, labels = rand_network(rng, max_tensors=4)
            base = contract(*interleave(tensors, labels))
            order = rng.permutation(len(tensors))
            args = interleave(
                [tensors[i] for i in order], [labels[i] for i in order]
            )
            again = contract(*args)
            if isinstance(base, GradedTensor):
                assert (again - base).norm() < 1e-12 * max(base.norm(), 1.0)
            else:
                assert abs(again.item() - base.item()) < 1e-12

    def test_word_oracle_pins_dense_oracle(self):
        # the vectorized brute-force evaluator agrees with a literal
        # slot-by-slot Koszul simulation on micro networks
        rng = np.random.default_rng(300)
        for _ in range(12):
            tensors, labels = rand_network(
                rng, max_tensors=3, max_legs=3, max_dim=2, grid_limit=2**10
            )
            ref = dense_evaluate(*interleave(tensors, labels))
            lit = word_contract(tensors, labels)
            assert np.allclose(ref, lit, atol=1e-12)


class TestAlgebraicProperties:
    def test_conjugation_commutes_mirrored(self):
        # conj(C(A x B)) = C(conj(B) x conj(A)) with the mirrored plan
        rng = np.random.default_rng(400)
        for _ in range(10):
            sh = rand_space(rng, n_u1=1)
            for _ in range(100):
                a = GradedTensor.random_even(
                    [rand_space(rng, 1), sh, rand_space(rng, 1)], rng
                )
                b = GradedTensor.random_even(
                    [sh.dualize(), rand_space(rng, 1)], rng
                )
                if a.blocks and b.blocks:
                    break
            lhs = contract(a, [-1, 1, -2], b, [1, -3]).conjugate()
            # mirrored: reversed tensor order, reversed outputs
            rhs = contract(b.conjugate(), [-1, 1], a.conjugate(), [-2, 1, -3])
            assert (lhs - rhs).norm() < 1e-13

    def test_parity_does_not_commute_with_contraction(self):
        # dressing the inputs with P and contracting differs from
        # contracting first: the witness uses an odd contracted leg
        v = parity_space(1, 1)
        rng = np.random.default_rng(500)
        for _ in range(100):
            a = GradedTensor.random_even([v, v.dualize()], rng)
            b = GradedTensor.random_even([v, v.dualize()], rng)
            if a.blocks and b.blocks:
                break
        plain = contract(a, [-1, 1], b, [1, -2])
        dressed_inputs = contract(
            a.apply_parity(), [-1, 1], b.apply_parity(), [1, -2]
        )
        assert (dressed_inputs - plain.apply_parity()).norm() > 1e-8

    def test_result_is_globally_neutral(self):
        rng = np.random.default_rng(600)
        for _ in range(10):
            tensors, labels = rand_network(rng, n_u1=1, max_tensors=3)
            res = contract(*interleave(tensors, labels))
            if isinstance(res, GradedTensor):
                # reconstruct with validation on
                GradedTensor(res.legs, res.blocks, validate=True)

    def test_scalar_network_returns_scalar_tensor(self):
        v = parity_space(1, 1)
        rng = np.random.default_rng(700)
        a = GradedTensor.random_even([v, v.dualize()], rng)
        out = contract(a, [1, 1])
        assert out.nlegs == 0
        assert isinstance(out.item(), complex)


class TestPlanValidation:
    def test_dangling_positive_label(self):
        v = parity_space(1, 1)
        a = GradedTensor.random_even([v, v.dualize()], np.random.default_rng(0))
        with pytest.raises(ValueError):
            contract(a, [1, -1])

    def test_label_used_three_times(self):
        v = parity_space(1, 1)
        rng = np.random.default_rng(1)
        a = GradedTensor.random_even([v, v.dualize()], rng)
        b = GradedTensor.random_even([v, v.dualize()], rng)
        with pytest.raises(ValueError):
            contract(a, [1, 1], b, [1, -1])

    def test_noncontiguous_output_labels(self):
        v = parity_space(1, 1)
        a = GradedTensor.random_even([v, v.dualize()], np.random.default_rng(2))
        with pytest.raises(ValueError):
            contract(a, [-1, -3])

    def test_mismatched_spaces(self):
        rng = np.random.default_rng(3)
        a = GradedTensor.random_even(
            [parity_space(1, 1), parity_space(2, 1, dual=True)], rng
        )
        b = GradedTensor.random_even(
            [parity_space(1, 1), parity_space(1, 1, dual=True)], rng
        )
        with pytest.raises(ValueError):
            contract(a, [-1, 1], b, [1, -2])

    def test_same_arrow_pairing_rejected(self):
        v = parity_space(1, 1)
        rng = np.random.default_rng(4)
        a = GradedTensor.random_even([v, v.dualize()], rng)
        b = GradedTensor.random_even([v, v.dualize()], rng)
        # label 1 on two ket legs
        with pytest.raises(ValueError):
            contract(a, [1, -1], b, [1, -2])

    def test_plan_object_roundtrip(self):
        v = parity_space(1, 1)
        rng = np.random.default_rng(5)
        a = GradedTensor.random_even([v, v.dualize()], rng)
        b = GradedTensor.random_even([v, v.dualize()], rng)
        plan = ContractionPlan([[-1, 1], [1, -2]])
        from gradedtn import contract_plan

        r1 = contract_plan(plan, [a, b])
        r2 = contract(a, [-1, 1], b, [1, -2])
        assert (r1 - r2).norm() == 0
