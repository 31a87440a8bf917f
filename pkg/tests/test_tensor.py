import numpy as np
import pytest

from gradedtn import (
    GradedSpace,
    GradedTensor,
    contract,
    fused_space,
    inner,
    koszul_sign,
    parity_space,
    tensor_bytes,
    tensor_from_bytes,
    to_dense,
)
from gradedtn.charges import fusion_layout
from gradedtn.serialization import load_tensors, save_tensors

from _util import rand_feasible_tensor, rand_space


class TestKoszul:
    def test_no_odd_no_sign(self):
        assert koszul_sign([0, 0, 0], [2, 1, 0]) == 1

    def test_single_odd_pair_swap(self):
        assert koszul_sign([1, 1], [1, 0]) == -1
        assert koszul_sign([1, 0], [1, 0]) == 1

    def test_three_odd_reversal(self):
        # reversing three odd legs needs three transpositions
        assert koszul_sign([1, 1, 1], [2, 1, 0]) == -1

    def test_identity_perm(self):
        assert koszul_sign([1, 0, 1, 1], [0, 1, 2, 3]) == 1


class TestPermute:
    def test_double_swap_is_identity(self):
        rng = np.random.default_rng(0)
        t = rand_feasible_tensor(rng, 3, n_u1=1)
        p = t.permute([2, 0, 1]).permute([1, 2, 0])
        assert (p - t).norm() == 0

    def test_odd_odd_swap_negates(self):
        v = GradedSpace([((1,), 1)])
        t = GradedTensor(
            (v, v.dualize()), {((1,), (1,)): np.array([[2.0 + 0j]])}
        )
        s = t.permute([1, 0])
        assert s.block(((1,), (1,)))[0, 0] == -2.0

    def test_even_block_unchanged(self):
        v = parity_space(1, 1)
        t = GradedTensor.random_even([v, v.dualize()], np.random.default_rng(1))
        s = t.permute([1, 0])
        k = ((0,), (0,))
        assert np.allclose(s.block(k), t.block(k).T)

    def test_norm_preserved(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            t = rand_feasible_tensor(rng, 4, n_u1=0)
            perm = list(rng.permutation(4))
            assert t.permute(perm).norm() == pytest.approx(t.norm(), rel=1e-13)


class TestConjugate:
    def test_involution(self):
        rng = np.random.default_rng(3)
        t = rand_feasible_tensor(rng, 3, n_u1=1)
        assert (t.conjugate().conjugate() - t).norm() == 0

    def test_reverses_and_dualizes_legs(self):
        rng = np.random.default_rng(4)
        t = rand_feasible_tensor(rng, 3)
        c = t.conjugate()
        assert c.legs == tuple(l.dualize() for l in reversed(t.legs))

    def test_norm_preserved(self):
        rng = np.random.default_rng(5)
        t = rand_feasible_tensor(rng, 2, n_u1=1)
        assert t.conjugate().norm() == pytest.approx(t.norm(), rel=1e-13)


class TestParity:
    def test_involution(self):
        rng = np.random.default_rng(6)
        t = rand_feasible_tensor(rng, 3)
        assert (t.apply_parity().apply_parity() - t).norm() == 0

    def test_acts_on_bra_legs_only(self):
        v = parity_space(1, 1)
        t = GradedTensor.random_even([v, v.dualize()], np.random.default_rng(7))
        p = t.apply_parity()
        odd = ((1,), (1,))
        assert np.allclose(p.block(odd), -t.block(odd))
        even = ((0,), (0,))
        assert np.allclose(p.block(even), t.block(even))

    def test_matches_parity_operator_contraction(self):
        rng = np.random.default_rng(8)
        v = parity_space(2, 1)
        w = parity_space(1, 2)
        t = GradedTensor.random_even([v, w.dualize()], rng)
        pop = GradedTensor.parity_operator(w)
        via_op = contract(t, [-1, 1], pop, [1, -2])
        assert (via_op - t.apply_parity()).norm() < 1e-14


class TestFlip:
    @pytest.mark.parametrize("dagger", [False, True])
    def test_roundtrip_identity(self, dagger):
        rng = np.random.default_rng(9)
        t = rand_feasible_tensor(rng, 3, n_u1=1)
        for k in range(3):
            r = t.flip_arrow(k, use_dagger=dagger).flip_arrow(k, use_dagger=dagger)
            assert (r - t).norm() == 0

    def test_mixed_roundtrip_is_parity(self):
        # flip then dagger-flip composes to the parity dressing of that leg
        rng = np.random.default_rng(10)
        t = rand_feasible_tensor(rng, 2, n_u1=0)
        r = t.flip_arrow(0).flip_arrow(0, use_dagger=True)
        d = t.apply_parity([0])
        assert (r - d).norm() == 0

    def test_norm_preserved(self):
        rng = np.random.default_rng(11)
        t = rand_feasible_tensor(rng, 3)
        assert t.flip_arrow(1).norm() == pytest.approx(t.norm(), rel=1e-13)

    def test_explicit_flipper_tensor(self):
        # native flips agree with contracting an explicit two-leg flipper:
        # ket->bra carries plain identity entries, bra->ket the parity signs
        rng = np.random.default_rng(12)
        for dual in (False, True):
            sp = rand_space(rng, n_u1=1, max_sectors=4, max_dim=2, dual=dual)
            t = None
            for _ in range(100):
                t = GradedTensor.random_even([rand_space(rng, 1, 4, 2), sp], rng)
                if t.blocks:
                    break
            assert t.blocks
            mate = sp.dualize()
            flipped = GradedSpace(
                [(
                    (c[0], *(-q for q in c[1:])), d
                ) for c, d in sp.sectors],
                not sp.dual,
            )
            blocks = {}
            for c, d in sp.sectors:
                cf = (c[0], *(-q for q in c[1:]))
                sign = 1.0 if not sp.dual else (-1.0 if c[0] else 1.0)
                blocks[(c, cf)] = sign * np.eye(d).astype(complex)
            f = GradedTensor((mate, flipped), blocks)
            via = contract(t, [-1, 1], f, [1, -2])
            assert (via - t.flip_arrow(1)).norm() < 1e-14


class TestFuse:
    def test_split_inverts_fuse(self):
        rng = np.random.default_rng(13)
        for n_u1 in (0, 1):
            for dual in (False, True):
                t = rand_feasible_tensor(rng, 4, n_u1=n_u1)
                f, rec = t.fuse_legs(1, 2, dual=dual)
                assert f.nlegs == 3
                back = f.split_legs(rec)
                assert (back - t).norm() == 0

    def test_norm_invariant(self):
        rng = np.random.default_rng(14)
        t = rand_feasible_tensor(rng, 3, n_u1=1)
        f, _ = t.fuse_legs(0, 3)
        assert f.norm() == pytest.approx(t.norm(), rel=1e-13)

    def test_fused_entries_are_raw_entries(self):
        # the canonical fuser is chosen so fusing is a pure relayout: each
        # fused block is the concatenation of the original blocks, with no
        # signs anywhere
        rng = np.random.default_rng(15)
        t = rand_feasible_tensor(rng, 2, n_u1=0, max_sectors=2, max_dim=2)
        f, rec = t.fuse_legs(0, 2)
        layout = fusion_layout(t.legs)
        for key, arr in t.blocks.items():
            c, off, size = layout[key]
            fl = f.legs[0]
            stored = [l for l in fl.charges() if fl.effective_charge(l) == c][0]
            blk = f.block((stored,))
            assert np.array_equal(blk[off:off + size], arr.reshape(-1))

    def test_explicit_fuser_tensor(self):
        # dual route: contracting with the explicit fuser tensor reproduces
        # the native fuse; the fuser entry on charges (c1, c2) is
        # (-1)^(p1 p2 + p1[ket1] + p2[ket2]) on the identity layout
        rng = np.random.default_rng(16)
        for trial in range(8):
            n_u1 = trial % 2
            t = rand_feasible_tensor(rng, 3, n_u1=n_u1)
            native, rec = t.fuse_legs(1, 2)
            l1, l2 = t.legs[1], t.legs[2]
            layout = fusion_layout([l1, l2])
            fused = rec.fused
            blocks = {}
            for (c1, c2), (cf, off, size) in layout.items():
                p1, p2 = c1[0], c2[0]
                sign = (-1.0) ** (
                    p1 * p2
                    + p1 * (not l1.dual)
                    + p2 * (not l2.dual)
                )
                stored = (
                    (cf[0], *(-q for q in cf[1:])) if fused.dual else cf
                )
                d1, d2 = l1.degeneracy(c1), l2.degeneracy(c2)
                df = fused.degeneracy(stored)
                arr = np.zeros((d1, d2, df), dtype=complex)
                eye = np.eye(d1 * d2).reshape(d1, d2, d1 * d2)
                arr[:, :, off:off + size] = sign * eye
                blocks[(c1, c2, stored)] = arr
            f = GradedTensor((l1.dualize(), l2.dualize(), fused), blocks)
            via = contract(t, [-1, 1, 2], f, [1, 2, -2])
            assert (via - native).norm() < 1e-13


class TestInnerAndNorm:
    def test_inner_is_blockwise_overlap(self):
        rng = np.random.default_rng(17)
        v, w = parity_space(2, 1), parity_space(1, 2, dual=True)
        a = GradedTensor.random_even([v, w], rng)
        b = GradedTensor.random_even([v, w], rng)
        direct = sum(
            np.vdot(a.blocks[k], b.blocks[k])
            for k in a.blocks if k in b.blocks
        )
        assert inner(a, b) == pytest.approx(direct, rel=1e-13)

    def test_norm_is_frobenius_of_dense(self):
        rng = np.random.default_rng(18)
        t = rand_feasible_tensor(rng, 3, n_u1=1)
        assert t.norm() == pytest.approx(np.linalg.norm(to_dense(t)), rel=1e-12)

    def test_inner_via_dressed_contraction(self):
        # <A,B> = C(conj(A) x P-dressed B) contracted leg by leg
        rng = np.random.default_rng(19)
        v, w = parity_space(1, 1), parity_space(2, 1, dual=True)
        a = GradedTensor.random_even([v, w], rng)
        b = GradedTensor.random_even([v, w], rng)
        bp = b.apply_parity()
        val = contract(a.conjugate(), [2, 1], bp, [1, 2])
        assert val.item() == pytest.approx(inner(a, b), rel=1e-12)


class TestSerialization:
    def test_roundtrip_bit_exact(self):
        rng = np.random.default_rng(20)
        for n_u1 in (0, 1, 2):
            t = rand_feasible_tensor(rng, 3, n_u1=n_u1)
            r = tensor_from_bytes(tensor_bytes(t))
            assert r.legs == t.legs
            assert set(r.blocks) == set(t.blocks)
            for k in t.blocks:
                assert np.array_equal(r.blocks[k], t.blocks[k])
                assert r.blocks[k].dtype == np.complex128

    def test_file_roundtrip(self, tmp_path):
        rng = np.random.default_rng(21)
        ts = [rand_feasible_tensor(rng, 2, n_u1=1) for _ in range(3)]
        path = tmp_path / "state.gtn"
        save_tensors(ts, path)
        back = load_tensors(path)
        assert len(back) == 3
        for a, b in zip(ts, back):
            assert a.legs == b.legs
            for k in a.blocks:
                assert np.array_equal(a.blocks[k], b.blocks[k])

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            tensor_from_bytes(b"NOPE" + b"\x00" * 32)


class TestValidation:
    def test_non_neutral_block_rejected(self):
        v = parity_space(1, 1)
        with pytest.raises(ValueError):
            GradedTensor((v, v), {((1,), (0,)): np.zeros((1, 1), complex)})

    def test_wrong_shape_rejected(self):
        v = parity_space(1, 1)
        with pytest.raises(ValueError):
            GradedTensor(
                (v, v.dualize()), {((0,), (0,)): np.zeros((2, 2), complex)}
            )

    def test_even_global_charge_enforced_with_u1(self):
        v = GradedSpace([((1, 1), 1)])
        # (1,1) + (1,1) is u1-charged: not allowed on (ket, ket)
        with pytest.raises(ValueError):
            GradedTensor((v, v), {((1, 1), (1, 1)): np.zeros((1, 1), complex)})
        # against the dual it is neutral
        GradedTensor((v, v.dualize()), {((1, 1), (1, 1)): np.ones((1, 1), complex)})
