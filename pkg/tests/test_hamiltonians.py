"""Operator tensors, MPO builders, and the hermiticity witness.

The load-bearing check is dense equivalence: contracting the assembled
MPO chain over its virtual legs must reproduce the exact Fock-space
Hamiltonian matrix, fermionic signs included, for every model and
every chain length up to six sites.
"""

import numpy as np
import pytest

from gradedtn import (
    GradedTensor,
    ModelParams,
    build_mpo,
    contract,
    creation_annihilation_spinless,
    hubbard_hopping_gate,
    hubbard_site_space,
    hubbard_word_matrices,
    mpo_hermiticity,
    spinless_site_space,
    to_dense,
)
from gradedtn.hamiltonians import _grid_mpo_tensor

from _fock import (
    dense_hubbard_chain,
    dense_kitaev_chain,
    fock_ops,
    sector_indices,
)

E, O = (0,), (1,)


def mpo_dense(mpo, d):
    """Dense Hamiltonian matrix of a finite MPO chain.

    The open physical legs come out in word order (kets left to right,
    then bras right to left); relabeling the bra axes back to site
    order and reshaping gives the matrix in the big-endian product
    basis of the graded site spaces.
    """
    n = mpo.n
    args = []
    for i, w in enumerate(mpo.tensors, start=1):
        args.append(w)
        args.append([100 + i, -i, -(2 * n + 1 - i), 100 + i + 1])
    args[1][0] = -(2 * n + 1)
    args[-1][-1] = -(2 * n + 2)
    dense = to_dense(contract(*args))
    assert dense.shape[-2:] == (1, 1)
    dense = dense[..., 0, 0]
    dense = np.moveaxis(
        dense, list(range(n, 2 * n)), list(range(2 * n - 1, n - 1, -1)))
    return dense.reshape(d ** n, d ** n)


def spinless_fock_perm(n):
    """Word index (big-endian site order) -> Fock bit index."""
    perm = np.zeros(2 ** n, dtype=int)
    for w in range(2 ** n):
        bits = [(w >> (n - 1 - s)) & 1 for s in range(n)]
        perm[w] = sum(b << s for s, b in enumerate(bits))
    return perm


# graded dense order of the hubbard site: |0>, |updown>, |down>, |up>
HUBBARD_OCC = {0: (0, 0), 1: (1, 1), 2: (0, 1), 3: (1, 0)}


def hubbard_fock_perm(n):
    """Word index -> Fock bit index with modes 2x (up), 2x+1 (down)."""
    perm = np.zeros(4 ** n, dtype=int)
    for w in range(4 ** n):
        f = 0
        for s in range(n):
            up, dn = HUBBARD_OCC[(w >> (2 * (n - 1 - s))) & 3]
            f |= up << (2 * s)
            f |= dn << (2 * s + 1)
        perm[w] = f
    return perm


class TestModelParams:
    def test_unknown_model(self):
        with pytest.raises(ValueError, match="unknown model"):
            ModelParams("heisenberg")

    def test_coupling_restrictions(self):
        with pytest.raises(ValueError, match="pairing"):
            ModelParams("hubbard", delta=0.5)
        with pytest.raises(ValueError, match="Hubbard U"):
            ModelParams("kitaev", u=1.0)

    def test_short_chain_rejected(self):
        with pytest.raises(ValueError, match="two sites"):
            ModelParams("kitaev", n=1)

    def test_no_mpo_for_2d_model(self):
        with pytest.raises(ValueError, match="no 1D MPO"):
            build_mpo(ModelParams("pwave"))


class TestOperatorTensors:
    def test_spinless_words_as_printed(self):
        ops = creation_annihilation_spinless()
        one = np.ones((1, 1, 1))
        assert set(ops.adag_l.blocks) == {(O, E, O)}
        np.testing.assert_array_equal(ops.adag_l.blocks[(O, E, O)], one)
        assert set(ops.a_r.blocks) == {(O, E, O)}
        np.testing.assert_array_equal(ops.a_r.blocks[(O, E, O)], one)
        assert set(ops.a_l.blocks) == {(E, O, O)}
        np.testing.assert_array_equal(ops.a_l.blocks[(E, O, O)], one)
        assert set(ops.adag_r.blocks) == {(O, O, E)}
        np.testing.assert_array_equal(ops.adag_r.blocks[(O, O, E)], one)

    def test_aux_legs_are_odd(self):
        ops = creation_annihilation_spinless()
        for t, aux_axis in zip(ops, (2, 0, 2, 0)):
            aux = t.legs[aux_axis]
            assert aux.sectors == (((1,), 1),)
            assert aux.dual == (aux_axis == 2)

    def test_hopping_term_matches_fock(self):
        # -t adag_l . a_r over the aux leg is -t adag_1 a_2; the word
        # tensor evaluated in the Fock basis must agree entry by entry
        t = 1.3
        ops = creation_annihilation_spinless()
        term = contract(ops.adag_l, [-1, -2, 1], ops.a_r, [1, -3, -4]) * (-t)
        dense = to_dense(term.permute([0, 2, 3, 1]))  # nested (k1, k2, b2, b1)
        dense = np.transpose(dense, (0, 1, 3, 2)).reshape(4, 4)
        adag = fock_ops(2)
        a = [m.T for m in adag]
        ref = -t * adag[0] @ a[1]
        perm = spinless_fock_perm(2)
        np.testing.assert_allclose(dense, ref[np.ix_(perm, perm)], atol=1e-14)

    def test_pairing_term_matches_fock(self):
        delta = 0.7
        ops = creation_annihilation_spinless()
        term = contract(ops.adag_l, [-1, -2, 1], ops.adag_r, [1, -3, -4])
        term = term * (-delta)
        dense = to_dense(term.permute([0, 2, 3, 1]))
        dense = np.transpose(dense, (0, 1, 3, 2)).reshape(4, 4)
        adag = fock_ops(2)
        ref = -delta * adag[0] @ adag[1]
        perm = spinless_fock_perm(2)
        np.testing.assert_allclose(dense, ref[np.ix_(perm, perm)], atol=1e-14)

    def test_hubbard_words_obey_car(self):
        w = hubbard_word_matrices()
        up, dn = w["adag_up"], w["adag_dn"]
        # on-site anticommutation is encoded in the word matrices
        np.testing.assert_allclose(up @ dn, -(dn @ up), atol=1e-14)
        np.testing.assert_allclose(up @ up, 0.0, atol=1e-14)
        np.testing.assert_allclose(
            up @ w["a_up"] + w["a_up"] @ up, np.eye(4), atol=1e-14)
        np.testing.assert_allclose(
            w["n_total"], up @ w["a_up"] + dn @ w["a_dn"], atol=1e-14)

    def test_hubbard_site_charges(self):
        space, ix = hubbard_site_space()
        # half-filling shift: singly occupied states carry charge 0
        assert space.sectors == (
            ((0, -1, 0), 1), ((0, 1, 0), 1), ((1, 0, -1), 1), ((1, 0, 1), 1))
        assert ix["0"] == 0 and ix["updown"] == 1
        assert ix["down"] == 2 and ix["up"] == 3


class TestDenseEquivalence:
    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_kitaev_chain(self, n):
        t, delta, mu = 1.0, 0.7, -0.4
        mpo = build_mpo(ModelParams("kitaev", t=t, mu=mu, delta=delta, n=n))
        hw = mpo_dense(mpo, 2)
        perm = spinless_fock_perm(n)
        ref = dense_kitaev_chain(n, t, delta, mu)[np.ix_(perm, perm)]
        assert hw.shape == (2 ** n, 2 ** n)
        np.testing.assert_allclose(hw, ref, atol=1e-13)

    def test_kitaev_n4_is_16x16(self):
        mpo = build_mpo(ModelParams("kitaev", t=1.0, mu=0.5, delta=1.0, n=4))
        hw = mpo_dense(mpo, 2)
        assert hw.shape == (16, 16)
        perm = spinless_fock_perm(4)
        ref = dense_kitaev_chain(4, 1.0, 1.0, 0.5)[np.ix_(perm, perm)]
        np.testing.assert_allclose(hw, ref, atol=1e-13)

    @pytest.mark.parametrize("n", [2, 3])
    def test_hopping_chain(self, n):
        t, mu = 0.9, 0.3
        mpo = build_mpo(ModelParams("hopping", t=t, mu=mu, n=n))
        hw = mpo_dense(mpo, 2)
        perm = spinless_fock_perm(n)
        ref = dense_kitaev_chain(n, t, 0.0, mu)[np.ix_(perm, perm)]
        np.testing.assert_allclose(hw, ref, atol=1e-13)

    @pytest.mark.parametrize("n,t,u,mu", [
        (2, 1.0, 4.0, 0.0),
        (3, 0.8, 2.5, 0.0),
        (3, 1.0, 10.0, 1.5),
        (4, 1.0, 3.0, 0.0),
    ])
    def test_hubbard_chain(self, n, t, u, mu):
        mpo = build_mpo(ModelParams("hubbard", t=t, u=u, mu=mu, n=n))
        hw = mpo_dense(mpo, 4)
        perm = hubbard_fock_perm(n)
        ref = dense_hubbard_chain(n, t, u, mu)[np.ix_(perm, perm)]
        np.testing.assert_allclose(hw, ref, atol=1e-12)

    def test_hubbard_two_site_ground_energy(self):
        # half-filled singlet of the 2-site chain: (U - sqrt(U^2+16t^2))/2
        u, t = 4.0, 1.0
        mpo = build_mpo(ModelParams("hubbard", t=t, u=u, n=2))
        hw = mpo_dense(mpo, 4)
        perm = hubbard_fock_perm(2)
        inv = np.argsort(perm)
        sel = inv[sector_indices(4, 2, sz2=0)]
        block = hw[np.ix_(sel, sel)]
        e0 = np.linalg.eigvalsh(block)[0]
        assert abs(e0 - (u - np.sqrt(u * u + 16 * t * t)) / 2) < 1e-12

    def test_zero_couplings_vanish(self):
        mpo = build_mpo(ModelParams("kitaev", t=0.0, mu=0.0, delta=0.0, n=3))
        np.testing.assert_allclose(mpo_dense(mpo, 2), 0.0, atol=1e-15)
        mpo = build_mpo(ModelParams("hubbard", t=0.0, u=0.0, n=2))
        np.testing.assert_allclose(mpo_dense(mpo, 4), 0.0, atol=1e-15)

    def test_hopping_gate_matches_fock(self):
        # the gate is a word tensor (k1, b1, k2, b2); moving the bras to
        # the nested order (k1, k2, b2, b1) is a graded permute, and only
        # then do the dense entries read as Fock matrix elements
        t = 1.1
        h2 = hubbard_hopping_gate(t).permute([0, 2, 3, 1])
        dense = to_dense(h2)
        dense = np.transpose(dense, (0, 1, 3, 2)).reshape(16, 16)
        adag = fock_ops(4)
        a = [m.T for m in adag]
        ref = np.zeros((16, 16))
        for sp in range(2):
            ref -= t * (adag[sp] @ a[2 + sp] + adag[2 + sp] @ a[sp])
        perm = hubbard_fock_perm(2)
        np.testing.assert_allclose(dense, ref[np.ix_(perm, perm)], atol=1e-13)


class TestMpoStructure:
    def test_kitaev_virtual_channels(self):
        w = build_mpo(ModelParams("kitaev", t=1.0, mu=0.2, delta=0.3)).tensor
        assert w.legs[0].sectors == (((0,), 2), ((1,), 4))
        assert not w.legs[0].dual and w.legs[3].dual

    def test_hubbard_bond_sectors(self):
        u = build_mpo(ModelParams("hubbard", t=1.0, u=4.0))
        v = u.tensor.legs[0]
        odd = [(c, d) for c, d in v.sectors if c[0] == 1]
        assert sorted(c for c, _ in odd) == [
            (1, -1, -1), (1, -1, 1), (1, 1, -1), (1, 1, 1)]
        assert all(d == 1 for _, d in odd)
        assert v.degeneracy((0, 0, 0)) == 2

    def test_uniform_channel_bookkeeping(self):
        u = build_mpo(ModelParams("kitaev", t=1.0, mu=0.2, delta=0.3))
        assert u.nchannels == 6
        assert u.channels[0] == (0,) and u.channels[-1] == (0,)
        assert u.lpos == u.rpos
        assert u.lpos[0] == ((0,), 0) and u.lpos[5] == ((0,), 1)

    def test_global_neutrality(self):
        for params in (ModelParams("kitaev", t=1.0, mu=0.4, delta=0.2, n=4),
                       ModelParams("hubbard", t=1.0, u=2.0, n=3)):
            for w in build_mpo(params):
                for key in w.blocks:
                    total = np.zeros(len(key[0]), dtype=int)
                    for leg, c in zip(w.legs, key):
                        eff = np.array(leg.effective_charge(c))
                        total = total + eff
                    assert total[0] % 2 == 0
                    assert not total[1:].any()

    def test_odd_operator_rejected_as_mpo(self):
        # a bare creation operator cannot sit between even channels
        p = spinless_site_space()
        adag = np.zeros((2, 2), dtype=complex)
        adag[1, 0] = 1.0
        with pytest.raises(ValueError):
            _grid_mpo_tensor(p, [E], [E], {(0, 0): adag})


class TestHermiticityWitness:
    @pytest.mark.parametrize("params", [
        ModelParams("kitaev", t=1.0, mu=-0.5, delta=0.7),
        ModelParams("kitaev", t=1.0, mu=2.0, delta=1.0),
        ModelParams("hopping", t=1.0, mu=0.3),
        ModelParams("hubbard", t=1.0, u=4.0),
        ModelParams("hubbard", t=0.7, u=1.0, mu=0.4),
    ])
    def test_builders_are_hermitian(self, params):
        w = build_mpo(params).tensor
        res = mpo_hermiticity(w)
        assert res.hermitian
        assert res.residual < 1e-10
        assert res.flipper is not None

    def test_witness_solves_gauge_equation(self):
        from gradedtn.hamiltonians import _mirror_conjugate
        o = build_mpo(ModelParams("kitaev", t=1.0, mu=-0.5, delta=0.7)).tensor
        res = mpo_hermiticity(o)
        g = res.flipper
        m = _mirror_conjugate(o)
        diff = contract(m, [-1, -2, -3, 1], g, [1, -4]) \
            - contract(g, [-1, 1], o, [1, -2, -3, -4])
        assert diff.norm() < 1e-12 * o.norm()

    def test_identity_mpo_identity_flipper(self):
        p = spinless_site_space()
        ident = _grid_mpo_tensor(p, [E], [E], {(0, 0): np.eye(2, dtype=complex)})
        res = mpo_hermiticity(ident)
        assert res.hermitian
        np.testing.assert_allclose(to_dense(res.flipper), [[1.0]], atol=1e-12)

    def test_complex_coupling_needs_conjugation(self):
        p = spinless_site_space()
        adag = np.zeros((2, 2), dtype=complex)
        adag[1, 0] = 1.0
        a = adag.T.copy()
        eye = np.eye(2, dtype=complex)
        tc = 0.8 + 0.6j
        ch = [E, O, O, E]
        good = _grid_mpo_tensor(p, ch, ch, {
            (0, 0): eye, (3, 3): eye,
            (0, 1): -tc * adag, (1, 3): a,
            (0, 2): np.conj(tc) * a, (2, 3): adag})
        assert mpo_hermiticity(good).hermitian
        # dropping the conjugate twists the chain by a phase; the local
        # gauge equation still has solutions, but none fix the boundary
        bad = _grid_mpo_tensor(p, ch, ch, {
            (0, 0): eye, (3, 3): eye,
            (0, 1): -tc * adag, (1, 3): a,
            (0, 2): tc * a, (2, 3): adag})
        assert not mpo_hermiticity(bad).hermitian

    def test_one_sided_hopping_rejected(self):
        p = spinless_site_space()
        adag = np.zeros((2, 2), dtype=complex)
        adag[1, 0] = 1.0
        a = adag.T.copy()
        eye = np.eye(2, dtype=complex)
        w = _grid_mpo_tensor(p, [E, O, E], [E, O, E], {
            (0, 0): eye, (2, 2): eye, (0, 1): -1.0 * adag, (1, 2): a})
        res = mpo_hermiticity(w)
        assert not res.hermitian
        assert res.flipper is None

    def test_antihermitian_rejected(self):
        p = spinless_site_space()
        adag = np.zeros((2, 2), dtype=complex)
        adag[1, 0] = 1.0
        a = adag.T.copy()
        eye = np.eye(2, dtype=complex)
        ch = [E, O, O, E]
        w = _grid_mpo_tensor(p, ch, ch, {
            (0, 0): eye, (3, 3): eye,
            (0, 1): -1j * adag, (1, 3): a,
            (0, 2): 1j * a, (2, 3): adag})
        assert not mpo_hermiticity(w).hermitian
