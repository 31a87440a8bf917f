"""Symmetric operator tensors and Schur-form MPO builders.

Operators that change fermion parity (or any U(1) charge) are stored as
even tensors with an odd-charged auxiliary leg; a matched pair of such
tensors contracted over the auxiliary leg yields the two-site terms of
the benchmark Hamiltonians. MPO tensors keep the finite-state-machine
layout (identity-in channel first, identity-out channel last, operator
channels in between) as a matrix of local operator words over the
virtual channel legs.

Conventions: an MPO tensor has legs (left virtual ket, physical ket,
physical bra, right virtual bra) and its blocks hold the plain operator
entries of the word form |left)|alpha><beta|(right|. Composing channels
through the canonical pairing then reproduces the Hamiltonian terms
with all fermionic signs emerging from the contraction itself, so the
stored entries match the printed finite-state-machine tables entry for
entry. Creation/annihilation channels at the left position of a term
carry a bra auxiliary leg and their right partners a ket leg; the gauge
freedom on that internal leg (any invertible map and its inverse) is
frozen to the identity.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .charges import GradedSpace, parity_space, trivial_charge
from .decomp import TruncationSpec, svd
from .network import contract
from .reference import to_dense
from .tensor import GradedTensor

_MODELS = ("kitaev", "hubbard", "hopping", "pwave")


@dataclass(frozen=True)
class ModelParams:
    """Couplings of a benchmark model; n = None means an infinite chain."""

    model: str
    t: float = 1.0
    mu: float = 0.0
    delta: float = 0.0
    u: float = 0.0
    n: int | None = None

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.model in ("hubbard", "hopping") and self.delta != 0.0:
            raise ValueError(f"{self.model} does not take a pairing strength")
        if self.model != "hubbard" and self.u != 0.0:
            raise ValueError(f"{self.model} does not take a Hubbard U")
        if self.n is not None and self.n < 2:
            raise ValueError("finite chains need at least two sites")


# -- elementary operator tensors ---------------------------------------------

SpinlessOps = namedtuple("SpinlessOps", "adag_l a_r a_l adag_r")


def spinless_site_space() -> GradedSpace:
    return parity_space(1, 1)


def creation_annihilation_spinless() -> SpinlessOps:
    """The four parity-odd operator tensors for spinless fermions.

    Word forms (aux is the one-dimensional odd space):
        adag_l = |1><0|(1|      legs (phys ket, phys bra, aux bra)
        a_r    = |1)|0><1|      legs (aux ket, phys ket, phys bra)
        a_l    = |0><1|(1|      legs (phys ket, phys bra, aux bra)
        adag_r = |1)|1><0|      legs (aux ket, phys ket, phys bra)

    Contracting adag_l with a_r over the aux leg and scaling by -t gives
    -t |1>|0><1|<0|, the first hopping term; a_l with adag_r gives the
    conjugate term. Mixing the pairs produces pairing terms.
    """
    p = spinless_site_space()
    aux = parity_space(0, 1)
    e, o = (0,), (1,)
    one = np.ones((1, 1, 1), dtype=complex)
    adag_l = GradedTensor((p, p.dualize(), aux.dualize()), {(o, e, o): one})
    a_r = GradedTensor((aux, p, p.dualize()), {(o, e, o): one})
    a_l = GradedTensor((p, p.dualize(), aux.dualize()), {(e, o, o): one})
    adag_r = GradedTensor((aux, p, p.dualize()), {(o, o, e): one})
    return SpinlessOps(adag_l, a_r, a_l, adag_r)


def hubbard_site_space():
    """Physical space of one spin-1/2 fermion site in fZ2 x U(1) x U(1).

    Charges are (parity, particle number - 1, 2 Sz); the shift by one
    unit of charge makes the half-filled state neutral. Returns the
    space and the dense position of each basis state.
    """
    sectors = [((0, -1, 0), 1), ((0, 1, 0), 1), ((1, 0, -1), 1), ((1, 0, 1), 1)]
    space = GradedSpace(sectors, False)
    index = {
        "0": space.offset((0, -1, 0)),
        "updown": space.offset((0, 1, 0)),
        "down": space.offset((1, 0, -1)),
        "up": space.offset((1, 0, 1)),
    }
    return space, index


def hubbard_word_matrices():
    """Dense single-site operator words in the hubbard_site_space basis.

    The doubly occupied state is adag_up adag_dn |0>, which fixes the
    fermionic minus signs in the spin-down operators.
    """
    _, ix = hubbard_site_space()
    d = 4
    adag_up = np.zeros((d, d), dtype=complex)
    adag_up[ix["up"], ix["0"]] = 1.0
    adag_up[ix["updown"], ix["down"]] = 1.0
    adag_dn = np.zeros((d, d), dtype=complex)
    adag_dn[ix["down"], ix["0"]] = 1.0
    adag_dn[ix["updown"], ix["up"]] = -1.0
    n_updown = np.zeros((d, d), dtype=complex)
    n_updown[ix["updown"], ix["updown"]] = 1.0
    n_total = np.zeros((d, d), dtype=complex)
    for name, cnt in (("0", 0), ("up", 1), ("down", 1), ("updown", 2)):
        n_total[ix[name], ix[name]] = cnt
    return {
        "adag_up": adag_up,
        "adag_dn": adag_dn,
        "a_up": adag_up.T.copy(),
        "a_dn": adag_dn.T.copy(),
        "n_updown": n_updown,
        "n_total": n_total,
    }


# -- finite-state-machine assembly --------------------------------------------


def _channel_layout(charges):
    """Virtual space of a channel list plus each channel's (charge, offset).

    Channels with equal charge share a sector; their offsets follow the
    order of appearance, which keeps the finite-state-machine layout
    deterministic.
    """
    counts: dict = {}
    pos = []
    for c in charges:
        pos.append((c, counts.get(c, 0)))
        counts[c] = counts.get(c, 0) + 1
    return GradedSpace(sorted(counts.items()), False), pos


def _dense_index(space: GradedSpace):
    out = []
    for c, d in space.sectors:
        out.extend((c, k) for k in range(d))
    return out


def _grid_mpo_tensor(pspace, charges_l, charges_r, grid) -> GradedTensor:
    """MPO tensor from a channel grid of dense operator words.

    grid maps (row channel, column channel) to a (d, d) word matrix in
    the dense basis order of pspace. Charge bookkeeping is validated by
    the tensor constructor, so a word that does not match its channel
    charges is rejected.
    """
    vl, lpos = _channel_layout(charges_l)
    vr, rpos = _channel_layout(charges_r)
    pidx = _dense_index(pspace)
    legs = (vl, pspace, pspace.dualize(), vr.dualize())
    blocks: dict = {}
    for (i, j), w in grid.items():
        ci, oi = lpos[i]
        cj, oj = rpos[j]
        for a, b in zip(*np.nonzero(w)):
            qa, da = pidx[a]
            qb, db = pidx[b]
            key = (ci, qa, qb, cj)
            blk = blocks.get(key)
            if blk is None:
                shape = (
                    vl.degeneracy(ci),
                    pspace.degeneracy(qa),
                    pspace.degeneracy(qb),
                    vr.degeneracy(cj),
                )
                blk = blocks[key] = np.zeros(shape, dtype=complex)
            blk[oi, da, db, oj] += w[a, b]
    return GradedTensor(legs, blocks)


@dataclass(frozen=True)
class MPO:
    """Finite chain of 4-leg MPO tensors with closed boundary channels."""

    tensors: tuple

    @property
    def n(self) -> int:
        return len(self.tensors)

    def __iter__(self):
        return iter(self.tensors)


@dataclass(frozen=True)
class UniformMPO:
    """Bulk Schur-form tensor with its channel bookkeeping.

    channels lists the virtual charge labels in grid order; channel 0 is
    the identity-in level and the last channel the identity-out level.
    lpos/rpos give each channel's (charge, offset) on the left/right
    virtual leg.
    """

    tensor: GradedTensor
    channels: tuple
    lpos: tuple
    rpos: tuple

    @property
    def nchannels(self) -> int:
        return len(self.channels)


def _assemble(pspace, charges, grid, n):
    if n is None:
        bulk = _grid_mpo_tensor(pspace, charges, charges, grid)
        _, lpos = _channel_layout(charges)
        return UniformMPO(bulk, tuple(charges), tuple(lpos), tuple(lpos))
    last = len(charges) - 1
    first_t = _grid_mpo_tensor(
        pspace, [charges[0]], charges,
        {(0, j): w for (i, j), w in grid.items() if i == 0})
    last_t = _grid_mpo_tensor(
        pspace, charges, [charges[-1]],
        {(i, 0): w for (i, j), w in grid.items() if j == last})
    if n == 2:
        return MPO((first_t, last_t))
    bulk = _grid_mpo_tensor(pspace, charges, charges, grid)
    return MPO((first_t,) + (bulk,) * (n - 2) + (last_t,))


def _kitaev_grid(t, delta, mu):
    adag = np.zeros((2, 2), dtype=complex)
    adag[1, 0] = 1.0
    a = adag.T.copy()
    eye = np.eye(2, dtype=complex)
    num = np.diag([0.0, 1.0]).astype(complex)
    e, o = (0,), (1,)
    charges = [e, o, o, o, o, e]
    grid = {
        (0, 0): eye, (5, 5): eye, (0, 5): -mu * num,
        (0, 1): -t * adag, (1, 5): a,
        (0, 2): t * a, (2, 5): adag,
        (0, 3): -delta * adag, (3, 5): adag,
        (0, 4): delta * a, (4, 5): a,
    }
    return charges, grid


def _hopping_grid(t, mu):
    adag = np.zeros((2, 2), dtype=complex)
    adag[1, 0] = 1.0
    a = adag.T.copy()
    eye = np.eye(2, dtype=complex)
    num = np.diag([0.0, 1.0]).astype(complex)
    e, o = (0,), (1,)
    charges = [e, o, o, e]
    grid = {
        (0, 0): eye, (3, 3): eye, (0, 3): -mu * num,
        (0, 1): -t * adag, (1, 3): a,
        (0, 2): t * a, (2, 3): adag,
    }
    return charges, grid


def hubbard_hopping_gate(t=1.0) -> GradedTensor:
    """Two-site Hubbard hopping term as a word tensor.

    Built from the auxiliary-legged spin-full operators; legs come out
    as (ket_1, bra_1, ket_2, bra_2). The relative sign between the
    creation-first and annihilation-first channels absorbs the fermionic
    reordering, exactly as in the finite-state-machine tables.
    """
    p, _ = hubbard_site_space()
    words = hubbard_word_matrices()
    pidx = _dense_index(p)

    def op3(w, charge, aux_side):
        aux = GradedSpace([(charge, 1)], False)
        blocks: dict = {}
        for a, b in zip(*np.nonzero(w)):
            qa, da = pidx[a]
            qb, db = pidx[b]
            if aux_side == "bra":
                key = (qa, qb, charge)
                shape = (p.degeneracy(qa), p.degeneracy(qb), 1)
                pos = (da, db, 0)
            else:
                key = (charge, qa, qb)
                shape = (1, p.degeneracy(qa), p.degeneracy(qb))
                pos = (0, da, db)
            blk = blocks.setdefault(key, np.zeros(shape, dtype=complex))
            blk[pos] += w[a, b]
        legs = (p, p.dualize(), aux.dualize()) if aux_side == "bra" \
            else (aux, p, p.dualize())
        return GradedTensor(legs, blocks)

    terms = []
    for sigma, sz in (("up", 1), ("dn", -1)):
        cdag = (1, 1, sz)
        c = (1, -1, -sz)
        adag_l = op3(words[f"adag_{sigma}"], cdag, "bra")
        a_r = op3(words[f"a_{sigma}"], cdag, "ket")
        a_l = op3(words[f"a_{sigma}"], c, "bra")
        adag_r = op3(words[f"adag_{sigma}"], c, "ket")
        # the +t on the annihilation-first channel absorbs the fermionic
        # reordering of the conjugate hopping term
        terms.append(contract(adag_l, [-1, -2, 1], a_r, [1, -3, -4]) * (-t))
        terms.append(contract(a_l, [-1, -2, 1], adag_r, [1, -3, -4]) * t)
    h2 = terms[0]
    for term in terms[1:]:
        h2 = h2 + term
    return h2


def _hubbard_grid(t, u, mu):
    p, _ = hubbard_site_space()
    words = hubbard_word_matrices()
    pidx = _dense_index(p)
    eye = np.eye(4, dtype=complex)
    onsite = u * words["n_updown"] - mu * words["n_total"]
    triv = trivial_charge(2)
    h2 = hubbard_hopping_gate(t)
    if not h2.blocks:
        # no hopping: just identity-in, identity-out and the on-site word
        charges = [triv, triv]
        grid = {(0, 0): eye, (1, 1): eye}
        if np.abs(onsite).max() > 0:
            grid[(0, 1)] = onsite
        return charges, grid
    dec = svd(h2, 2, TruncationSpec(cutoff=1e-12))
    uf, s, vf = dec.factors
    sqrt_s = GradedTensor(
        s.legs, {k: np.sqrt(blk) for k, blk in s.blocks.items()},
        validate=False)
    left = contract(uf, [-1, -2, 1], sqrt_s, [1, -3])
    right = contract(sqrt_s, [-1, 1], vf, [1, -2, -3])

    def channel_words(t3, bond_axis):
        out = {}
        for key, arr in t3.blocks.items():
            c = key[bond_axis]
            w = out.setdefault(c, np.zeros((4, 4), dtype=complex))
            qa = key[1] if bond_axis == 0 else key[0]
            qb = key[2] if bond_axis == 0 else key[1]
            mat = arr[0] if bond_axis == 0 else arr[..., 0]
            w[p.offset(qa):p.offset(qa) + p.degeneracy(qa),
              p.offset(qb):p.offset(qb) + p.degeneracy(qb)] += mat
        return out

    lw = channel_words(left, 2)
    rw = channel_words(right, 0)
    bond = sorted(lw)
    if sorted(rw) != bond:
        raise RuntimeError("hopping split produced mismatched channels")

    charges = [triv] + bond + [triv]
    last = len(charges) - 1
    grid = {(0, 0): eye, (last, last): eye}
    if np.abs(onsite).max() > 0:
        grid[(0, last)] = onsite
    for k, c in enumerate(bond):
        grid[(0, 1 + k)] = lw[c]
        grid[(1 + k, last)] = rw[c]
    return charges, grid


def build_mpo(params: ModelParams):
    """Schur-form MPO for the model; finite list or uniform bulk tensor."""
    if params.model == "kitaev":
        charges, grid = _kitaev_grid(params.t, params.delta, params.mu)
        pspace = spinless_site_space()
    elif params.model == "hopping":
        charges, grid = _hopping_grid(params.t, params.mu)
        pspace = spinless_site_space()
    elif params.model == "hubbard":
        charges, grid = _hubbard_grid(params.t, params.u, params.mu)
        pspace, _ = hubbard_site_space()
    else:
        raise ValueError(f"no 1D MPO for model {params.model!r}")
    return _assemble(pspace, charges, grid, params.n)


# -- hermiticity witness -------------------------------------------------------


@dataclass(frozen=True)
class HermiticityWitness:
    hermitian: bool
    residual: float
    flipper: GradedTensor | None


def _mirror_conjugate(o: GradedTensor) -> GradedTensor:
    """Local tensor of the daggered MPO chain, in standard leg order.

    The dagger reverses the chain, so the conjugated tensor's virtual
    legs swap roles. Restoring the arrows inserts a flipper pair on each
    bond; the pair composes to the identity only when one side carries
    the plain flipper and the other its dagger, so the left leg is
    flipped sign-free and the right leg absorbs the parity sign.
    """
    return o.conjugate().permute([3, 1, 2, 0]) \
        .flip_arrow(0, use_dagger=True).flip_arrow(3)


def mpo_hermiticity(o: GradedTensor, tol: float = 1e-10,
                    boundary=None) -> HermiticityWitness:
    """Search for a virtual gauge relating an MPO tensor to its mirrored
    conjugate; its existence makes the assembled chain hermitian.

    Solves mirror(o) . g = g . o over even maps g on the virtual space.
    The local equation alone admits spurious solutions that twist the
    chain by a phase (any multiple of a hermitian operator solves it),
    so g is additionally pinned at the boundary channels: it must fix
    the identity-in row and identity-out column with one common scale.
    boundary overrides the (in, out) positions inside the trivial
    sector; the default is (0, 1), or (0, 0) when that sector is
    one-dimensional.
    """
    m = _mirror_conjugate(o)
    if m.legs != o.legs:
        return HermiticityWitness(False, float("inf"), None)
    v = o.legs[0]
    basis = []
    for c, d in v.sectors:
        for i in range(d):
            for j in range(d):
                basis.append((c, i, j))
    bidx = {b: k for k, b in enumerate(basis)}

    def mk(x):
        blocks: dict = {}
        for val, (c, i, j) in zip(x, basis):
            d = v.degeneracy(c)
            blk = blocks.setdefault((c, c), np.zeros((d, d), dtype=complex))
            blk[i, j] += val
        return GradedTensor((v, v.dualize()), blocks, validate=False)

    cols = []
    for k in range(len(basis)):
        x = np.zeros(len(basis))
        x[k] = 1.0
        g = mk(x)
        diff = contract(m, [-1, -2, -3, 1], g, [1, -4]) \
            - contract(g, [-1, 1], o, [1, -2, -3, -4])
        cols.append(to_dense(diff).ravel())
    mat = np.stack(cols, axis=1)
    scale = max(np.linalg.norm(mat), 1e-300)

    triv = trivial_charge(len(basis[0][0]) - 1)
    dtriv = v.degeneracy(triv) if any(c == triv for c, _ in v.sectors) else 0
    rows = []
    if dtriv:
        iin, iout = boundary if boundary is not None else \
            ((0, 1) if dtriv >= 2 else (0, 0))
        for k in range(dtriv):
            if k != iin:
                r = np.zeros(len(basis))
                r[bidx[(triv, iin, k)]] = 1.0
                rows.append(r)
            if k != iout:
                r = np.zeros(len(basis))
                r[bidx[(triv, k, iout)]] = 1.0
                rows.append(r)
        if iin != iout:
            r = np.zeros(len(basis))
            r[bidx[(triv, iin, iin)]] = 1.0
            r[bidx[(triv, iout, iout)]] = -1.0
            rows.append(r)
    aug = np.vstack([mat] + [scale * np.asarray(rows)]) if rows else mat

    _, sig, vh = np.linalg.svd(aug)
    null = [vh[k].conj() for k in range(len(sig)) if sig[k] <= tol * scale]
    null += [vh[k].conj() for k in range(len(sig), len(basis))]
    if not null:
        return HermiticityWitness(False, float(sig[-1] / scale), None)

    nb = np.stack(null, axis=1)

    def invertible(g):
        return all(
            np.linalg.svd(blk, compute_uv=False)[-1] > 1e-8
            for blk in (g.block((c, c)) for c, _ in v.sectors)
        )

    ident = np.array([1.0 if (i == j) else 0.0 for (c, i, j) in basis])
    rng = np.random.default_rng(7)
    candidates = [nb @ (nb.conj().T @ ident)]
    candidates += [nb[:, k] for k in range(nb.shape[1])]
    candidates += [
        nb @ (rng.standard_normal(nb.shape[1])
              + 1j * rng.standard_normal(nb.shape[1]))
        for _ in range(5)
    ]
    for x in candidates:
        nx = np.linalg.norm(x)
        if nx < 1e-12:
            continue
        g = mk(x / nx)
        if invertible(g):
            res = float(np.linalg.norm(aug @ (x / nx)) / scale)
            return HermiticityWitness(True, res, g)
    return HermiticityWitness(False, float(sig[-1] / scale), None)


__all__ = [
    "HermiticityWitness",
    "MPO",
    "ModelParams",
    "SpinlessOps",
    "UniformMPO",
    "build_mpo",
    "creation_annihilation_spinless",
    "hubbard_hopping_gate",
    "hubbard_site_space",
    "hubbard_word_matrices",
    "mpo_hermiticity",
    "spinless_site_space",
]
