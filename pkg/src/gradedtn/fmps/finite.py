"""Finite fermionic MPS: gauges, expectation values, two-site DMRG.

Site tensors carry (left-virtual ket, physical ket, right-virtual bra);
the boundary vectors are embedded as sites whose outer virtual leg is one
dimensional, carrying the trivial charge on the left and the state's total
charge on the right, so every algorithm treats all sites uniformly.

Sign bookkeeping: with this library's conjugation convention the left and
right environment recursions close onto plain identities, and the whole
fermionic dressing of the variational problems collapses to one parity
operator on the output right-virtual leg of each effective Hamiltonian
(the P tensor on the right-most open leg of the two-site update). That
placement is pinned against dense Fock-space sandwiches in the tests.
"""

from dataclasses import dataclass

import numpy as np

from ..charges import GradedSpace, dual_charge, fuse_charges, trivial_charge
from ..decomp import TruncationSpec, decompose
from ..hamiltonians import MPO
from ..network import contract
from ..tensor import GradedTensor
from .krylov import TensorVectorizer, eigsh_smallest

__all__ = [
    "FiniteMPS", "canonicalize_finite", "dmrg_run",
    "expectation_local_finite", "product_mps", "random_finite_mps",
    "state_vector",
]


@dataclass(frozen=True)
class FiniteMPS:
    """Open-boundary MPS; `center` is the gauge center site or None."""

    tensors: tuple
    center: int | None = None

    @property
    def n(self) -> int:
        return len(self.tensors)

    def __iter__(self):
        return iter(self.tensors)

    def bond_space(self, j: int) -> GradedSpace:
        """Virtual space on the bond right of site j (primal labels)."""
        leg = self.tensors[j].legs[2]
        return GradedSpace(leg.sectors, False)

    def norm(self) -> float:
        l = _edge_left(self.tensors[0])
        for a in self.tensors:
            l = _transfer_left(l, a, a)
        return float(np.sqrt(abs(_only_scalar(l))))


def _only_scalar(t: GradedTensor) -> complex:
    if not t.blocks:
        return 0.0
    (arr,) = list(t.blocks.values())
    return complex(arr.reshape(()))


def _edge_left(a0: GradedTensor) -> GradedTensor:
    s = a0.legs[0]
    legs = (GradedSpace(s.sectors, False), GradedSpace(s.sectors, True))
    c = s.charges()[0]
    return GradedTensor(legs, {(c, c): np.ones((1, 1), dtype=complex)})


def _transfer_left(l, top, bot):
    return contract(l, [1, 2], top.conjugate(), [-1, 3, 1], bot, [2, 3, -2])


def _transfer_right(r, top, bot):
    return contract(r, [1, 2], top.conjugate(), [1, 3, -1], bot, [-2, 3, 2])


def _scale_last_axis(t: GradedTensor, phases: dict) -> GradedTensor:
    blocks = {}
    for key, arr in t.blocks.items():
        ph = phases.get(key[-1])
        blocks[key] = arr * ph if ph is not None else arr
    return GradedTensor(t.legs, blocks, validate=False)


def _scale_first_axis(t: GradedTensor, phases: dict) -> GradedTensor:
    blocks = {}
    for key, arr in t.blocks.items():
        ph = phases.get(key[0])
        if ph is None:
            blocks[key] = arr
        else:
            shape = (len(ph),) + (1,) * (arr.ndim - 1)
            blocks[key] = arr * ph.reshape(shape)
    return GradedTensor(t.legs, blocks, validate=False)


def _diag_phases(mat_blocks, axis0=True):
    phases = {}
    for key, arr in mat_blocks.items():
        d = np.diagonal(arr)
        ph = np.where(np.abs(d) > 1e-300, d / np.where(np.abs(d) > 1e-300,
                                                       np.abs(d), 1.0), 1.0)
        phases[key[0] if axis0 else key[-1]] = ph
    return phases


def qr_pos(t: GradedTensor, split: int):
    """QR with the R diagonal rotated real-positive per sector."""
    q, r = decompose(t, split, "qr").factors
    ph = _diag_phases(r.blocks, axis0=True)
    q = _scale_last_axis(q, {c: p for c, p in ph.items()})
    r = _scale_first_axis(r, {c: p.conj() for c, p in ph.items()})
    return q, r


def lq_pos(t: GradedTensor, split: int):
    """LQ with the L diagonal rotated real-positive per sector."""
    l, q = decompose(t, split, "lq").factors
    ph = _diag_phases(l.blocks, axis0=False)
    l = _scale_last_axis(l, {c: p.conj() for c, p in ph.items()})
    q = _scale_first_axis(q, {c: p for c, p in ph.items()})
    return l, q


def product_mps(pspace: GradedSpace, occupations) -> FiniteMPS:
    """Product state from per-site (charge, index-within-sector) pairs."""
    tensors = []
    acc = trivial_charge(pspace.n_u1)
    for c, idx in occupations:
        left = GradedSpace([(acc, 1)], False)
        acc = fuse_charges(acc, c)
        right = GradedSpace([(acc, 1)], True)
        vec = np.zeros((1, pspace.degeneracy(c), 1), dtype=complex)
        vec[0, idx, 0] = 1.0
        tensors.append(GradedTensor((left, pspace, right),
                                    {(left.charges()[0], c, acc): vec}))
    return FiniteMPS(tuple(tensors), center=None)


def random_finite_mps(n: int, pspace: GradedSpace, max_dim: int, rng,
                      total_charge=None) -> FiniteMPS:
    """Random even MPS of n sites in the given total charge sector.

    Bond sectors are the reachable fusion charges from both chain ends,
    with per-sector dimensions capped so no bond exceeds max_dim overall.
    """
    triv = trivial_charge(pspace.n_u1)
    if total_charge is None:
        total_charge = triv
    fwd = [{triv: 1}]
    for _ in range(n):
        nxt = {}
        for c, d in fwd[-1].items():
            for cp, dp in pspace.sectors:
                q = fuse_charges(c, cp)
                nxt[q] = nxt.get(q, 0) + d * dp
        fwd.append(nxt)
    bwd = [{total_charge: 1}]
    for _ in range(n):
        prv = {}
        for c, d in bwd[-1].items():
            for cp, dp in pspace.sectors:
                q = fuse_charges(c, dual_charge(cp))
                prv[q] = prv.get(q, 0) + d * dp
        bwd.append(prv)
    bwd = bwd[::-1]
    spaces = []
    for j in range(n + 1):
        common = sorted(set(fwd[j]) & set(bwd[j]))
        if not common:
            raise ValueError("total charge unreachable for this chain")
        dims = [(c, min(fwd[j][c], bwd[j][c])) for c in common]
        total = sum(d for _, d in dims)
        if total > max_dim:
            scale = max_dim / total
            dims = [(c, max(1, int(round(d * scale)))) for c, d in dims]
        spaces.append(GradedSpace(dims, False))
    tensors = []
    for j in range(n):
        legs = (spaces[j], pspace, spaces[j + 1].dualize())
        t = GradedTensor.random_even(legs, rng)
        if not t.blocks:
            raise ValueError("no neutral blocks on site %d" % j)
        tensors.append(t * (1.0 / max(t.norm(), 1e-300)))
    return FiniteMPS(tuple(tensors), center=None)


def state_vector(mps: FiniteMPS) -> np.ndarray:
    """Dense word-basis coefficients (small chains; testing aid)."""
    from ..reference import to_dense
    n = mps.n
    args = []
    for j, a in enumerate(mps.tensors, start=1):
        vl = 100 + j - 1 if j > 1 else -(n + 1)
        vr = 100 + j if j < n else -(n + 2)
        args += [a, [vl, -j, vr]]
    arr = to_dense(contract(*args))[..., 0, 0]
    return arr.reshape(-1)


def _full_gauges(mps: FiniteMPS, normalize=True):
    """Left-canonical list, right-canonical list, and the bond matrices.

    c[j] is the center matrix on the bond right of site j (j = 0..n-2);
    Schmidt spectra are the singular values of the c[j].
    """
    n = mps.n
    al = list(mps.tensors)
    for j in range(n - 1):
        q, r = qr_pos(al[j], 2)
        al[j] = q
        if normalize:
            r = r * (1.0 / max(r.norm(), 1e-300))
        al[j + 1] = contract(r, [-1, 1], al[j + 1], [1, -2, -3])
    nrm = al[n - 1].norm()
    if normalize:
        al[n - 1] = al[n - 1] * (1.0 / max(nrm, 1e-300))
    ar = list(al)
    cs = [None] * max(n - 1, 0)
    carry = None
    for j in range(n - 1, 0, -1):
        t = ar[j] if carry is None else contract(ar[j], [-1, -2, 1],
                                                 carry, [1, -3])
        l, q = lq_pos(t, 1)
        ar[j] = q
        carry = l
        cs[j - 1] = l
    if carry is not None:
        ar[0] = contract(ar[0], [-1, -2, 1], carry, [1, -3])
    return al, ar, cs


def canonicalize_finite(mps: FiniteMPS, center: int | None = None):
    """Gauge to a center site; returns (state, spectra).

    spectra[j] maps each bond-j sector to its descending Schmidt values of
    the normalized state.
    """
    n = mps.n
    if center is None:
        center = n // 2
    if not 0 <= center < n:
        raise ValueError("center out of range")
    al, ar, cs = _full_gauges(mps)
    spectra = []
    for c in cs:
        dec = decompose(c, 1, "svd")
        spectra.append({q: s for q, s in dec.spectra.items()})
    tensors = []
    for j in range(n):
        if j < center:
            tensors.append(al[j])
        elif j > center:
            tensors.append(ar[j])
        else:
            t = al[j] if j == n - 1 else contract(al[j], [-1, -2, 1],
                                                  cs[j], [1, -3])
            tensors.append(t * (1.0 / max(t.norm(), 1e-300)))
    return FiniteMPS(tuple(tensors), center=center), spectra


def expectation_local_finite(mps: FiniteMPS, op: GradedTensor,
                             site: int) -> complex:
    """<psi|O_site|psi> for the normalized state; O is a 2-leg word."""
    n = mps.n
    if not 0 <= site < n:
        raise ValueError("site out of range")
    pleg = mps.tensors[site].legs[1]
    if op.legs[0].sectors != pleg.sectors or not op.legs[1].dual:
        raise ValueError("operator space mismatch")
    if mps.center == site:
        gauged = mps
    else:
        gauged, _ = canonicalize_finite(mps, center=site)
    a = gauged.tensors[site]
    # identity closures on the center bonds: l is (ket, bra), r (bra, ket)
    l = GradedTensor.identity(GradedSpace(a.legs[0].sectors, False))
    sr = a.legs[2]
    rid = {(c, c): np.eye(d, dtype=complex) for c, d in sr.sectors}
    r = GradedTensor((GradedSpace(sr.sectors, True),
                      GradedSpace(sr.sectors, False)), rid, validate=False)
    val = contract(l, [1, 2], a.conjugate(), [5, 3, 1], op, [3, 4],
                   a, [2, 4, 6], r, [5, 6])
    return _only_scalar(val)


def _mpo_edge_left(a0, w0):
    legs = (GradedSpace(a0.legs[0].sectors, False),
            GradedSpace(w0.legs[0].sectors, True),
            GradedSpace(a0.legs[0].sectors, True))
    key = (legs[0].charges()[0], legs[1].charges()[0], legs[2].charges()[0])
    return GradedTensor(legs, {key: np.ones((1, 1, 1), dtype=complex)})


def _mpo_edge_right(an, wn):
    legs = (GradedSpace(an.legs[2].sectors, True),
            GradedSpace(wn.legs[3].sectors, False),
            GradedSpace(an.legs[2].sectors, False))
    key = (legs[0].charges()[0], legs[1].charges()[0], legs[2].charges()[0])
    return GradedTensor(legs, {key: np.ones((1, 1, 1), dtype=complex)})


def _mpo_transfer_left(gl, top, w, bot):
    return contract(gl, [1, 2, 3], top.conjugate(), [-1, 4, 1],
                    w, [2, 4, 5, -2], bot, [3, 5, -3])


def _mpo_transfer_right(gr, top, w, bot):
    return contract(gr, [1, 2, 3], top.conjugate(), [1, 4, -1],
                    w, [-2, 4, 5, 2], bot, [-3, 5, 3])


def _two_site_heff(gl, wl, wr, gr):
    def apply(x):
        out = contract(gl, [-1, 1, 2], x, [2, 3, 4, 5],
                       wl, [1, -2, 3, 6], wr, [6, -3, 4, 7],
                       gr, [-4, 7, 5])
        return out.apply_parity([3])
    return apply


def _floored_counts(spectra: dict, trunc: TruncationSpec):
    """Per-sector keep counts honoring the budget with a 1-state floor.

    Every sector whose top singular value survives the cutoff keeps at
    least one state; dropping a whole occupied symmetry sector would wall
    off its charge pathway for the rest of the sweep.
    """
    smax = max((s[0] for s in spectra.values() if len(s)), default=0.0)
    floor = trunc.cutoff * smax
    occupied = sorted(c for c, s in spectra.items()
                      if len(s) and s[0] > floor)
    if not occupied:
        occupied = sorted(spectra)[:1]
    if trunc.max_dim is not None and trunc.max_dim < len(occupied):
        raise ValueError(
            "truncation budget %d cannot keep one state per occupied "
            "sector (%d sectors)" % (trunc.max_dim, len(occupied)))
    keep = {c: 1 for c in occupied}
    entries = []
    for c in occupied:
        for i, v in enumerate(spectra[c][1:], start=1):
            if v > floor:
                entries.append((float(v), c, i))
    entries.sort(key=lambda e: (-e[0], e[1], e[2]))
    budget = (trunc.max_dim - len(occupied)
              if trunc.max_dim is not None else len(entries))
    for v, c, i in entries:
        if budget <= 0:
            break
        keep[c] += 1
        budget -= 1
    return keep


def _truncated_svd(x: GradedTensor, trunc: TruncationSpec):
    dec = decompose(x, 2, "svd")
    keep = _floored_counts(dec.spectra, trunc)
    dec = decompose(x, 2, "svd", TruncationSpec(per_sector=keep))
    return dec


def dmrg_run(mps: FiniteMPS, h: MPO, trunc: TruncationSpec | None = None,
             tol: float = 1e-10, max_sweeps: int = 50):
    """Two-site DMRG; returns (energy, state, log).

    The state is kept normalized; environments are maintained
    incrementally and rebuilt only through single-column advances. Each
    log row is a dict with sweep, direction, bond, energy, and the
    truncation error of that update.
    """
    n = mps.n
    if h.n != n:
        raise ValueError("operator length does not match the chain")
    if n < 2:
        raise ValueError("two-site update needs at least two sites")
    trunc = trunc or TruncationSpec(cutoff=1e-12)
    w = list(h.tensors)
    state, _ = canonicalize_finite(mps, center=0)
    a = list(state.tensors)
    grs = [None] * (n + 1)
    grs[n] = _mpo_edge_right(a[n - 1], w[n - 1])
    for j in range(n - 1, 0, -1):
        grs[j] = _mpo_transfer_right(grs[j + 1], a[j], w[j], a[j])
    gls = [None] * n
    gls[0] = _mpo_edge_left(a[0], w[0])

    log = []
    energy = None
    prev_sweep_energy = None
    inner_tol = max(tol / 100.0, 1e-14)
    for sweep in range(1, max_sweeps + 1):
        for direction in ("right", "left"):
            bonds = range(n - 1) if direction == "right" else \
                range(n - 2, -1, -1)
            for j in bonds:
                x0 = contract(a[j], [-1, -2, 1], a[j + 1], [1, -3, -4])
                vz = TensorVectorizer(x0.legs)
                apply_fn = _two_site_heff(gls[j], w[j], w[j + 1], grs[j + 2])
                try:
                    vals, vecs = eigsh_smallest(apply_fn, vz, v0=x0,
                                                tol=inner_tol)
                except Exception as exc:  # noqa: BLE001
                    raise RuntimeError(
                        f"local eigensolver failure at bond {j}") from exc
                energy = float(vals[0])
                x = vecs[0]
                x = x * (1.0 / max(x.norm(), 1e-300))
                dec = _truncated_svd(x, trunc)
                u, s, v = dec.factors
                s = s * (1.0 / max(s.norm(), 1e-300))
                if direction == "right":
                    a[j] = u
                    a[j + 1] = contract(s, [-1, 1], v, [1, -2, -3])
                    gls[j + 1] = _mpo_transfer_left(gls[j], a[j], w[j], a[j])
                else:
                    a[j + 1] = v
                    a[j] = contract(u, [-1, -2, 1], s, [1, -3])
                    grs[j + 1] = _mpo_transfer_right(grs[j + 2], a[j + 1],
                                                     w[j + 1], a[j + 1])
                log.append({"sweep": sweep, "direction": direction,
                            "bond": j, "energy": energy,
                            "truncation": dec.truncation_error})
        if prev_sweep_energy is not None and \
                abs(prev_sweep_energy - energy) < tol:
            break
        prev_sweep_energy = energy
    center = 0
    out = FiniteMPS(tuple(a), center=center)
    return energy, out, log
