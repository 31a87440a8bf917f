"""Uniform fermionic MPS in the thermodynamic limit.

Mixed canonical form with a repeating unit cell, operator environments
for Schur-form uniform MPOs, VUMPS ground-state search, a TDVP stepper,
and tangent-space utilities.

Environment construction exploits the walking-state structure of the
operator: channel components of the left block environment are solved in
ascending channel order, so every right-hand side only involves channels
already known. The two corner channels ride the plain transfer; their
geometric series are resummed by deflating the unit eigenvalue against
the state's fixed-point pair, which also yields the energy density.

Sign bookkeeping follows the finite module: plain and operator-dressed
transfer recursions carry no explicit parity operators, and each
effective Hamiltonian applies one parity operator on its output
right-virtual leg.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..charges import GradedSpace, fuse_charges, fused_space, trivial_charge
from ..decomp import decompose
from ..hamiltonians import UniformMPO
from ..network import contract
from ..tensor import GradedTensor
from .finite import _transfer_left, _transfer_right, lq_pos, qr_pos
from .krylov import (TensorVectorizer, eigs_dominant, eigsh_smallest,
                     solve_linear)

__all__ = [
    "EnvironmentPair", "UniformMPS", "canonicalize_uniform", "fidelity",
    "expectation_local_uniform", "left_null_space", "mpo_environments",
    "env_residual", "random_uniform_mps", "suggest_bond_space",
    "tangent_project", "tdvp_step", "vumps_run",
]


@dataclass(frozen=True)
class UniformMPS:
    """Unit cell in mixed canonical form.

    c[k] is the center matrix on the bond to the right of site k, so
    c[-1] sits on the cell boundary and ac[k] = al[k] . c[k].
    """

    a: tuple
    al: tuple
    ar: tuple
    c: tuple
    ac: tuple

    @property
    def unit_cell(self) -> int:
        return len(self.al)

    def bond_space(self, k: int) -> GradedSpace:
        """Virtual space on the bond right of site k (primal labels)."""
        return GradedSpace(self.al[k].legs[2].sectors, False)

    def shifted(self) -> "UniformMPS":
        """Same state with the unit cell rolled forward by one site."""
        roll = lambda t: t[1:] + t[:1]  # noqa: E731
        return UniformMPS(roll(self.a), roll(self.al), roll(self.ar),
                          roll(self.c), roll(self.ac))


def _bond(t: GradedTensor) -> GradedSpace:
    return GradedSpace(t.legs[0].sectors, False)


def _id_left(space: GradedSpace) -> GradedTensor:
    """Identity closure with (ket, bra) legs."""
    return GradedTensor.identity(space)


def _id_right(space: GradedSpace) -> GradedTensor:
    """Identity closure with (bra, ket) legs."""
    blocks = {(c, c): np.eye(d, dtype=complex) for c, d in space.sectors}
    return GradedTensor((GradedSpace(space.sectors, True), space), blocks,
                        validate=False)


def _pair(x: GradedTensor, y: GradedTensor) -> complex:
    """Closure of a left-type object with a right-type object."""
    return contract(x, [1, 2], y, [1, 2]).item()


def _cell_left(x, tops, bots):
    for t, b in zip(tops, bots):
        x = _transfer_left(x, t, b)
    return x


def _cell_right(x, tops, bots):
    for t, b in zip(reversed(tops), reversed(bots)):
        x = _transfer_right(x, t, b)
    return x


def _fix_phase(t: GradedTensor) -> GradedTensor:
    """Deterministic global phase: largest entry real positive."""
    best = None
    for key in sorted(t.blocks):
        arr = t.blocks[key]
        i = int(np.argmax(np.abs(arr)))
        v = arr.reshape(-1)[i]
        if best is None or abs(v) > abs(best) + 1e-15:
            best = v
    if best is None or abs(best) < 1e-300:
        return t
    return t * (abs(best) / best)


def _hermitian_sqrt_blocks(t: GradedTensor):
    """Per-sector sqrt of a hermitized positive 2-leg fixed point."""
    out = {}
    for key, arr in t.blocks.items():
        h = 0.5 * (arr + arr.conj().T)
        w, v = np.linalg.eigh(h)
        w = np.clip(w, max(w.max(), 0.0) * 1e-16, None)
        out[key[0]] = (v * np.sqrt(w)) @ v.conj().T
    return out


def suggest_bond_space(pspace: GradedSpace, max_dim: int,
                       shells: int = 8) -> GradedSpace:
    """Balanced virtual space: sector weights from repeated site fusion."""
    counts = {trivial_charge(pspace.n_u1): 1}
    for _ in range(shells):
        nxt = {}
        for c, m in counts.items():
            for cp, dp in pspace.sectors:
                q = fuse_charges(c, cp)
                nxt[q] = nxt.get(q, 0) + m * dp
        counts = nxt
    total = sum(counts.values())
    ranked = sorted(counts.items(), key=lambda it: (-it[1], it[0]))
    dims = {}
    budget = max_dim
    for c, m in ranked:
        if budget <= 0:
            break
        d = min(budget, max(1, int(round(max_dim * m / total))))
        dims[c] = d
        budget -= d
    while budget > 0:
        for c, m in ranked:
            if budget <= 0:
                break
            if c in dims:
                dims[c] += 1
                budget -= 1
    return GradedSpace(sorted(dims.items()), False)


def random_uniform_mps(pspace: GradedSpace, bond, rng,
                       unit_cell: int = 1) -> tuple:
    """Random even cell tensors; `bond` is a space, an int budget, or a
    per-bond sequence of spaces (bond k sits right of site k)."""
    if isinstance(bond, int):
        bond = suggest_bond_space(pspace, bond)
    if isinstance(bond, GradedSpace):
        bonds = [bond] * unit_cell
    else:
        bonds = list(bond)
        if len(bonds) != unit_cell:
            raise ValueError("need one bond space per cell bond")
    tensors = []
    for k in range(unit_cell):
        legs = (bonds[k - 1], pspace, bonds[k].dualize())
        t = GradedTensor.random_even(legs, rng)
        if not t.blocks:
            raise ValueError("bond spaces admit no neutral blocks")
        tensors.append(t * (1.0 / t.norm()))
    return tuple(tensors)


def _subdominant_ratio(apply_fn, vz, v0) -> float:
    if vz.size <= 2:
        return 0.0
    try:
        if vz.size <= 64:
            ev = np.linalg.eigvals(vz.matrix(apply_fn))
            ev = np.sort(np.abs(ev))[::-1]
            return float(ev[1] / max(ev[0], 1e-300))
        import scipy.sparse.linalg as spla
        ev = spla.eigs(vz.operator(apply_fn), k=2, which="LM",
                       v0=vz.unwrap(v0), return_eigenvectors=False,
                       maxiter=2000)
        ev = np.sort(np.abs(ev))[::-1]
        return float(ev[1] / max(ev[0], 1e-300))
    except Exception:  # noqa: BLE001
        return 0.0


def canonicalize_uniform(a, tol: float = 1e-13, max_iter: int = 500):
    """Mixed canonical form of a raw unit cell; returns (state, spectra).

    The dominant transfer eigenpair seeds single-sided gauge iterations
    (QR from the left, LQ from the right) that polish the canonical
    tensors to the requested tolerance; center matrices on every bond
    come from one exact closing pass, so al[k] c[k] = c[k-1] ar[k] holds
    to working precision. spectra[k] maps bond-k sectors to descending
    Schmidt values.
    """
    tensors = tuple(a) if isinstance(a, (tuple, list)) else (a,)
    ncell = len(tensors)
    for k in range(ncell):
        if tensors[k].legs[2].sectors != tensors[(k + 1) % ncell].legs[0].sectors:
            raise ValueError("cell bonds do not close cyclically")
    bond0 = _bond(tensors[0])
    vzl = TensorVectorizer((bond0, bond0.dualize()))
    lam, l = eigs_dominant(lambda x: _cell_left(x, tensors, tensors),
                           vzl, v0=_id_left(bond0))
    ratio = _subdominant_ratio(
        lambda x: _cell_left(x, tensors, tensors), vzl, _id_left(bond0))
    if ratio > 1.0 - 1e-8:
        warnings.warn("transfer spectrum is (near-)degenerate; the cell "
                      "may describe a non-injective state", stacklevel=2)
    scale = abs(lam) ** (1.0 / (2 * ncell))
    tensors = tuple(t * (1.0 / scale) for t in tensors)

    # left gauge: seed from the fixed point, then positive-QR sweeps
    tr = sum(np.trace(arr) for arr in l.blocks.values())
    if abs(tr) > 1e-300:
        l = l * (abs(tr) / tr)
    lmat = GradedTensor(l.legs, _l_from_sqrt(_hermitian_sqrt_blocks(l)),
                        validate=False)
    lmat = lmat * (1.0 / lmat.norm())
    for _ in range(max_iter):
        cur = lmat
        for t in tensors:
            q, cur = qr_pos(contract(cur, [-1, 1], t, [1, -2, -3]), 2)
        cur = cur * (1.0 / cur.norm())
        delta = (cur - lmat).max_abs() if cur.legs == lmat.legs else np.inf
        lmat = cur
        if delta < tol:
            break
    else:
        raise RuntimeError("left gauge iteration did not converge")
    al, ls = [], [lmat]
    cur = lmat
    for t in tensors:
        q, cur = qr_pos(contract(cur, [-1, 1], t, [1, -2, -3]), 2)
        al.append(q)
        ls.append(cur)

    # right gauge mirror
    vzr = TensorVectorizer((bond0.dualize(), bond0))
    _, rho = eigs_dominant(lambda x: _cell_right(x, tensors, tensors),
                           vzr, v0=_id_right(bond0))
    trr = sum(np.trace(arr) for arr in rho.blocks.values())
    if abs(trr) > 1e-300:
        rho = rho * (abs(trr) / trr)
    rmat = GradedTensor((bond0, bond0.dualize()),
                        _l_from_sqrt(_hermitian_sqrt_blocks(rho)),
                        validate=False)
    rmat = rmat * (1.0 / rmat.norm())
    for _ in range(max_iter):
        cur = rmat
        for t in reversed(tensors):
            cur, q = lq_pos(contract(t, [-1, -2, 1], cur, [1, -3]), 1)
        cur = cur * (1.0 / cur.norm())
        delta = (cur - rmat).max_abs() if cur.legs == rmat.legs else np.inf
        rmat = cur
        if delta < tol:
            break
    else:
        raise RuntimeError("right gauge iteration did not converge")
    ar_rev, rs = [], [rmat]
    cur = rmat
    for t in reversed(tensors):
        cur, q = lq_pos(contract(t, [-1, -2, 1], cur, [1, -3]), 1)
        ar_rev.append(q)
        rs.append(cur)
    ar = ar_rev[::-1]
    rs = rs[::-1]  # rs[k] now sits on the bond left of site k

    cs, spectra = [], []
    for k in range(ncell):
        c = contract(ls[k + 1], [-1, 1], rs[(k + 1) % ncell], [1, -2])
        c = c * (1.0 / c.norm())
        cs.append(c)
        spectra.append(dict(decompose(c, 1, "svd").spectra))
    ac = [contract(al[k], [-1, -2, 1], cs[k], [1, -3])
          for k in range(ncell)]
    state = UniformMPS(tensors, tuple(al), tuple(ar), tuple(cs), tuple(ac))
    return state, spectra


def _l_from_sqrt(sq):
    return {(c, c): arr for c, arr in sq.items()}


def _cc_dag(c: GradedTensor) -> GradedTensor:
    """Right fixed point of the left-canonical transfer, (bra, ket)."""
    space = GradedSpace(c.legs[0].sectors, False)
    blocks = {}
    for (q, _), arr in c.blocks.items():
        blocks[(q, q)] = arr @ arr.conj().T
    return GradedTensor((space.dualize(), space), blocks, validate=False)


def _cdag_c(c: GradedTensor) -> GradedTensor:
    """Left fixed point of the right-canonical transfer, (ket, bra)."""
    space = GradedSpace(c.legs[0].sectors, False)
    blocks = {}
    for (q, _), arr in c.blocks.items():
        blocks[(q, q)] = arr.conj().T @ arr
    return GradedTensor((space, space.dualize()), blocks, validate=False)


# -- operator environments -----------------------------------------------------


@dataclass(frozen=True)
class EnvironmentPair:
    """Stacked-channel block environments of a uniform operator.

    gl[k] sits on the bond left of site k, gr[k] right of site k; e is
    the energy per site and lam the boundary closure scalar before the
    per-bond normalization was applied.
    """

    gl: tuple
    gr: tuple
    lam: complex
    e: float
    e_left: float
    e_right: float


def _slice_channels(o: UniformMPO):
    """Dim-1 virtual slices w[(i, j)] of the walking-state tensor."""
    w = o.tensor
    nch = len(o.channels)
    out = {}
    for i in range(nch):
        ci, oi = o.lpos[i]
        for j in range(nch):
            cj, oj = o.rpos[j]
            legs = (GradedSpace([(ci, 1)], False), w.legs[1], w.legs[2],
                    GradedSpace([(cj, 1)], True))
            blocks = {}
            for key, arr in w.blocks.items():
                if key[0] != ci or key[3] != cj:
                    continue
                sl = arr[oi:oi + 1, :, :, oj:oj + 1]
                if np.any(sl):
                    blocks[key] = sl.copy()
            if blocks:
                out[(i, j)] = GradedTensor(legs, blocks, validate=False)
    return out


def _adv_left(gl, topbar, w, bot):
    return contract(gl, [1, 2, 3], topbar, [-1, 4, 1], w, [2, 4, 5, -2],
                    bot, [3, 5, -3])


def _adv_right(gr, topbar, w, bot):
    return contract(gr, [1, 2, 3], topbar, [1, 4, -1], w, [-2, 4, 5, 2],
                    bot, [-3, 5, 3])


def _advance_cell_left(chd, albars, als, wsl, nch):
    for k in range(len(als)):
        nxt = {}
        for i, x in chd.items():
            for j in range(i, nch):
                ws = wsl.get((i, j))
                if ws is None:
                    continue
                y = _adv_left(x, albars[k], ws, als[k])
                nxt[j] = nxt[j] + y if j in nxt else y
        chd = nxt
    return chd


def _advance_cell_right(chd, arbars, ars, wsl, nch):
    for k in reversed(range(len(ars))):
        nxt = {}
        for j, x in chd.items():
            for i in range(0, j + 1):
                ws = wsl.get((i, j))
                if ws is None:
                    continue
                y = _adv_right(x, arbars[k], ws, ars[k])
                nxt[i] = nxt[i] + y if i in nxt else y
        chd = nxt
    return chd


def _squeeze_mid(t: GradedTensor) -> GradedTensor:
    blocks = {(k[0], k[2]): arr[:, 0, :] for k, arr in t.blocks.items()}
    return GradedTensor((t.legs[0], t.legs[2]), blocks, validate=False)


def _embed_mid(t: GradedTensor, charge, dual: bool) -> GradedTensor:
    mid = GradedSpace([(charge, 1)], dual)
    blocks = {(k[0], charge, k[1]): arr[:, None, :]
              for k, arr in t.blocks.items()}
    return GradedTensor((t.legs[0], mid, t.legs[1]), blocks, validate=False)


def _stack(chd, positions, wspace, wdual, left_space, right_space):
    """Assemble per-channel dim-1 environments into one 3-leg tensor."""
    legs = (left_space, GradedSpace(wspace.sectors, wdual), right_space)
    acc = {}
    for i, t in chd.items():
        ch, off = positions[i]
        for (k0, _, k2), arr in t.blocks.items():
            key = (k0, ch, k2)
            if key not in acc:
                acc[key] = np.zeros((arr.shape[0], wspace.degeneracy(ch),
                                     arr.shape[2]), dtype=complex)
            acc[key][:, off, :] += arr[:, 0, :]
    return GradedTensor(legs, acc, validate=False)


def _solve_middle(rhs, advance_diag, vz, tol):
    """(1 - T_jj) g = rhs for a strictly upper channel's self-coupling."""
    lam, _ = eigs_dominant(advance_diag, vz, v0=rhs, tol=1e-8)
    if abs(lam) >= 1.0:
        raise ValueError("transfer spectral radius >= 1 in a "
                         "strictly-upper channel")
    return solve_linear(lambda x: x - advance_diag(x), rhs, vz, x0=rhs,
                        tol=tol)


def mpo_environments(umps: UniformMPS, o: UniformMPO,
                     tol: float = 1e-12) -> EnvironmentPair:
    """Left and right block environments of a Schur-form uniform MPO.

    Assumes the first and last channels carry identity diagonals (the
    walking-state corners); middle channels may carry contractive
    diagonals, anything at spectral radius one is rejected.
    """
    ncell = umps.unit_cell
    nch = len(o.channels)
    last = nch - 1
    als, ars = list(umps.al), list(umps.ar)
    albars = [t.conjugate() for t in als]
    arbars = [t.conjugate() for t in ars]
    bonds = [GradedSpace(als[k].legs[0].sectors, False)
             for k in range(ncell)]
    bound = bonds[0]
    cb = umps.c[ncell - 1]

    if nch == 1:
        gl = tuple(_embed_mid(_id_left(bonds[k]), o.lpos[0][0], True)
                   for k in range(ncell))
        gr = tuple(_embed_mid(_id_right(bonds[(k + 1) % ncell]),
                              o.rpos[0][0], False)
                   for k in range(ncell))
        return EnvironmentPair(gl, gr, 1.0, 0.0, 0.0, 0.0)

    wsl = _slice_channels(o)
    l2 = _id_left(bound)
    r2 = _id_right(bound)
    rho_r = _cc_dag(cb)
    rho_l = _cdag_c(cb)
    vz2l = TensorVectorizer((bound, bound.dualize()))
    vz2r = TensorVectorizer((bound.dualize(), bound))

    # left side, ascending channels
    chd = {0: _embed_mid(l2, o.lpos[0][0], True)}
    for j in range(1, last):
        rhs = _advance_cell_left(dict(chd), albars, als, wsl, nch).get(j)
        if rhs is None:
            continue
        if wsl.get((j, j)) is None:
            chd[j] = rhs
        else:
            ws = wsl[(j, j)]
            vzj = TensorVectorizer(rhs.legs)

            def adv_diag(x, ws=ws):
                for k in range(ncell):
                    x = _adv_left(x, albars[k], ws, als[k])
                return x
            chd[j] = _solve_middle(rhs, adv_diag, vzj, tol)
    rhs3 = _advance_cell_left(dict(chd), albars, als, wsl, nch).get(last)
    if rhs3 is None:
        e_cell_l = 0.0
        gl_out = l2 * 0.0
    else:
        rhs2 = _squeeze_mid(rhs3)
        e_cell_l = _pair(rhs2, rho_r)

        def left_deflated(x):
            y = _cell_left(x, als, als)
            return x - y + l2 * _pair(x, rho_r)
        gl_out = solve_linear(left_deflated, rhs2 - l2 * e_cell_l, vz2l,
                              tol=tol)
    chd[last] = _embed_mid(gl_out, o.lpos[last][0], True)
    gl_cells = [None] * ncell
    gl_cells[0] = dict(chd)
    for k in range(ncell - 1):
        prev = gl_cells[k]
        nxt = {}
        for i, x in prev.items():
            for j in range(i, nch):
                ws = wsl.get((i, j))
                if ws is None:
                    continue
                y = _adv_left(x, albars[k], ws, als[k])
                nxt[j] = nxt[j] + y if j in nxt else y
        gl_cells[k + 1] = nxt

    # right side, descending channels
    chr_ = {last: _embed_mid(r2, o.rpos[last][0], False)}
    for j in range(last - 1, 0, -1):
        rhs = _advance_cell_right(dict(chr_), arbars, ars, wsl, nch).get(j)
        if rhs is None:
            continue
        if wsl.get((j, j)) is None:
            chr_[j] = rhs
        else:
            ws = wsl[(j, j)]
            vzj = TensorVectorizer(rhs.legs)

            def adv_diag_r(x, ws=ws):
                for k in reversed(range(ncell)):
                    x = _adv_right(x, arbars[k], ws, ars[k])
                return x
            chr_[j] = _solve_middle(rhs, adv_diag_r, vzj, tol)
    rhs3 = _advance_cell_right(dict(chr_), arbars, ars, wsl, nch).get(0)
    if rhs3 is None:
        e_cell_r = 0.0
        gr_out = r2 * 0.0
    else:
        rhs2 = _squeeze_mid(rhs3)
        e_cell_r = _pair(rho_l, rhs2)

        def right_deflated(x):
            y = _cell_right(x, ars, ars)
            return x - y + r2 * _pair(rho_l, x)
        gr_out = solve_linear(right_deflated, rhs2 - r2 * e_cell_r, vz2r,
                              tol=tol)
    chr_[0] = _embed_mid(gr_out, o.rpos[0][0], False)
    gr_cells = [None] * ncell
    gr_cells[ncell - 1] = dict(chr_)
    for k in range(ncell - 1, 0, -1):
        prev = gr_cells[k]
        nxt = {}
        for j, x in prev.items():
            for i in range(0, j + 1):
                ws = wsl.get((i, j))
                if ws is None:
                    continue
                y = _adv_right(x, arbars[k], ws, ars[k])
                nxt[i] = nxt[i] + y if i in nxt else y
        gr_cells[k - 1] = nxt

    wspace = GradedSpace(o.tensor.legs[0].sectors, False)
    gl = [_stack(gl_cells[k], o.lpos, wspace, True, bonds[k],
                 bonds[k].dualize())
          for k in range(ncell)]
    gr = [_stack(gr_cells[k], o.rpos, wspace, False,
                 bonds[(k + 1) % ncell].dualize(), bonds[(k + 1) % ncell])
          for k in range(ncell)]

    lam = None
    for k in range(ncell):
        ck = umps.c[k]
        nu = contract(gl[(k + 1) % ncell], [1, 2, 3], ck.conjugate(), [4, 1],
                      ck, [3, 5], gr[k], [4, 2, 5]).item()
        if k == ncell - 1:
            lam = nu
        gr[k] = gr[k] * (1.0 / nu)
    e = 0.5 * (e_cell_l.real + e_cell_r.real) / ncell
    return EnvironmentPair(tuple(gl), tuple(gr), lam, e,
                           e_cell_l.real / ncell, e_cell_r.real / ncell)


def env_residual(umps: UniformMPS, o: UniformMPO,
                 envs: EnvironmentPair) -> float:
    """Relative defect of the left environment's cell fixed-point equation."""
    ncell = umps.unit_cell
    gl0 = envs.gl[0]
    adv = gl0
    for k in range(ncell):
        adv = _adv_left(adv, umps.al[k].conjugate(), o.tensor, umps.al[k])
    last = len(o.channels) - 1
    bound = GradedSpace(umps.al[0].legs[0].sectors, False)
    wspace = GradedSpace(o.tensor.legs[0].sectors, False)
    corr = _stack({last: _embed_mid(_id_left(bound), o.lpos[last][0], True)},
                  o.lpos, wspace, True, bound, bound.dualize())
    resid = adv - gl0 - corr * (envs.e_left * ncell)
    return resid.norm() / max(gl0.norm(), 1e-300)


# -- effective Hamiltonians and VUMPS ------------------------------------------


def _heff_ac(gl, w, gr):
    def apply(x):
        return contract(gl, [-1, 1, 2], x, [2, 3, 4], w, [1, -2, 3, 5],
                        gr, [-3, 5, 4]).apply_parity([2])
    return apply


def _heff_c(gl, gr):
    def apply(x):
        return contract(gl, [-1, 1, 2], x, [2, 3],
                        gr, [-2, 1, 3]).apply_parity([1])
    return apply


def _min_ac_c(ac, c, c_prev):
    """Canonical pair closest to (ac, c): polar-based Procrustes fits."""
    tl = contract(ac, [-1, -2, 1], c.conjugate(), [1, -3])
    al = decompose(tl, 2, "polar").factors[0]
    tr = contract(c_prev.conjugate(), [-1, 1], ac, [1, -2, -3])
    ar = decompose(tr.conjugate(), 2, "polar").factors[0].conjugate()
    return al, ar


def vumps_run(umps: UniformMPS, o: UniformMPO, tol: float = 1e-10,
              max_iter: int = 500):
    """Variational uniform ground-state search; returns (state, e, log).

    Each iteration refreshes the environments, solves the one-site and
    zero-site eigenproblems sequentially over the cell, and regauges
    through polar decompositions. The residual is the gauge mismatch
    max_k |ac_k - al_k c_k|; fifty iterations without improvement abort
    with diagnostics.
    """
    log = []
    res = 1.0
    best = np.inf
    stall = 0
    e = 0.0
    for it in range(1, max_iter + 1):
        env_tol = float(np.clip(res * 1e-2, max(tol * 1e-1, 1e-14), 1e-6))
        eig_tol = float(np.clip(res * 1e-3, max(tol * 1e-2, 1e-14), 1e-5))
        envs = mpo_environments(umps, o, tol=env_tol)
        e = envs.e
        ncell = umps.unit_cell
        acs, cs = [], []
        for k in range(ncell):
            vza = TensorVectorizer(umps.ac[k].legs)
            _, vecs = eigsh_smallest(_heff_ac(envs.gl[k], o.tensor,
                                              envs.gr[k]),
                                     vza, v0=umps.ac[k], tol=eig_tol)
            acs.append(_fix_phase(vecs[0] * (1.0 / vecs[0].norm())))
            vzc = TensorVectorizer(umps.c[k].legs)
            _, vecs = eigsh_smallest(_heff_c(envs.gl[(k + 1) % ncell],
                                             envs.gr[k]),
                                     vzc, v0=umps.c[k], tol=eig_tol)
            cs.append(_fix_phase(vecs[0] * (1.0 / vecs[0].norm())))
        als, ars = [], []
        res = 0.0
        for k in range(ncell):
            al, ar = _min_ac_c(acs[k], cs[k], cs[k - 1])
            als.append(al)
            ars.append(ar)
            gap = (acs[k] - contract(al, [-1, -2, 1], cs[k], [1, -3])).norm()
            res = max(res, gap)
        umps = UniformMPS(tuple(als), tuple(als), tuple(ars), tuple(cs),
                          tuple(acs))
        dims = {c: d for c, d in umps.bond_space(ncell - 1).sectors}
        log.append({"iteration": it, "residual": res, "e": e,
                    "bond_dims": dims})
        if res < tol:
            break
        if res < best * (1.0 - 1e-3):
            best = res
            stall = 0
        else:
            stall += 1
            if stall >= 50:
                raise RuntimeError(
                    "variational iteration stalled: residual "
                    f"{res:.3e} after {it} sweeps (best {best:.3e})")
    else:
        raise RuntimeError(
            f"no convergence below {tol:.1e} in {max_iter} iterations "
            f"(residual {res:.3e})")
    envs = mpo_environments(umps, o, tol=max(tol * 1e-1, 1e-14))
    return umps, envs.e, log


def tdvp_step(umps: UniformMPS, o: UniformMPO, dt: float,
              integrator: str = "rk4") -> UniformMPS:
    """One real-time step with environments frozen at the initial state.

    The center tensors are integrated under the (linear) effective
    Hamiltonians, then the cell is regauged and renormalized; Euler and
    classical RK4 tableaus are available.
    """
    if dt <= 0:
        raise ValueError("time step must be positive")
    if integrator not in ("euler", "rk4"):
        raise ValueError(f"unknown integrator {integrator!r}")
    envs = mpo_environments(umps, o, tol=1e-12)
    ncell = umps.unit_cell
    hac = [_heff_ac(envs.gl[k], o.tensor, envs.gr[k]) for k in range(ncell)]
    hc = [_heff_c(envs.gl[(k + 1) % ncell], envs.gr[k])
          for k in range(ncell)]

    def deriv(acs, cs):
        dac = [hac[k](acs[k]) * (-1j) for k in range(ncell)]
        dc = [hc[k](cs[k]) * (-1j) for k in range(ncell)]
        return dac, dc

    acs, cs = list(umps.ac), list(umps.c)
    if integrator == "euler":
        dac, dc = deriv(acs, cs)
        acs = [acs[k] + dac[k] * dt for k in range(ncell)]
        cs = [cs[k] + dc[k] * dt for k in range(ncell)]
    else:
        k1 = deriv(acs, cs)
        y2 = ([acs[k] + k1[0][k] * (dt / 2) for k in range(ncell)],
              [cs[k] + k1[1][k] * (dt / 2) for k in range(ncell)])
        k2 = deriv(*y2)
        y3 = ([acs[k] + k2[0][k] * (dt / 2) for k in range(ncell)],
              [cs[k] + k2[1][k] * (dt / 2) for k in range(ncell)])
        k3 = deriv(*y3)
        y4 = ([acs[k] + k3[0][k] * dt for k in range(ncell)],
              [cs[k] + k3[1][k] * dt for k in range(ncell)])
        k4 = deriv(*y4)
        acs = [acs[k] + (k1[0][k] + k2[0][k] * 2.0 + k3[0][k] * 2.0
                         + k4[0][k]) * (dt / 6) for k in range(ncell)]
        cs = [cs[k] + (k1[1][k] + k2[1][k] * 2.0 + k3[1][k] * 2.0
                       + k4[1][k]) * (dt / 6) for k in range(ncell)]
    acs = [t * (1.0 / t.norm()) for t in acs]
    cs = [t * (1.0 / t.norm()) for t in cs]
    als, ars = [], []
    for k in range(ncell):
        al, ar = _min_ac_c(acs[k], cs[k], cs[k - 1])
        als.append(al)
        ars.append(ar)
    return UniformMPS(tuple(als), tuple(als), tuple(ars), tuple(cs),
                      tuple(acs))


# -- tangent space --------------------------------------------------------------


def left_null_space(al: GradedTensor) -> GradedTensor:
    """Orthonormal complement of a left isometry, as (vl, p, null-bra).

    Together with al it spans the fused (virtual x physical) space, so
    vl . vl^dag + al . al^dag is the identity there.
    """
    fused, rec = al.fuse_legs(0, 2)
    fspace = fused_space([al.legs[0], al.legs[1]], False)
    vr_dims = dict(GradedSpace(al.legs[2].sectors, False).sectors)
    sectors, blocks = [], {}
    for c, df in fspace.sectors:
        arr = fused.blocks.get((c, c))
        if arr is None:
            nb = np.eye(df, dtype=complex)
        else:
            nb = sla.null_space(arr.conj().T)
        if nb.shape[1] == 0:
            continue
        sectors.append((c, nb.shape[1]))
        blocks[(c, c)] = nb.astype(complex)
    if not sectors:
        raise ValueError("isometry has no left null space")
    nleg = GradedSpace(sectors, True)
    v2 = GradedTensor((GradedSpace(fspace.sectors, False), nleg), blocks,
                      validate=False)
    return v2.split_legs(rec)


def tangent_project(umps: UniformMPS, target: GradedTensor,
                    site: int = 0):
    """Left-gauge tangent components of a one-site direction.

    Returns (b, x): x collects the null-space coordinates and b = vl . x
    is the projected direction with the cell-tensor leg layout.
    """
    vl = left_null_space(umps.al[site])
    x = contract(vl.conjugate(), [-1, 2, 1], target, [1, 2, -2])
    b = contract(vl, [-1, -2, 1], x, [1, -3])
    return b, x


def fidelity(u1: UniformMPS, u2: UniformMPS) -> float:
    """Per-site overlap magnitude of two uniform states."""
    if u1.unit_cell != u2.unit_cell:
        raise ValueError("unit cells differ")
    bond = GradedSpace(u1.al[0].legs[0].sectors, False)
    bond2 = GradedSpace(u2.al[0].legs[0].sectors, False)
    legs = (bond, bond2.dualize())
    vz = TensorVectorizer(legs)
    seed = GradedTensor.from_function(
        legs, lambda key, shape: np.ones(shape, dtype=complex))
    lam, _ = eigs_dominant(lambda x: _cell_left(x, u1.al, u2.al), vz,
                           v0=seed)
    return float(abs(lam) ** (1.0 / u1.unit_cell))


def expectation_local_uniform(umps: UniformMPS, op: GradedTensor,
                              site: int = 0) -> complex:
    """<O> on one site of the normalized uniform state."""
    ac = umps.ac[site % umps.unit_cell]
    if op.legs[0].sectors != ac.legs[1].sectors or not op.legs[1].dual:
        raise ValueError("operator space mismatch")
    l = _id_left(GradedSpace(ac.legs[0].sectors, False))
    r = _id_right(GradedSpace(ac.legs[2].sectors, False))
    val = contract(l, [1, 2], ac.conjugate(), [5, 3, 1], op, [3, 4],
                   ac, [2, 4, 6], r, [5, 6])
    return val.item()
