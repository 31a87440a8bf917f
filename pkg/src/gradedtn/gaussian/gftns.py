"""Gaussian fermionic tensor network states.

A translation-invariant state is parametrized by one antisymmetric
complex matrix A over the local generators

    chi = (a_phys, theta^h, thetabar^h, theta^v, thetabar^v),

with M modes per virtual group.  Site tensors have entries Pf(A[n])
over occupation bit strings n; bonds pair thetabar on one site with
theta on the neighbor.  Physical covariances are obtained per momentum
by integrating out the virtual generators (a Schur complement on the
quadratic form), which is validated against dense contraction of the
converted tensors rather than trusted a priori.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..charges import fused_space, fusion_layout, parity_space
from ..tensor import GradedTensor
from .bdg import PWaveParams, _momentum_grid, _pwave_kernels, CorrelationMatrix
from .pfaffian import pfaffian

__all__ = [
    "GaussianMap",
    "gftns_tensor",
    "gftns_to_peps",
    "gftns_correlations",
    "gftns_energy_density",
    "gftns_optimize",
    "save_gaussian_map",
    "load_gaussian_map",
]

@dataclass(frozen=True)
class GaussianMap:
    """Antisymmetric generator matrix of one site tensor.

    a: (n_phys + 4m) x (n_phys + 4m) complex antisymmetric matrix in
    the canonical generator order (physical, theta^h, thetabar^h,
    theta^v, thetabar^v).  phases are the boundary twists of the torus
    the state lives on (0.0 periodic, 0.5 antiperiodic per direction).
    """
    a: np.ndarray
    m: int
    n_phys: int = 1
    phases: tuple = (0.5, 0.5)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        k = self.n_phys + 4 * self.m
        if a.shape != (k, k):
            raise ValueError(f"A must be {k}x{k}, got {a.shape}")
        if np.abs(a + a.T).max() > 1e-14 * max(1.0, np.abs(a).max()):
            raise ValueError("A must be antisymmetric")
        object.__setattr__(self, "a", a)

    @property
    def bond_dim(self):
        return 2 ** self.m

    def blocks(self):
        """(A_pp, A_pv, A_vv) split at the physical/virtual boundary."""
        n = self.n_phys
        return self.a[:n, :n], self.a[:n, n:], self.a[n:, n:]


def _mode_space(nmodes):
    """Graded space of nmodes fermionic modes and its bit-string layout.

    Returns (space, layout) where layout maps an occupation tuple to
    (charge, offset within the charge sector); the layout is the
    canonical fusion layout of nmodes copies of the single-mode space.
    """
    p = parity_space(1, 1)
    factors = [p] * nmodes
    raw = fusion_layout(factors)
    occ = {}
    for charges, (fused, offset, _) in raw.items():
        occ[tuple(c[0] for c in charges)] = (fused, offset)
    return fused_space(factors), occ


def gftns_tensor(gmap: GaussianMap) -> GradedTensor:
    """Site tensor in generator order (phys, left, right, down, up).

    Legs: physical ket, left ket (theta^h), right bra (thetabar^h),
    down ket (theta^v), up bra (thetabar^v); entries are Pfaffians of
    the submatrices of A selected by each even-parity bit string.
    """
    if gmap.m > 3:
        raise ValueError("bond dimension guard: m must be <= 3")
    n, m = gmap.n_phys, gmap.m
    pspace, playout = _mode_space(n)
    vspace, vlayout = _mode_space(m)
    legs = (pspace, vspace, vspace.dualize(), vspace, vspace.dualize())
    sizes = (n, m, m, m, m)

    blocks = {}
    for bits in range(1 << (n + 4 * m)):
        occ = [(bits >> i) & 1 for i in range(n + 4 * m)]
        if sum(occ) % 2:
            continue
        sel = np.flatnonzero(occ)
        val = pfaffian(gmap.a[np.ix_(sel, sel)])
        if val == 0.0:
            continue
        pos = 0
        key, idx = [], []
        for li, sz in enumerate(sizes):
            layout = playout if li == 0 else vlayout
            cnt = sum(occ[pos:pos + sz])
            if legs[li].dual and (cnt * (cnt - 1) // 2) & 1:
                # a composite bra index is the reversed dual word, so
                # relabeling the ascending Grassmann monomial costs a sign
                val = -val
            charge, offset = layout[tuple(occ[pos:pos + sz])]
            key.append(charge)
            idx.append(offset)
            pos += sz
        key = tuple(key)
        if key not in blocks:
            shape = tuple(leg.degeneracy(c) for leg, c in zip(legs, key))
            blocks[key] = np.zeros(shape, dtype=complex)
        blocks[key][tuple(idx)] = val
    return GradedTensor(legs, blocks)


def gftns_to_peps(gmap: GaussianMap) -> GradedTensor:
    """Site tensor permuted to PEPS leg order (left, down, phys, right, up)."""
    return gftns_tensor(gmap).permute([1, 3, 0, 2, 4])


def _pair_kernel(gmap: GaussianMap, kx, ky):
    """Physical pairing amplitude g(k) for momentum pairs {k, -k}.

    kx, ky: arrays of momenta (one representative per pair).  Builds
    the quadratic form over the virtual generators at k and -k, adds
    the bond kernels, and eliminates the virtuals.  Returns g with
    |psi> ~ prod_k (1 + g(k) adag_k adag_-k)|0>.
    """
    if gmap.n_phys != 1:
        raise ValueError("momentum composition implemented for one "
                         "physical mode per site")
    m = gmap.m
    _, apv, avv = gmap.blocks()
    npair = kx.size
    dim = 8 * m
    kmat = np.zeros((npair, dim, dim), dtype=complex)

    def add(rows, cols, coeff):
        # coeff: (npair,) or scalar; unit block of size m
        for i in range(m):
            kmat[:, rows + i, cols + i] += coeff
            kmat[:, cols + i, rows + i] -= coeff

    # on-site quadratic form: v_k^T A_vv v_-k
    kmat[:, 0:4 * m, 4 * m:8 * m] += avv
    kmat[:, 4 * m:8 * m, 0:4 * m] += avv        # -avv^T = +avv

    th, tbh, tv, tbv = 0, m, 2 * m, 3 * m       # offsets within one v block
    o = 4 * m                                   # offset of the -k block
    ex, ey = np.exp(-1j * kx), np.exp(-1j * ky)
    add(tbh, o + th, ex)          # e^{-i kx} thetabar^h_k . theta^h_-k
    add(o + tbh, th, 1.0 / ex)
    add(tbv, o + tv, ey)
    add(o + tbv, tv, 1.0 / ey)

    # sources: a_-k^T A_pv v_k  +  a_k^T A_pv v_-k
    r = np.zeros((2, dim), dtype=complex)
    r[1, 0:4 * m] = apv[0]
    r[0, 4 * m:8 * m] = apv[0]

    try:
        kinv_rt = np.linalg.solve(kmat, np.broadcast_to(
            r.T[None], (npair, dim, 2)).copy())
    except np.linalg.LinAlgError:
        dets = np.linalg.det(kmat)
        bad = int(np.argmin(np.abs(dets)))
        raise ValueError(
            f"singular virtual form at k = ({kx[bad]:.6f}, {ky[bad]:.6f})")
    mout = -np.einsum("ij,njl->nil", r, kinv_rt)
    # physical exponent 1/2 S^T M S over S = (a_k, a_-k); pairing entry
    return mout[:, 0, 1]


def _pair_list(l, phases):
    """Momentum-pair bookkeeping on an l x l grid.

    Returns (kx, ky, pair_idx, self_idx): one representative momentum
    per {k, -k} pair, flat grid indices of pairs (idx_k, idx_minusk),
    and flat indices of self-conjugate momenta (periodic grids only).
    """
    phx, phy = phases
    mx, my = np.meshgrid(np.arange(l), np.arange(l), indexing="ij")

    def negate(mm, ph):
        return np.mod(-(mm + 2 * ph), l).astype(int) if ph == 0.0 \
            else (l - mm - 1)

    nx, ny = negate(mx, phx), negate(my, phy)
    flat = mx * l + my
    nflat = nx * l + ny
    pair_mask = flat < nflat
    self_mask = flat == nflat
    kxg, kyg = _momentum_grid(l, phases)
    return (kxg[pair_mask], kyg[pair_mask],
            (flat[pair_mask], nflat[pair_mask]),
            flat[self_mask])


def _momentum_data(gmap: GaussianMap, l, phases):
    """(nk, pk) grids of the contracted GfTNS on the l x l torus."""
    kx, ky, (ik, imk), iself = _pair_list(l, phases)
    g = _pair_kernel(gmap, kx, ky)
    w = np.abs(g) ** 2
    nk_flat = np.zeros(l * l)
    pk_flat = np.zeros(l * l, dtype=complex)
    nk_flat[ik] = w / (1.0 + w)
    nk_flat[imk] = w / (1.0 + w)
    pk_flat[ik] = -g / (1.0 + w)
    pk_flat[imk] = g / (1.0 + w)
    if iself.size:
        # single momentum cannot pair with itself: mode stays empty,
        # provided the virtual form is regular there
        kxg, kyg = _momentum_grid(l, phases)
        _self_check(gmap, kxg.ravel()[iself], kyg.ravel()[iself])
    return nk_flat.reshape(l, l), pk_flat.reshape(l, l)


def _self_check(gmap, kx, ky):
    m = gmap.m
    _, _, avv = gmap.blocks()
    for x, y in zip(kx, ky):
        k = np.array(avv, dtype=complex)
        for (row, col, ph) in ((m, 0, np.exp(-1j * x)),
                               (3 * m, 2 * m, np.exp(-1j * y))):
            for i in range(m):
                k[row + i, col + i] += ph
                k[col + i, row + i] -= ph
        if abs(np.linalg.det(k)) < 1e-14:
            raise ValueError(
                f"singular virtual form at k = ({x:.6f}, {y:.6f})")


def gftns_correlations(gmap: GaussianMap, l, phases=None) -> CorrelationMatrix:
    """Physical Majorana covariance of the GfTNS on an l x l torus."""
    if phases is None:
        phases = gmap.phases
    nk, pk = _momentum_data(gmap, l, phases)
    return CorrelationMatrix(l=l, phases=tuple(phases), nk=nk, pk=pk)


def gftns_energy_density(gmap: GaussianMap, params: PWaveParams, l,
                         phases=None):
    """Energy density of the GfTNS for the p-wave Hamiltonian."""
    if phases is None:
        phases = gmap.phases
    nk, pk = _momentum_data(gmap, l, phases)
    kxg, kyg = _momentum_grid(l, phases)
    xi, dk = _pwave_kernels(params, kxg, kyg)
    e = np.sum(xi * nk) - np.sum(np.real(np.conj(dk) * pk))
    return float(np.real(e)) / (l * l)


def _vector_to_matrix(x, k):
    """Real parameter vector -> complex antisymmetric k x k matrix."""
    iu = np.triu_indices(k, 1)
    nup = len(iu[0])
    vals = x[:nup] + 1j * x[nup:]
    a = np.zeros((k, k), dtype=complex)
    a[iu] = vals
    a -= a.T
    return a


def _matrix_to_vector(a):
    iu = np.triu_indices(a.shape[0], 1)
    vals = a[iu]
    return np.concatenate([vals.real, vals.imag])


def _descend(energy, gradient, x, e, max_iter, grad_tol, step=0.1,
             verbose=False, tag=""):
    """Steepest descent with a backtracking line search that grows the
    trial step on easy successes.  Returns (x, e, last step)."""
    for it in range(max_iter):
        g = gradient(x)
        gn = np.linalg.norm(g)
        if gn < grad_tol:
            break
        d = -g / gn
        accepted = False
        while step > 1e-13:
            e_new = energy(x + step * d)
            if e_new < e - 1e-12 * abs(e):
                x = x + step * d
                e = e_new
                accepted = True
                step *= 1.3
                break
            step *= 0.5
        if not accepted:
            break
        if verbose and it % 50 == 0:
            print(f"  {tag}iter {it}: e = {e:.8f}, |g| = {gn:.2e}")
    return x, e, step


def gftns_optimize(params: PWaveParams, m, n_s, seed=0, restarts=3,
                   phases=(0.5, 0.5), max_iter=2000, grad_tol=1e-7,
                   fd_step=1e-5, x0=None, verbose=False):
    """Minimize the GfTNS energy density on an n_s-site torus.

    Gradient descent with central finite differences and a backtracking
    line search.  Each restart is probed briefly on a coarse momentum
    grid, the best candidate is converged there, and the final energy
    is polished and reported on the full n_s grid.  x0 seeds the first
    candidate: a real parameter vector or a GaussianMap to warm-start
    from (a smaller-m map is embedded into the larger virtual space).
    """
    l = int(round(np.sqrt(n_s)))
    if l * l != n_s:
        raise ValueError("n_s must be a perfect square")
    lc = 20 if l > 26 else l
    k = 1 + 4 * m
    rng = np.random.default_rng(seed)

    def make_energy(grid):
        def energy(x):
            gmap = GaussianMap(_vector_to_matrix(x, k), m, 1, phases)
            try:
                return gftns_energy_density(gmap, params, grid, phases)
            except ValueError:
                return np.inf
        return energy

    def make_gradient(energy):
        def gradient(x):
            g = np.zeros_like(x)
            for i in range(len(x)):
                xp = x.copy(); xp[i] += fd_step
                xm = x.copy(); xm[i] -= fd_step
                g[i] = (energy(xp) - energy(xm)) / (2 * fd_step)
            return g
        return gradient

    e_c = make_energy(lc)
    g_c = make_gradient(e_c)
    nup = k * (k - 1) // 2
    seeds = []
    if x0 is not None:
        if isinstance(x0, GaussianMap):
            if x0.m < m:
                x0 = _embed_params(x0, m, rng, noise=0.1)
            x0 = _matrix_to_vector(x0.a)
        seeds.append(np.asarray(x0, dtype=float))
    while len(seeds) < max(1, restarts):
        seeds.append(rng.standard_normal(2 * nup) * 0.7)

    probe_iter = min(200, max_iter)
    best = None
    for i, x in enumerate(seeds):
        x, e, _ = _descend(e_c, g_c, x, e_c(x), probe_iter, grad_tol,
                           verbose=verbose, tag=f"probe{i} ")
        if best is None or e < best[1]:
            best = (x, e)
    x, e = best
    x, e, step = _descend(e_c, g_c, x, e, max_iter, grad_tol,
                          verbose=verbose, tag="coarse ")
    if lc != l:
        e_f = make_energy(l)
        g_f = make_gradient(e_f)
        x, e, _ = _descend(e_f, g_f, x, e_f(x), max(200, max_iter // 4),
                           grad_tol, step=step, verbose=verbose, tag="fine ")
    gmap = GaussianMap(_vector_to_matrix(x, k), m, 1, phases)
    return gmap, float(e)


def _embed_params(gmap: GaussianMap, m_new, rng, noise=0.05):
    """Embed a GaussianMap into a larger virtual space (extra modes are
    coupled only through small noise), for warm-starting m+1 runs."""
    m_old, n = gmap.m, gmap.n_phys
    if m_new < m_old:
        raise ValueError("target mode count is smaller than the source")
    k_new = n + 4 * m_new
    a = rng.standard_normal((k_new, k_new)) * noise \
        + 1j * rng.standard_normal((k_new, k_new)) * noise
    a -= a.T
    a = np.asarray(a, dtype=complex)

    def sl(group, mold_count):
        # position of group (0 phys, 1..4 virtual) in old and new layouts
        if group == 0:
            return np.arange(n), np.arange(n)
        old = n + (group - 1) * m_old + np.arange(mold_count)
        new = n + (group - 1) * m_new + np.arange(mold_count)
        return old, new

    for gi in range(5):
        oi, ni = sl(gi, m_old if gi else n)
        for gj in range(5):
            oj, nj = sl(gj, m_old if gj else n)
            a[np.ix_(ni, nj)] = gmap.a[np.ix_(oi, oj)]
    a = 0.5 * (a - a.T)
    return GaussianMap(a, m_new, n, gmap.phases)


def save_gaussian_map(path, gmap: GaussianMap):
    """Text format: header `n_phys m phase_x phase_y`, then one line
    per upper-triangle entry (row col re im), canonical generator order."""
    k = gmap.n_phys + 4 * gmap.m
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{gmap.n_phys} {gmap.m} {gmap.phases[0]} {gmap.phases[1]}\n")
        for i in range(k):
            for j in range(i + 1, k):
                v = complex(gmap.a[i, j])
                fh.write(f"{i} {j} {v.real!r} {v.imag!r}\n")


def load_gaussian_map(path) -> GaussianMap:
    with open(path, "r", encoding="ascii") as fh:
        first = fh.readline().split()
        n, m = int(first[0]), int(first[1])
        phases = (float(first[2]), float(first[3]))
        k = n + 4 * m
        a = np.zeros((k, k), dtype=complex)
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            i, j = int(parts[0]), int(parts[1])
            a[i, j] = float(parts[2]) + 1j * float(parts[3])
        a -= a.T.copy()
        return GaussianMap(a, m, n, phases)
