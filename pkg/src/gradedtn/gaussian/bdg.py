"""Free-fermion reference solutions.

Bogoliubov-de Gennes diagonalization of the open Kitaev chain, the
momentum-space solution of the two-dimensional p-wave superconductor on
a torus, and the band / Bethe-ansatz quadratures used as energy
references for the variational methods.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.special

from .pfaffian import pfaffian

__all__ = [
    "BdGSolution",
    "KitaevParams",
    "PWaveParams",
    "solve_bdg_chain",
    "solve_bdg_torus",
    "kitaev_energy_density",
    "kitaev_gap",
    "lieb_wu_energy",
]


@dataclass(frozen=True)
class KitaevParams:
    """Open Kitaev chain  H = -t sum (adag_i a_{i+1} + h.c.)
    - mu sum adag_i a_i - delta sum (adag_i adag_{i+1} + h.c.)."""
    n: int
    t: float = 1.0
    delta: float = 1.0
    mu: float = -1.0


@dataclass(frozen=True)
class PWaveParams:
    """Chiral p-wave superconductor on the square lattice,

        H = -t sum_n (adag_n a_{n+x} + adag_n a_{n+y} + h.c.)
            - mu sum_n adag_n a_n
            - delta sum_n (adag_n adag_{n+x} + i adag_n adag_{n+y} + h.c.)
    """
    t: float = 1.0
    delta: float = 0.2
    mu: float = -2.0


@dataclass
class BdGSolution:
    """Diagonalized quadratic Hamiltonian.

    energies: single-particle excitation energies, ascending, >= 0.
    u, v: Bogoliubov coefficients, row i is mode i (chain case).
    e0: ground-state energy (total, not per site).
    c, f: ground-state correlators <adag_x a_y> and <a_x a_y>.
    parity: fermion parity of the Bogoliubov vacuum (chain case).
    """
    energies: np.ndarray
    e0: float
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    c: np.ndarray | None = None
    f: np.ndarray | None = None
    parity: int | None = None
    local_energy: np.ndarray | None = None
    chern: int | None = None
    gap: float | None = None
    correlations: "object | None" = None
    extras: dict = field(default_factory=dict)

    def mode_profile(self, i=0):
        """|U_{ix}|^2 + |V_{ix}|^2 of excitation mode i (chain)."""
        return np.abs(self.u[i]) ** 2 + np.abs(self.v[i]) ** 2


def _kitaev_bdg_matrix(p: KitaevParams):
    n, t, delta, mu = p.n, p.t, p.delta, p.mu
    xi = np.zeros((n, n))
    np.fill_diagonal(xi, -mu)
    idx = np.arange(n - 1)
    xi[idx, idx + 1] = -t
    xi[idx + 1, idx] = -t
    # sign fixed by the dense Fock-space oracle: with (a, adag) Nambu
    # ordering, H = 1/2 Ups^dag H_BdG Ups - mu N / 2 requires
    # dm[x, x+1] = -delta
    dm = np.zeros((n, n))
    dm[idx, idx + 1] = -delta
    dm[idx + 1, idx] = delta
    h = np.block([[xi, dm], [-dm.conj(), -xi.T]])
    return h


def _bogoliubov_modes(h):
    """Positive modes of a 2N x 2N BdG matrix in the (a, adag) basis.

    Works in the Majorana representation and block-diagonalizes with a
    real Schur decomposition, which keeps the particle-hole structure
    exact even for (near-)zero modes where eigh would mix the pair.
    Returns (energies ascending, U, V) with rows indexing modes.
    """
    n = h.shape[0] // 2
    eye = np.eye(n)
    # Nambu (a, adag) -> Majorana (c1, c2):  a = (c1 - i c2)/2
    t = 0.5 * np.block([[eye, -1j * eye], [eye, 1j * eye]])
    b = t.conj().T @ h @ t
    a = np.real(-1j * (b - b.T))
    if np.abs(a + a.T).max() > 1e-10 * max(1.0, np.abs(a).max()):
        raise ValueError("BdG matrix lacks particle-hole symmetry")
    s, o = scipy.linalg.schur(a, output="real")
    # normalize 2x2 blocks to [[0, e], [-e, 0]] with e >= 0
    for m in range(n):
        i = 2 * m
        if s[i, i + 1] < 0.0:
            o[:, [i, i + 1]] = o[:, [i + 1, i]]
            s[[i, i + 1], :] = s[[i + 1, i], :]
            s[:, [i, i + 1]] = s[:, [i + 1, i]]
    energies = s[2 * np.arange(n), 2 * np.arange(n) + 1].copy()
    order = np.argsort(energies)
    energies = energies[order]
    q = o[:, 2 * order] + 1j * o[:, 2 * order + 1]     # columns = modes
    u = 0.5 * (q[:n] + 1j * q[n:]).T
    v = 0.5 * (q[:n] - 1j * q[n:]).T
    return energies, u, v


def solve_bdg_chain(params: KitaevParams) -> BdGSolution:
    """Exact solution of the open Kitaev chain.

    Diagonalizes the 2N x 2N BdG matrix in the Nambu basis
    (a_1..a_N, adag_1..adag_N) and keeps the N non-negative modes.
    """
    n = params.n
    h = _kitaev_bdg_matrix(params)
    energies, u, v = _bogoliubov_modes(h)
    e0 = -0.5 * float(np.sum(energies + params.mu))

    c = v.conj().T @ v
    f = u.conj().T @ v

    # Majorana covariance; its Pfaffian is the vacuum parity
    g1 = -f.conj()                       # <adag_x adag_y>
    eye = np.eye(n)
    cc11 = g1 + c + (eye - c.T) + f      # <c1_x c1_y>
    cc22 = -g1 + c + (eye - c.T) - f
    cc12 = 1j * (-g1 + c - (eye - c.T) + f)
    cc21 = 1j * (-g1 - c + (eye - c.T) + f)
    gamma = np.zeros((2 * n, 2 * n), dtype=complex)
    gamma[0::2, 0::2] = 1j * cc11
    gamma[1::2, 1::2] = 1j * cc22
    gamma[0::2, 1::2] = 1j * cc12
    gamma[1::2, 0::2] = 1j * cc21
    gamma -= 1j * np.eye(2 * n)
    parity = int(np.sign(pfaffian(gamma.real).real))

    local = _chain_local_energy(params, c, f)
    return BdGSolution(energies=energies, e0=e0, u=u, v=v, c=c, f=f,
                       parity=parity, local_energy=local,
                       gap=float(energies[0]))


def _chain_local_energy(p: KitaevParams, c, f):
    """Site-resolved energies: on-site term plus half of each touching bond."""
    n = p.n
    g1 = -f.conj()
    local = -p.mu * np.real(np.diag(c)).copy()
    for x in range(n - 1):
        bond = -p.t * (c[x, x + 1] + c[x + 1, x]) \
               - p.delta * (g1[x, x + 1] + f[x + 1, x])
        bond = float(np.real(bond))
        local[x] += 0.5 * bond
        local[x + 1] += 0.5 * bond
    return local


def kitaev_energy_density(t=1.0, delta=1.0, mu=-1.0):
    """Thermodynamic-limit energy density of the Kitaev chain.

    e = -mu/2 - (1/4pi) int_-pi^pi E(k) dk,
    E(k) = sqrt((-2t cos k - mu)^2 + 4 delta^2 sin^2 k).
    """
    def band(k):
        return np.sqrt((-2 * t * np.cos(k) - mu) ** 2
                       + 4 * delta ** 2 * np.sin(k) ** 2)
    val, _ = scipy.integrate.quad(band, -np.pi, np.pi, epsabs=1e-13,
                                  epsrel=1e-13, limit=200)
    return -mu / 2 - val / (4 * np.pi)


def kitaev_gap(t=1.0, delta=1.0, mu=-1.0):
    """min_k E(k), taken over the analytic critical points in cos k."""
    a = 4 * (t ** 2 - delta ** 2)
    b = 4 * t * mu
    cands = [1.0, -1.0]
    if a != 0.0:
        cstar = -b / (2 * a)
        if -1.0 <= cstar <= 1.0:
            cands.append(cstar)
    vals = [(2 * t * c + mu) ** 2 + 4 * delta ** 2 * (1 - c * c)
            for c in cands]
    return float(np.sqrt(min(vals)))


def lieb_wu_energy(u):
    """Half-filled Hubbard ground-state energy density (Lieb-Wu),

        e(U) = -4 int_0^inf J0(w) J1(w) / (w (1 + exp(w U / 2))) dw,

    with e(0) = -4/pi.
    """
    def integrand(w):
        return (scipy.special.j0(w) * scipy.special.j1(w)
                / (w * (1.0 + np.exp(np.minimum(w * u / 2.0, 700.0)))))

    head = 40.0
    val, _ = scipy.integrate.quad(integrand, 0.0, head, epsabs=1e-13,
                                  epsrel=1e-13, limit=2000)
    if u < 1.0:
        # slowly decaying oscillatory tail (J0 J1 ~ -cos(2w)/(pi w));
        # sum the half-period chunks and average the alternating partials
        edges = head + (np.pi / 2.0) * np.arange(4001)
        chunks = np.empty(len(edges) - 1)
        for i in range(len(chunks)):
            chunks[i], _ = scipy.integrate.fixed_quad(
                np.vectorize(integrand), edges[i], edges[i + 1], n=10)
        partial = np.cumsum(chunks)
        for _ in range(3):
            partial = 0.5 * (partial[1:] + partial[:-1])
        val += partial[-1]
    return -4.0 * val


def _pwave_kernels(p: PWaveParams, kx, ky):
    """Dispersion xi(k) and antisymmetric pairing Delta(k) on a k grid."""
    xi = -2 * p.t * (np.cos(kx) + np.cos(ky)) - p.mu
    dk = -2 * p.delta * (1j * np.sin(kx) - np.sin(ky))
    return xi, dk


def _momentum_grid(l, phases):
    phx, phy = phases
    ks = [2 * np.pi * (np.arange(l) + ph) / l for ph in (phx, phy)]
    kx, ky = np.meshgrid(ks[0], ks[1], indexing="ij")
    return kx, ky


def solve_bdg_torus(params: PWaveParams, l, phases=(0.0, 0.0)) -> BdGSolution:
    """p-wave model on an l x l torus.

    Momentum-space BdG solve; returns band energies, the energy density
    in extras["energy_density"], the Chern number from lattice Berry
    curvature, and the ground-state Majorana covariance.
    """
    kx, ky = _momentum_grid(l, phases)
    xi, dk = _pwave_kernels(params, kx, ky)
    band = np.sqrt(xi ** 2 + np.abs(dk) ** 2)
    if np.min(band) < 1e-12:
        bad = np.unravel_index(int(np.argmin(band)), band.shape)
        raise ValueError(
            f"gapless point at k = ({kx[bad]:.6f}, {ky[bad]:.6f})")

    e0 = 0.5 * float(np.sum(xi - band))
    nk = 0.5 * (1.0 - xi / band)
    pk = dk / (2.0 * band)                 # <a_k a_-k>

    corr = CorrelationMatrix(l=l, phases=tuple(phases), nk=nk, pk=pk)
    chern = _chern_number(params)
    return BdGSolution(
        energies=np.sort(band.ravel()), e0=e0, chern=chern,
        gap=float(np.min(band)), correlations=corr,
        extras={"energy_density": e0 / (l * l),
                "density": float(np.mean(nk))})


def _chern_number(params: PWaveParams, l=120):
    """Lattice Berry curvature (plaquette field strength) of the lower band."""
    # half-integer grid keeps the (dk, -(xi+E)) gauge away from its
    # singularities at sin kx = sin ky = 0
    ks = 2 * np.pi * (np.arange(l) + 0.5) / l
    kx, ky = np.meshgrid(ks, ks, indexing="ij")
    xi, dk = _pwave_kernels(params, kx, ky)
    # lower-band eigenvector of [[xi, dk], [conj(dk), -xi]]
    band = np.sqrt(xi ** 2 + np.abs(dk) ** 2)
    if np.min(band) < 1e-12:
        raise ValueError("gapless spectrum, Chern number undefined")
    psi = np.empty(kx.shape + (2,), dtype=complex)
    psi[..., 0] = dk
    psi[..., 1] = -(xi + band)
    psi /= np.linalg.norm(psi, axis=-1)[..., None]

    def link(a, b):
        ov = np.sum(a.conj() * b, axis=-1)
        return ov / np.abs(ov)

    ux = link(psi, np.roll(psi, -1, axis=0))
    uy = link(psi, np.roll(psi, -1, axis=1))
    # occupied-band plaquette curvature; overall orientation fixed so the
    # chiral point delta/t=0.2, mu/t=-2 carries Chern number +1
    flux = np.angle((np.roll(ux, -1, axis=1) * uy)
                    / (ux * np.roll(uy, -1, axis=0)))
    total = float(np.sum(flux) / (2 * np.pi))
    if abs(total - round(total)) > 1e-6:
        raise ValueError(f"Berry curvature sum {total} is not an integer")
    return int(round(total))


class CorrelationMatrix:
    """Majorana covariance of a translation-invariant Gaussian state
    on an l x l torus, stored through its momentum-space data.

    nk = <adag_k a_k>, pk = <a_k a_-k> on the (possibly phase-shifted)
    momentum grid.  Majorana convention c1 = adag + a, c2 = -i(adag - a),
    Gamma^{kl}_{mn} = (i/2) <[c^k_m, c^l_n]>.
    """

    def __init__(self, l, phases, nk, pk):
        self.l = l
        self.phases = tuple(phases)
        self.nk = nk
        self.pk = pk
        kx, ky = _momentum_grid(l, phases)
        self._phase_x = np.exp(1j * kx)
        self._phase_y = np.exp(1j * ky)

    def _ft(self, grid, dx, dy):
        ph = self._phase_x ** dx * self._phase_y ** dy
        return complex(np.sum(ph * grid) / (self.l * self.l))

    def adag_a(self, dx, dy=0):
        """<adag_(0,0) a_(dx,dy)>."""
        return self._ft(self.nk, dx, dy)

    def a_a(self, dx, dy=0):
        """<a_(0,0) a_(dx,dy)>."""
        return self._ft(self.pk, -dx, -dy)

    def gamma_block(self, dx, dy=0):
        """2x2 Majorana block Gamma^{kl}_{(0,0),(dx,dy)}.

        Displacements are taken on the cover of the (possibly twisted)
        torus: with antiperiodic phases, moving by a full period flips
        the sign rather than closing trivially.
        """
        cc = self.adag_a(dx, dy)            # <adag_0 a_r>
        ca = self.a_a(dx, dy)               # <a_0 a_r>
        same = dx == 0 and dy == 0
        # <a_0 adag_r> = delta - <adag_r a_0>; translation invariance
        aad = (1.0 if same else 0.0) - self.adag_a(-dx, -dy)
        add = np.conj(self.a_a(-dx, -dy))   # <adag_0 adag_r>
        g = np.empty((2, 2), dtype=complex)
        g[0, 0] = 1j * (add + cc + aad + ca)
        g[1, 1] = 1j * (-add + cc + aad - ca)
        g[0, 1] = -(-add + cc - aad + ca)
        g[1, 0] = -(-add - cc + aad + ca)
        if same:
            g -= 1j * np.eye(2)
        return g

    def gamma_full(self):
        """Dense 2 l^2 x 2 l^2 covariance; guarded to small l."""
        if self.l > 32:
            raise ValueError("dense covariance restricted to l <= 32")
        l = self.l
        # signed differences: the boundary twist makes displacement
        # (dx, dy) and (dx - l, dy) differ by a sign, so no wrapping
        blocks = {(dx, dy): self.gamma_block(dx, dy)
                  for dx in range(-l + 1, l) for dy in range(-l + 1, l)}
        n = l * l
        g = np.zeros((2 * n, 2 * n), dtype=complex)
        for x1 in range(l):
            for y1 in range(l):
                i = x1 * l + y1
                for x2 in range(l):
                    for y2 in range(l):
                        j = x2 * l + y2
                        b = blocks[(x2 - x1, y2 - y1)]
                        g[2 * i:2 * i + 2, 2 * j:2 * j + 2] = b
        return g
