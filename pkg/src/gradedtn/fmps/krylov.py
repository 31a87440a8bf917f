"""Flat-vector adapters for iterative solves on graded tensors.

The graded inner product reduces to the plain component sum, so packing
every globally neutral block of a fixed leg tuple into one complex vector
turns hermitian effective operators into hermitian matrices on C^n, and
scipy's Krylov routines apply unchanged.  Everything here goes through
closures mapping GradedTensor -> GradedTensor; nothing in this file knows
about MPS structure.

Small problems are solved densely (apply to a basis, call LAPACK) both
for robustness and because ARPACK refuses k ~ n; the crossover sizes are
generous since the per-apply cost dwarfs the dense linear algebra there.
"""

import numpy as np
from scipy.sparse import linalg as spla

from ..tensor import GradedTensor, neutral_keys

_DENSE_EIG = 64
_DENSE_SOLVE = 900


class TensorVectorizer:
    """Fixed flat layout over all globally neutral blocks of a leg tuple."""

    def __init__(self, legs):
        self.legs = tuple(legs)
        self.keys = sorted(neutral_keys(self.legs))
        self._layout = {}
        n = 0
        for key in self.keys:
            shape = tuple(l.degeneracy(c) for l, c in zip(self.legs, key))
            size = int(np.prod(shape)) if shape else 1
            self._layout[key] = (n, shape)
            n += size
        self.size = n

    def unwrap(self, t: GradedTensor) -> np.ndarray:
        v = np.zeros(self.size, dtype=complex)
        for key, arr in t.blocks.items():
            start, _ = self._layout[key]
            v[start:start + arr.size] = arr.ravel()
        return v

    def wrap(self, v) -> GradedTensor:
        v = np.asarray(v)
        blocks = {}
        for key, (start, shape) in self._layout.items():
            size = int(np.prod(shape)) if shape else 1
            chunk = np.asarray(v[start:start + size], dtype=complex)
            if np.any(chunk):
                blocks[key] = chunk.reshape(shape)
        return GradedTensor(self.legs, blocks, validate=False)

    def operator(self, apply_fn) -> spla.LinearOperator:
        def mv(x):
            return self.unwrap(apply_fn(self.wrap(x)))

        return spla.LinearOperator((self.size, self.size), matvec=mv,
                                   dtype=complex)

    def matrix(self, apply_fn) -> np.ndarray:
        m = np.zeros((self.size, self.size), dtype=complex)
        e = np.zeros(self.size, dtype=complex)
        for i in range(self.size):
            e[i] = 1.0
            m[:, i] = self.unwrap(apply_fn(self.wrap(e)))
            e[i] = 0.0
        return m


def _seed(vz: TensorVectorizer, v0):
    if v0 is None:
        v = np.ones(vz.size, dtype=complex)
    else:
        v = vz.unwrap(v0)
        if not np.any(v):
            v = np.ones(vz.size, dtype=complex)
    return v / np.linalg.norm(v)


def eigs_dominant(apply_fn, vz: TensorVectorizer, v0=None,
                  tol=1e-13, maxiter=None):
    """Largest-magnitude eigenpair of a (generally non-hermitian) closure."""
    if vz.size == 0:
        raise ValueError("empty block space")
    if vz.size <= _DENSE_EIG:
        w, v = np.linalg.eig(vz.matrix(apply_fn))
        i = int(np.argmax(np.abs(w)))
        return complex(w[i]), vz.wrap(v[:, i])
    w, v = spla.eigs(vz.operator(apply_fn), k=1, which="LM",
                     v0=_seed(vz, v0), tol=tol, maxiter=maxiter)
    return complex(w[0]), vz.wrap(v[:, 0])


def eigsh_smallest(apply_fn, vz: TensorVectorizer, v0=None, k=1,
                   tol=1e-13, maxiter=None):
    """Lowest eigenpairs of a hermitian closure, ascending.

    Returns (values, tensors). The closure must be hermitian with respect
    to the graded inner product; that property is what the effective
    Hamiltonians are tested for elsewhere.
    """
    if vz.size == 0:
        raise ValueError("empty block space")
    if vz.size <= max(_DENSE_EIG, 3 * k + 2) or k >= vz.size - 1:
        m = vz.matrix(apply_fn)
        w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
        k = min(k, vz.size)
        return w[:k], [vz.wrap(v[:, i]) for i in range(k)]
    w, v = spla.eigsh(vz.operator(apply_fn), k=k, which="SA",
                      v0=_seed(vz, v0), tol=tol, maxiter=maxiter)
    order = np.argsort(w)
    return w[order], [vz.wrap(v[:, i]) for i in order]


def solve_linear(apply_fn, rhs: GradedTensor, vz: TensorVectorizer,
                 x0=None, tol=1e-12, maxiter=2000):
    """Solve A x = rhs for the closure A, returning x as a tensor."""
    b = vz.unwrap(rhs)
    if not np.any(b):
        return GradedTensor.zeros(vz.legs)
    if vz.size <= _DENSE_SOLVE:
        x = np.linalg.solve(vz.matrix(apply_fn), b)
        return vz.wrap(x)
    x0v = vz.unwrap(x0) if x0 is not None else None
    x, info = spla.gmres(vz.operator(apply_fn), b, x0=x0v,
                         rtol=max(tol / max(np.linalg.norm(b), 1e-300), 1e-14),
                         atol=0.5 * tol, restart=48, maxiter=maxiter)
    if info != 0:
        raise RuntimeError(f"linear solve stagnation (gmres info={info})")
    return vz.wrap(x)
