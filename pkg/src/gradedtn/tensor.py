"""Block-sparse Z2-graded tensors with sign-correct index operations.

A ``GradedTensor`` is a linear combination of basis words ``|a> <b| |c> ...``
whose legs are ordered; kets are legs on non-dual spaces, bras on dual spaces.
Only globally neutral (in particular parity-even) tensors are representable:
every stored block's charges, with dual legs contributing the dual charge,
fuse to the trivial charge. Absent blocks are exactly zero.

All reordering signs follow the Koszul rule: transposing two odd-parity basis
factors contributes a factor -1. Signs are computed per block from the parity
bits of the block's charges; no swap-gate tensors are ever materialized.

Tensors are immutable: every operation returns a new tensor and never mutates
its inputs, so values can be shared freely across threads.
"""

from __future__ import annotations

import itertools

import numpy as np

from .charges import (
    GradedSpace,
    dual_charge,
    fuse_charges,
    fused_space,
    fusion_layout,
    trivial_charge,
)

PRUNE_TOL = 1e-15


def _neutral(legs, charges) -> bool:
    acc = trivial_charge(legs[0].n_u1)
    for leg, c in zip(legs, charges):
        acc = fuse_charges(acc, leg.effective_charge(c))
    return acc == trivial_charge(legs[0].n_u1)


def koszul_sign(parities, perm) -> int:
    """Sign of reordering basis factors with the given parities by `perm`.

    `perm[k]` is the old position of the factor that ends up at position k.
    The sign is -1 raised to the number of inversions among odd factors.
    """
    odd_positions = [p for p in perm if parities[p] == 1]
    inversions = 0
    for i in range(len(odd_positions)):
        for j in range(i + 1, len(odd_positions)):
            if odd_positions[i] > odd_positions[j]:
                inversions += 1
    return -1 if inversions & 1 else 1


class GradedTensor:
    """Graded block-sparse tensor. See the module docstring for conventions.

    Parameters
    ----------
    legs : sequence of GradedSpace
        Leg k is a bra when ``legs[k].dual`` is True, a ket otherwise.
    blocks : dict
        Maps per-leg charge tuples to complex ndarrays whose shapes match the
        sector degeneracies. Keys must be globally neutral.
    """

    __slots__ = ("legs", "blocks")

    def __init__(self, legs, blocks, validate: bool = True):
        self.legs = tuple(legs)
        self.blocks = blocks
        if validate:
            n_u1 = self.legs[0].n_u1 if self.legs else 0
            for leg in self.legs:
                if leg.n_u1 != n_u1:
                    raise ValueError("legs carry inconsistent charge systems")
            for key, arr in blocks.items():
                if len(key) != len(self.legs):
                    raise ValueError(f"block key {key} has wrong length")
                shape = []
                for leg, c in zip(self.legs, key):
                    d = leg.degeneracy(c)
                    if d == 0:
                        raise ValueError(f"charge {c} not in leg {leg}")
                    shape.append(d)
                if arr.shape != tuple(shape):
                    raise ValueError(
                        f"block {key} has shape {arr.shape}, expected {tuple(shape)}"
                    )
                if self.legs and not _neutral(self.legs, key):
                    raise ValueError(f"block {key} violates global neutrality")

    # -- constructors -----------------------------------------------------

    @classmethod
    def zeros(cls, legs) -> "GradedTensor":
        return cls(legs, {}, validate=False)

    @classmethod
    def from_function(cls, legs, fn) -> "GradedTensor":
        """Dense-fill every neutral block with fn(key, shape) -> ndarray."""
        legs = tuple(legs)
        blocks = {}
        for key in neutral_keys(legs):
            shape = tuple(leg.degeneracy(c) for leg, c in zip(legs, key))
            blocks[key] = np.asarray(fn(key, shape), dtype=complex)
        return cls(legs, blocks)

    @classmethod
    def random_even(cls, legs, rng, scale: float = 1.0, real: bool = False) -> "GradedTensor":
        def fill(key, shape):
            a = rng.standard_normal(shape)
            if not real:
                a = a + 1j * rng.standard_normal(shape)
            return scale * a

        return cls.from_function(legs, fill)

    @classmethod
    def identity(cls, space: GradedSpace) -> "GradedTensor":
        """Identity map as the two-leg tensor sum_a |a><a|."""
        ket = GradedSpace(space.sectors, False)
        bra = GradedSpace(space.sectors, True)
        blocks = {(c, c): np.eye(d, dtype=complex) for c, d in space.sectors}
        return cls((ket, bra), blocks, validate=False)

    @classmethod
    def parity_operator(cls, space: GradedSpace) -> "GradedTensor":
        """The P tensor sum_a (-1)^|a| |a><a|."""
        ket = GradedSpace(space.sectors, False)
        bra = GradedSpace(space.sectors, True)
        blocks = {
            (c, c): (-1.0 if c[0] else 1.0) * np.eye(d, dtype=complex)
            for c, d in space.sectors
        }
        return cls((ket, bra), blocks, validate=False)

    # -- basic queries -----------------------------------------------------

    @property
    def nlegs(self) -> int:
        return len(self.legs)

    def block(self, key) -> np.ndarray:
        """The block at `key`, materializing zeros for absent neutral keys."""
        key = tuple(tuple(c) for c in key)
        if key in self.blocks:
            return self.blocks[key]
        shape = tuple(leg.degeneracy(c) for leg, c in zip(self.legs, key))
        if 0 in shape or not _neutral(self.legs, key):
            raise KeyError(key)
        return np.zeros(shape, dtype=complex)

    def item(self) -> complex:
        if self.nlegs != 0:
            raise ValueError("item() requires a zero-leg tensor")
        if not self.blocks:
            return 0.0 + 0.0j
        return complex(self.blocks[()].reshape(()))

    def norm(self) -> float:
        """Frobenius norm, equal to sqrt of the graded inner product <A,A>."""
        return float(np.sqrt(sum(np.vdot(a, a).real for a in self.blocks.values())))

    def max_abs(self) -> float:
        return max((np.abs(a).max() for a in self.blocks.values()), default=0.0)

    def allclose(self, other: "GradedTensor", atol: float = 1e-12) -> bool:
        if self.legs != other.legs:
            return False
        keys = set(self.blocks) | set(other.blocks)
        return all(
            np.allclose(self.block(k), other.block(k), rtol=0.0, atol=atol)
            for k in keys
        )

    # -- arithmetic --------------------------------------------------------

    def _binary(self, other, op):
        if not isinstance(other, GradedTensor) or self.legs != other.legs:
            raise ValueError("tensor arithmetic requires identical legs")
        keys = set(self.blocks) | set(other.blocks)
        blocks = {}
        for k in keys:
            arr = op(self.block(k), other.block(k))
            if np.abs(arr).max() > PRUNE_TOL:
                blocks[k] = arr
        return GradedTensor(self.legs, blocks, validate=False)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        scalar = complex(scalar)
        return GradedTensor(
            self.legs, {k: scalar * a for k, a in self.blocks.items()}, validate=False
        )

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / complex(scalar))

    def __neg__(self):
        return self * (-1.0)

    def prune(self, tol: float = PRUNE_TOL) -> "GradedTensor":
        blocks = {
            k: a for k, a in self.blocks.items() if np.linalg.norm(a) > tol
        }
        return GradedTensor(self.legs, blocks, validate=False)

    def copy(self) -> "GradedTensor":
        return GradedTensor(
            self.legs, {k: a.copy() for k, a in self.blocks.items()}, validate=False
        )

    # -- index operations ----------------------------------------------------

    def permute(self, perm) -> "GradedTensor":
        """Reorder legs; each block picks up the Koszul sign of the reordering
        of its odd-parity legs. `perm[k]` is the old position of new leg k."""
        perm = tuple(perm)
        if sorted(perm) != list(range(self.nlegs)):
            raise ValueError(f"{perm} is not a permutation of {self.nlegs} legs")
        if perm == tuple(range(self.nlegs)):
            return self
        legs = tuple(self.legs[p] for p in perm)
        blocks = {}
        for key, arr in self.blocks.items():
            parities = [c[0] for c in key]
            sign = koszul_sign(parities, perm)
            new_key = tuple(key[p] for p in perm)
            blocks[new_key] = sign * np.transpose(arr, perm)
        return GradedTensor(legs, blocks, validate=False)

    def conjugate(self) -> "GradedTensor":
        """Complex-conjugate entries, flip every arrow, reverse the leg order."""
        rev = tuple(range(self.nlegs - 1, -1, -1))
        legs = tuple(self.legs[p].dualize() for p in rev)
        blocks = {
            tuple(key[p] for p in rev): np.transpose(arr, rev).conj()
            for key, arr in self.blocks.items()
        }
        return GradedTensor(legs, blocks, validate=False)

    def apply_parity(self, which=None) -> "GradedTensor":
        """Multiply each block by (-1)^(sum of parities on the selected legs).

        The default selects all bra legs, realizing the parity operation that
        turns contractions into inner products and operator applications.
        """
        if which is None:
            which = [k for k, leg in enumerate(self.legs) if leg.dual]
        which = list(which)
        for k in which:
            if not 0 <= k < self.nlegs:
                raise ValueError(f"no leg {k}")
        blocks = {}
        for key, arr in self.blocks.items():
            p = sum(key[k][0] for k in which) & 1
            blocks[key] = -arr if p else arr
        return GradedTensor(self.legs, blocks, validate=False)

    def flip_arrow(self, k: int, use_dagger: bool = False) -> "GradedTensor":
        """Convert leg k between ket and bra with the unitary delta flipper.

        Realized as a contraction with the flipper whose entries are deltas;
        working out the contraction word leaves a factor (-1)^parity on the
        flipped leg's odd sectors (the crossing signs cancel, the canonical
        map's parity factor survives) in both flip directions, so the round
        trip is exactly the identity. `use_dagger` composes with the parity
        insertion instead, giving the sign-free member of the unitary pair.
        """
        leg = self.legs[k]
        new_leg = GradedSpace(
            [(dual_charge(c), d) for c, d in leg.sectors], not leg.dual
        )
        blocks = {}
        for key, arr in self.blocks.items():
            c = key[k]
            sign = -1.0 if (c[0] and not use_dagger) else 1.0
            new_key = key[:k] + (dual_charge(c),) + key[k + 1 :]
            blocks[new_key] = sign * arr
        legs = self.legs[:k] + (new_leg,) + self.legs[k + 1 :]
        return GradedTensor(legs, blocks, validate=False)

    # -- fusing ----------------------------------------------------------------

    def fuse_legs(self, first: int, count: int = 2, dual: bool | None = None):
        """Fuse `count` adjacent legs starting at `first` into a single leg.

        Uses the canonical fusers: the fused tensor's entries equal the raw
        entries of the original tensor, laid out in the deterministic order of
        the contributing charge combinations. Returns ``(tensor, record)``
        where the record restores the original legs via :meth:`split_legs`.

        The fused leg is a ket by default, or a bra if `dual` is True.
        """
        if count < 1 or first < 0 or first + count > self.nlegs:
            raise ValueError("invalid fuse range")
        group = self.legs[first : first + count]
        if dual is None:
            dual = group[0].dual
        new_leg = fused_space(group, dual)
        layout = fusion_layout(group)
        record = FuseRecord(group, new_leg, first)
        blocks: dict = {}
        for key, arr in self.blocks.items():
            sub = key[first : first + count]
            fused_eff, off, size = layout[sub]
            label = dual_charge(fused_eff) if dual else fused_eff
            new_key = key[:first] + (label,) + key[first + count :]
            shape = arr.shape
            mat = arr.reshape(shape[:first] + (size,) + shape[first + count :])
            out = blocks.get(new_key)
            if out is None:
                full = shape[:first] + (new_leg.degeneracy(label),) + shape[first + count :]
                out = np.zeros(full, dtype=complex)
                blocks[new_key] = out
            sl = (slice(None),) * first + (slice(off, off + size),)
            out[sl] += mat
        return GradedTensor(
            self.legs[:first] + (new_leg,) + self.legs[first + count :],
            blocks,
            validate=False,
        ), record

    def split_legs(self, record: "FuseRecord") -> "GradedTensor":
        """Inverse of :meth:`fuse_legs` with the same record."""
        first = record.position
        fused_leg = self.legs[first]
        if fused_leg != record.fused:
            raise ValueError("record does not match the fused leg")
        layout = fusion_layout(record.group)
        blocks: dict = {}
        for key, arr in self.blocks.items():
            label = key[first]
            eff = dual_charge(label) if fused_leg.dual else label
            for sub, (fused_eff, off, size) in layout.items():
                if fused_eff != eff:
                    continue
                sl = (slice(None),) * first + (slice(off, off + size),)
                piece = arr[sl]
                if np.abs(piece).max() <= PRUNE_TOL:
                    continue
                shape = tuple(
                    leg.degeneracy(c) for leg, c in zip(record.group, sub)
                )
                new_key = key[:first] + sub + key[first + 1 :]
                blocks[new_key] = piece.reshape(
                    arr.shape[:first] + shape + arr.shape[first + 1 :]
                ).copy()
        legs = self.legs[:first] + tuple(record.group) + self.legs[first + 1 :]
        return GradedTensor(legs, blocks, validate=False)

    def __repr__(self):
        return (
            f"GradedTensor(nlegs={self.nlegs}, dims={[leg.dim for leg in self.legs]}, "
            f"blocks={len(self.blocks)}, norm={self.norm():.6g})"
        )


class FuseRecord:
    """Everything needed to split a fused leg back into its original legs."""

    __slots__ = ("group", "fused", "position")

    def __init__(self, group, fused: GradedSpace, position: int):
        self.group = tuple(group)
        self.fused = fused
        self.position = position


def neutral_keys(legs):
    """All globally neutral charge assignments for the given legs."""
    legs = tuple(legs)
    if not legs:
        yield ()
        return
    triv = trivial_charge(legs[0].n_u1)
    for combo in itertools.product(*(leg.charges() for leg in legs)):
        acc = triv
        for leg, c in zip(legs, combo):
            acc = fuse_charges(acc, leg.effective_charge(c))
        if acc == triv:
            yield combo


def inner(a: GradedTensor, b: GradedTensor) -> complex:
    """Graded inner product <a, b> = C(conj(a) P(b)) = sum conj(a) * b.

    Both tensors must have identical legs; the parity dressing of the bra
    legs cancels the supertrace factors so the result is the plain component
    sum, which is evaluated directly here.
    """
    if a.legs != b.legs:
        raise ValueError("inner product requires identical legs")
    return complex(
        sum(np.vdot(a.blocks[k], b.blocks[k]) for k in a.blocks if k in b.blocks)
    )
