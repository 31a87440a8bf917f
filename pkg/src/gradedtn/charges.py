"""Charges and graded vector spaces.

A charge is a plain tuple ``(parity, q_1, ..., q_k)`` whose first entry is the
fermion parity bit and whose remaining entries are integer U(1) charges. The
number of U(1) components is fixed per tensor network by the charge system in
use; the supported systems are plain fermion parity, parity with one U(1)
charge, and parity with two U(1) charges (e.g. particle number and spin
projection).

Fusion is component-wise addition with the parity taken mod 2, the dual of a
charge negates the U(1) components and keeps the parity bit, and the trivial
charge is all zeros. Charges are ordered canonically with even parity before
odd, then lexicographically on the U(1) components; spaces store their sectors
in this order so that block layouts, truncations and serialized files are
reproducible.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

Charge = tuple

_SYSTEM_NAMES = {0: "fZ2", 1: "fZ2xU1", 2: "fZ2xU1xU1"}


def trivial_charge(n_u1: int = 0) -> Charge:
    """The identity charge (even parity, zero U(1) components)."""
    return (0,) * (n_u1 + 1)


def fuse_charges(a: Charge, b: Charge) -> Charge:
    """Fuse two charges: parities add mod 2, U(1) components add."""
    return (((a[0] + b[0]) & 1),) + tuple(x + y for x, y in zip(a[1:], b[1:], strict=True))


def dual_charge(a: Charge) -> Charge:
    """Dual charge: parity is self-dual, U(1) components are negated."""
    return (a[0],) + tuple(-x for x in a[1:])


def parity(a: Charge) -> int:
    return a[0]


class ChargeSystem:
    """Tag describing which abelian charges a network carries.

    Only used for validation and as a serialization label; the charges
    themselves are self-describing tuples.
    """

    __slots__ = ("n_u1",)

    def __init__(self, kind: str = "fZ2"):
        for n, name in _SYSTEM_NAMES.items():
            if name == kind:
                self.n_u1 = n
                return
        raise ValueError(f"unknown charge system {kind!r}")

    @classmethod
    def for_charge(cls, charge: Charge) -> "ChargeSystem":
        return cls(_SYSTEM_NAMES[len(charge) - 1])

    @property
    def kind(self) -> str:
        return _SYSTEM_NAMES[self.n_u1]

    def trivial(self) -> Charge:
        return trivial_charge(self.n_u1)

    def validate(self, charge: Charge):
        if len(charge) != self.n_u1 + 1:
            raise ValueError(f"charge {charge} does not fit system {self.kind}")
        if charge[0] not in (0, 1):
            raise ValueError(f"charge {charge} has a non-binary parity bit")

    def __eq__(self, other):
        return isinstance(other, ChargeSystem) and self.n_u1 == other.n_u1

    def __repr__(self):
        return f"ChargeSystem({self.kind!r})"


class GradedSpace:
    """An ordered direct sum of charge sectors with a duality flag.

    Parameters
    ----------
    sectors : iterable of (charge, degeneracy)
        Charges must be unique; they are stored sorted in canonical order
        (even parity first, then lexicographic on the U(1) entries). Sector
        labels always refer to the primal basis: a dual (bra) leg carrying
        label ``c`` contributes ``dual_charge(c)`` to neutrality counts.
    dual : bool
        Whether legs on this space are bras (True) or kets (False).
    """

    __slots__ = ("sectors", "dual", "_offsets")

    def __init__(self, sectors, dual: bool = False):
        sects = sorted((tuple(c), int(d)) for c, d in sectors)
        if not sects:
            raise ValueError("a graded space needs at least one sector")
        n = len(sects[0][0])
        for c, d in sects:
            if len(c) != n:
                raise ValueError("inconsistent charge lengths within a space")
            if c[0] not in (0, 1):
                raise ValueError(f"sector charge {c} has a non-binary parity bit")
            if d < 1:
                raise ValueError(f"sector {c} has degeneracy {d} < 1")
        if len({c for c, _ in sects}) != len(sects):
            raise ValueError("duplicate sector charges")
        self.sectors = tuple(sects)
        self.dual = bool(dual)
        offsets = {}
        pos = 0
        for c, d in self.sectors:
            offsets[c] = pos
            pos += d
        self._offsets = offsets

    @property
    def n_u1(self) -> int:
        return len(self.sectors[0][0]) - 1

    @property
    def dim(self) -> int:
        return sum(d for _, d in self.sectors)

    @property
    def dim_even(self) -> int:
        return sum(d for c, d in self.sectors if c[0] == 0)

    @property
    def dim_odd(self) -> int:
        return sum(d for c, d in self.sectors if c[0] == 1)

    def charges(self):
        return [c for c, _ in self.sectors]

    def degeneracy(self, charge: Charge) -> int:
        for c, d in self.sectors:
            if c == charge:
                return d
        return 0

    def offset(self, charge: Charge) -> int:
        """Start of the sector in the dense (canonically ordered) basis."""
        return self._offsets[charge]

    def dualize(self) -> "GradedSpace":
        """Same sectors, opposite arrow."""
        return GradedSpace(self.sectors, not self.dual)

    def effective_charge(self, charge: Charge) -> Charge:
        """Contribution of a leg carrying `charge` to global neutrality."""
        return dual_charge(charge) if self.dual else charge

    def __eq__(self, other):
        return (
            isinstance(other, GradedSpace)
            and self.sectors == other.sectors
            and self.dual == other.dual
        )

    def __hash__(self):
        return hash((self.sectors, self.dual))

    def __repr__(self):
        tag = "bra" if self.dual else "ket"
        body = ", ".join(f"{c}:{d}" for c, d in self.sectors)
        return f"GradedSpace<{tag}|{body}>"


def parity_space(dim_even: int, dim_odd: int, dual: bool = False) -> GradedSpace:
    """Plain fZ2 space with the given even/odd dimensions."""
    sectors = []
    if dim_even:
        sectors.append(((0,), dim_even))
    if dim_odd:
        sectors.append(((1,), dim_odd))
    return GradedSpace(sectors, dual)


def fused_sectors(legs) -> list:
    """Sectors of the tensor product of `legs`, as (charge, degeneracy) in
    canonical order. Charges are the fused effective charges, i.e. the result
    describes a ket space."""
    acc: dict = {}
    for combo in itertools.product(*(leg.sectors for leg in legs)):
        c = trivial_charge(legs[0].n_u1)
        d = 1
        for leg, (cs, ds) in zip(legs, combo):
            c = fuse_charges(c, leg.effective_charge(cs))
            d *= ds
        acc[c] = acc.get(c, 0) + d
    return sorted(acc.items())


def fused_space(legs, dual: bool = False) -> GradedSpace:
    """Space of the fused leg. A dual fused leg stores the dual sector labels
    so that its neutrality contribution matches that of the original legs."""
    sects = fused_sectors(legs)
    if dual:
        sects = [(dual_charge(c), d) for c, d in sects]
    return GradedSpace(sects, dual)


@lru_cache(maxsize=None)
def _fusion_layout(leg_sectors: tuple, leg_duals: tuple):
    """Offsets of each charge combination inside the fused sectors.

    Returns a dict mapping per-leg charge tuples to (fused effective charge,
    offset, block size). The enumeration order within a fused sector follows
    the canonical order of the contributing charge combinations.
    """
    legs = [GradedSpace(s, d) for s, d in zip(leg_sectors, leg_duals)]
    pos: dict = {}
    layout = {}
    for combo in itertools.product(*(leg.sectors for leg in legs)):
        charges = tuple(cs for cs, _ in combo)
        c = trivial_charge(legs[0].n_u1)
        size = 1
        for leg, (cs, ds) in zip(legs, combo):
            c = fuse_charges(c, leg.effective_charge(cs))
            size *= ds
        off = pos.get(c, 0)
        layout[charges] = (c, off, size)
        pos[c] = off + size
    return layout


def fusion_layout(legs) -> dict:
    return _fusion_layout(
        tuple(leg.sectors for leg in legs), tuple(leg.dual for leg in legs)
    )
