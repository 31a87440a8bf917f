"""First-principles dense evaluation of graded tensor networks.

`dense_evaluate` computes the same quantity as :func:`gradedtn.network.contract`
by brute force: every tensor is embedded as a dense array over the canonically
ordered bases of its legs, and the Koszul sign of the full linearized word is
computed index assignment by index assignment from the parity of each basis
vector. Nothing of the block/matmul code path is reused, so the two routines
form an independent cross-check. Cost is exponential in the number of legs;
a grid-size guard rejects inputs beyond small test networks.

The word semantics implemented here: all legs in tensor-argument order form a
word; for each contracted label (in ascending order) the right slot is moved
next to the left one, picking up a -1 for every odd-parity leg still present
in between; the adjacent pair is then removed with a delta, times an extra
parity factor when the ket stands before the bra (supertrace). Finally the
surviving legs are reordered from word order to the requested output order
with pairwise Koszul signs.
"""

from __future__ import annotations

import numpy as np

from .tensor import GradedTensor
from .charges import GradedSpace
from .network import _parse


def to_dense(t: GradedTensor) -> np.ndarray:
    """Dense array of a tensor over canonically ordered sector bases."""
    shape = tuple(leg.dim for leg in t.legs)
    out = np.zeros(shape, dtype=complex)
    for key, arr in t.blocks.items():
        sl = tuple(
            slice(leg.offset(c), leg.offset(c) + leg.degeneracy(c))
            for leg, c in zip(t.legs, key)
        )
        out[sl] = arr
    return out


def from_dense(legs, array, tol: float = 0.0) -> GradedTensor:
    """Inverse of :func:`to_dense`; entries outside neutral blocks must
    vanish within `tol`."""
    from .tensor import neutral_keys

    legs = tuple(legs)
    array = np.asarray(array, dtype=complex)
    if array.shape != tuple(leg.dim for leg in legs):
        raise ValueError("array shape does not match the legs")
    blocks = {}
    covered = np.zeros(array.shape, dtype=bool)
    for key in neutral_keys(legs):
        sl = tuple(
            slice(leg.offset(c), leg.offset(c) + leg.degeneracy(c))
            for leg, c in zip(legs, key)
        )
        block = array[sl]
        covered[sl] = True
        if np.abs(block).max() > 0.0:
            blocks[key] = block.copy()
    rest = np.abs(np.where(covered, 0.0, array)).max()
    if rest > tol:
        raise ValueError(
            f"array has weight {rest:.3e} outside globally neutral blocks"
        )
    return GradedTensor(legs, blocks)


def leg_parities(space: GradedSpace) -> np.ndarray:
    """Parity bit of every basis vector of the (canonically ordered) space."""
    return np.concatenate(
        [np.full(d, c[0], dtype=np.int64) for c, d in space.sectors]
    )


def dense_evaluate(*args, max_grid: int = 2**22) -> np.ndarray:
    """Evaluate a contraction like :func:`contract`, returning a dense array
    over the output legs (ordered -1, -2, ...). Arguments are the same
    interleaved (tensor, labels) sequence."""
    tensors, labels = _parse(args)

    # one grid axis per distinct label, contracted labels first
    spaces: dict = {}
    for t, labs in zip(tensors, labels):
        for leg, lab in zip(t.legs, labs):
            spaces.setdefault(lab, leg)
    contracted = sorted(l for l in spaces if l > 0)
    outputs = sorted((l for l in spaces if l < 0), reverse=True)
    axis_of = {lab: i for i, lab in enumerate(contracted + outputs)}
    dims = [spaces[lab].dim for lab in contracted + outputs]
    grid = 1
    for d in dims:
        grid *= d
    if grid > max_grid:
        raise ValueError(f"index grid of {grid} entries exceeds {max_grid}")

    def on_axis(vec, lab):
        shape = [1] * len(dims)
        shape[axis_of[lab]] = dims[axis_of[lab]]
        return vec.reshape(shape)

    # product of all tensor entries on the grid
    value = np.ones((1,) * len(dims), dtype=complex)
    for t, labs in zip(tensors, labels):
        dense = to_dense(t)
        # a label used twice inside one tensor shares a single grid axis
        kept = list(labs)
        while True:
            dup = next((lab for lab in kept if kept.count(lab) == 2), None)
            if dup is None:
                break
            i = kept.index(dup)
            j = kept.index(dup, i + 1)
            dense = _diagonal(dense, i, j)
            del kept[j]
        shape = [1] * len(dims)
        order = sorted(range(len(kept)), key=lambda i: axis_of[kept[i]])
        dense = np.transpose(dense, order)
        for lab in kept:
            shape[axis_of[lab]] = spaces[lab].dim
        value = value * dense.reshape(shape)

    # Koszul sign of the full word, per assignment
    word = []
    for ti, (t, labs) in enumerate(zip(tensors, labels)):
        for leg, lab in zip(t.legs, labs):
            word.append([lab, 0 if leg.dual else 1, True])  # label, is_ket, present
    par = {lab: leg_parities(spaces[lab]) for lab in spaces}

    sign = np.ones((1,) * len(dims), dtype=np.float64)
    for lab in contracted:
        slots = [m for m, w in enumerate(word) if w[0] == lab and w[2]]
        i, j = slots
        p_pair = on_axis(par[lab], lab)
        between = np.zeros((1,) * len(dims), dtype=np.int64)
        for m in range(i + 1, j):
            if word[m][2]:
                between = between + on_axis(par[word[m][0]], word[m][0])
        sign = sign * np.where((p_pair * between) % 2 == 1, -1.0, 1.0)
        if word[i][1]:  # ket before bra: supertrace factor
            sign = sign * np.where(p_pair == 1, -1.0, 1.0)
        word[i][2] = word[j][2] = False

    remaining = [w[0] for w in word if w[2]]
    # reorder from word order to -1, -2, ... with pairwise Koszul signs
    for a in range(len(remaining)):
        for b in range(a + 1, len(remaining)):
            if remaining[a] < remaining[b]:  # appears later in the output
                pa = on_axis(par[remaining[a]], remaining[a])
                pb = on_axis(par[remaining[b]], remaining[b])
                sign = sign * np.where((pa * pb) % 2 == 1, -1.0, 1.0)

    total = value * sign
    if contracted:
        total = total.sum(axis=tuple(axis_of[lab] for lab in contracted))
    return np.asarray(total.reshape([spaces[lab].dim for lab in outputs]))


def _diagonal(dense: np.ndarray, i: int, j: int) -> np.ndarray:
    """Restrict axes i and j to their diagonal, keeping the result on axis i."""
    d = np.diagonal(dense, axis1=i, axis2=j)  # moves the diagonal to the last axis
    return np.moveaxis(d, -1, i)
