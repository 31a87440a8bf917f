"""NCON-style contraction of graded tensor networks.

The contraction semantics: linearize all legs in tensor-argument order, bring
every contracted pair adjacent by Koszul reordering, evaluate bra-ket pairs
with a plain delta and ket-bra pairs with an extra parity factor (the
supertrace case), and finally reorder the remaining legs to the requested
output order. Because all stored tensors are even, the result is independent
of the order of the tensor arguments; the pairwise reduction below realizes
the same value network by network.

Call convention (positive labels mark contracted pairs, negative labels the
output legs, ordered -1, -2, ...)::

    rho2 = contract(B, [-1, 3, 1], rho, [1, 2], A, [2, 3, -2])
"""

from __future__ import annotations

import numpy as np

from .tensor import PRUNE_TOL, GradedTensor


class ContractionPlan:
    """Validated index lists for a network contraction."""

    def __init__(self, labels):
        self.labels = [list(map(int, l)) for l in labels]

    @property
    def tensor_count(self) -> int:
        return len(self.labels)

    @property
    def output_count(self) -> int:
        return sum(1 for l in self.labels for x in l if x < 0)

    def validate(self, legs_list):
        if len(legs_list) != len(self.labels):
            raise ValueError("plan and tensor list have different lengths")
        where: dict = {}
        negatives = []
        for t, (labels, legs) in enumerate(zip(self.labels, legs_list)):
            if len(labels) != len(legs):
                raise ValueError(
                    f"tensor {t} has {len(legs)} legs but {len(labels)} labels"
                )
            for k, lab in enumerate(labels):
                if lab == 0:
                    raise ValueError("labels must be nonzero")
                if lab < 0:
                    negatives.append(lab)
                else:
                    where.setdefault(lab, []).append((t, k))
        if sorted(negatives) != list(range(-len(negatives), 0)):
            raise ValueError(f"output labels {sorted(negatives)} are not -1..-k")
        for lab, occ in where.items():
            if len(occ) != 2:
                raise ValueError(f"label {lab} appears {len(occ)} times, need 2")
            (t1, k1), (t2, k2) = occ
            s1, s2 = legs_list[t1][k1], legs_list[t2][k2]
            if s1.sectors != s2.sectors or s1.dual == s2.dual:
                raise ValueError(
                    f"label {lab} pairs mismatched spaces {s1} and {s2}"
                )


def contract(*args) -> GradedTensor:
    """Contract a network given as interleaved (tensor, labels) arguments."""
    tensors, labels = _parse(args)
    plan = ContractionPlan(labels)
    plan.validate([t.legs for t in tensors])
    return _execute(plan, tensors)


def contract_plan(plan: ContractionPlan, tensors) -> GradedTensor:
    plan.validate([t.legs for t in tensors])
    return _execute(plan, tensors)


def _parse(args):
    if len(args) % 2:
        raise ValueError("expected interleaved tensor, labels arguments")
    tensors = list(args[0::2])
    labels = [list(l) for l in args[1::2]]
    for t in tensors:
        if not isinstance(t, GradedTensor):
            raise TypeError(f"expected GradedTensor, got {type(t)}")
    return tensors, labels


def _execute(plan: ContractionPlan, tensors) -> GradedTensor:
    work = [(t, list(l)) for t, l in zip(tensors, plan.labels)]

    # self-traces first
    work = [_trace_all(t, l) for t, l in work]

    # pairwise contractions, smallest intermediate first
    while True:
        pairs = []
        for i in range(len(work)):
            for j in range(i + 1, len(work)):
                shared = set(work[i][1]) & set(work[j][1])
                shared = {s for s in shared if s > 0}
                if shared:
                    cost = 1
                    for t, l in (work[i], work[j]):
                        for lab, leg in zip(l, t.legs):
                            if lab not in shared:
                                cost *= leg.dim
                    pairs.append((cost, i, j, sorted(shared)))
        if not pairs:
            break
        _, i, j, shared = min(pairs, key=lambda x: (x[0], x[1], x[2]))
        merged = _contract_pair(work[i][0], work[i][1], work[j][0], work[j][1], shared)
        work = [w for k, w in enumerate(work) if k not in (i, j)] + [merged]

    # outer products of disconnected pieces
    t, l = work[0]
    for t2, l2 in work[1:]:
        t, l = _outer(t, l, t2, l2)

    # reorder outputs to -1, -2, ...
    order = sorted(range(len(l)), key=lambda k: -l[k])
    return t.permute(order).prune()


def _trace_all(t: GradedTensor, labels):
    while True:
        dup = None
        for lab in labels:
            if lab > 0 and labels.count(lab) == 2:
                dup = lab
                break
        if dup is None:
            return t, labels
        i = labels.index(dup)
        j = labels.index(dup, i + 1)
        t = _trace_pair(t, i, j)
        labels = [lab for k, lab in enumerate(labels) if k not in (i, j)]


def _trace_pair(t: GradedTensor, i: int, j: int) -> GradedTensor:
    """Contract legs i < j of a single tensor (one bra, one ket)."""
    perm = list(range(t.nlegs))
    perm.remove(j)
    perm.insert(i + 1, j)
    t2 = t.permute(perm)
    ket_first = not t2.legs[i].dual
    out_legs = t2.legs[:i] + t2.legs[i + 2 :]
    blocks: dict = {}
    for key, arr in t2.blocks.items():
        if key[i] != key[i + 1]:
            continue
        sign = -1.0 if (ket_first and key[i][0]) else 1.0
        new_key = key[:i] + key[i + 2 :]
        val = sign * np.trace(arr, axis1=i, axis2=i + 1)
        if new_key in blocks:
            blocks[new_key] = blocks[new_key] + val
        else:
            blocks[new_key] = val
    return GradedTensor(out_legs, blocks, validate=False)


def _contract_pair(ta: GradedTensor, la, tb: GradedTensor, lb, shared):
    """Contract all `shared` labels between two tensors.

    The word is (legs of ta, legs of tb); contracted legs of ta are permuted
    to its tail in label order and those of tb to its head in reversed label
    order, so the pairs nest adjacently and only the canonical-map parity
    factor (when the ta side is the ket) remains per pair.
    """
    k = len(shared)
    a_keep = [i for i, lab in enumerate(la) if lab not in shared]
    a_con = [la.index(lab) for lab in shared]
    b_keep = [i for i, lab in enumerate(lb) if lab not in shared]
    b_con = [lb.index(lab) for lab in reversed(shared)]
    ta2 = ta.permute(a_keep + a_con)
    tb2 = tb.permute(b_con + b_keep)
    na = len(a_keep)
    ket_on_a = [not ta.legs[la.index(lab)].dual for lab in shared]

    by_con: dict = {}
    for key, arr in tb2.blocks.items():
        con = tuple(reversed(key[:k]))
        by_con.setdefault(con, []).append((key[k:], arr))

    out_legs = ta2.legs[:na] + tb2.legs[k:]
    blocks: dict = {}
    axes_a = list(range(na, na + k))
    axes_b = list(range(k - 1, -1, -1))
    for key, arr in ta2.blocks.items():
        con = key[na:]
        matches = by_con.get(con)
        if not matches:
            continue
        sign = 1.0
        for c, ket in zip(con, ket_on_a):
            if ket and c[0]:
                sign = -sign
        for b_rest, b_arr in matches:
            val = np.tensordot(sign * arr, b_arr, axes=(axes_a, axes_b))
            out_key = key[:na] + b_rest
            if out_key in blocks:
                blocks[out_key] = blocks[out_key] + val
            else:
                blocks[out_key] = val
    out_labels = [la[i] for i in a_keep] + [lb[i] for i in b_keep]
    res = GradedTensor(out_legs, blocks, validate=False)
    return res, out_labels


def _outer(ta: GradedTensor, la, tb: GradedTensor, lb):
    blocks = {}
    for ka, aa in ta.blocks.items():
        for kb, ab in tb.blocks.items():
            blocks[ka + kb] = np.tensordot(aa, ab, axes=0)
    return GradedTensor(ta.legs + tb.legs, blocks, validate=False), la + lb
