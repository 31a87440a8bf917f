"""Shared helpers for building random graded tensors and networks."""

import numpy as np

from gradedtn import GradedSpace, GradedTensor

FZ2_CHARGES = [(0,), (1,)]
FZ2U1_CHARGES = [(p, q) for p in (0, 1) for q in (-1, 0, 1)]


def rand_space(rng, n_u1=0, max_sectors=2, max_dim=2, dual=None):
    pool = list(FZ2_CHARGES if n_u1 == 0 else FZ2U1_CHARGES)
    rng.shuffle(pool)
    n = int(rng.integers(1, min(max_sectors, len(pool)) + 1))
    sectors = [(c, int(rng.integers(1, max_dim + 1))) for c in pool[:n]]
    if dual is None:
        dual = bool(rng.integers(2))
    return GradedSpace(sectors, dual)


def rand_feasible_tensor(rng, nlegs, n_u1=0, max_sectors=2, max_dim=2):
    for _ in range(200):
        legs = [rand_space(rng, n_u1, max_sectors, max_dim) for _ in range(nlegs)]
        t = GradedTensor.random_even(legs, rng)
        if t.blocks:
            return t
    raise RuntimeError("could not draw a tensor with any neutral block")


def rand_network(rng, n_u1=0, max_tensors=6, max_legs=4, max_dim=2,
                 max_sectors=2, allow_trace=True, grid_limit=2**16):
    """Random closed-or-open network: returns (tensors, labels) lists.

    Paired legs get dual-mate spaces; open legs are labeled -1, -2, ... in
    a random assignment. Tensors are redrawn until every one has at least
    one neutral block, and the total dense grid stays small enough for the
    brute-force evaluator.
    """
    for _ in range(400):
        n_t = int(rng.integers(1, max_tensors + 1))
        counts = [int(rng.integers(1, max_legs + 1)) for _ in range(n_t)]
        if n_t == 1 and counts[0] < 2:
            counts[0] = 2
        slots = [(i, j) for i in range(n_t) for j in range(counts[i])]
        rng.shuffle(slots)
        n_pairs = int(rng.integers(0, len(slots) // 2 + 1))
        spaces = {}
        labels = [[None] * c for c in counts]
        lab = 0
        ok = True
        for p in range(n_pairs):
            a, b = slots[2 * p], slots[2 * p + 1]
            if not allow_trace and a[0] == b[0]:
                ok = False
                break
            lab += 1
            sp = rand_space(rng, n_u1, max_sectors, max_dim)
            spaces[a] = sp
            spaces[b] = sp.dualize()
            labels[a[0]][a[1]] = lab
            labels[b[0]][b[1]] = lab
        if not ok:
            continue
        open_slots = slots[2 * n_pairs:]
        rng.shuffle(open_slots)
        for k, s in enumerate(open_slots):
            spaces[s] = rand_space(rng, n_u1, max_sectors, max_dim)
            labels[s[0]][s[1]] = -(k + 1)
        grid = 1
        for p in range(n_pairs):
            grid *= spaces[slots[2 * p]].dim
        for s in open_slots:
            grid *= spaces[s].dim
        if grid > grid_limit:
            continue
        tensors = []
        for i in range(n_t):
            legs = [spaces[(i, j)] for j in range(counts[i])]
            t = GradedTensor.random_even(legs, rng)
            if not t.blocks:
                break
            tensors.append(t)
        if len(tensors) == n_t:
            return tensors, labels
    raise RuntimeError("failed to draw a feasible random network")


def interleave(tensors, labels):
    args = []
    for t, l in zip(tensors, labels):
        args.append(t)
        args.append(list(l))
    return args
