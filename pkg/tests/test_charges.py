import numpy as np
import pytest

from gradedtn import (
    ChargeSystem,
    GradedSpace,
    dual_charge,
    fuse_charges,
    fused_space,
    parity_space,
    trivial_charge,
)
from gradedtn.charges import fusion_layout


class TestChargeAlgebra:
    def test_trivial(self):
        assert trivial_charge(0) == (0,)
        assert trivial_charge(2) == (0, 0, 0)

    def test_fuse_parity_mod2(self):
        assert fuse_charges((1,), (1,)) == (0,)
        assert fuse_charges((1,), (0,)) == (1,)

    def test_fuse_u1_adds(self):
        assert fuse_charges((1, 2), (1, -1)) == (0, 1)
        assert fuse_charges((0, 1, -3), (1, 1, 2)) == (1, 2, -1)

    def test_dual_negates_u1_keeps_parity(self):
        assert dual_charge((1, 2, -1)) == (1, -2, 1)
        assert dual_charge((0,)) == (0,)
        c = (1, 3)
        assert fuse_charges(c, dual_charge(c)) == trivial_charge(1)

    def test_charge_system_validation(self):
        cs = ChargeSystem("fZ2xU1")
        cs.validate((1, 5))
        with pytest.raises(ValueError):
            cs.validate((2, 0))
        with pytest.raises(ValueError):
            cs.validate((1,))
        assert ChargeSystem.for_charge((0, 1, 1)).kind == "fZ2xU1xU1"


class TestGradedSpace:
    def test_canonical_sector_order(self):
        # even sectors come first, then lexicographic in the U(1) labels
        sp = GradedSpace([((1, 1), 2), ((0, -1), 1), ((1, -1), 3), ((0, 1), 2)])
        assert [c for c, _ in sp.sectors] == [(0, -1), (0, 1), (1, -1), (1, 1)]

    def test_dims_and_offsets(self):
        sp = parity_space(2, 3)
        assert (sp.dim, sp.dim_even, sp.dim_odd) == (5, 2, 3)
        assert sp.offset((0,)) == 0
        assert sp.offset((1,)) == 2
        assert sp.degeneracy((1,)) == 3

    def test_duplicate_sector_rejected(self):
        with pytest.raises(ValueError):
            GradedSpace([((0,), 1), ((0,), 2)])

    def test_effective_charge(self):
        sp = GradedSpace([((1, 2), 1)], dual=True)
        assert sp.effective_charge((1, 2)) == (1, -2)
        assert sp.dualize().effective_charge((1, 2)) == (1, 2)

    def test_equality_includes_arrow(self):
        a = parity_space(1, 1)
        assert a != a.dualize()
        assert a == parity_space(1, 1)
        assert hash(a) == hash(parity_space(1, 1))


class TestFusion:
    def test_two_qubit_space(self):
        # (1|1) x (1|1) -> two even and two odd states
        v = parity_space(1, 1)
        f = fused_space([v, v])
        assert f.dim_even == 2 and f.dim_odd == 2

    def test_fused_dims_match_product(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            legs = [
                GradedSpace(
                    [((p, q), int(rng.integers(1, 3)))
                     for p in (0, 1) for q in (-1, 1)],
                    bool(rng.integers(2)),
                )
                for _ in range(3)
            ]
            f = fused_space(legs)
            assert f.dim == np.prod([l.dim for l in legs])

    def test_layout_partitions_each_sector(self):
        v = GradedSpace([((0,), 2), ((1,), 1)])
        w = GradedSpace([((0,), 1), ((1,), 2)], dual=True)
        layout = fusion_layout([v, w])
        f = fused_space([v, w])
        per = {}
        for combo, (c, off, size) in layout.items():
            per.setdefault(c, []).append((off, size))
        for c, pieces in per.items():
            pieces.sort()
            total = 0
            for off, size in pieces:
                assert off == total
                total += size
            assert total == f.degeneracy(c)

    def test_dual_fused_leg_stores_dual_labels(self):
        v = GradedSpace([((1, 1), 1)])
        f = fused_space([v, v], dual=True)
        assert f.charges() == [(0, -2)]
        assert f.effective_charge((0, -2)) == (0, 2)
