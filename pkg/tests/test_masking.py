import numpy as np
import pytest

from phasesep.errors import DataIntegrityError
from phasesep.masking import (
    PairIndex,
    SemanticLabel,
    build_anticollision_mask,
    build_pair_index,
    identity_mask,
)
from phasesep.numerics import RngStream


def L(aspect, pol):
    return SemanticLabel(aspect=aspect, polarity=pol)


class TestMask:
    def test_paper_rule(self):
        labels = [L("taste", "pos"), L("taste", "pos"), L("taste", "neg")]
        m = build_anticollision_mask(labels)
        assert np.array_equal(m, [[1, 1, 0], [1, 1, 0], [0, 0, 1]])

    def test_all_distinct_is_identity(self):
        labels = [L("a", "pos"), L("a", "neg"), L("b", "pos"), L("b", "neu")]
        assert np.array_equal(build_anticollision_mask(labels), np.eye(4, dtype=np.uint8))

    def test_all_equal_is_ones(self):
        labels = [L("a", "neu")] * 5
        assert np.array_equal(build_anticollision_mask(labels), np.ones((5, 5), dtype=np.uint8))

    def test_symmetry_and_reflexivity(self):
        rng = RngStream(1)
        aspects = ["a", "b", "c"]
        pols = ["pos", "neg", "neu"]
        for _ in range(30):
            n = int(rng.integers(1, 12))
            labels = [
                L(aspects[int(rng.integers(0, 3))], pols[int(rng.integers(0, 3))])
                for _ in range(n)
            ]
            m = build_anticollision_mask(labels)
            assert np.array_equal(m, m.T)
            assert np.all(np.diag(m) == 1)

    def test_permutation_conjugation(self):
        rng = RngStream(2)
        labels = [
            L("a", "pos"), L("a", "pos"), L("a", "neg"), L("b", "pos"), L("b", "neg"),
        ]
        m = build_anticollision_mask(labels)
        for _ in range(10):
            perm = rng.permutation(len(labels))
            mp = build_anticollision_mask([labels[i] for i in perm])
            p = np.eye(len(labels), dtype=np.uint8)[perm]
            assert np.array_equal(mp, p @ m @ p.T)

    def test_identity_mask(self):
        assert np.array_equal(identity_mask(3), np.eye(3, dtype=np.uint8))

    def test_bad_polarity_rejected(self):
        with pytest.raises(DataIntegrityError):
            L("a", "positive")


class TestPairIndex:
    def test_single_triplet(self):
        labels = [L("a", "pos"), L("a", "pos"), L("a", "neg")]
        roles = [(0, "query"), (0, "positive"), (0, "negative")]
        pairs = build_pair_index(labels, roles)
        assert len(pairs) == 1
        assert pairs[0].anchor == 0
        assert pairs[0].positive == 1
        assert pairs[0].negatives == [2]

    def test_multi_negative(self):
        labels = [L("a", "pos"), L("a", "pos"), L("a", "neg"), L("a", "neu")]
        roles = [(0, "query"), (0, "positive"), (0, "negative"), (0, "negative")]
        pairs = build_pair_index(labels, roles)
        assert pairs[0].negatives == [2, 3]

    def test_cross_aspect_negative_rejected(self):
        labels = [L("a", "pos"), L("a", "pos"), L("b", "neg")]
        roles = [(0, "query"), (0, "positive"), (0, "negative")]
        with pytest.raises(DataIntegrityError, match="aspect"):
            build_pair_index(labels, roles)

    def test_same_polarity_negative_rejected(self):
        labels = [L("a", "pos"), L("a", "pos"), L("a", "pos")]
        roles = [(0, "query"), (0, "positive"), (0, "negative")]
        with pytest.raises(DataIntegrityError):
            build_pair_index(labels, roles)

    def test_positive_polarity_mismatch_rejected(self):
        labels = [L("a", "pos"), L("a", "neg"), L("a", "neg")]
        roles = [(0, "query"), (0, "positive"), (0, "negative")]
        with pytest.raises(DataIntegrityError):
            build_pair_index(labels, roles)

    def test_missing_negative_rejected(self):
        labels = [L("a", "pos"), L("a", "pos")]
        roles = [(0, "query"), (0, "positive")]
        with pytest.raises(DataIntegrityError):
            build_pair_index(labels, roles)

    def test_two_triplets_sorted_by_anchor(self):
        labels = [
            L("b", "neg"), L("b", "neg"), L("b", "pos"),
            L("a", "pos"), L("a", "pos"), L("a", "neg"),
        ]
        roles = [(1, "query"), (1, "positive"), (1, "negative"),
                 (0, "query"), (0, "positive"), (0, "negative")]
        pairs = build_pair_index(labels, roles)
        assert [p.anchor for p in pairs] == [0, 3]

    def test_invariants_on_construction(self):
        with pytest.raises(DataIntegrityError):
            PairIndex(anchor=0, positive=0, negatives=[1])
        with pytest.raises(DataIntegrityError):
            PairIndex(anchor=0, positive=1, negatives=[1])
