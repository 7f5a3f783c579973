import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairdisagree.errors import FairnessError, UndefinedRateError
from fairdisagree.verification import (
    ConfusionCounts,
    Embedding,
    LabeledScore,
    PairProtocol,
    ThresholdGrid,
    build_pairs,
    confusion_at,
    cosine_similarity,
    rates,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def vec(dim):
    return st.lists(finite, min_size=dim, max_size=dim).filter(lambda v: math.hypot(*v) > 1e-3)


class TestCosine:
    def test_identical(self):
        assert cosine_similarity(Embedding("x", (1, 0)), Embedding("y", (1, 0))) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity(Embedding("x", (1, 0)), Embedding("y", (0, 1))) == 0.0

    def test_hand_computed(self):
        # dot 24, norms 5 and 5
        got = cosine_similarity(Embedding("x", (3, 4)), Embedding("y", (4, 3)))
        assert got == pytest.approx(24 / 25, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(FairnessError, match="dimension"):
            cosine_similarity(Embedding("x", (1, 0)), Embedding("y", (1, 0, 0)))

    def test_zero_vector(self):
        with pytest.raises(FairnessError, match="zero"):
            cosine_similarity(Embedding("x", (0, 0)), Embedding("y", (1, 0)))

    @given(st.integers(1, 6).flatmap(lambda d: st.tuples(vec(d), vec(d))),
           st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_properties(self, ab, ca, cb):
        a, b = ab
        ea, eb = Embedding("a", a), Embedding("b", b)
        assert cosine_similarity(ea, ea) == pytest.approx(1.0, abs=1e-12)
        s = cosine_similarity(ea, eb)
        assert -1.0 <= s <= 1.0
        assert s == cosine_similarity(eb, ea)
        scaled = cosine_similarity(Embedding("a", [x * ca for x in a]), Embedding("b", [x * cb for x in b]))
        assert scaled == pytest.approx(s, abs=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(FairnessError, match="non-finite"):
            Embedding("x", (1.0, float("nan")))


def emb(ident, *v):
    return Embedding(ident, v)


class TestBuildPairs:
    def test_single_identity(self):
        out = build_pairs([emb("X", 1, 0), emb("X", 1, 1)])
        assert [p.is_genuine for p in out] == [True]

    def test_two_identities(self):
        # all C(3,2)=3 pairs: (X0,X1) genuine, (X0,Y), (X1,Y) impostor
        out = build_pairs([emb("X", 1, 0), emb("X", 1, 1), emb("Y", 0, 1)])
        assert sum(p.is_genuine for p in out) == 1
        assert sum(not p.is_genuine for p in out) == 2

    def test_three_singletons(self):
        out = build_pairs([emb("X", 1, 0), emb("Y", 0, 1), emb("Z", 1, 1)])
        assert len(out) == 3 and not any(p.is_genuine for p in out)
        assert {(p.identity_a, p.identity_b) for p in out} == {("X", "Y"), ("X", "Z"), ("Y", "Z")}

    def test_scores_match_cosine(self):
        rng = np.random.default_rng(3)
        embs = [Embedding(f"id{i % 4}", tuple(rng.normal(size=8))) for i in range(12)]
        out = build_pairs(embs)
        expected = [
            cosine_similarity(a, b) for a, b in combinations(embs, 2)
        ]
        # output order is by (i, j), genuine and impostor interleaved
        assert [p.score for p in out] == pytest.approx(expected, abs=1e-15)

    @given(st.lists(st.sampled_from("ABCDE"), min_size=2, max_size=12))
    @settings(max_examples=50)
    def test_exhaustive_count(self, idents):
        embs = [Embedding(i, (1.0, float(k))) for k, i in enumerate(idents)]
        out = build_pairs(embs)
        m = len(idents)
        assert len(out) == m * (m - 1) // 2
        n_gen = sum(p.is_genuine for p in out)
        brute = sum(1 for a, b in combinations(idents, 2) if a == b)
        assert n_gen == brute

    def test_duplicate_record(self):
        with pytest.raises(FairnessError, match="duplicate"):
            build_pairs([Embedding("X", (1, 0), index=0), Embedding("X", (0, 1), index=0)])

    def test_require_genuine(self):
        with pytest.raises(FairnessError, match="genuine"):
            build_pairs([emb("X", 1, 0), emb("Y", 0, 1)], PairProtocol(require_genuine=True))

    def test_mixed_dimensions(self):
        with pytest.raises(FairnessError, match="dimension"):
            build_pairs([emb("X", 1, 0), emb("Y", 0, 1, 0)])

    def test_too_few(self):
        with pytest.raises(FairnessError):
            build_pairs([emb("X", 1, 0)])

    def test_sampled_mode(self):
        rng = np.random.default_rng(0)
        embs = [Embedding(f"id{i % 10}", tuple(rng.normal(size=4))) for i in range(40)]
        proto = PairProtocol("sampled", impostor_cap=5, seed=9)
        a = build_pairs(embs, proto)
        b = build_pairs(embs, proto)
        assert a == b
        genuine = [p for p in a if p.is_genuine]
        impostor = [p for p in a if not p.is_genuine]
        assert len(genuine) == 10 * 6  # each identity has 4 images: C(4,2)
        assert 0 < len(impostor) <= 5 * 10
        assert build_pairs(embs, PairProtocol("sampled", impostor_cap=5, seed=10)) != a

    def test_protocol_parse(self):
        assert PairProtocol.parse("exhaustive").mode == "exhaustive"
        p = PairProtocol.parse("sampled:7", seed=3)
        assert (p.mode, p.impostor_cap, p.seed) == ("sampled", 7, 3)
        with pytest.raises(FairnessError):
            PairProtocol.parse("random")


def ls(score, genuine):
    return LabeledScore("a", "a" if genuine else "b", score, genuine)


class TestConfusion:
    def test_genuine_accept(self):
        assert confusion_at([ls(0.9, True)], 0.5) == ConfusionCounts(tp=1)

    def test_impostor_accept(self):
        assert confusion_at([ls(0.9, False)], 0.5) == ConfusionCounts(fp=1)

    def test_four_pairs(self):
        scores = [ls(0.9, True), ls(0.4, True), ls(0.6, False), ls(0.1, False)]
        assert confusion_at(scores, 0.5) == ConfusionCounts(tp=1, fp=1, tn=1, fn=1)

    def test_tie_accepts(self):
        assert confusion_at([ls(0.5, True), ls(0.5, False)], 0.5) == ConfusionCounts(tp=1, fp=1)

    def test_empty(self):
        with pytest.raises(FairnessError):
            confusion_at([], 0.5)

    @given(st.lists(st.tuples(st.floats(-1, 1), st.booleans()), min_size=1, max_size=40),
           st.lists(st.floats(-1, 1), min_size=2, max_size=10, unique=True))
    def test_monotone_and_totals(self, pairs, taus):
        scores = [ls(s, g) for s, g in pairs]
        taus = sorted(taus)
        counts = [confusion_at(scores, t) for t in taus]
        assert len({(c.n_genuine, c.n_impostor) for c in counts}) == 1
        for c0, c1 in zip(counts, counts[1:]):
            assert c1.fp <= c0.fp
            assert c1.fn >= c0.fn


class TestRates:
    def test_symmetric(self):
        assert rates(ConfusionCounts(1, 1, 1, 1)) == (0.5, 0.5, 0.5)

    def test_arithmetic(self):
        fpr, fnr, acc = rates(ConfusionCounts(tp=9, fp=1, tn=9, fn=1))
        assert (fpr, fnr, acc) == pytest.approx((0.1, 0.1, 0.9), abs=1e-15)

    def test_all_reject(self):
        assert rates(ConfusionCounts(tp=0, fp=0, tn=5, fn=5)) == (0.0, 1.0, 0.5)

    def test_missing_class(self):
        with pytest.raises(UndefinedRateError):
            rates(ConfusionCounts(tp=3, fn=1))


class TestLabeledScore:
    def test_genuine_needs_same_identity(self):
        with pytest.raises(FairnessError):
            LabeledScore("a", "b", 0.3, True)

    def test_non_finite(self):
        with pytest.raises(FairnessError):
            LabeledScore("a", "b", float("inf"), False)


class TestGrid:
    def test_five_point_grid(self):
        assert ThresholdGrid.parse("0.20:0.28:0.02").values == (0.2, 0.22, 0.24, 0.26, 0.28)

    def test_zero_step(self):
        with pytest.raises(FairnessError, match="step"):
            ThresholdGrid.parse("0.2:0.3:0")

    def test_list(self):
        assert ThresholdGrid.parse("0.1,0.5").values == (0.1, 0.5)

    def test_single(self):
        assert ThresholdGrid.parse("0.5:0.5:0.1").values == (0.5,)

    @pytest.mark.parametrize("bad", ["0.3:0.2:0.1", "a:b:c", "0.1:0.2", "0.5,0.4", ""])
    def test_invalid(self, bad):
        with pytest.raises(FairnessError):
            ThresholdGrid.parse(bad)
