from __future__ import annotations

import random
from fractions import Fraction

import pytest

from taxa.assist import EmbeddingTable, cosine
from taxa.errors import (
    EmptyLabeledSet,
    EmptyProbabilityRow,
    ImageSetMismatch,
    MissingEmbedding,
    NotEnoughData,
)
from taxa.predict import (
    ProbabilityRow,
    ancestor_closure,
    evaluate,
    loo_evaluate,
    similarity_predict,
    zero_shot_predict,
)


class TestAncestorClosure:
    def test_prefix_enumeration(self):
        assert ancestor_closure({("a", "b", "c")}) == {
            ("a",),
            ("a", "b"),
            ("a", "b", "c"),
        }

    def test_idempotent(self):
        closed = ancestor_closure({("a", "b"), ("c",)})
        assert ancestor_closure(closed) == closed

    def test_empty(self):
        assert ancestor_closure(set()) == set()

    def test_root_never_included(self):
        assert () not in ancestor_closure({("a",)})


class TestSimilarityPredict:
    LABELED = {"u1": {("map",)}, "u2": {("table",)}}
    EMB = EmbeddingTable.from_dict(
        {"u1": (1.0, 0.0), "u2": (0.0, 1.0), "t1": (0.9, 0.1), "t2": (0.0, 1.0)}
    )

    def test_copies_nearest_labels(self):
        pred = similarity_predict(self.LABELED, self.EMB, ["t1"])
        assert pred == {"t1": {("map",)}}
        # verified by direct cosine comparison
        assert cosine((0.9, 0.1), (1, 0)) > cosine((0.9, 0.1), (0, 1))

    def test_identical_embedding_is_maximal(self):
        pred = similarity_predict(self.LABELED, self.EMB, ["t2"])
        assert pred == {"t2": {("table",)}}

    def test_tie_resolves_to_smallest_uuid(self):
        emb = EmbeddingTable.from_dict(
            {"a2": (1.0, 0.0), "a1": (0.0, 1.0), "t": (1.0, 1.0)}
        )
        labeled = {"a2": {("x",)}, "a1": {("y",)}}
        pred = similarity_predict(labeled, emb, ["t"])
        assert pred == {"t": {("y",)}}  # a1 < a2

    def test_copy_is_a_fresh_set(self):
        pred = similarity_predict(self.LABELED, self.EMB, ["t1"])
        pred["t1"].add(("junk",))
        assert self.LABELED["u1"] == {("map",)}

    def test_empty_labeled_set(self):
        with pytest.raises(EmptyLabeledSet):
            similarity_predict({}, self.EMB, ["t1"])

    def test_missing_embedding(self):
        with pytest.raises(MissingEmbedding):
            similarity_predict(self.LABELED, self.EMB, ["ghost"])


class TestZeroShot:
    def test_threshold_is_inclusive(self):
        rows = [
            ProbabilityRow("u1", {("a",): 0.5, ("b",): 0.3, ("c",): 0.2})
        ]
        assert zero_shot_predict(rows) == {"u1": {("a",), ("b",)}}

    def test_argmax_always_kept(self):
        rows = [ProbabilityRow("u1", {("a",): 0.1, ("b",): 0.05})]
        assert zero_shot_predict(rows) == {"u1": {("a",)}}

    def test_ancestor_closure_applied(self):
        rows = [ProbabilityRow("u1", {("map", "cartogram"): 0.9})]
        assert zero_shot_predict(rows) == {
            "u1": {("map",), ("map", "cartogram")}
        }

    def test_argmax_tie_prefers_smaller_path(self):
        rows = [ProbabilityRow("u1", {("b",): 0.1, ("a",): 0.1})]
        assert zero_shot_predict(rows) == {"u1": {("a",)}}

    def test_custom_threshold(self):
        rows = [ProbabilityRow("u1", {("a",): 0.5, ("b",): 0.4})]
        assert zero_shot_predict(rows, threshold=0.45) == {"u1": {("a",)}}

    def test_empty_row_rejected(self):
        with pytest.raises(EmptyProbabilityRow):
            zero_shot_predict([ProbabilityRow("u1", {})])

    @pytest.mark.parametrize("seed", range(30))
    def test_rule_oracle_on_random_rows(self, seed):
        rng = random.Random(seed)
        leaves = [("a",), ("b",), ("a", "x"), ("c", "y", "z"), ("d",)]
        probs = {
            p: round(rng.random(), 3)
            for p in rng.sample(leaves, rng.randint(1, len(leaves)))
        }
        row = ProbabilityRow("u", probs)
        out = zero_shot_predict([row], threshold=0.3)["u"]
        # independent oracle, straight from the rule
        top = max(probs.values())
        argmax = sorted(p for p, v in probs.items() if v == top)[0]
        expected = {p for p, v in probs.items() if v >= 0.3} | {argmax}
        expected |= {p[:i] for p in expected for i in range(1, len(p))}
        assert out == expected
        assert ancestor_closure(out) == out  # closed
        assert argmax in out


class TestEvaluate:
    def test_perfect_agreement(self):
        labels = {"u1": {("a",)}, "u2": {("b", "c")}}
        report = evaluate(labels, labels)
        assert report.exact_match == 1
        assert report.jaccard == 1
        assert report.n_images == 2

    def test_textbook_jaccard(self):
        pred = {"u1": {("a",), ("b",)}}
        gold = {"u1": {("b",), ("c",)}}
        report = evaluate(pred, gold)
        assert report.exact_match == 0
        assert report.jaccard == Fraction(1, 3)

    def test_depth_truncation(self):
        pred = {"u1": {("map", "cartogram")}}
        gold = {"u1": {("map", "choropleth")}}
        assert evaluate(pred, gold).jaccard == 0
        report = evaluate(pred, gold, depth=1)
        assert report.jaccard == 1
        assert report.depth == 1

    def test_symmetry(self):
        rng = random.Random(0)
        paths = [("a",), ("b",), ("a", "x")]
        pred = {f"u{i}": set(rng.sample(paths, rng.randint(1, 3))) for i in range(6)}
        gold = {f"u{i}": set(rng.sample(paths, rng.randint(1, 3))) for i in range(6)}
        fwd = evaluate(pred, gold)
        rev = evaluate(gold, pred)
        assert fwd.exact_match == rev.exact_match
        assert fwd.jaccard == rev.jaccard

    def test_image_set_mismatch(self):
        with pytest.raises(ImageSetMismatch):
            evaluate({"u1": {("a",)}}, {"u2": {("a",)}})

    def test_exact_match_never_exceeds_jaccard(self):
        rng = random.Random(4)
        paths = [("a",), ("b",), ("c",)]
        for _ in range(50):
            pred = {
                f"u{i}": set(rng.sample(paths, rng.randint(1, 3)))
                for i in range(4)
            }
            gold = {
                f"u{i}": set(rng.sample(paths, rng.randint(1, 3)))
                for i in range(4)
            }
            r = evaluate(pred, gold)
            assert r.exact_match <= r.jaccard


class TestTruncationMonotonicity:
    """D=1 versus full depth.

    Exact match is monotone under truncation for any labelings.  The
    per-image Jaccard is monotone when every compared set is the ancestor
    closure of a single leaf; with multiple leaves per image it can
    genuinely decrease (see test_multi_leaf_counterexample).
    """

    LEAVES = [
        ("map", "cartogram"),
        ("map", "choropleth"),
        ("bar chart",),
        ("table", "numeric", "census"),
        ("diagram",),
    ]

    @pytest.mark.parametrize("seed", range(30))
    def test_single_leaf_closures(self, seed):
        rng = random.Random(seed)
        uuids = [f"u{i}" for i in range(rng.randint(1, 6))]
        pred = {u: ancestor_closure({rng.choice(self.LEAVES)}) for u in uuids}
        gold = {u: ancestor_closure({rng.choice(self.LEAVES)}) for u in uuids}
        full = evaluate(pred, gold)
        top = evaluate(pred, gold, depth=1)
        assert top.jaccard >= full.jaccard
        assert top.exact_match >= full.exact_match

    @pytest.mark.parametrize("seed", range(30))
    def test_exact_match_monotone_for_any_closed_sets(self, seed):
        rng = random.Random(1000 + seed)
        uuids = [f"u{i}" for i in range(rng.randint(1, 6))]
        pred = {
            u: ancestor_closure(
                set(rng.sample(self.LEAVES, rng.randint(1, 3)))
            )
            for u in uuids
        }
        gold = {
            u: ancestor_closure(
                set(rng.sample(self.LEAVES, rng.randint(1, 3)))
            )
            for u in uuids
        }
        assert (
            evaluate(pred, gold, depth=1).exact_match
            >= evaluate(pred, gold).exact_match
        )

    def test_multi_leaf_counterexample(self):
        # Shared deep structure plus disjoint top-level leaves: truncation
        # shrinks the intersection faster than the union.
        pred = {"u": {("a",), ("a", "x"), ("b",)}}
        gold = {"u": {("a",), ("a", "x"), ("c",)}}
        assert evaluate(pred, gold).jaccard == Fraction(1, 2)
        assert evaluate(pred, gold, depth=1).jaccard == Fraction(1, 3)


class TestLeaveOneOut:
    def test_twins_score_perfectly(self):
        labeled = {}
        vectors = {}
        rng = random.Random(1)
        for i in range(6):
            base = (rng.random() + 1, rng.random() + 1, rng.random())
            for twin in ("a", "b"):
                u = f"img{i}{twin}"
                vectors[u] = base
                labeled[u] = {(f"taxon{i}",)}
        report = loo_evaluate(labeled, EmbeddingTable.from_dict(vectors))
        assert report.exact_match == 1
        assert report.jaccard == 1

    def test_orthogonal_pair_scores_zero(self):
        labeled = {"u1": {("a",)}, "u2": {("b",)}}
        emb = EmbeddingTable.from_dict({"u1": (1.0, 0.0), "u2": (0.0, 1.0)})
        report = loo_evaluate(labeled, emb)
        assert report.exact_match == 0
        assert report.jaccard == 0

    def test_needs_two_images(self):
        emb = EmbeddingTable.from_dict({"u1": (1.0,)})
        with pytest.raises(NotEnoughData):
            loo_evaluate({"u1": {("a",)}}, emb)

    def test_six_image_fixture_matches_brute_force(self):
        rng = random.Random(9)
        uuids = [f"u{i}" for i in range(6)]
        vectors = {u: tuple(rng.gauss(0, 1) for _ in range(4)) for u in uuids}
        paths = [("a",), ("b",), ("c", "d")]
        labeled = {
            u: set(rng.sample(paths, rng.randint(1, 2))) for u in uuids
        }
        emb = EmbeddingTable.from_dict(vectors)
        report = loo_evaluate(labeled, emb)

        # independent per-image recomputation
        exact = 0
        jacc = Fraction(0)
        for u in uuids:
            best, best_sim = None, -2.0
            for other in sorted(x for x in uuids if x != u):
                sim = cosine(vectors[u], vectors[other])
                if sim > best_sim:
                    best, best_sim = other, sim
            pred = labeled[best]
            gold = labeled[u]
            if pred == gold:
                exact += 1
            union = pred | gold
            jacc += Fraction(len(pred & gold), len(union)) if union else Fraction(1)
        assert report.exact_match == Fraction(exact, len(uuids))
        assert report.jaccard == jacc / len(uuids)
