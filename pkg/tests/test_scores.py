import json

import numpy as np
import pytest

from conftest import make_dataset
from ratioscope.data import pool
from ratioscope.errors import (
    DimensionMismatch,
    NegativeThreshold,
    UnknownSample,
)
from ratioscope.llr import WeightMatrix
from ratioscope.scores import (
    ScoreSet,
    detect,
    explain,
    load_scores_csv,
    ratio_score,
    save_explanations_json,
    save_scores_csv,
)


def pooled_with(n_inlier, n_test, d=1, fill=1.0):
    inl = make_dataset(np.full((d, n_inlier), fill), "a")
    test = make_dataset(np.full((d, n_test), fill), "b")
    return pool(inl, test)


class TestScoreSet:
    def test_rejects_nonpositive(self):
        with pytest.raises(DimensionMismatch):
            ScoreSet(("a",), np.array([0.0]))
        with pytest.raises(DimensionMismatch):
            ScoreSet(("a",), np.array([-1.0]))
        with pytest.raises(DimensionMismatch):
            ScoreSet(("a",), np.array([np.inf]))

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(DimensionMismatch):
            ScoreSet(("a", "b"), np.array([1.0]))
        with pytest.raises(DimensionMismatch):
            ScoreSet(("a",), np.array([1.0]), labels=("inlier", "outlier"))


class TestRatioScore:
    def test_zero_weights_balanced(self):
        pooled = pooled_with(5, 5)
        W = WeightMatrix(values=np.zeros((1, 10)))
        s = ratio_score(W, pooled)
        assert np.all(s.scores == 1.0)

    def test_prior_arithmetic(self):
        # margin ln 2 with 200 inliers and 110 test samples -> 2 * 110/200
        pooled = pooled_with(200, 110)
        W = WeightMatrix(values=np.full((1, 310), np.log(2.0)))
        s = ratio_score(W, pooled, which="test")
        assert s.scores == pytest.approx(np.full(110, 1.1), rel=1e-12)
        assert len(s.sample_ids) == 110

    def test_monotone_in_margin(self):
        pooled = pooled_with(3, 4)
        values = np.zeros((1, 7))
        values[0, 3:] = [-1.0, 0.0, 1.0, 2.0]
        s = ratio_score(WeightMatrix(values=values), pooled)
        assert np.all(np.diff(s.scores) > 0)

    def test_overflow_clamped(self):
        pooled = pooled_with(2, 2, fill=1e6)
        W = WeightMatrix(values=np.full((1, 4), 1e6))
        s = ratio_score(W, pooled)
        assert np.all(np.isfinite(s.scores))
        assert np.all(s.scores == np.exp(500.0))

    def test_selectors(self):
        pooled = pooled_with(3, 2)
        W = WeightMatrix(values=np.zeros((1, 5)))
        assert len(ratio_score(W, pooled, which="inlier").scores) == 3
        assert len(ratio_score(W, pooled, which="test").scores) == 2
        all_ = ratio_score(W, pooled, which="all")
        assert all_.sample_ids == pooled.sample_ids
        with pytest.raises(ValueError):
            ratio_score(W, pooled, which="bogus")

    def test_dimension_guard(self):
        pooled = pooled_with(2, 2)
        with pytest.raises(DimensionMismatch):
            ratio_score(WeightMatrix(values=np.zeros((1, 3))), pooled)


class TestDetect:
    def make(self, values):
        return ScoreSet(
            tuple(f"s{i}" for i in range(len(values))), np.asarray(values, float)
        )

    def test_tau_zero_all_inliers(self):
        assert detect(self.make([0.5, 2.0]), 0.0) == ("inlier", "inlier")

    def test_split(self):
        assert detect(self.make([0.5, 2.0]), 1.0) == ("outlier", "inlier")

    def test_tau_max_all_outliers(self):
        s = self.make([0.5, 2.0, 1.5])
        assert detect(s, max(s.scores)) == ("outlier",) * 3

    def test_monotone_in_tau(self):
        rng = np.random.default_rng(0)
        s = self.make(rng.random(20) + 0.1)
        prev = set()
        for tau in np.linspace(0.0, 1.2, 13):
            flagged = {
                i for i, d in enumerate(detect(s, tau)) if d == "outlier"
            }
            assert prev <= flagged
            prev = flagged

    def test_negative_tau(self):
        with pytest.raises(NegativeThreshold):
            detect(self.make([1.0]), -0.5)


class TestExplain:
    def test_ranked_by_magnitude(self):
        pooled = pooled_with(1, 1, d=3)
        values = np.zeros((3, 2))
        values[:, 1] = [0.9, -0.1, 0.0]
        e = explain(WeightMatrix(values=values), pooled, "b0", top_k=2)
        assert e.ranked_features == (("f0", 0.9), ("f1", -0.1))

    def test_zero_column_index_tiebreak(self):
        pooled = pooled_with(1, 1, d=4)
        e = explain(WeightMatrix(values=np.zeros((4, 2))), pooled, "a0", top_k=4)
        assert [n for n, _ in e.ranked_features] == ["f0", "f1", "f2", "f3"]
        assert all(w == 0.0 for _, w in e.ranked_features)

    def test_prefix_l1_bound(self):
        rng = np.random.default_rng(1)
        pooled = pooled_with(2, 3, d=6)
        values = rng.normal(size=(6, 5))
        for k in (1, 3, 6):
            e = explain(WeightMatrix(values=values), pooled, "b1", top_k=k)
            col = values[:, 3]  # b1 is pooled column 3
            assert sum(abs(w) for _, w in e.ranked_features) <= np.sum(np.abs(col)) + 1e-12

    def test_unknown_sample(self):
        pooled = pooled_with(1, 1)
        with pytest.raises(UnknownSample):
            explain(WeightMatrix(values=np.zeros((1, 2))), pooled, "nope", top_k=1)

    def test_bad_top_k(self):
        pooled = pooled_with(1, 1)
        with pytest.raises(ValueError):
            explain(WeightMatrix(values=np.zeros((1, 2))), pooled, "a0", top_k=0)


class TestScoresIo:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        s = ScoreSet(
            ("a", "b", "c"),
            rng.random(3) + 0.1,
            labels=("inlier", "outlier", "inlier"),
        )
        decisions = detect(s, 0.5)
        path = tmp_path / "scores.csv"
        save_scores_csv(path, s, decisions)
        loaded, dec = load_scores_csv(path)
        assert loaded.sample_ids == s.sample_ids
        assert np.array_equal(loaded.scores, s.scores)  # bit-exact via repr
        assert loaded.labels == s.labels
        assert dec == decisions

    def test_roundtrip_without_optionals(self, tmp_path):
        s = ScoreSet(("x", "y"), np.array([1.5, 2.5]))
        path = tmp_path / "scores.csv"
        save_scores_csv(path, s)
        loaded, dec = load_scores_csv(path)
        assert loaded.labels is None and dec is None
        assert np.array_equal(loaded.scores, s.scores)

    def test_explanations_json(self, tmp_path):
        pooled = pooled_with(1, 2, d=2)
        values = np.array([[0.0, 1.0, -2.0], [0.0, 0.5, 0.25]])
        W = WeightMatrix(values=values)
        exps = [explain(W, pooled, sid, top_k=2) for sid in ("b0", "b1")]
        path = tmp_path / "explanations.json"
        save_explanations_json(path, exps)
        doc = json.loads(path.read_text())
        assert [e["sample_id"] for e in doc] == ["b0", "b1"]
        assert doc[1]["features"][0] == {"name": "f0", "weight": -2.0}
        assert doc[0]["score"] == pytest.approx(exps[0].score)
