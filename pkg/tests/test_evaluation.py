import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smer_impact.baselines import SMER, GlobalImportance
from smer_impact.embedding import EmbeddingModel
from smer_impact.errors import DataError, NumericError, UndefinedValueError
from smer_impact.evaluation import (SplitSpec, actimpact_correlation, aopc_global, auc, curve_csv, extreme10,
                                    pearson, split, trapezoid_area)
from smer_impact.models import EmbeddingPredictor, LinearClassifier, logistic
from smer_impact.targets import act_impact_table

from conftest import doc


def corpus(n_per_year=50, years=(2019, 2020), seed=0):
    rng = np.random.default_rng(seed)
    docs = []
    for y in years:
        for i in range(n_per_year):
            cits = {c: int(rng.integers(0, 30)) for c in (2020, 2021, 2022)}
            docs.append(doc(["w", f"t{i % 7}"], f"{y}-{i:03d}", y, cits))
    return docs


class TestSplits:
    def test_random_80_20(self):
        train, test = split(corpus(), SplitSpec("random", {2019, 2020}, 2021, seed=3))
        assert (len(train), len(test)) == (80, 20)
        assert not {ld.doc.doi for ld in train} & {ld.doc.doi for ld in test}

    def test_random_deterministic(self):
        spec = SplitSpec("random", {2019, 2020}, 2021, seed=3)
        assert split(corpus(), spec) == split(corpus(), spec)
        other = split(corpus(), SplitSpec("random", {2019, 2020}, 2021, seed=4))
        assert other != split(corpus(), spec)

    def test_time_split_disjoint_years(self):
        docs = corpus(years=(2019, 2020, 2021))
        train, test = split(docs, SplitSpec("time", {2019, 2020}, 2021, {2021}, 2022))
        assert {ld.doc.pub_year for ld in train} == {2019, 2020}
        assert {ld.doc.pub_year for ld in test} == {2021}

    def test_time_split_rejects_overlap(self):
        with pytest.raises(ValueError):
            SplitSpec("time", {2019, 2020}, 2021, {2020}, 2022)
        with pytest.raises(ValueError):
            SplitSpec("time", {2019}, 2021, {2020}, 2021)

    def test_semi_split(self):
        docs = corpus()
        train, test = split(docs, SplitSpec("semi", {2019, 2020}, 2020, seed=1))
        assert len(test) == 10 and {ld.doc.pub_year for ld in test} == {2020}
        assert len(train) == 90
        assert not {ld.doc.doi for ld in train} & {ld.doc.doi for ld in test}
        # test labels use 2021 citations against the median of the whole 2020 cohort
        cohort = [d for d in docs if d.pub_year == 2020]
        median = float(np.median([d.cit(2021) for d in cohort]))
        for ld in test:
            assert ld.y == int(ld.doc.cit(2021) > median)

    def test_semi_split_default_test_year(self):
        assert SplitSpec("semi", {2019, 2020}, 2020).test_cit_year == 2021

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            SplitSpec("random", {2020}, 2021, train_fraction=1.0)

    def test_empty_side(self):
        with pytest.raises(DataError):
            split(corpus(n_per_year=1, years=(2020,)), SplitSpec("random", {2020}, 2021))


class TestAuc:
    def test_perfect(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_inverted(self):
        assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_ties_count_half(self):
        assert auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_mixed(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_single_class(self):
        with pytest.raises(DataError):
            auc([0.1, 0.2], [1, 1])

    def test_non_finite(self):
        with pytest.raises(NumericError):
            auc([np.nan, 0.2], [0, 1])


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(-1000, 1000), st.integers(0, 1)), min_size=2, max_size=40))
def test_auc_invariant_under_monotone_transform(pairs):
    scores = np.array([p[0] for p in pairs], dtype=float)
    labels = [p[1] for p in pairs]
    if len(set(labels)) < 2:
        return
    a = auc(scores, labels)
    assert 0.0 <= a <= 1.0
    assert auc(np.exp(scores / 100), labels) == pytest.approx(a, abs=1e-12)
    assert auc(-scores, labels) == pytest.approx(1 - a, abs=1e-12)


class TestExtreme10:
    def test_sizes(self):
        docs = [doc("a", f"d{i:03d}", citations={2021: i}) for i in range(100)]
        chosen = extreme10(docs, 2021)
        assert [d.cit(2021) for d in chosen] == [99, 98, 97, 96, 95, 4, 3, 2, 1, 0]
        assert len(extreme10(docs[:40], 2021)) == 4

    def test_ties_by_doi(self):
        docs = [doc("a", f"d{i:02d}", citations={2021: 5}) for i in range(20)]
        chosen = extreme10(docs, 2021)
        # top takes the first doi; bottom takes the next one not already chosen
        assert [d.doi for d in chosen] == ["d00", "d01"]

    def test_too_small(self):
        with pytest.raises(DataError):
            extreme10([doc("a", str(i)) for i in range(19)], 2021)


class TestPearson:
    def test_perfect(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_value(self):
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_zero_variance(self):
        with pytest.raises(UndefinedValueError):
            pearson([1, 1, 1], [1, 2, 3])


class TestActImpactCorrelation:
    def setup_method(self):
        rng = np.random.default_rng(0)
        words = [f"w{i}" for i in range(30)]
        self.docs = [doc(list(rng.choice(words, 5)), f"d{i}") for i in range(200)]
        self.H = {d.doi for d in self.docs[:70]}
        self.table = act_impact_table(self.docs, self.H)

    def test_identity_importance(self):
        gi = GlobalImportance(SMER, dict(self.table))
        r, points = actimpact_correlation(gi, self.docs, self.H, top_n=10, bottom_n=10)
        assert r == pytest.approx(1.0) and len(points) == 20

    def test_words_outside_documents_skipped(self):
        gi = GlobalImportance(SMER, {**self.table, "ghost": 99.0})
        _, points = actimpact_correlation(gi, self.docs, self.H, top_n=5, bottom_n=5)
        assert "ghost" not in [p.word for p in points]

    def test_not_enough_words(self):
        gi = GlobalImportance(SMER, dict(self.table))
        with pytest.raises(DataError):
            actimpact_correlation(gi, self.docs, self.H, top_n=20, bottom_n=20)


class TestTrapezoid:
    def test_unit_triangle(self):
        assert trapezoid_area([(0, 0), (1, 1)]) == 0.5

    def test_normalised(self):
        assert trapezoid_area([(0, 0), (5, 1), (10, 1)]) == 0.75
        assert trapezoid_area([(0, 0), (5, 1), (10, 1)], normalize_x=False) == 7.5

    def test_invalid(self):
        with pytest.raises(DataError):
            trapezoid_area([(0, 1)])
        with pytest.raises(DataError):
            trapezoid_area([(0, 1), (0, 2)])


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=20), st.data())
def test_trapezoid_additive(ys, data):
    pts = list(enumerate(ys))
    cut = data.draw(st.integers(1, len(pts) - 2))
    whole = trapezoid_area(pts, normalize_x=False)
    parts = trapezoid_area(pts[:cut + 1], normalize_x=False) + trapezoid_area(pts[cut:], normalize_x=False)
    assert whole == pytest.approx(parts, abs=1e-9)


class TestAopc:
    docs = [doc("a b c", "1"), doc("b c d", "2"), doc("a a d", "3")]

    def test_constant_predictor(self):
        curve = aopc_global(lambda s: np.full(len(s), 0.7), self.docs, ["a", "b", "c"], K=3)
        assert curve.area == 0.0 and all(v == 0.0 for _, v in curve.points)

    def test_k0_point_is_zero(self):
        curve = aopc_global(lambda s: np.array([len(x) / 10 for x in s]), self.docs, ["a", "d"], K=2)
        assert curve.points[0] == (0, 0.0)
        assert curve.points[1] == (1, pytest.approx(3 / 30))  # three 'a' tokens removed over three docs
        assert curve.removed == ["a", "d"]

    def test_k_zero(self):
        curve = aopc_global(lambda s: np.zeros(len(s)), self.docs, ["a"], K=0)
        assert curve.area == 0.0 and curve.points == [(0, 0.0)]

    def test_k_capped(self):
        curve = aopc_global(lambda s: np.zeros(len(s)), self.docs, ["a", "b"], K=10)
        assert [k for k, _ in curve.points] == [0, 1, 2]

    def test_removing_only_word_falls_back_to_intercept(self):
        model = EmbeddingModel(["x"], [[2.0]])
        clf = LinearClassifier(-0.5, [1.0])
        curve = aopc_global(EmbeddingPredictor(clf, model), [doc("x x", "1")], ["x"], K=1)
        assert curve.points[1][1] == pytest.approx(logistic(1.5) - logistic(-0.5), abs=1e-15)

    def test_signed_drops(self):
        # removing 'a' raises the prediction, so the drop is negative
        curve = aopc_global(lambda s: np.array([0.9 - 0.1 * x.count("a") for x in s]), self.docs, ["a"], K=1)
        assert curve.points[1][1] < 0

    def test_csv(self):
        curve = aopc_global(lambda s: np.zeros(len(s)), self.docs, ["a"], K=1)
        assert curve_csv(curve, ["method: x"]) == "# method: x\nk,mean_drop\n0,0.0\n1,0.0\n"

    def test_bad_predictor(self):
        with pytest.raises(DataError):
            aopc_global(lambda s: np.zeros(1), self.docs, ["a"], K=1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 8))
def test_aopc_area_bounded(seed, K):
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(12)]
    model = EmbeddingModel(words, rng.normal(size=(12, 3)))
    clf = LinearClassifier(float(rng.normal()), rng.normal(size=3))
    docs = [doc(list(rng.choice(words, 6)), str(i)) for i in range(10)]
    curve = aopc_global(EmbeddingPredictor(clf, model), docs, list(rng.permutation(words)), K=K)
    assert -1.0 <= curve.area <= 1.0
    assert math.isfinite(curve.raw_area) and len(curve.points) == K + 1
