import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smer_impact import embedding as emb
from smer_impact.embedding import EmbeddingModel, SkipgramConfig, cosine, doc_vector, neighbors, train_skipgram
from smer_impact.errors import DataError, EmptyDocumentError, NumericError, OOVError

from conftest import doc, random_model


def cooccurrence_corpus(seed=0, n=300):
    """'a' and 'b' always share a document; 'c' never meets either."""
    rng = np.random.default_rng(seed)
    fill1 = [f"f{i}" for i in range(20)]
    fill2 = [f"g{i}" for i in range(20)]
    docs = []
    for i in range(n):
        if i % 2:
            toks = ["a", "b"] + list(rng.choice(fill1, 6))
        else:
            toks = ["c"] + list(rng.choice(fill2, 7))
        rng.shuffle(toks)
        docs.append(doc(toks, f"d{i}"))
    return docs


class TestTraining:
    def test_dimension(self):
        model = train_skipgram(cooccurrence_corpus(n=20), SkipgramConfig(dim=100, window=10, epochs=1))
        assert model.dim == 100

    def test_cooccurrence_ordering(self):
        model = train_skipgram(cooccurrence_corpus(), SkipgramConfig(dim=20, window=5, seed=3))
        assert cosine(model, "a", "b") > cosine(model, "a", "c")

    def test_vocabulary_and_min_count(self):
        docs = [doc("a a a b b c"), doc("a b d", "e")]
        assert sorted(train_skipgram(docs, SkipgramConfig(dim=4, epochs=1)).words) == ["a", "b", "c", "d"]
        assert train_skipgram(docs, SkipgramConfig(dim=4, epochs=1, min_count=2)).words == ["a", "b"]

    def test_empty_vocabulary(self):
        with pytest.raises(DataError):
            train_skipgram([doc("a b")], SkipgramConfig(dim=4, min_count=5))

    def test_deterministic_single_worker(self):
        docs = cooccurrence_corpus(n=60)
        cfg = SkipgramConfig(dim=8, window=3, epochs=2, seed=11)
        a, b = train_skipgram(docs, cfg), train_skipgram(docs, cfg)
        assert a.words == b.words
        assert np.array_equal(a.vectors, b.vectors)
        c = train_skipgram(docs, SkipgramConfig(dim=8, window=3, epochs=2, seed=12))
        assert not np.array_equal(a.vectors, c.vectors)

    def test_threaded_mode_runs(self, caplog):
        model = train_skipgram(cooccurrence_corpus(n=80), SkipgramConfig(dim=8, epochs=2, workers=3))
        assert np.all(np.isfinite(model.vectors))
        assert "not seed-reproducible" in caplog.text

    def test_finite_with_aggressive_learning_rate(self):
        model = train_skipgram(cooccurrence_corpus(n=80), SkipgramConfig(dim=8, epochs=20, learning_rate=5.0))
        assert np.all(np.isfinite(model.vectors))

    @pytest.mark.parametrize("field", ["dim", "window", "negatives", "epochs"])
    def test_config_validation(self, field):
        with pytest.raises(ValueError):
            SkipgramConfig(**{field: 0})


class TestDocVector:
    model = EmbeddingModel(["u", "v", "w"], [[1.0, 2.0], [-1.0, -2.0], [3.0, 0.5]])

    def test_single_word(self):
        assert np.array_equal(doc_vector(self.model, doc("w")), self.model.vector("w"))

    def test_opposites_cancel(self):
        assert np.array_equal(doc_vector(self.model, doc("u v")), [0.0, 0.0])

    def test_repetition(self):
        assert np.allclose(doc_vector(self.model, doc(["w"] * 7)), self.model.vector("w"))

    def test_oov_skipped_and_reported(self):
        vec, oov = doc_vector(self.model, doc("w zz w yy"), return_oov=True)
        assert np.array_equal(vec, self.model.vector("w"))
        assert oov == ["zz", "yy"]

    def test_all_oov(self):
        with pytest.raises(EmptyDocumentError) as exc:
            doc_vector(self.model, doc("zz", doi="10.9/zz"))
        assert exc.value.doi == "10.9/zz"


@settings(max_examples=50)
@given(st.integers(1, 30), st.integers(0, 10_000))
def test_doc_vector_concatenation(n, seed):
    model = random_model(40, 6, seed=seed % 7)
    rng = np.random.default_rng(seed)
    a = list(rng.choice(model.words, n))
    b = list(rng.choice(model.words, n))
    joined = doc_vector(model, doc(a + b))
    halves = (doc_vector(model, doc(a)) + doc_vector(model, doc(b))) / 2
    assert np.allclose(joined, halves, rtol=1e-12, atol=1e-12)


class TestCosine:
    model = EmbeddingModel(["x", "y", "z", "x2", "zero"],
                           [[1.0, 0.0], [0.0, 2.0], [-1.0, -1.0], [2.0, 0.0], [0.0, 0.0]])

    def test_self(self):
        assert cosine(self.model, "z", "z") == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine(self.model, "x", "y") == 0.0

    def test_oov(self):
        with pytest.raises(OOVError, match="nope"):
            cosine(self.model, "x", "nope")

    def test_zero_vector(self):
        with pytest.raises(DataError):
            cosine(self.model, "x", "zero")

    def test_symmetric_random(self):
        m = random_model(30, 5)
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b = rng.choice(m.words, 2)
            assert cosine(m, a, b) == cosine(m, b, a)


class TestNeighbors:
    model = EmbeddingModel(["s", "dup", "near", "far", "opp"],
                           [[1.0, 0.0], [1.0, 0.0], [1.0, 0.3], [0.0, 1.0], [-1.0, 0.0]])

    def test_threshold_and_seed_excluded(self):
        hits = neighbors(self.model, "s", 0.70, 15)
        assert [w for w, _ in hits] == ["dup", "near"]
        assert hits[0][1] == pytest.approx(1.0)

    def test_k_truncates(self):
        big = random_model(200, 3, seed=2)
        hits = neighbors(big, big.words[0], 0.0, 15)
        assert len(hits) <= 15 and big.words[0] not in [w for w, _ in hits]
        assert [c for _, c in hits] == sorted((c for _, c in hits), reverse=True)

    def test_unreachable_threshold(self):
        assert neighbors(self.model, "s", 1.01) == []

    def test_oov_seed(self):
        with pytest.raises(OOVError):
            neighbors(self.model, "nope")


class TestTextFormat:
    def test_round_trip(self, tmp_path):
        m = random_model(30, 7, seed=4)
        emb.save(m, tmp_path / "v.txt")
        back = emb.load(tmp_path / "v.txt")
        assert back.words == m.words
        assert np.allclose(back.vectors, m.vectors, rtol=1e-6, atol=1e-6)

    def test_header_row_mismatch(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("3 2\na 1 2\nb 3 4\n")
        with pytest.raises(DataError, match="3 words"):
            emb.load(p)

    def test_dim_mismatch(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("2 3\na 1 2 3\nb 3 4\n")
        with pytest.raises(DataError, match="line 3"):
            emb.load(p)

    def test_hand_written_file(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("2 3\ncovid 0.5 -1 2e-1\nvaccine 1 0 0\n", encoding="utf-8")
        m = emb.load(p)
        assert m.dim == 3 and np.array_equal(m.vector("covid"), [0.5, -1.0, 0.2])
        assert cosine(m, "covid", "vaccine") == pytest.approx(0.5 / np.linalg.norm([0.5, -1, 0.2]))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="missing.txt"):
            emb.load(tmp_path / "missing.txt")

    def test_writes_nine_digits(self):
        buf = io.StringIO()
        emb.write_text(EmbeddingModel(["a"], [[1 / 3]]), buf)
        assert buf.getvalue() == "1 1\na 0.333333333\n"


class TestModelValidation:
    def test_non_finite(self):
        with pytest.raises(NumericError):
            EmbeddingModel(["a"], [[np.nan]])

    def test_shape(self):
        with pytest.raises(DataError):
            EmbeddingModel(["a", "b"], [[1.0]])

    def test_read_only(self):
        m = random_model(3, 2)
        with pytest.raises(ValueError):
            m.vectors[0, 0] = 1.0
