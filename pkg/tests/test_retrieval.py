from datetime import date, timedelta

import numpy as np
import pytest

from paperank.corpus import Corpus, PaperRecord
from paperank.retrieval import (
    RetrievalError,
    build_index,
    cosine_similarity,
    read_embeddings,
    retrieve_references,
    write_embeddings,
)


def make_corpus(dates):
    return Corpus(
        records=[
            PaperRecord(
                id=f"p{i}",
                title=f"Paper {i}",
                abstract="a",
                published_at=d,
                score=0.5,
            )
            for i, d in enumerate(dates)
        ]
    )


def unit_with_cosine(target, cos, rng):
    """A unit vector with the requested cosine to a unit target."""
    noise = rng.standard_normal(target.size)
    noise -= noise.dot(target) * target
    noise /= np.linalg.norm(noise)
    return cos * target + np.sqrt(1 - cos**2) * noise


class TestCosine:
    def test_identity(self):
        v = np.array([0.6, 0.8])
        assert cosine_similarity(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_hand_value(self):
        got = cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
        assert got == pytest.approx(1 / np.sqrt(2), abs=1e-9)

    def test_errors(self):
        with pytest.raises(RetrievalError):
            cosine_similarity(np.array([1.0]), np.array([1.0, 0.0]))
        with pytest.raises(RetrievalError):
            cosine_similarity(np.zeros(2), np.array([1.0, 0.0]))


class TestBuildIndex:
    def test_normalizes_rows(self):
        corpus = make_corpus([date(2024, 1, 1)] * 3)
        matrix = np.array(
            [[3.0, 4.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 2.0, 0.0, 0.0]]
        )
        index = build_index(corpus, matrix, ["p0", "p1", "p2"])
        assert len(index) == 3
        assert np.allclose(index.vector("p0"), [0.6, 0.8, 0.0, 0.0])

    def test_zero_vector_names_id(self):
        corpus = make_corpus([date(2024, 1, 1)] * 2)
        matrix = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(RetrievalError, match="p1"):
            build_index(corpus, matrix, ["p0", "p1"])

    def test_missing_and_extra_rows(self):
        corpus = make_corpus([date(2024, 1, 1)] * 2)
        with pytest.raises(RetrievalError, match="missing"):
            build_index(corpus, np.eye(2)[:1], ["p0"])
        with pytest.raises(RetrievalError, match="unknown"):
            build_index(corpus, np.eye(3), ["p0", "p1", "zzz"])


class TestRetrieve:
    def setup_scenario(self):
        # target p0 plus candidates with sims (0.9, 0.6, 0.4, 0.95)
        # and date gaps (300, 10, 5, 30) days
        rng = np.random.default_rng(42)
        target = np.zeros(8)
        target[0] = 1.0
        sims = [0.9, 0.6, 0.4, 0.95]
        gaps = [300, 10, 5, 30]
        base = date(2024, 6, 1)
        dates = [base] + [base + timedelta(days=g) for g in gaps]
        vectors = [target] + [unit_with_cosine(target, s, rng) for s in sims]
        corpus = make_corpus(dates)
        return build_index(corpus, np.array(vectors), corpus.ids())

    def test_threshold_and_date_gap(self):
        index = self.setup_scenario()
        refs = retrieve_references("p0", index, gamma=0.5, k=2)
        # 0.4-sim candidate is out; survivors by gap: 10 (p2), 30 (p4), 300 (p1)
        assert refs.ids() == ["p2", "p4"]
        assert refs.references[0].date_gap_days == 10
        assert refs.references[1].date_gap_days == 30

    def test_empty_when_nothing_clears_threshold(self):
        index = self.setup_scenario()
        refs = retrieve_references("p0", index, gamma=0.99, k=2)
        assert refs.ids() == []

    def test_unknown_target(self):
        index = self.setup_scenario()
        with pytest.raises(RetrievalError):
            retrieve_references("nope", index, gamma=0.5, k=2)

    def test_self_exclusion_and_determinism(self):
        index = self.setup_scenario()
        a = retrieve_references("p2", index, gamma=-1.0, k=10)
        b = retrieve_references("p2", index, gamma=-1.0, k=10)
        assert "p2" not in a.ids()
        assert a == b

    def test_past_only(self):
        index = self.setup_scenario()
        refs = retrieve_references("p0", index, gamma=0.5, k=4, past_only=True)
        assert refs.ids() == []  # every candidate is published after the target

    def test_gamma_monotonicity(self):
        index = self.setup_scenario()
        low = set(retrieve_references("p0", index, gamma=0.3, k=10).ids())
        high = set(retrieve_references("p0", index, gamma=0.7, k=10).ids())
        assert high <= low


def brute_force(target_id, index, gamma, k):
    """Literal restatement of the retrieval contract, kept independent."""
    tvec = index.vector(target_id)
    tdate = index.date_of(target_id)
    rows = []
    for rid in index.ids:
        if rid == target_id:
            continue
        sim = float(np.dot(index.vector(rid), tvec))
        sim = max(-1.0, min(1.0, sim))
        if sim > gamma:
            rows.append((abs((index.date_of(rid) - tdate).days), -sim, rid))
    rows.sort()
    return [(rid, -negsim, gap) for gap, negsim, rid in rows[:k]]


def test_retrieval_matches_brute_force_scan():
    rng = np.random.default_rng(7)
    for trial in range(60):
        n = int(rng.integers(2, 50))
        dim = int(rng.integers(2, 6))
        matrix = rng.standard_normal((n, dim))
        start = date(2023, 1, 1)
        dates = [start + timedelta(days=int(rng.integers(0, 200))) for _ in range(n)]
        corpus = make_corpus(dates)
        index = build_index(corpus, matrix, corpus.ids())
        gamma = float(rng.uniform(-1, 1))
        k = int(rng.integers(1, 8))
        target = f"p{int(rng.integers(0, n))}"
        got = retrieve_references(target, index, gamma, k)
        expected = brute_force(target, index, gamma, k)
        assert [(r.id, r.date_gap_days) for r in got.references] == [
            (rid, gap) for rid, _, gap in expected
        ]
        for r, (_, sim, _) in zip(got.references, expected):
            assert r.similarity == pytest.approx(sim, abs=1e-12)


class TestEmbeddingFiles:
    def test_round_trip(self, tmp_path):
        ids = ["a", "b", "c"]
        matrix = np.random.default_rng(0).standard_normal((3, 5)).astype(np.float32)
        write_embeddings(tmp_path / "emb", ids, matrix)
        assert (tmp_path / "emb.bin").stat().st_size == 3 * 5 * 4
        got_ids, got = read_embeddings(tmp_path / "emb")
        assert got_ids == ids
        assert np.allclose(got, matrix.astype(np.float64))

    def test_size_mismatch_rejected(self, tmp_path):
        ids = ["a", "b"]
        write_embeddings(tmp_path / "emb", ids, np.eye(2))
        (tmp_path / "emb.bin").write_bytes(b"\x00" * 12)
        with pytest.raises(RetrievalError, match="bytes"):
            read_embeddings(tmp_path / "emb")
