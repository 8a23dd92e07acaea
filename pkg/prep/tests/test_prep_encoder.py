import numpy as np
import pytest
from hypothesis import given, strategies as st

from embed_prep.corpus_io import PrepError
from embed_prep.encoder import HashingEncoder, load_encoder


class TestHashingEncoder:
    def test_unit_norm(self):
        enc = HashingEncoder(dim=64)
        out = enc.encode(["graph neural networks", "sparse attention", ""])
        assert out.shape == (3, 64)
        assert np.allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)

    def test_deterministic(self):
        a = HashingEncoder(dim=128).encode_one("progressive ranking of papers")
        b = HashingEncoder(dim=128).encode_one("progressive ranking of papers")
        assert np.array_equal(a, b)

    def test_distinct_texts_usually_differ(self):
        enc = HashingEncoder(dim=256)
        a = enc.encode_one("graph neural networks")
        b = enc.encode_one("protein structure prediction")
        assert not np.allclose(a, b)

    def test_empty_text_is_fixed_basis_vector(self):
        enc = HashingEncoder(dim=16)
        out = enc.encode_one("!!! ???")
        expected = np.zeros(16)
        expected[0] = 1.0
        assert np.array_equal(out, expected)

    def test_dim_validated(self):
        with pytest.raises(PrepError):
            HashingEncoder(dim=1)

    @given(st.text(max_size=80))
    def test_any_text_yields_unit_vector(self, text):
        out = HashingEncoder(dim=32).encode_one(text)
        assert abs(np.linalg.norm(out) - 1.0) <= 1e-12


class TestLoadEncoder:
    def test_default_identifier(self):
        enc = load_encoder()
        assert enc.dim == 256
        assert enc.identifier == "hashing-v1-d256"

    def test_dim_suffix_identifier(self):
        enc = load_encoder("hashing-v1-d64")
        assert enc.dim == 64
