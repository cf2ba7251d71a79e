"""Sparsifiers, their bit accounting, and the contraction property."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kimad import compressors as comp
from kimad.compressors import (IDENTITY, RANDK, TOPK, CompressorSpec,
                               compress, compress_vector, contraction_alpha,
                               decompress, entry_bits, index_bits, k_for_budget)
from kimad.tensor import LayeredVector, LayerPartition


class TestBitAccounting:
    @pytest.mark.parametrize("dim,bits", [
        (1, 0), (2, 1), (3, 2), (4, 2), (10, 4), (1000, 10), (1024, 10), (1025, 11),
    ])
    def test_index_bits(self, dim, bits):
        assert index_bits(dim) == bits

    def test_index_bits_rejects_empty(self):
        with pytest.raises(ValueError):
            index_bits(0)

    def test_entry_bits(self):
        assert entry_bits(1000, 32) == 42

    def test_sparse_cost(self):
        # 100 entries of a 1000-dim layer: 100 * (32 + 10).
        _, bits = compress(CompressorSpec(TOPK, 100), np.arange(1000.0))
        assert bits == 4200

    def test_identity_cost_has_no_index_bits(self):
        _, bits = compress(CompressorSpec(IDENTITY), np.arange(7.0))
        assert bits == 7 * 32


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            CompressorSpec("quantize", 1)

    def test_sparse_needs_positive_k(self):
        with pytest.raises(ValueError):
            CompressorSpec(TOPK, 0)

    def test_identity_ignores_k(self):
        CompressorSpec(IDENTITY)  # no error

    def test_k_larger_than_layer(self):
        with pytest.raises(ValueError):
            compress(CompressorSpec(TOPK, 4), np.zeros(3))

    def test_empty_layer(self):
        with pytest.raises(ValueError):
            compress(CompressorSpec(TOPK, 1), np.array([]))


class TestTopK:
    def test_keeps_largest_magnitudes(self):
        (idx, vals), _ = compress(CompressorSpec(TOPK, 2), np.array([3.0, -1.0, 2.0]))
        assert list(idx) == [0, 2]
        assert list(vals) == [3.0, 2.0]

    def test_full_k_is_lossless(self):
        v = np.array([0.5, -2.0, 1.0])
        part = LayerPartition((0, 3))
        msg = compress_vector([CompressorSpec(TOPK, 3)], LayeredVector(v, part))
        assert np.array_equal(decompress(msg, part).values, v)

    def test_tie_breaks_to_lowest_index(self):
        (idx, _), _ = compress(CompressorSpec(TOPK, 1), np.array([1.0, -1.0]))
        assert list(idx) == [0]

    @given(st.lists(st.sampled_from([-2.0, -1.0, 0.0, 1.0, 2.0]), min_size=1,
                    max_size=8),
           st.integers(1, 8))
    def test_matches_sort_oracle_on_ties(self, values, k):
        v = np.array(values)
        if k > v.size:
            return
        order = sorted(range(v.size), key=lambda j: (-abs(v[j]), j))
        expected = sorted(order[:k])
        (idx, vals), _ = compress(CompressorSpec(TOPK, k), v)
        assert list(idx) == expected
        assert np.array_equal(vals, v[expected])

    @given(st.integers(0, 2 ** 31), st.integers(2, 30), st.integers(1, 30))
    def test_contraction_bound(self, seed, dim, k):
        if k > dim:
            return
        v = np.random.default_rng(seed).standard_normal(dim)
        (idx, vals), _ = compress(CompressorSpec(TOPK, k), v)
        dense = np.zeros(dim)
        dense[idx] = vals
        err = float(np.dot(dense - v, dense - v))
        total = float(np.dot(v, v))
        alpha = contraction_alpha(CompressorSpec(TOPK, k), dim)
        assert err <= (1.0 - alpha) * total * (1 + 1e-12) + 1e-300


class TestRandK:
    def test_deterministic_per_seed(self):
        v = np.arange(20.0)
        a, _ = compress(CompressorSpec(RANDK, 5, seed=7), v)
        b, _ = compress(CompressorSpec(RANDK, 5, seed=7), v)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_default_seed_is_zero(self):
        v = np.arange(20.0)
        a, _ = compress(CompressorSpec(RANDK, 5), v)
        b, _ = compress(CompressorSpec(RANDK, 5, seed=0), v)
        assert np.array_equal(a[0], b[0])

    def test_rescales_by_dim_over_k(self):
        v = np.ones(10)
        (idx, vals), _ = compress(CompressorSpec(RANDK, 2, seed=1), v)
        assert len(idx) == 2
        assert np.allclose(vals, 5.0)

    def test_full_k_keeps_everything(self):
        v = np.arange(6.0)
        (idx, vals), _ = compress(CompressorSpec(RANDK, 6, seed=3), v)
        assert list(idx) == list(range(6))
        assert np.array_equal(vals, v)

    def test_unbiased_over_many_seeds(self):
        # Mean of the rescaled compressor over 10^4 draws approximates v.
        v = np.random.default_rng(5).standard_normal(10)
        acc = np.zeros(10)
        draws = 10_000
        for s in range(draws):
            (idx, vals), _ = compress(CompressorSpec(RANDK, 3, seed=s), v)
            dense = np.zeros(10)
            dense[idx] = vals
            acc += dense
        mean = acc / draws
        assert np.linalg.norm(mean - v) <= 0.02 * np.linalg.norm(v)

    def test_selection_contraction_in_expectation(self):
        # With the dim/k rescaling removed, the expected squared selection
        # error is (1 - k/d) ||v||^2; 10^4 draws pin it within 2%.
        v = np.random.default_rng(6).standard_normal(10)
        k, draws = 3, 10_000
        total = float(np.dot(v, v))
        acc = 0.0
        for s in range(draws):
            (idx, _), _ = compress(CompressorSpec(RANDK, k, seed=s), v)
            kept = np.zeros(10)
            kept[idx] = v[idx]
            acc += float(np.dot(kept - v, kept - v))
        expected = (1.0 - k / 10) * total
        assert abs(acc / draws - expected) <= 0.02 * expected


class TestDecompress:
    def test_places_payload_entries(self):
        part = LayerPartition((0, 3))
        msg = comp.CompressedMessage([(np.array([0, 2]), np.array([3.0, 2.0]))],
                                     2 * entry_bits(3), part)
        assert np.array_equal(decompress(msg, part).values, [3.0, 0.0, 2.0])

    def test_empty_payload_is_zero(self):
        part = LayerPartition((0, 3))
        msg = comp.CompressedMessage([(np.array([], dtype=int), np.array([]))], 0, part)
        assert np.array_equal(decompress(msg, part).values, np.zeros(3))

    def test_partition_mismatch(self):
        part = LayerPartition((0, 3))
        msg = compress_vector([CompressorSpec(TOPK, 1)],
                              LayeredVector(np.ones(3), part))
        with pytest.raises(ValueError):
            decompress(msg, LayerPartition((0, 1, 3)))

    def test_multilayer_roundtrip(self):
        part = LayerPartition.from_sizes([2, 3])
        v = LayeredVector(np.array([1.0, 2.0, -3.0, 4.0, 5.0]), part)
        specs = [CompressorSpec(TOPK, 2), CompressorSpec(TOPK, 3)]
        msg = compress_vector(specs, v)
        assert msg.bit_cost == 2 * entry_bits(2) + 3 * entry_bits(3)
        assert np.array_equal(decompress(msg, part).values, v.values)

    def test_spec_count_mismatch(self):
        part = LayerPartition.from_sizes([2, 3])
        with pytest.raises(ValueError):
            compress_vector([CompressorSpec(TOPK, 1)], LayeredVector(np.ones(5), part))


class TestKForBudget:
    def test_floor_division(self):
        assert k_for_budget(4200, 1000, 32) == 100

    def test_zero_budget_clamps_to_one(self):
        assert k_for_budget(0, 10) == 1

    def test_below_one_entry_clamps_to_one(self):
        assert k_for_budget(entry_bits(10) - 1, 10) == 1

    def test_huge_budget_clamps_to_dim(self):
        assert k_for_budget(1e12, 10) == 10

    def test_rejects_empty_layer(self):
        with pytest.raises(ValueError):
            k_for_budget(100, 0)

    @given(st.floats(0, 1e9), st.integers(1, 1000))
    def test_result_always_in_range(self, budget, dim):
        k = k_for_budget(budget, dim)
        assert 1 <= k <= dim

    @given(st.integers(1, 1000), st.integers(1, 1000))
    def test_unclamped_cost_fits_budget(self, budget, dim):
        k = k_for_budget(budget, dim)
        if k * entry_bits(dim) > budget:
            # Only the minimum-progress clamp may overshoot.
            assert k == 1


class TestContractionAlpha:
    def test_topk_half(self):
        assert contraction_alpha(CompressorSpec(TOPK, 2), 4) == 0.5

    def test_identity(self):
        assert contraction_alpha(CompressorSpec(IDENTITY), 4) == 1.0

    def test_full_k(self):
        assert contraction_alpha(CompressorSpec(TOPK, 4), 4) == 1.0

    def test_rejects_oversized_k(self):
        with pytest.raises(ValueError):
            contraction_alpha(CompressorSpec(TOPK, 5), 4)
