"""Layer partitions and layered vector arithmetic."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kimad import tensor
from kimad.tensor import LayeredVector, LayerPartition


def vec(values, sizes):
    return LayeredVector(np.asarray(values, dtype=float),
                         LayerPartition.from_sizes(sizes))


sizes_st = st.lists(st.integers(1, 5), min_size=1, max_size=6)


@st.composite
def vectors(draw):
    sizes = draw(sizes_st)
    seed = draw(st.integers(0, 2 ** 31))
    part = LayerPartition.from_sizes(sizes)
    values = np.random.default_rng(seed).standard_normal(part.dim)
    return LayeredVector(values, part)


class TestLayerPartition:
    def test_from_sizes(self):
        part = LayerPartition.from_sizes([1, 3])
        assert part.offsets == (0, 1, 4)
        assert part.dim == 4
        assert part.num_layers == 2
        assert part.sizes == (1, 3)

    def test_equal_split(self):
        assert LayerPartition.equal_split(30, 3).sizes == (10, 10, 10)

    def test_equal_split_requires_divisibility(self):
        with pytest.raises(ValueError):
            LayerPartition.equal_split(30, 7)

    def test_span(self):
        part = LayerPartition((0, 1, 4))
        assert part.span(0) == slice(0, 1)
        assert part.span(1) == slice(1, 4)

    def test_span_out_of_range(self):
        with pytest.raises(IndexError):
            LayerPartition((0, 2)).span(1)

    @pytest.mark.parametrize("offsets", [(0,), (1, 2), (0, 2, 2), (0, 3, 1)])
    def test_rejects_bad_offsets(self, offsets):
        with pytest.raises(ValueError):
            LayerPartition(offsets)


class TestLayeredVector:
    def test_layer_slicing(self):
        v = vec([1, 2, 3, 4], [1, 3])
        assert np.array_equal(tensor.layer_slice(v, 1), [2, 3, 4])
        assert np.array_equal(tensor.layer_slice(v, 0), [1])

    def test_single_layer_slice_is_whole_vector(self):
        v = vec([1, 2, 3, 4], [4])
        assert np.array_equal(tensor.layer_slice(v, 0), [1, 2, 3, 4])

    def test_degenerate_unit_layer(self):
        assert np.array_equal(tensor.layer_slice(vec([5], [1]), 0), [5])

    def test_layer_returns_a_copy(self):
        v = vec([1, 2, 3], [3])
        sl = v.layer(0)
        sl[0] = 99
        assert v.values[0] == 1

    def test_copy_is_independent(self):
        v = vec([1, 2], [2])
        w = v.copy()
        w.values[0] = 7
        assert v.values[0] == 1

    def test_rejects_size_mismatch(self):
        with pytest.raises(ValueError):
            LayeredVector(np.zeros(3), LayerPartition((0, 2)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            LayeredVector(np.array([1.0, np.nan]), LayerPartition((0, 2)))
        with pytest.raises(ValueError):
            LayeredVector(np.array([np.inf]), LayerPartition((0, 1)))

    def test_coerces_to_float64(self):
        v = LayeredVector(np.array([1, 2], dtype=np.int32), LayerPartition((0, 2)))
        assert v.values.dtype == np.float64


class TestArithmetic:
    def test_add_sub(self):
        u, v = vec([1, 2], [2]), vec([3, 5], [2])
        assert np.array_equal(tensor.add(u, v).values, [4, 7])
        assert np.array_equal(tensor.sub(v, u).values, [2, 3])

    def test_scale(self):
        assert np.array_equal(tensor.scale(-2.0, vec([1, 3], [2])).values, [-2, -6])

    def test_axpy(self):
        out = tensor.axpy(2.0, vec([1, 1], [2]), vec([3, 3], [2]))
        assert np.array_equal(out.values, [5, 5])

    def test_partition_mismatch_raises(self):
        u = vec([1, 2], [2])
        v = vec([1, 2], [1, 1])
        for op in (tensor.add, tensor.sub):
            with pytest.raises(ValueError, match="partition mismatch"):
                op(u, v)
        with pytest.raises(ValueError, match="partition mismatch"):
            tensor.axpy(1.0, u, v)

    def test_zeros(self):
        z = tensor.zeros(LayerPartition((0, 2, 5)))
        assert np.array_equal(z.values, np.zeros(5))

    @given(vectors(), vectors())
    def test_add_sub_roundtrip(self, u, v):
        if u.partition.offsets != v.partition.offsets:
            return
        back = tensor.sub(tensor.add(u, v), v)
        assert np.allclose(back.values, u.values, rtol=0, atol=1e-12)


class TestNorms:
    def test_three_four_five(self):
        assert tensor.sq_norm(vec([3, 4], [2])) == 25.0

    def test_zero_vector(self):
        assert tensor.sq_norm(vec([0, 0, 0], [1, 2])) == 0.0

    def test_layer_sq_norm(self):
        v = vec([3, 0, 4], [1, 2])
        assert tensor.layer_sq_norm(v, 0) == 9.0
        assert tensor.layer_sq_norm(v, 1) == 16.0

    @given(vectors())
    def test_norm_decomposes_over_layers_exactly(self, v):
        # Not just approximately: sq_norm accumulates per layer, so slicing a
        # layer out and taking its norm reproduces the identical float.
        per_layer = []
        for i in range(v.partition.num_layers):
            block = tensor.layer_slice(v, i)
            single = LayeredVector(block, LayerPartition.from_sizes([block.size]))
            per_layer.append(tensor.sq_norm(single))
        assert tensor.sq_norm(v) == sum(per_layer)
