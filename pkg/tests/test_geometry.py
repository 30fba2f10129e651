import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoirel.errors import ConfigError, ValidationError
from hoirel.geometry import (
    Box,
    ImageSize,
    binary_positions,
    iou,
    pairwise_spatial,
    ternary_positions,
)
from hoirel.kernels import mlp_dims

from oracles import spatial36

IMG = ImageSize(640.0, 480.0)

coords = st.floats(-50.0, 700.0)
extents = st.floats(0.0, 400.0)


@st.composite
def boxes(draw):
    x1 = draw(coords)
    y1 = draw(coords)
    return Box(x1, y1, x1 + draw(extents), y1 + draw(extents))


class TestBoxTypes:
    def test_rejects_disordered(self):
        with pytest.raises(ValidationError):
            Box(10, 0, 5, 5)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValidationError):
            Box(0, 0, float("inf"), 5)

    def test_zero_image_is_config_error(self):
        with pytest.raises(ConfigError):
            ImageSize(0, 480)


class TestIou:
    def test_identical(self):
        b = Box(3, 4, 10, 12)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(Box(0, 0, 1, 1), Box(5, 5, 6, 6)) == 0.0

    def test_hand_value(self):
        assert abs(iou(Box(0, 0, 2, 2), Box(1, 1, 3, 3)) - 1.0 / 7.0) < 1e-12

    def test_degenerate_union(self):
        z = Box(1, 1, 1, 1)
        assert iou(z, z) == 0.0

    @given(boxes(), boxes())
    @settings(max_examples=200, deadline=None)
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0

    @given(boxes())
    @settings(max_examples=100, deadline=None)
    def test_identity_iff_equal(self, a):
        if a.area > 0:
            assert iou(a, a) == 1.0
            shifted = Box(a.x1 + a.width + 1, a.y1, a.x2 + a.width + 1, a.y2)
            assert iou(a, shifted) < 1.0


class TestPairwiseSpatial:
    def test_matches_scalar_oracle(self):
        bi = Box(10, 20, 110, 170)
        bj = Box(60, 40, 200, 120)
        got = pairwise_spatial(bi, bj, IMG).astype(np.float64)
        expected = spatial36(bi.as_list(), bj.as_list(), IMG.width, IMG.height)
        assert np.allclose(got, expected, atol=1e-6)

    def test_identical_boxes(self):
        b = Box(10, 10, 200, 150)
        f = pairwise_spatial(b, b, IMG)
        assert f[12] == 1.0  # IoU
        assert f[14] == 0.0 and f[15] == 0.0  # dx, dy
        assert f[16] == 0.0  # center distance

    def test_swap_negates_offsets(self):
        bi = Box(10, 20, 110, 170)
        bj = Box(60, 40, 200, 120)
        fwd = spatial36(bi.as_list(), bj.as_list(), IMG.width, IMG.height)
        bwd = spatial36(bj.as_list(), bi.as_list(), IMG.width, IMG.height)
        got = pairwise_spatial(bj, bi, IMG).astype(np.float64)
        assert np.allclose(got, bwd, atol=1e-6)
        # offsets negate up to the epsilon in the width/height denominators
        assert np.sign(bwd[14]) == -np.sign(fwd[14])
        assert np.sign(bwd[15]) == -np.sign(fwd[15])
        # area ratio inverts within epsilon effects
        assert bwd[13] == pytest.approx(1.0 / fwd[13], rel=1e-3)

    def test_degenerate_box_stays_finite(self):
        thin = Box(50, 50, 50, 120)  # zero width
        out = pairwise_spatial(thin, Box(10, 10, 20, 20), IMG)
        assert np.isfinite(out).all()
        expected = spatial36(thin.as_list(), [10, 10, 20, 20], IMG.width, IMG.height)
        assert np.allclose(out.astype(np.float64), expected, atol=1e-6)

    @given(boxes(), boxes())
    @settings(max_examples=200, deadline=None)
    def test_always_finite(self, a, b):
        assert np.isfinite(pairwise_spatial(a, b, IMG)).all()

    @given(
        st.integers(-800, 11200), st.integers(-800, 11200),
        st.integers(0, 6400), st.integers(0, 6400),
        st.integers(-800, 11200), st.integers(-800, 11200),
        st.integers(0, 6400), st.integers(0, 6400),
        st.integers(-480, 480), st.integers(-480, 480),
    )
    @settings(max_examples=100, deadline=None)
    def test_translation_invariants(self, x1, y1, w1, h1, x2, y2, w2, h2, tx, ty):
        # sixteenths of a pixel keep every coordinate sum exact, so the
        # shifted boxes have identical extents and relative geometry
        def q(v):
            return v / 16.0

        a = Box(q(x1), q(y1), q(x1 + w1), q(y1 + h1))
        b = Box(q(x2), q(y2), q(x2 + w2), q(y2 + h2))
        dx, dy = q(tx), q(ty)

        def shift(box):
            return Box(box.x1 + dx, box.y1 + dy, box.x2 + dx, box.y2 + dy)

        f0 = pairwise_spatial(a, b, IMG).astype(np.float64)
        f1 = pairwise_spatial(shift(a), shift(b), IMG).astype(np.float64)
        for k in (12, 13, 14, 15, 16, 17):  # IoU, ratios, offsets, distance
            assert f1[k] == pytest.approx(f0[k], rel=1e-6, abs=1e-9)


def _zero_mlp(n_in, n_out, bias_value=0.0):
    dims = mlp_dims(n_in, n_out)
    layers = []
    for (w_shape, b_shape) in dims:
        layers.append((np.zeros(w_shape, np.float32), np.zeros(b_shape, np.float32)))
    layers[-1] = (layers[-1][0], np.full(b_shape, bias_value, np.float32))
    return layers


class TestPositionTensors:
    def test_empty_pairs(self):
        out = binary_positions([], [], IMG, _zero_mlp(36, 8))
        assert out.shape == (0, 8)

    def test_zero_mlp_bias_row(self):
        layers = _zero_mlp(36, 8, bias_value=0.75)
        out = binary_positions([(0, 1)], [Box(0, 0, 10, 10), Box(5, 5, 9, 9)], IMG, layers)
        assert np.allclose(out, 0.75)

    def test_rows_match_oracle(self, weights):
        layers = weights.mlp("pairpos.mlp")
        boxes_ = [Box(0, 0, 100, 100), Box(50, 20, 220, 140), Box(300, 200, 340, 260)]
        pairs = [(0, 1), (0, 2), (2, 1)]
        got = binary_positions(pairs, boxes_, IMG, layers)
        from oracles import mlp_rows

        feats = [
            spatial36(boxes_[i].as_list(), boxes_[j].as_list(), IMG.width, IMG.height)
            for i, j in pairs
        ]
        expected = mlp_rows(feats, [(w.tolist(), b.tolist()) for w, b in layers])
        assert np.allclose(got, expected, atol=1e-4)

    def test_pair_index_out_of_range(self):
        with pytest.raises(ValidationError):
            binary_positions([(0, 3)], [Box(0, 0, 1, 1)], IMG, _zero_mlp(36, 4))

    def test_empty_triplets(self):
        out = ternary_positions([], [], IMG, _zero_mlp(108, 8))
        assert out.shape == (0, 8)

    def test_identical_boxes_repeat_blocks(self):
        b = Box(10, 10, 60, 90)
        block = spatial36(b.as_list(), b.as_list(), IMG.width, IMG.height)
        feats = np.asarray(block * 3)
        got = ternary_positions([(0, 1, 2)], [b, b, b], IMG, _zero_mlp(108, 4))
        assert got.shape == (1, 4)
        assert np.allclose(feats[:36], feats[36:72])

    def test_triplet_rows_match_oracle(self, weights):
        layers = weights.mlp("tripos.mlp")
        bs = [Box(0, 0, 100, 100), Box(50, 20, 220, 140), Box(300, 200, 340, 260)]
        triplets = [(0, 1, 2), (0, 2, 1)]
        got = ternary_positions(triplets, bs, IMG, layers)
        from oracles import mlp_rows

        feats = []
        for i, j, k in triplets:
            feats.append(
                spatial36(bs[i].as_list(), bs[j].as_list(), IMG.width, IMG.height)
                + spatial36(bs[i].as_list(), bs[k].as_list(), IMG.width, IMG.height)
                + spatial36(bs[j].as_list(), bs[k].as_list(), IMG.width, IMG.height)
            )
        expected = mlp_rows(feats, [(w.tolist(), b.tolist()) for w, b in layers])
        assert np.allclose(got, expected, atol=1e-4)

    def test_triplet_index_out_of_range(self):
        with pytest.raises(ValidationError):
            ternary_positions([(0, 1, 5)], [Box(0, 0, 1, 1), Box(0, 0, 2, 2)], IMG,
                              _zero_mlp(108, 4))
