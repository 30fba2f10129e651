import numpy as np
import pytest

from hoirel.decoder import (
    DecoderConfig,
    attention,
    classify,
    run_binary_decoder,
    run_ternary_decoder,
)
from hoirel.errors import ConfigError, ShapeError
from hoirel.kernels import layer_norm, linear
from hoirel.rng import Stream
from hoirel.weights import AttentionParams

from oracles import block_params, decoder_block


def rand_params(seed, width, identity_norm=True):
    def mat(tag):
        return Stream(seed, tag).uniform_block(width * width, -0.5, 0.5).reshape(width, width)

    def vec(tag, lo=-0.1, hi=0.1):
        return Stream(seed, tag).uniform_block(width, lo, hi)

    return AttentionParams(
        wq=mat("wq"), bq=vec("bq"), wk=mat("wk"), bk=vec("bk"),
        wv=mat("wv"), bv=vec("bv"), wo=mat("wo"), bo=vec("bo"),
        norm_gain=np.ones(width, np.float32) if identity_norm else vec("ng", 0.5, 1.5),
        norm_bias=np.zeros(width, np.float32) if identity_norm else vec("nb"),
    )


class TestAttention:
    def test_single_key_weight_is_one(self):
        width = 4
        params = rand_params(1, width)
        cq = Stream(2, "cq").uniform_block(width, -1, 1).reshape(1, width)
        key = Stream(2, "ck").uniform_block(width, -1, 1).reshape(1, width)
        trace = []
        out = attention(cq, None, key, None, key, params, heads=2, trace=trace, label="t")
        for _, w in trace:
            assert np.array_equal(w, np.ones((1, 1), np.float32))
        # single key: output = norm(out_proj(v_proj(value)) + content_q)
        v = linear(key, params.wv, params.bv)
        expected = layer_norm(linear(v, params.wo, params.bo) + cq,
                              params.norm_gain, params.norm_bias)
        assert np.array_equal(out, expected)

    def test_identical_keys_equal_single_key(self):
        width = 4
        params = rand_params(3, width)
        cq = Stream(4, "cq").uniform_block(width, -1, 1).reshape(1, width)
        key = Stream(4, "ck").uniform_block(width, -1, 1).reshape(1, width)
        many = np.tile(key, (5, 1))
        one = attention(cq, None, key, None, key, params, heads=2)
        rep = attention(cq, None, many, None, many, params, heads=2)
        assert np.allclose(one, rep, atol=1e-6)

    def test_zero_positions_equal_none(self):
        width = 8
        params = rand_params(5, width)
        cq = Stream(6, "cq").uniform_block(3 * width, -1, 1).reshape(3, width)
        ck = Stream(6, "ck").uniform_block(4 * width, -1, 1).reshape(4, width)
        a = attention(cq, np.zeros_like(cq), ck, np.zeros_like(ck), ck, params, heads=2)
        b = attention(cq, None, ck, None, ck, params, heads=2)
        assert np.array_equal(a, b)

    def test_position_shape_mismatch(self):
        params = rand_params(7, 4)
        cq = np.zeros((2, 4), np.float32)
        with pytest.raises(ShapeError):
            attention(cq, np.zeros((3, 4), np.float32), cq, None, cq, params, heads=2)

    def test_attention_rows_sum_to_one(self):
        width = 8
        params = rand_params(8, width)
        cq = Stream(9, "cq").uniform_block(5 * width, -2, 2).reshape(5, width)
        ck = Stream(9, "ck").uniform_block(7 * width, -2, 2).reshape(7, width)
        trace = []
        attention(cq, None, ck, None, ck, params, heads=4, trace=trace)
        assert len(trace) == 4
        for _, w in trace:
            assert np.abs(w.astype(np.float64).sum(axis=1) - 1.0).max() < 1e-6


class TestDecoderStacks:
    def test_config_validation(self):
        with pytest.raises(ConfigError):
            DecoderConfig(width=8, heads=2, blocks=0)
        with pytest.raises(ConfigError):
            DecoderConfig(width=9, heads=2, blocks=1)

    def test_empty_queries(self, weights, config):
        cfg = DecoderConfig(config.d_model, config.heads, config.binary_blocks)
        grid = Stream(1, "grid").uniform_block(6 * config.d_model, -1, 1).reshape(6, -1)
        out = run_binary_decoder(
            np.zeros((0, config.d_model), np.float32),
            np.zeros((0, config.d_model), np.float32),
            grid, grid, weights, cfg,
        )
        assert out.shape == (0, config.d_model)

    def test_matches_block_oracle(self, weights, config):
        d = config.d_model
        cfg = DecoderConfig(d, config.heads, config.binary_blocks)
        tokens = Stream(2, "tok").uniform_block(2 * d, -1, 1).reshape(2, d)
        pos = Stream(2, "pos").uniform_block(2 * d, -1, 1).reshape(2, d)
        grid = Stream(2, "grid").uniform_block(6 * d, -1, 1).reshape(6, d)
        gpos = Stream(2, "gpos").uniform_block(6 * d, -1, 1).reshape(6, d)

        got = run_binary_decoder(tokens, pos, grid, gpos, weights, cfg)

        x = tokens.tolist()
        for i in range(cfg.blocks):
            x = decoder_block(
                x, pos.tolist(), grid.tolist(), gpos.tolist(),
                block_params(weights, f"binary.block{i}"), cfg.heads,
            )
        assert np.allclose(got, np.asarray(x), atol=1e-5)

    def test_ternary_mirrors_binary_shape(self, weights, config):
        d = config.d_model
        cfg = DecoderConfig(d, config.heads, config.ternary_blocks, "ternary")
        tokens = Stream(3, "tok").uniform_block(3 * d, -1, 1).reshape(3, d)
        pos = np.zeros_like(tokens)
        grid = Stream(3, "grid").uniform_block(4 * d, -1, 1).reshape(4, d)
        out = run_ternary_decoder(tokens, pos, grid, grid, weights, cfg)
        assert out.shape == (3, d)

    def test_single_triplet_cross_weights_sum_to_one(self, weights, config):
        d = config.d_model
        cfg = DecoderConfig(d, config.heads, config.ternary_blocks, "ternary")
        tokens = Stream(4, "tok").uniform_block(d, -1, 1).reshape(1, d)
        grid = Stream(4, "grid").uniform_block(16 * d, -1, 1).reshape(16, d)
        trace = []
        run_ternary_decoder(tokens, np.zeros_like(tokens), grid, grid, weights, cfg, trace)
        cross = [w for label, w in trace if ".cross" in label]
        assert cross, "no cross-attention recorded"
        for w in cross:
            assert w.shape == (1, 16)
            assert abs(w.astype(np.float64).sum() - 1.0) < 1e-6

    def test_query_permutation_equivariance(self, weights, config):
        d = config.d_model
        cfg = DecoderConfig(d, config.heads, config.binary_blocks)
        tokens = Stream(5, "tok").uniform_block(4 * d, -1, 1).reshape(4, d)
        pos = Stream(5, "pos").uniform_block(4 * d, -1, 1).reshape(4, d)
        grid = Stream(5, "grid").uniform_block(6 * d, -1, 1).reshape(6, d)
        base = run_binary_decoder(tokens, pos, grid, grid, weights, cfg)
        perm = [2, 0, 3, 1]
        out = run_binary_decoder(tokens[perm], pos[perm], grid, grid, weights, cfg)
        assert np.allclose(out, base[perm], atol=1e-5)

    def test_key_cell_permutation_invariance(self, weights, config):
        d = config.d_model
        cfg = DecoderConfig(d, config.heads, config.binary_blocks)
        tokens = Stream(6, "tok").uniform_block(2 * d, -1, 1).reshape(2, d)
        pos = Stream(6, "pos").uniform_block(2 * d, -1, 1).reshape(2, d)
        grid = Stream(6, "grid").uniform_block(8 * d, -1, 1).reshape(8, d)
        gpos = Stream(6, "gpos").uniform_block(8 * d, -1, 1).reshape(8, d)
        base = run_binary_decoder(tokens, pos, grid, gpos, weights, cfg)
        perm = [5, 1, 7, 0, 3, 6, 2, 4]
        out = run_binary_decoder(tokens, pos, grid[perm], gpos[perm], weights, cfg)
        assert np.allclose(out, base, atol=1e-5)


class TestClassify:
    def test_zero_head(self):
        head = (np.zeros((4, 3), np.float32), np.zeros(3, np.float32))
        out = classify(np.ones((2, 4), np.float32), head)
        assert np.array_equal(out, np.zeros((2, 3), np.float32))

    def test_empty_rows(self):
        head = (np.ones((4, 3), np.float32), np.ones(3, np.float32))
        assert classify(np.zeros((0, 4), np.float32), head).shape == (0, 3)

    def test_affine_oracle(self):
        w = np.asarray([[1.0, 2.0], [0.0, -1.0]], np.float32)
        b = np.asarray([0.5, 0.0], np.float32)
        out = classify(np.asarray([[3.0, 4.0]], np.float32), (w, b))
        assert np.allclose(out, [[3.0 + 0.5, 6.0 - 4.0]])
