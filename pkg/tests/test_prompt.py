import numpy as np
import pytest

from hoirel.decoder import DecoderConfig, attention
from hoirel.errors import ConfigError, ShapeError, ValidationError
from hoirel.geometry import Box, ImageSize
from hoirel.kernels import layer_norm, linear, mlp
from hoirel.prompt import (
    PromptSpec,
    contextual_features,
    encode_prompts,
    global_context,
    run_contextual_decoder,
    semantic_logits,
    word_embedding,
)
from hoirel.rng import Stream
from hoirel.scene import Detection
from hoirel.tokens import PairSet, build_pairs, enrich_unary
from hoirel.weights import PREFIX_EMBED, WeightBundle

from oracles import mlp_rows

IMG = ImageSize(640.0, 480.0)


def det(category, idx=0, c=12):
    return Detection(
        box=Box(5.0 * idx, 3.0 * idx, 5.0 * idx + 50, 3.0 * idx + 40),
        score=0.8,
        category=category,
        feature=Stream(idx, "feat", category).uniform_block(c, -1.0, 1.0),
    )


def pair_set(dets, weights, table):
    enriched = enrich_unary(dets, weights, table)
    return build_pairs(dets, enriched, weights, table, IMG)


class TestContextualFeatures:
    def test_empty(self, weights, config, table):
        ps = PairSet(pairs=(), tokens=np.zeros((0, 16), np.float32),
                     positions=np.zeros((0, 16), np.float32))
        out = contextual_features([], ps, weights)
        assert out.shape == (0, config.c_prompt)

    def test_uses_raw_features(self, weights, table):
        dets = [det(0), det(3, idx=1)]
        ps = pair_set(dets, weights, table)
        out = contextual_features(dets, ps, weights)
        row = list(dets[0].feature) + list(dets[1].feature)
        layers = [(w.tolist(), b.tolist()) for w, b in weights.mlp("ctx.mlp")]
        expected = mlp_rows([row], layers)[0]
        assert np.allclose(out[0], expected, atol=1e-5)


class TestGlobalContext:
    def test_constant_grid(self, weights, config):
        d = config.d_model
        grid = np.full((6, d), 0.3, np.float32)
        got = global_context(grid, weights)
        w, b = weights.linear("global.proj")
        expected = linear(grid[:1], w, b)[0]
        assert np.allclose(got, expected, atol=1e-6)

    def test_zero_projection(self, config):
        tensors = {
            "global.proj.w": np.zeros((config.d_model, config.c_prompt), np.float32),
            "global.proj.b": np.zeros(config.c_prompt, np.float32),
        }
        grid = np.ones((4, config.d_model), np.float32)
        out = global_context(grid, WeightBundle(tensors))
        assert np.array_equal(out, np.zeros(config.c_prompt, np.float32))

    def test_mean_pool_oracle(self, weights, config):
        d = config.d_model
        grid = Stream(1, "grid").uniform_block(5 * d, -1, 1).reshape(5, d)
        got = global_context(grid, weights)
        pooled = [sum(float(grid[r, c]) for r in range(5)) / 5 for c in range(d)]
        w, b = weights.linear("global.proj")
        expected = mlp_rows([pooled], [(w.tolist(), b.tolist())])[0]
        assert np.allclose(got, expected, atol=1e-5)

    def test_empty_grid_rejected(self, weights, config):
        with pytest.raises(ShapeError):
            global_context(np.zeros((0, config.d_model), np.float32), weights)


class TestEncodePrompts:
    def test_same_category_same_row(self, weights, table):
        dets = [det(0), det(2, idx=1), det(2, idx=2)]
        ps = pair_set(dets, weights, table)
        spec = PromptSpec()
        m0 = encode_prompts(ps, dets, table, spec, weights)
        rows = {pair: m0[k] for k, pair in enumerate(ps.pairs)}
        assert np.array_equal(rows[(0, 1)], rows[(0, 2)])

    def test_act_tokens_flow_into_rows(self, weights, config, table):
        dets = [det(0), det(2, idx=1)]
        ps = pair_set(dets, weights, table)
        spec = PromptSpec(act_length=config.act_length)
        base = encode_prompts(ps, dets, table, spec, weights)
        zeroed = dict(weights.tensors)
        zeroed["prompt.act"] = np.zeros_like(weights.get("prompt.act"))
        other = encode_prompts(ps, dets, table, spec, WeightBundle(zeroed))
        assert not np.array_equal(base, other)

    def test_matches_oracle(self, weights, config, table):
        dets = [det(0), det(4, idx=1)]
        ps = pair_set(dets, weights, table)
        spec = PromptSpec(act_length=config.act_length)
        got = encode_prompts(ps, dets, table, spec, weights)

        e = config.e_text
        prefix = np.stack([word_embedding(w, e) for w in spec.prefix])
        prefix_vec = prefix.astype(np.float64).mean(axis=0)
        act_vec = weights.get("prompt.act").astype(np.float64).mean(axis=0)
        text = weights.get("text.table")
        row = (
            list(prefix_vec.astype(np.float32))
            + list(act_vec.astype(np.float32))
            + list(text[table.human])
            + list(text[4])
        )
        w, b = weights.linear("prompt.proj")
        expected = mlp_rows([row], [(w.tolist(), b.tolist())])[0]
        assert np.allclose(got[0], expected, atol=1e-5)

    def test_prefix_embed_override(self, weights, config, table):
        dets = [det(0), det(2, idx=1)]
        ps = pair_set(dets, weights, table)
        spec = PromptSpec(act_length=config.act_length)
        injected = dict(weights.tensors)
        injected[PREFIX_EMBED] = np.full(config.e_text, 0.123, np.float32)
        base = encode_prompts(ps, dets, table, spec, weights)
        other = encode_prompts(ps, dets, table, spec, WeightBundle(injected))
        assert not np.array_equal(base, other)

    def test_category_change_isolated_to_own_row(self, weights, config, table):
        spec = PromptSpec(act_length=config.act_length)
        dets = [det(0), det(2, idx=1), det(3, idx=2)]
        ps = pair_set(dets, weights, table)
        base = encode_prompts(ps, dets, table, spec, weights)

        swapped = [dets[0], dets[1], Detection(dets[2].box, dets[2].score, 4, dets[2].feature)]
        ps2 = pair_set(swapped, weights, table)
        other = encode_prompts(ps2, swapped, table, spec, weights)
        row_for = {pair: k for k, pair in enumerate(ps.pairs)}
        assert np.array_equal(base[row_for[(0, 1)]], other[row_for[(0, 1)]])
        assert not np.array_equal(base[row_for[(0, 2)]], other[row_for[(0, 2)]])

    def test_act_length_mismatch(self, weights, table):
        dets = [det(0), det(2, idx=1)]
        ps = pair_set(dets, weights, table)
        with pytest.raises(ValidationError, match="prompt.act"):
            encode_prompts(ps, dets, table, PromptSpec(act_length=9), weights)

    def test_act_length_must_be_positive(self):
        with pytest.raises(ConfigError):
            PromptSpec(act_length=0)

    def test_word_embedding_deterministic(self):
        a = word_embedding("photo", 8)
        b = word_embedding("photo", 8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, word_embedding("person", 8))


class TestContextualDecoder:
    def _inputs(self, config, m, seed=7):
        cp = config.c_prompt
        m0 = Stream(seed, "m0").uniform_block(m * cp, -1, 1).reshape(m, cp)
        vg = Stream(seed, "vg").uniform_block(cp, -1, 1)
        regional = Stream(seed, "reg").uniform_block(m * cp, -1, 1).reshape(m, cp)
        return m0, vg, regional

    def test_m1_global_weight_is_one(self, weights, config):
        m0, vg, regional = self._inputs(config, 1)
        cfg = DecoderConfig(config.c_prompt, config.heads, 2, "contextual")
        trace = []
        run_contextual_decoder(m0, vg, regional, weights, cfg, trace)
        block0_cross = [w for label, w in trace if label.startswith("ctxdec.block0.cross")]
        for w in block0_cross:
            assert np.array_equal(w, np.ones((1, 1), np.float32))

    def test_zeroed_values_reduce_to_self_stream(self, weights, config):
        # zero the cross value/output projections and the FFN so block 1 is
        # norms around the self-attention stream only
        m0, vg, regional = self._inputs(config, 3)
        cfg = DecoderConfig(config.c_prompt, config.heads, 2, "contextual")
        tensors = dict(weights.tensors)
        for block in ("ctxdec.block0", "ctxdec.block1"):
            for name in ("wv", "bv", "wo", "bo"):
                tensors[f"{block}.cross.{name}"] = np.zeros_like(tensors[f"{block}.cross.{name}"])
            tensors[f"{block}.ffn.w2"] = np.zeros_like(tensors[f"{block}.ffn.w2"])
            tensors[f"{block}.ffn.b2"] = np.zeros_like(tensors[f"{block}.ffn.b2"])
        bundle = WeightBundle(tensors)
        got = run_contextual_decoder(m0, np.zeros_like(vg), regional, bundle, cfg)

        x = m0
        for block in ("ctxdec.block0", "ctxdec.block1"):
            a = attention(x, np.zeros_like(x), x, np.zeros_like(x), x,
                          bundle.attention(f"{block}.self"), cfg.heads)
            cross = layer_norm(a, *bundle.norm(f"{block}.cross.norm"))
            x = layer_norm(cross, *bundle.norm(f"{block}.ffn.norm"))
        assert np.allclose(got, x, atol=1e-6)

    def test_matches_block_oracle(self, weights, config):
        from oracles import block_params, decoder_block

        m = 3
        m0, vg, regional = self._inputs(config, m, seed=9)
        cfg = DecoderConfig(config.c_prompt, config.heads, 2, "contextual")
        got = run_contextual_decoder(m0, vg, regional, weights, cfg)

        zeros = np.zeros_like(m0).tolist()
        repeated = np.tile(vg[None, :], (m, 1))
        x = m0.tolist()
        x = decoder_block(x, zeros, repeated.tolist(), np.zeros_like(repeated).tolist(),
                          block_params(weights, "ctxdec.block0"), cfg.heads)
        x = decoder_block(x, zeros, regional.tolist(), np.zeros_like(regional).tolist(),
                          block_params(weights, "ctxdec.block1"), cfg.heads)
        assert np.allclose(got, np.asarray(x), atol=1e-5)

    def test_row_count_mismatch(self, weights, config):
        m0, vg, regional = self._inputs(config, 2)
        cfg = DecoderConfig(config.c_prompt, config.heads, 2, "contextual")
        with pytest.raises(ShapeError):
            run_contextual_decoder(m0, vg, regional[:1], weights, cfg)

    def test_pair_permutation_permutes_rows(self, weights, config):
        m0, vg, regional = self._inputs(config, 4, seed=11)
        cfg = DecoderConfig(config.c_prompt, config.heads, 2, "contextual")
        base = run_contextual_decoder(m0, vg, regional, weights, cfg)
        perm = [3, 1, 0, 2]
        out = run_contextual_decoder(m0[perm], vg, regional[perm], weights, cfg)
        assert np.allclose(out, base[perm], atol=1e-5)

    def test_semantic_logits_empty_and_zero(self, config):
        head = (np.zeros((config.c_prompt, 5), np.float32), np.zeros(5, np.float32))
        assert semantic_logits(np.zeros((0, config.c_prompt), np.float32), head).shape == (0, 5)
        out = semantic_logits(np.ones((2, config.c_prompt), np.float32), head)
        assert np.array_equal(out, np.zeros((2, 5), np.float32))
