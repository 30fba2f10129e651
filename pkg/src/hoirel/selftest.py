"""Invariant battery behind the `selftest` command and the acceptance tests.

Each check is an independent oracle: brute-force enumerations, scalar
arithmetic, finite differences, or byte comparisons. Checks raise
AssertionError with a diagnostic on failure and return a one-line detail
string on success.
"""

import filecmp
import itertools
import math
import tempfile
from pathlib import Path

import numpy as np

from . import fixtures
from .decoder import attention
from .errors import EngineError
from .evaluation import GroundTruthTriplet, PredictionRecord, average_precision
from .fusion import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    DEFAULT_FOCAL_ALPHA,
    DEFAULT_GAMMA,
    INFERENCE_LAMBDA,
    TRAINING_LAMBDA,
    FusionConfig,
    final_scores,
    focal_loss,
    fuse_semantic,
    fuse_ternary,
)
from .geometry import Box
from .kernels import layer_norm, softmax_rows, tensor
from .pipeline import infer_scene, prediction_metadata, write_predictions
from .rng import Stream
from .scene import Detection, Scene, load_scene
from .tokens import enumerate_pairs, enumerate_triplets
from .weights import AttentionParams, load_weights

GOLDEN_SEED = 42


def _rand(stream, n, m, low=-3.0, high=3.0):
    return stream.uniform_block(n * m, low, high).reshape(n, m)


def check_attention_algebra(rounds=1000):
    """Softmax row sums, shift invariance, layer-norm moments and the
    zero-position equivalence of the attention layer."""
    checked_norm_rows = 0
    for t in range(rounds):
        s = Stream(1000 + t, "algebra")
        m = s.integer(0, 1, 9)
        n = s.integer(1, 2, 33)
        x = _rand(Stream(1000 + t, "algebra", "x"), m, n)

        sums = softmax_rows(x).astype(np.float64).sum(axis=1)
        assert np.abs(sums - 1.0).max() < 1e-6, f"softmax row sum off by {np.abs(sums-1.0).max()}"

        # shift invariance, on a grid where adding the constant is exact
        q = np.round(x * 1024.0) / np.float32(1024.0)
        shift = np.float32(s.integer(2, -4096, 4097) / 1024.0)
        assert np.array_equal(softmax_rows(q), softmax_rows(q + shift)), "softmax shift variance"

        ones = np.ones(n, dtype=np.float32)
        zeros = np.zeros(n, dtype=np.float32)
        normed = layer_norm(x, ones, zeros).astype(np.float64)
        variances = x.astype(np.float64).var(axis=1)
        for row in range(m):
            if variances[row] < 0.5:
                continue  # epsilon dominates ~zero-variance rows by design
            checked_norm_rows += 1
            assert abs(normed[row].mean()) < 1e-6, "layer-norm mean off"
            assert abs(normed[row].var() - 1.0) < 1e-4, "layer-norm variance off"

    # zero positional streams equal the positionless computation, bitwise
    for t in range(50):
        s = Stream(2000 + t, "zero-pos")
        width, heads = 8, 2
        params = AttentionParams(
            wq=_rand(Stream(2000 + t, "zp", "wq"), width, width, -0.5, 0.5),
            bq=Stream(2000 + t, "zp", "bq").uniform_block(width, -0.1, 0.1),
            wk=_rand(Stream(2000 + t, "zp", "wk"), width, width, -0.5, 0.5),
            bk=Stream(2000 + t, "zp", "bk").uniform_block(width, -0.1, 0.1),
            wv=_rand(Stream(2000 + t, "zp", "wv"), width, width, -0.5, 0.5),
            bv=Stream(2000 + t, "zp", "bv").uniform_block(width, -0.1, 0.1),
            wo=_rand(Stream(2000 + t, "zp", "wo"), width, width, -0.5, 0.5),
            bo=Stream(2000 + t, "zp", "bo").uniform_block(width, -0.1, 0.1),
            norm_gain=np.ones(width, dtype=np.float32),
            norm_bias=np.zeros(width, dtype=np.float32),
        )
        nq, nk = s.integer(0, 1, 5), s.integer(1, 1, 7)
        cq = _rand(Stream(2000 + t, "zp", "cq"), nq, width)
        ck = _rand(Stream(2000 + t, "zp", "ck"), nk, width)
        with_zeros = attention(
            cq, np.zeros_like(cq), ck, np.zeros_like(ck), ck, params, heads
        )
        without = attention(cq, None, ck, None, ck, params, heads)
        assert np.array_equal(with_zeros, without), "zero-position equivalence broke"
    return f"{rounds} tensors, {checked_norm_rows} normed rows, 50 attention layers"


class _MiniDet:
    __slots__ = ("category",)

    def __init__(self, category):
        self.category = category


class _MiniTable:
    def __init__(self, human):
        self.human = human


def check_enumeration_oracles(rounds=500):
    """Pair/triplet enumeration vs independent brute force, n <= 8."""
    for t in range(rounds):
        s = Stream(3000 + t, "enum")
        n = s.integer(0, 0, 9)
        num_cats = s.integer(1, 2, 6)
        cats = [s.integer(10 + k, 0, num_cats) for k in range(n)]
        dets = [_MiniDet(c) for c in cats]
        table = _MiniTable(human=0)
        bank_size = s.integer(2, 0, 5)
        bank_pairs = set()
        for b in range(bank_size):
            a = s.integer(100 + 2 * b, 0, num_cats)
            c = s.integer(101 + 2 * b, 0, num_cats)
            if a != c:
                bank_pairs.add((a, c))

        pairs = enumerate_pairs(dets, table)
        h = sum(1 for c in cats if c == 0)
        expected_m = h * (n - 1) if n else 0
        assert len(pairs) == expected_m, f"pair count {len(pairs)} != h(n-1) = {expected_m}"
        brute_pairs = sorted(
            (i, j)
            for i, j in itertools.permutations(range(n), 2)
            if cats[i] == 0
        )
        assert sorted(pairs) == brute_pairs and list(pairs) == sorted(pairs), "pair set mismatch"

        class _Bank:
            pairs = frozenset(bank_pairs)

        triplets = enumerate_triplets(dets, table, _Bank)
        brute_triplets = sorted(
            (i, j, k)
            for i, j, k in itertools.permutations(range(n), 3)
            if cats[i] == 0 and (cats[j], cats[k]) in bank_pairs
        )
        assert sorted(triplets) == brute_triplets and list(triplets) == sorted(triplets), (
            "triplet set mismatch"
        )
    return f"{rounds} random scenes, n <= 8"


def check_fusion_oracle(rounds=500):
    """fuse_ternary vs brute-force group-by-pair sums, bitwise."""
    for t in range(rounds):
        s = Stream(4000 + t, "fusion")
        m = s.integer(0, 1, 11)
        r = s.integer(1, 0, 31)
        c = s.integer(2, 1, 7)
        alpha = s.uniform(3, 0.0, 2.0)
        b = _rand(Stream(4000 + t, "fusion", "b"), m, c)
        tt = _rand(Stream(4000 + t, "fusion", "t"), r, c)
        assignment = [s.integer(100 + o, 0, m) for o in range(r)]

        got = fuse_ternary(b, tt, assignment, alpha)
        expected = np.empty_like(b)
        for l in range(m):
            acc = np.zeros(c, dtype=np.float64)
            for o in range(r):
                if assignment[o] == l:
                    acc += tt[o].astype(np.float64)
            expected[l] = (b[l].astype(np.float64) + alpha * acc).astype(np.float32)
        assert np.array_equal(got, expected), "fuse_ternary differs from brute force"

        collapsed = fuse_semantic(fuse_ternary(b, tt, assignment, 0.0), b * 0.5, 0.0)
        assert np.array_equal(collapsed, b), "alpha=beta=0 did not collapse bitwise"
    return f"{rounds} random instances (m <= 10, r <= 30)"


def check_gradient(rounds=100, h=1e-3):
    """Analytic gradient through fuse_semantic vs central differences."""
    worst = 0.0
    for t in range(rounds):
        base = Stream(5000 + t, "grad")
        y_hat = _rand(Stream(5000 + t, "grad", "yh"), 4, 6, -1.5, 1.5)
        y_sem = _rand(Stream(5000 + t, "grad", "ys"), 4, 6, -1.5, 1.5)
        labels = (base.uniform_block(24) > 0.5).astype(np.int64).reshape(4, 6)
        beta = 0.4

        _, grad = focal_loss(fuse_semantic(y_hat, y_sem, beta), labels)

        def loss_at(logits64):
            fused = logits64 + beta * y_sem.astype(np.float64)
            return focal_loss(fused, labels)[0]

        x64 = y_hat.astype(np.float64)
        for i in range(4):
            for j in range(6):
                up = x64.copy()
                up[i, j] += h
                down = x64.copy()
                down[i, j] -= h
                fd = (loss_at(up) - loss_at(down)) / (2 * h)
                rel = abs(grad[i, j] - fd) / max(abs(grad[i, j]), abs(fd), 1e-9)
                worst = max(worst, rel)
        assert worst < 1e-4, f"gradient relative error {worst}"
    return f"{rounds} problems, worst relative error {worst:.2e}"


def check_scoring_arithmetic(rounds=200):
    """Spot values of the final-score formula and lambda monotonicity."""
    det_h = Detection(Box(0, 0, 10, 10), 0.9, 0, tensor(np.zeros(4)))
    det_o = Detection(Box(5, 5, 15, 15), 0.8, 1, tensor(np.zeros(4)))
    scored = final_scores(np.zeros((1, 3), dtype=np.float32), [(0, 1)], [det_h, det_o], 2.8)
    expected = (0.9 * 0.8) ** 2.8 * 0.5
    assert abs(float(scored[0].scores[0]) - expected) < 1e-6, (
        f"spot score {scored[0].scores[0]} != {expected}"
    )
    one = final_scores(np.zeros((1, 3), dtype=np.float32), [(0, 1)],
                       [Detection(Box(0, 0, 1, 1), 1.0, 0, tensor(np.zeros(4))),
                        Detection(Box(0, 0, 1, 1), 1.0, 1, tensor(np.zeros(4)))], 2.8)
    assert np.allclose(one[0].scores, 0.5), "unit confidences must leave sigmoid untouched"

    for t in range(rounds):
        s = Stream(6000 + t, "lam")
        logits = _rand(Stream(6000 + t, "lam", "x"), 1, 4)
        sh, so = s.uniform(0, 0.05, 0.999), s.uniform(1, 0.05, 0.999)
        dets = [Detection(Box(0, 0, 2, 2), sh, 0, tensor(np.zeros(2))),
                Detection(Box(1, 1, 3, 3), so, 1, tensor(np.zeros(2)))]
        lo = final_scores(logits, [(0, 1)], dets, 1.0)[0].scores
        hi = final_scores(logits, [(0, 1)], dets, 2.8)[0].scores
        assert (hi <= lo + 1e-7).all(), "scores must not increase with lambda"
        assert (hi >= 0).all() and (hi <= 1).all(), "scores must stay in [0, 1]"
    return f"spot value {expected:.6f} within 1e-6; {rounds} monotonicity draws"


def _ap_oracle_from_flags(flags, num_gt):
    """All-point AP computed directly from TP/FP flags at every rank."""
    best = 0.0
    ap = 0.0
    tp = 0
    precisions = []
    for k, f in enumerate(flags):
        tp += 1 if f else 0
        precisions.append((tp / num_gt, tp / (k + 1)))
    recalls = sorted({r for r, _ in precisions})
    prev = 0.0
    for r in recalls:
        if r <= 0:
            continue
        best = max(p for rr, p in precisions if rr >= r)
        ap += (r - prev) * best
        prev = r
    return ap


def check_ap_oracle():
    """Exhaustive TP/FP patterns for every instance with <= 6 predictions."""
    checked = 0
    far = 1000.0
    for k in range(0, 7):
        for num_gt in range(1, 7):
            for pattern in itertools.product((True, False), repeat=k):
                if sum(pattern) > num_gt:
                    continue
                gts = [
                    GroundTruthTriplet("img", Box(0, 100 * g, 50, 100 * g + 50),
                                       Box(0, 100 * g, 50, 100 * g + 50), 1, 0)
                    for g in range(num_gt)
                ]
                preds = []
                next_gt = 0
                for rank, is_tp in enumerate(pattern):
                    score = 1.0 - rank / 10.0
                    if is_tp:
                        box = gts[next_gt].human_box
                        next_gt += 1
                        preds.append(PredictionRecord("img", box, box, 1, 0, score))
                    else:
                        box = Box(far + 100 * rank, 0, far + 100 * rank + 10, 10)
                        preds.append(PredictionRecord("img", box, box, 1, 0, score))
                got = average_precision(preds, gts)
                expected = _ap_oracle_from_flags(list(pattern), num_gt)
                assert got == expected, f"AP {got} != oracle {expected} for {pattern}"
                checked += 1
    # perfect predictions give AP exactly 1
    gts = [GroundTruthTriplet("img", Box(0, 0, 9, 9), Box(2, 2, 11, 11), 3, 1)]
    preds = [PredictionRecord("img", Box(0, 0, 9, 9), Box(2, 2, 11, 11), 3, 1, 0.9)]
    assert average_precision(preds, gts) == 1.0
    return f"{checked} exhaustive TP/FP patterns"


def _key(result):
    return (
        tuple(round(v, 4) for v in result.human_box.as_list()),
        tuple(round(v, 4) for v in result.object_box.as_list()),
        result.object_category,
    )


def check_end_to_end(seed=GOLDEN_SEED):
    """Byte-identical reruns plus detection-permutation equivariance."""
    spec = fixtures.FixtureSpec()
    with tempfile.TemporaryDirectory() as tmp:
        first = fixtures.gen_fixtures(seed, spec, Path(tmp) / "a")
        second = fixtures.gen_fixtures(seed, spec, Path(tmp) / "b")
        config = fixtures.engine_config(spec, fixtures.category_table(spec))
        bank = fixtures.knowledge_bank(spec, config.categories)
        for out_name, tree in (("pred_a.json", first), ("pred_b.json", second)):
            weights = load_weights(tree["weights"], config)
            scenes = [load_scene(p) for p in tree["scenes"]]
            results = [infer_scene(s, bank, weights, config) for s in scenes]
            write_predictions(
                Path(tmp) / out_name,
                [s.image_id for s in scenes],
                results,
                prediction_metadata(config, "selfcheck"),
            )
        assert filecmp.cmp(Path(tmp) / "pred_a.json", Path(tmp) / "pred_b.json", shallow=False), (
            "reruns produced different prediction bytes"
        )

        weights = load_weights(first["weights"], config)
        scene = load_scene(first["scenes"][0])
        base = infer_scene(scene, bank, weights, config)
        perm = list(reversed(range(len(scene.detections))))
        permuted = Scene(
            image_id=scene.image_id,
            size=scene.size,
            detections=tuple(scene.detections[p] for p in perm),
            context=scene.context,
        )
        other = infer_scene(permuted, bank, weights, config)
        assert len(base) == len(other), "permutation changed the number of pairs"
        lhs = sorted(base, key=_key)
        rhs = sorted(other, key=_key)
        for a, b in zip(lhs, rhs):
            assert _key(a) == _key(b), "permutation changed the interaction multiset"
            assert np.allclose(a.scores, b.scores, atol=1e-5), (
                "permutation changed scores beyond tolerance"
            )
    return "double run byte-identical; detection permutation preserved the multiset"


def check_hyperparameter_defaults():
    """Snapshot of the published defaults."""
    fc = FusionConfig()
    assert fc.alpha == DEFAULT_ALPHA == 1.0
    assert fc.beta == DEFAULT_BETA == 0.4
    assert fc.lam == INFERENCE_LAMBDA == 2.8
    assert FusionConfig.training().lam == TRAINING_LAMBDA == 1.0
    assert DEFAULT_GAMMA == 2.0 and DEFAULT_FOCAL_ALPHA == 0.25
    spec = fixtures.FixtureSpec()
    config = fixtures.engine_config(spec, fixtures.category_table(spec))
    assert config.act_length == 4, "[ACT] length default must be 4"
    assert config.binary_blocks == config.ternary_blocks == 2
    assert config.contextual_blocks == 2
    assert config.prompt_prefix == ("a", "photo", "of", "a")
    return "lambda 2.8/1.0, alpha 1.0, beta 0.4, act 4, blocks 2/2/2"


CHECKS = [
    ("attention-algebra", check_attention_algebra),
    ("enumeration-oracles", check_enumeration_oracles),
    ("fusion-oracle", check_fusion_oracle),
    ("gradient-check", check_gradient),
    ("scoring-arithmetic", check_scoring_arithmetic),
    ("ap-oracle", check_ap_oracle),
    ("end-to-end", check_end_to_end),
    ("hyperparameter-defaults", check_hyperparameter_defaults),
]


def run_all(out=print) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            detail = fn()
            out(f"PASS {name}: {detail}")
        except (AssertionError, EngineError) as exc:
            ok = False
            out(f"FAIL {name}: {exc}")
    return ok
