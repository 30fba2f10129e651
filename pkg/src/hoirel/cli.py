"""Command-line surface: infer, eval, gen-fixtures, selftest, inspect.

Exit codes: 0 success, 1 I/O failure, 2 validation or usage error.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__, selftest
from .config import load_engine_config
from .container import read_tensor_container
from .errors import EngineError
from .evaluation import evaluate
from .fixtures import FixtureSpec, gen_fixtures
from .fusion import FusionConfig
from .pipeline import (
    infer_scenes,
    prediction_metadata,
    weights_digest,
    write_predictions,
)
from .scene import load_bank, load_scene
from .weights import load_weights


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hoirel",
        description="Deterministic relational scorer for human-object interactions.",
    )
    parser.add_argument("--version", action="version", version=f"hoirel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="score scenes and write a prediction file")
    p.add_argument("--scene", action="append", required=True,
                   help="scene JSON file (repeat for several scenes)")
    p.add_argument("--bank", required=True, help="knowledge bank JSON file")
    p.add_argument("--weights", required=True, help="weights tensor container")
    p.add_argument("--config", required=True, help="engine config JSON file")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="ternary stream weight (default: 1.0)")
    p.add_argument("--beta", type=float, default=0.4,
                   help="semantic stream weight (default: 0.4)")
    p.add_argument("--lambda", dest="lam", type=float, default=2.8,
                   help="confidence score exponent (default: 2.8)")
    p.add_argument("--jobs", type=int, default=1,
                   help="scenes processed in parallel (default: 1)")
    p.add_argument("--out", required=True, help="prediction file to write")

    p = sub.add_parser("eval", help="mean average precision of a prediction file")
    p.add_argument("--pred", required=True, help="prediction file")
    p.add_argument("--gt", required=True, help="ground-truth file")
    p.add_argument("--iou", type=float, default=0.5,
                   help="IoU threshold, strict (default: 0.5)")
    p.add_argument("--out", default=None, help="optional JSON report path")

    p = sub.add_parser("gen-fixtures", help="write a deterministic fixture tree")
    p.add_argument("--seed", type=int, required=True, help="64-bit generation seed")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--spec", default=None,
                   help="optional JSON file overriding fixture spec fields")

    sub.add_parser("selftest", help="run the full invariant suite")

    p = sub.add_parser("inspect", help="dump tensor container headers")
    p.add_argument("--container", required=True, help="tensor container path")
    return parser


def _cmd_infer(args) -> int:
    config = load_engine_config(args.config)
    config = dataclasses.replace(
        config, fusion=FusionConfig(alpha=args.alpha, beta=args.beta, lam=args.lam)
    )
    weights = load_weights(args.weights, config)
    bank = load_bank(args.bank, config.categories)
    scenes = [load_scene(p) for p in args.scene]
    results = infer_scenes(scenes, bank, weights, config, jobs=args.jobs)
    metadata = prediction_metadata(config, weights_digest(args.weights))
    write_predictions(args.out, [s.image_id for s in scenes], results, metadata)
    total = sum(len(r) for r in results)
    print(f"wrote {total} scored pairs for {len(scenes)} scene(s) to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    report = evaluate(args.pred, args.gt, iou_threshold=args.iou)
    for (action, obj), ap in sorted(report.per_class.items()):
        print(f"AP[action={action} object={obj}] = {ap:.4f}")
    print(f"mAP = {report.mean_ap:.4f}")
    print(
        f"TP = {report.true_positives}  FP = {report.false_positives}  "
        f"GT = {report.num_ground_truth}"
    )
    if args.out:
        payload = {
            "mAP": report.mean_ap,
            "per_class": [
                {"action": a, "object": o, "ap": ap}
                for (a, o), ap in sorted(report.per_class.items())
            ],
            "true_positives": report.true_positives,
            "false_positives": report.false_positives,
            "num_ground_truth": report.num_ground_truth,
        }
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return 0


def _cmd_gen_fixtures(args) -> int:
    spec = FixtureSpec()
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = FixtureSpec.from_dict(json.load(fh))
    paths = gen_fixtures(args.seed, spec, args.out_dir)
    print(f"fixture tree at {args.out_dir}: {len(paths['scenes'])} scenes, seed {args.seed}")
    return 0


def _cmd_inspect(args) -> int:
    version, tensors = read_tensor_container(args.container)
    print(f"{args.container}: layout version {version}, {len(tensors)} tensor(s)")
    total = 0
    for name, arr in tensors.items():
        total += arr.nbytes
        dims = "x".join(str(d) for d in arr.shape) or "scalar"
        print(f"  {name}  {dims}  {arr.nbytes} bytes")
    print(f"payload total {total} bytes")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "infer":
            return _cmd_infer(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "gen-fixtures":
            return _cmd_gen_fixtures(args)
        if args.command == "selftest":
            return 0 if selftest.run_all() else 1
        if args.command == "inspect":
            return _cmd_inspect(args)
        parser.error(f"unknown command {args.command}")
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
