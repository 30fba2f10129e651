"""Bridge CLI: export images against an engine config.

    hoibridge export --engine-config tree/engine.json --out exported \
        --image a.png --image b.png [--provider offline] [--seed 7]
"""

import argparse
import sys
from pathlib import Path

from .config import BridgeConfig
from .errors import BridgeError
from .export import export_batch
from .formats import read_engine_config


def _build_parser():
    parser = argparse.ArgumentParser(prog="hoibridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="export images to engine scene files")
    p.add_argument("--engine-config", required=True,
                   help="engine config JSON the scenes must match")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--image", action="append", default=[], help="image file (repeatable)")
    p.add_argument("--image-list", default=None,
                   help="text file with one image path per line")
    p.add_argument("--provider", default="offline",
                   help="'offline' or detector checkpoint name (default: offline)")
    p.add_argument("--vlm", default=None,
                   help="VLM checkpoint for the hub provider (default: same mode)")
    p.add_argument("--seed", type=int, default=0,
                   help="down-projection seed, recorded in the manifest (default: 0)")
    p.add_argument("--max-detections", type=int, default=6)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        images = list(args.image)
        if args.image_list:
            lines = Path(args.image_list).read_text(encoding="utf-8").splitlines()
            images += [line.strip() for line in lines if line.strip()]
        if not images:
            print("error: no images given", file=sys.stderr)
            return 2
        dims = read_engine_config(args.engine_config)
        vlm = args.vlm if args.vlm else ("offline" if args.provider == "offline" else args.provider)
        config = BridgeConfig.from_engine(
            dims,
            detector=args.provider,
            vlm=vlm,
            seed=args.seed,
            max_detections=args.max_detections,
        )
        manifest = export_batch(images, args.out, config)
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    print(f"exported {len(manifest['scenes'])} scene(s) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
