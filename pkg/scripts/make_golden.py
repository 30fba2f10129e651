"""Regenerate the committed seed-42 golden prediction file.

Run once after an intentional change to the forward pass, the fixture
generator or the prediction format, then commit the result. The
acceptance suite compares against it byte for byte.
"""

import sys
import tempfile
from pathlib import Path

from hoirel import fixtures, selftest
from hoirel.cli import main

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden" / "predictions_seed42.json"


def regenerate() -> int:
    GOLDEN.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tree = Path(tmp) / "fixtures"
        fixtures.gen_fixtures(selftest.GOLDEN_SEED, fixtures.FixtureSpec(), tree)
        argv = ["infer"]
        for scene in sorted((tree / "scenes").glob("*.json")):
            argv += ["--scene", str(scene)]
        argv += [
            "--bank", str(tree / "bank.json"),
            "--weights", str(tree / "weights.tensors"),
            "--config", str(tree / "engine.json"),
            "--out", str(GOLDEN),
        ]
        code = main(argv)
    if code == 0:
        print(f"golden prediction file written to {GOLDEN}")
    return code


if __name__ == "__main__":
    sys.exit(regenerate())
