"""Train the committed test fixtures deterministically via the CLI.

Run from the repository root:  python3 scripts/make_fixtures.py
Produces fixtures/toy_backend.ckpt and fixtures/warp.ckpt plus loss CSVs.
The warp recipe uses the small profile (base 16, 3 scales) so the run fits
a ten-minute training budget on one CPU core.
"""

from __future__ import annotations

import sys
from pathlib import Path

from hairlab.pipeline.cli import main

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def run() -> int:
    FIXTURES.mkdir(exist_ok=True)
    rc = main(
        [
            "train-toy-backend",
            "--avatars", "64",
            "--steps", "3000",
            "--batch", "4",
            "--lr", "2e-4",
            "--base", "32",
            "--schedule-steps", "50",
            "--seed", "0",
            "--encoder-seed", "0",
            "--out", str(FIXTURES / "toy_backend.ckpt"),
            "--loss-csv", str(FIXTURES / "toy_backend_loss.csv"),
        ]
    )
    if rc != 0:
        return rc
    return main(
        [
            "train-warp",
            "--avatars", "5",
            "--n-augment", "2",
            "--rotation", "2.0",
            "--trig-amplitude", "0.5",
            "--scale-min", "0.98",
            "--scale-max", "1.02",
            "--iterations", "2000",
            "--batch", "8",
            "--gen-lr", "2e-4",
            "--disc-lr", "2e-4",
            "--adv-weight", "0.1",
            "--alpha-weight", "0.0",
            "--base", "16",
            "--scales", "3",
            "--seed", "0",
            "--out", str(FIXTURES / "warp.ckpt"),
            "--loss-csv", str(FIXTURES / "warp_loss.csv"),
        ]
    )


if __name__ == "__main__":
    sys.exit(run())
