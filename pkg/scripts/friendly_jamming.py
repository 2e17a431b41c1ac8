"""OFDM under a friendly impulsive jammer; dumps every tap point for inspection."""

import argparse
from pathlib import Path

from aspm.cli import main

CFG = Path(__file__).resolve().parents[1] / "configs" / "jam.cfg"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/jamming")
    ap.add_argument("--seed", default=None)
    a = ap.parse_args()
    extra = ["--seed", a.seed] if a.seed is not None else []
    raise SystemExit(main(["scenario", str(CFG), "--dump-taps", "--out", a.out, *extra]))
