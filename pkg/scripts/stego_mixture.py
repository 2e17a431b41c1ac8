"""Per-component SNR of a K-component keyed mixture, K = 1..6 (noise-free)."""

import argparse
from pathlib import Path

from aspm.cli import main

CFG = Path(__file__).resolve().parents[1] / "configs" / "stego6.cfg"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/stego")
    ap.add_argument("--jobs", default="1")
    a = ap.parse_args()
    raise SystemExit(main(["sweep", str(CFG), "--axis", "K", "--values", "1:6:1", "--jobs", a.jobs, "--out", a.out]))
