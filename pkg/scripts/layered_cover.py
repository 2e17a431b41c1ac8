"""Layered cover: payload BER with and without the INF stage, against cover power."""

import argparse
from pathlib import Path

from aspm.cli import main

CFG = Path(__file__).resolve().parents[1] / "configs" / "layered.cfg"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/layered")
    a = ap.parse_args()
    rc = main(["scenario", str(CFG), "--out", f"{a.out}/reference"])
    # payload SNR sweep at the fixed 20 dB cover
    rc = rc or main(["sweep", str(CFG), "--axis", "snr_db", "--values", "-2:6:2", "--out", f"{a.out}/snr"])
    raise SystemExit(rc)
