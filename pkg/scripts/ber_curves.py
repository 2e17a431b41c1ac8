"""Ideal-sync BER against matched-output SNR for Np = 32 and 256, with theory."""

import argparse

from aspm.cli import main

GRIDS = {32: "-14:-2:1", 256: "-23:-11:1"}

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/ber_curves")
    ap.add_argument("--bits", default="1e6")
    ap.add_argument("--jobs", default="1")
    ap.add_argument("--seed", default="0")
    a = ap.parse_args()
    for n_p, grid in GRIDS.items():
        rc = main(["sweep", "fig8", "--np", str(n_p), "--snr", grid, "--bits", a.bits, "--jobs", a.jobs,
                   "--seed", a.seed, "--out", f"{a.out}/np{n_p}"])
        if rc:
            raise SystemExit(rc)
