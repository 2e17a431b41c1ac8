"""Single-pulse PAPR of an RC pulse against Np/Ns (writes fig5.csv)."""

import argparse

from aspm.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/papr_law")
    a = ap.parse_args()
    raise SystemExit(main(["sweep", "fig5", "--np", "8:2048", "--ns", "2", "--out", a.out]))
