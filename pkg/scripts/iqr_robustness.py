"""Mixture IQR against sparse-train SNR (-20..+20 dB) for several pulse spacings in units of 1/R0."""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from aspm.filters import design_rc, design_rrc
from aspm.metrics import gabor_tbp, iqr, occupied_bandwidth

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/iqr")
    ap.add_argument("--samples", type=int, default=2_000_000)
    a = ap.parse_args()
    rc = design_rc(0.5, 2, 64)
    w = design_rrc(0.5, 2, 32)
    r0 = 0.5 * occupied_bandwidth(0.5, 2) / gabor_tbp(rc)
    n = a.samples
    noise = np.convolve(np.random.default_rng(5).standard_normal(n + len(w) - 1), w.taps, mode="valid")
    base = iqr(noise)
    rows = []
    for factor in (3, 10, 30, 100):
        n_p = math.ceil(factor / r0)
        pulses = np.zeros(n)
        idx = np.arange(200, n - 200, n_p)
        pulses[idx] = np.random.default_rng(1).choice([-1.0, 1.0], idx.size)
        train = np.convolve(pulses, rc.taps)[rc.delay : rc.delay + n]
        p = np.mean(train**2)
        for snr_db in range(-20, 21, 5):
            v = iqr(noise + math.sqrt(10 ** (snr_db / 10) / p) * train)
            rows.append({"rate_over_r0": 1 / factor, "spacing": n_p, "snr_db": snr_db, "iqr_ratio": v / base})
        print(factor, max(r["iqr_ratio"] for r in rows[-9:]))
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "iqr.csv", "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        wr.writerows(rows)
