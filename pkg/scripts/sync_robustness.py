"""Sync lock rate against SNR for three window placements (Np = 32, M = 32, 4M periods).

anchored: windows end at the pulse instants (both bounding pulses inside)
neutral:  MMA windows on a frame grid unrelated to the pulses
cold:     blind MPA tracking from i_max = 0
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from aspm.channel import ChannelConfig, awgn
from aspm.filters import convolve, design_rrc, make_shaping_pair, random_allpass_cascade
from aspm.pulsegen import encode_equidistant, render
from aspm.receiver import run_sync


def lock_rates(snr_db, trials, n_p=32, M=32):
    pair = make_shaping_pair(design_rrc(0.5, 2, 32), random_allpass_cascade(0))
    hits = dict(anchored=0, neutral=0, cold=0)
    for s in range(trials):
        rng = np.random.default_rng(s)
        off = int(rng.integers(0, n_p))
        bits = rng.integers(0, 2, 4 * M + 4)
        x = np.concatenate([np.zeros(off), render(encode_equidistant(bits, n_p))])
        rx, _ = awgn(convolve(x, pair.spread), ChannelConfig(snr_db, seed=1000 + s), matched=pair.descramble)
        y = convolve(rx, pair.descramble)
        first = off + n_p + pair.delay
        truth = first % n_p
        hits["anchored"] += run_sync(y, n_p, M, "MPA", n_windows=4 * M, anchor=first - n_p).i_max == truth
        hits["neutral"] += run_sync(y, n_p, M, "MMA", n_windows=4 * M, anchor=n_p - 1).i_max == truth
        hits["cold"] += run_sync(y, n_p, M, "MPA", n_windows=4 * M).i_max == truth
    return {k: v / trials for k, v in hits.items()}


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results/sync")
    ap.add_argument("--trials", type=int, default=100)
    a = ap.parse_args()
    rows = []
    for snr_db in range(-20, -7, 2):
        rows.append({"snr_db": snr_db, **lock_rates(float(snr_db), a.trials)})
        print(rows[-1])
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sync_lock.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
