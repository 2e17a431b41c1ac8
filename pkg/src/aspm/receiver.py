"""Synchronous reception: modulo averaging sync, detection, and theory curves."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .special import erfc, erfcinv

SyncMode = Literal["MPA", "MMA"]

# PAPR(N_p) ~ RC_PAPR_SLOPE * N_p / N_s for RC pulses with roll-off 1/2
RC_PAPR_SLOPE = 1.143
# 2 / RC_PAPR_SLOPE, rounded as in the published limits
RC_LIMIT_COEF = 1.75


@dataclass
class SyncState:
    """Exponentially averaged per-phase power (MPA) or magnitude (MMA).

    ``extra_point`` adds the window's leading endpoint to the MMA window,
    which MPA always includes; it exists only to study its effect.
    """

    n_p: int
    M: float = 8.0
    mode: SyncMode = "MPA"
    accum: np.ndarray = None
    j: int = 0
    i_max: int = 0
    extra_point: bool | None = None

    def __post_init__(self):
        if self.n_p < 1:
            raise ValueError("n_p must be >= 1")
        if not self.M > 1:
            raise ValueError("averaging depth M must exceed 1")
        if self.mode not in ("MPA", "MMA"):
            raise ValueError(f"unknown sync mode {self.mode!r}")
        if self.accum is None:
            self.accum = np.zeros(self.n_p)
        if self.extra_point is None:
            self.extra_point = self.mode == "MPA"

    @property
    def locked(self) -> bool:
        return self.j >= 4 * self.M

    def window_sum(self, buffer: np.ndarray, k_j: int) -> np.ndarray:
        n_p = self.n_p
        if k_j < n_p or k_j >= buffer.size:
            raise ValueError(f"window ending at {k_j} does not fit the buffer")
        seg = buffer[k_j - n_p + 1 : k_j + 1]
        vals = seg * seg if self.mode == "MPA" else np.abs(seg)
        # seg[t] sits at sample k_j - n_p + 1 + t
        out = np.roll(vals, (k_j - n_p + 1) % n_p)
        if self.extra_point:
            head = buffer[k_j - n_p]
            out[k_j % n_p] += head * head if self.mode == "MPA" else abs(head)
        return out

    def update(self, buffer, k_j: int) -> "SyncState":
        """In-place accumulator step for the window ending at k_j."""
        x = np.asarray(buffer, dtype=float)
        w = self.window_sum(x, int(k_j))
        self.accum = (self.M - 1) / self.M * self.accum + w / self.M
        self.j += 1
        self.i_max = int(np.argmax(self.accum))
        return self


def mpa_update(state: SyncState, buffer, k_j: int) -> SyncState:
    """Pure version of SyncState.update."""
    return replace(state, accum=state.accum.copy()).update(buffer, k_j)


def sync_argmax(state: SyncState) -> int:
    return int(np.argmax(state.accum))


def next_sample_index(state: SyncState, j: int) -> int:
    return sync_argmax(state) + (j + 1) * state.n_p


def run_sync(buffer, n_p: int, M: float = 8.0, mode: SyncMode = "MPA", n_windows: int | None = None,
             extra_point: bool | None = None, anchor: int | None = None,
             state: SyncState | None = None, start: int = 1) -> SyncState:
    """Feed one window per pulse period through an accumulator.

    Blind tracking (default): window j ends at i_max + j*n_p, the current
    estimate of the j-th pulse.  With ``anchor`` the windows end at
    anchor + j*n_p instead, i.e. at known pulse positions (a preamble).
    Windows whose start would precede the buffer are skipped.  Passing
    ``state`` continues an existing accumulator from period ``start``.
    """
    x = np.asarray(buffer, dtype=float)
    st = state if state is not None else SyncState(n_p, M, mode, extra_point=extra_point)
    todo = n_windows
    j = start
    while todo is None or todo > 0:
        k = (anchor if anchor is not None else st.i_max) + j * n_p
        if k >= x.size:
            break
        if k >= n_p:
            st.update(x, k)
            if todo is not None:
                todo -= 1
        j += 1
    return st


def circular_offset(a: int, b: int, n_p: int) -> int:
    d = (a - b) % n_p
    return d - n_p if d > n_p // 2 else d


@dataclass
class LinkReport:
    ber: float
    n_bits: int
    n_errors: int
    snr_db_effective: float = math.nan
    sync_offset_error: int = 0
    sigma_n: float = 0.0
    n_p: int = 0
    n_s: int = 0
    M: float = 0.0
    mode: str = "ideal"
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.n_errors <= self.n_bits:
            raise ValueError("n_errors must lie in [0, n_bits]")

    def to_json(self) -> str:
        return json.dumps(asdict(self), default=float)

    CSV_HEADER = ("snr_db", "Np", "Ns", "M", "mode", "ber", "nbits", "offset_err", "seed")

    def csv_row(self) -> str:
        out = io.StringIO()
        csv.writer(out, lineterminator="\n").writerow(
            [self.snr_db_effective, self.n_p, self.n_s, self.M, self.mode, self.ber,
             self.n_bits, self.sync_offset_error, self.seed]
        )
        return out.getvalue()


def detect_synchronous(
    buffer,
    n_p: int,
    truth: Sequence[int],
    delay: int,
    sync: SyncState | None = None,
) -> LinkReport:
    """Sample the matched-filter output once per pulse period and slice by sign.

    ``delay`` is the index of bit 0's pulse peak in the buffer (known link
    delay).  With ``sync=None`` the receiver samples exactly there (ideal
    sync).  Otherwise the given fresh or warm state runs alongside the
    detector: each decision uses the current argmax phase, then the
    accumulator absorbs the window ending at that decision.
    """
    x = np.asarray(buffer, dtype=float)
    bits = np.asarray(truth, dtype=np.int64)
    n_bits = bits.size
    last = delay + (n_bits - 1) * n_p
    if n_bits == 0 or last >= x.size:
        raise ValueError("buffer too short for the requested bits")
    true_phase = delay % n_p
    if sync is None:
        k = delay + n_p * np.arange(n_bits)
        dec = (x[k] < 0).astype(np.int64)
        errs = int(np.count_nonzero(dec != bits))
        return LinkReport(errs / n_bits, n_bits, errs, n_p=n_p, mode="ideal")
    if sync.n_p != n_p:
        raise ValueError("sync state has a different n_p")
    errs = 0
    for j in range(n_bits):
        nominal = delay + j * n_p
        k = nominal + circular_offset(sync.i_max, true_phase, n_p)
        if 0 <= k < x.size:
            errs += int((x[k] < 0) != bool(bits[j]))
        else:
            errs += 1
        if n_p <= k < x.size:
            sync.update(x, k)
    off = circular_offset(sync.i_max, true_phase, n_p)
    return LinkReport(errs / n_bits, n_bits, errs, sync_offset_error=off, n_p=n_p, M=sync.M, mode=sync.mode)


def ber_theory(snr, papr):
    """1/2 erfc(sqrt(snr * papr / 2))."""
    snr = np.asarray(snr, dtype=float)
    papr = np.asarray(papr, dtype=float)
    if np.any(snr < 0) or np.any(papr <= 0):
        raise ValueError("snr must be >= 0 and papr > 0")
    r = 0.5 * erfc(np.sqrt(snr * papr / 2.0))
    return float(r) if np.ndim(r) == 0 else r


@dataclass(frozen=True)
class SnrLimit:
    generic: float  # 2 [erfcinv(2 BER)]^2 / PAPR(N_p)
    asymptotic: float  # 1.75 [erfcinv(2 BER)]^2 N_s / N_p
    papr: float

    @property
    def generic_db(self) -> float:
        return 10 * math.log10(self.generic)

    @property
    def asymptotic_db(self) -> float:
        return 10 * math.log10(self.asymptotic)


def rc_train_papr(n_p: int, n_s: int, beta: float = 0.5) -> float:
    """PAPR of an equidistant RC pulse train: the single-pulse PAPR over one period."""
    from .filters import design_rc
    from .metrics import centered_papr

    span = max(64, 2 * int(math.ceil(n_p / n_s)) + 16)
    span += span * n_s % 2
    rc = design_rc(beta, n_s, span)
    return centered_papr(rc.taps, rc.delay, n_p)


def snr_limit_sync(n_p: int, n_s: int, ber_target: float, papr: float | None = None) -> SnrLimit:
    """Minimum matched-output SNR (linear) for a synchronous BER target."""
    if not 0 < ber_target < 0.5:
        raise ValueError("ber_target must lie in (0, 1/2)")
    if n_p < 1 or n_s < 1:
        raise ValueError("n_p and n_s must be positive")
    e2 = erfcinv(2 * ber_target) ** 2
    if papr is None:
        papr = rc_train_papr(n_p, n_s)
    return SnrLimit(2 * e2 / papr, RC_LIMIT_COEF * e2 * n_s / n_p, papr)


def snr_limit_async(mean_n_p: float, n_s: float, eps_fp: float, eps_fn: float) -> float:
    """Minimum SNR for pulse counting with false-positive/negative rates eps_fp, eps_fn."""
    if not (0 < eps_fp < 0.5 and 0 < eps_fn < 0.5):
        raise ValueError("error rates must lie in (0, 1/2)")
    arg = mean_n_p / (3.5 * eps_fp * n_s)
    if arg <= 1:
        raise ValueError("mean_n_p too small relative to n_s and eps_fp")
    return RC_LIMIT_COEF * (erfcinv(2 * eps_fn) + math.sqrt(math.log(arg))) ** 2 * n_s / mean_n_p


def shannon_limit(snr, bandwidth: float):
    """AWGN capacity in bits/sample for a bandwidth in cycles/sample."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr <= -1):
        raise ValueError("snr must exceed -1")
    c = bandwidth * np.log2(1.0 + snr)
    return float(c) if np.ndim(c) == 0 else c
