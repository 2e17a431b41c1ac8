"""Seed pulses, allpass biquad cascades and large-TBP shaping pairs.

A shaping pair is grown from a small-TBP seed ``w`` (usually an RRC
filter): the seed is passed through a random allpass cascade, the
response is truncated once it has decayed, and the time reverse of the
truncated response becomes the transmit spreader.  The truncated
response itself is the receive descrambler, so spreader * descrambler
is the seed autocorrelation (the RC pulse for an RRC seed).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.signal as sps

DEFAULT_TRUNCATION_TOL = 1e-4
DEFAULT_RADIUS_RANGE = (0.85, 0.98)
MAX_RESPONSE_LEN = 1 << 24
FFT_TAPS_THRESHOLD = 64


class ConstructionError(RuntimeError):
    """Raised when a filter response fails to decay within the hard cap."""


@dataclass(frozen=True, eq=False)
class FirFilter:
    taps: np.ndarray
    delay: int = 0
    label: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=float).reshape(-1)
        if t.size == 0:
            raise ValueError("FIR filter needs at least one tap")
        if not np.all(np.isfinite(t)):
            raise ValueError("FIR taps must be finite")
        if not np.sum(t * t) > 0:
            raise ValueError("FIR filter has zero energy")
        object.__setattr__(self, "taps", t)

    def __len__(self) -> int:
        return self.taps.size

    @property
    def energy(self) -> float:
        return float(np.sum(self.taps**2))

    def reversed(self, label: str | None = None) -> "FirFilter":
        return FirFilter(self.taps[::-1].copy(), len(self) - 1 - self.delay, label or self.label + "~")


def _check_rc_args(beta: float, n_s: int, span: int):
    if not 0 < beta <= 1:
        raise ValueError("roll-off beta must lie in (0, 1]")
    if n_s < 1 or span < 1:
        raise ValueError("n_s and span must be positive")
    if (span * n_s) % 2:
        raise ValueError("span * n_s must be even for a centred odd-length filter")


def rrc_pulse(t, beta: float) -> np.ndarray:
    """Closed-form RRC impulse response at t (in symbol periods), peak-unnormalised."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    h = np.empty_like(t)
    at_zero = t == 0
    at_sing = np.isclose(np.abs(4 * beta * t), 1.0, rtol=0, atol=1e-12)
    rest = ~(at_zero | at_sing)
    h[at_zero] = 1 - beta + 4 * beta / np.pi
    h[at_sing] = beta / np.sqrt(2) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
    )
    tr = t[rest]
    h[rest] = (np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))) / (
        np.pi * tr * (1 - (4 * beta * tr) ** 2)
    )
    return h


def rc_pulse(t, beta: float) -> np.ndarray:
    """Closed-form raised-cosine pulse, unit peak at t = 0 (t in symbol periods)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    h = np.sinc(t)
    sing = np.isclose(np.abs(2 * beta * t), 1.0, rtol=0, atol=1e-12)
    h[~sing] *= np.cos(np.pi * beta * t[~sing]) / (1 - (2 * beta * t[~sing]) ** 2)
    h[sing] = np.pi / 4 * np.sinc(1 / (2 * beta))
    return h


def design_rrc(beta: float, n_s: int, span: int) -> FirFilter:
    """Unit-energy RRC with ``span`` symbol periods of support and n_s samples per symbol."""
    _check_rc_args(beta, n_s, span)
    half = span * n_s // 2
    taps = rrc_pulse(np.arange(-half, half + 1) / n_s, beta)
    taps /= np.sqrt(np.sum(taps**2))
    return FirFilter(taps, half, "rrc", {"kind": "rrc", "beta": beta, "n_s": n_s, "span": span})


def design_rc(beta: float, n_s: int, span: int) -> FirFilter:
    """RC pulse as the self-convolution of the RRC design, scaled to unit peak."""
    w = design_rrc(beta, n_s, span)
    taps = np.convolve(w.taps, w.taps)
    taps /= np.max(np.abs(taps))
    return FirFilter(taps, 2 * w.delay, "rc", {"kind": "rc", "beta": beta, "n_s": n_s, "span": span})


def delta_filter() -> FirFilter:
    return FirFilter(np.ones(1), 0, "delta", {"kind": "delta"})


@dataclass(frozen=True)
class BiquadAllpass:
    """(a2 + a1 z^-1 + z^-2) / (1 + a1 z^-1 + a2 z^-2)"""

    a1: float
    a2: float

    def __post_init__(self):
        if not (abs(self.a2) < 1 and abs(self.a1) < 1 + self.a2):
            raise ValueError(f"unstable allpass section a1={self.a1}, a2={self.a2}")

    @classmethod
    def from_pole(cls, radius: float, angle: float) -> "BiquadAllpass":
        return cls(-2.0 * radius * np.cos(angle), radius * radius)

    @property
    def sos_row(self) -> list[float]:
        return [self.a2, self.a1, 1.0, 1.0, self.a1, self.a2]

    def response(self, freqs) -> np.ndarray:
        z1 = np.exp(-2j * np.pi * np.asarray(freqs, dtype=float))
        return (self.a2 + self.a1 * z1 + z1 * z1) / (1 + self.a1 * z1 + self.a2 * z1 * z1)


@dataclass(frozen=True)
class AllpassCascade:
    sections: tuple[BiquadAllpass, ...] = ()
    seed: int | None = None
    radius_range: tuple[float, float] = DEFAULT_RADIUS_RANGE

    @property
    def n_sections(self) -> int:
        return len(self.sections)

    @property
    def key(self) -> tuple:
        return (self.seed, self.n_sections, tuple(self.radius_range))

    def sos(self) -> np.ndarray:
        return np.array([s.sos_row for s in self.sections], dtype=float).reshape(-1, 6)

    def response(self, freqs) -> np.ndarray:
        h = np.ones(np.shape(freqs), dtype=complex)
        for s in self.sections:
            h *= s.response(freqs)
        return h

    def max_radius(self) -> float:
        return max((np.sqrt(s.a2) for s in self.sections), default=0.0)


def random_allpass_cascade(
    n_sections: int,
    pole_radius_min: float = DEFAULT_RADIUS_RANGE[0],
    pole_radius_max: float = DEFAULT_RADIUS_RANGE[1],
    seed: int = 0,
) -> AllpassCascade:
    """Cascade of conjugate-pole allpass biquads; the (seed, n, radii) triple is the key."""
    if n_sections < 0:
        raise ValueError("n_sections must be non-negative")
    if not 0 < pole_radius_min <= pole_radius_max < 1:
        raise ValueError("pole radii must satisfy 0 < min <= max < 1")
    rng = np.random.default_rng(seed)
    radii = rng.uniform(pole_radius_min, pole_radius_max, n_sections)
    # angle in the open interval (0, pi)
    angles = np.pi * (1.0 - rng.uniform(0.0, 1.0, n_sections))
    angles = np.clip(angles, np.finfo(float).tiny, np.pi * (1 - 1e-16))
    sections = tuple(BiquadAllpass.from_pole(r, a) for r, a in zip(radii, angles))
    return AllpassCascade(sections, seed, (pole_radius_min, pole_radius_max))


def apply_cascade(
    cascade: AllpassCascade,
    buffer,
    tail_tol: float = DEFAULT_TRUNCATION_TOL,
    max_len: int = MAX_RESPONSE_LEN,
) -> np.ndarray:
    """Run the buffer through every section, then let the cascade ring down.

    Zeros are appended block by block until a whole block stays below
    ``tail_tol`` times the running peak; the output is then cut after its
    last sample at or above that level (never shorter than the input).
    """
    x = np.asarray(buffer, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("buffer must be finite")
    if cascade.n_sections == 0:
        return x.copy()
    for s in cascade.sections:
        if not (abs(s.a2) < 1 and abs(s.a1) < 1 + s.a2):
            raise RuntimeError("unstable allpass section in cascade")
    sos = cascade.sos()
    zi = np.zeros((sos.shape[0], 2))
    y, zi = sps.sosfilt(sos, x, zi=zi)
    pieces = [y]
    peak = float(np.max(np.abs(y))) if y.size else 0.0
    if peak == 0.0:
        return y
    total = y.size
    r = cascade.max_radius()
    block = int(min(max(1024, 4.0 / max(1e-12, 1 - r)), 1 << 18))
    while True:
        if total > max_len:
            raise ConstructionError(f"response did not decay within {max_len} samples")
        tail, zi = sps.sosfilt(sos, np.zeros(block), zi=zi)
        pieces.append(tail)
        total += block
        tail_peak = float(np.max(np.abs(tail)))
        peak = max(peak, tail_peak)
        if tail_peak < tail_tol * peak:
            break
    out = np.concatenate(pieces)
    above = np.flatnonzero(np.abs(out) >= tail_tol * peak)
    end = max(x.size, int(above[-1]) + 1)
    return out[:end]


def truncate_response(resp, tol: float) -> np.ndarray:
    """Shortest prefix holding every sample >= tol*peak and >= (1 - tol^2) of the energy."""
    r = np.asarray(resp, dtype=float)
    a = np.abs(r)
    peak = a.max()
    end_amp = int(np.flatnonzero(a >= tol * peak)[-1]) + 1
    cum = np.cumsum(r * r)
    end_energy = int(np.searchsorted(cum, (1.0 - tol * tol) * cum[-1])) + 1
    return r[: max(end_amp, end_energy)].copy()


@dataclass(frozen=True, eq=False)
class ShapingPair:
    spread: FirFilter
    descramble: FirFilter
    seed_filter: FirFilter
    truncation_tol: float
    cascade: AllpassCascade

    @property
    def key(self) -> tuple:
        return self.cascade.key

    @property
    def delay(self) -> int:
        """Sample offset of the matched-response peak (spread * descramble)."""
        return len(self.spread) - 1

    def matched_response(self) -> np.ndarray:
        return convolve(self.spread.taps, self.descramble)


def make_shaping_pair(
    seed_filter: FirFilter,
    cascade: AllpassCascade,
    truncation_tol: float = DEFAULT_TRUNCATION_TOL,
    max_len: int = MAX_RESPONSE_LEN,
) -> ShapingPair:
    if not 0 < truncation_tol <= 1e-2:
        raise ValueError("truncation_tol must lie in (0, 1e-2]")
    if cascade.n_sections == 0:
        resp = seed_filter.taps.copy()
    else:
        resp = truncate_response(
            apply_cascade(cascade, seed_filter.taps, tail_tol=truncation_tol * 1e-2, max_len=max_len),
            truncation_tol,
        )
    params = {
        "kind": "pair",
        "seed_filter": seed_filter.params,
        "cascade_seed": cascade.seed,
        "n_sections": cascade.n_sections,
        "radius_range": list(cascade.radius_range),
        "truncation_tol": truncation_tol,
    }
    descramble = FirFilter(resp, 0, "descramble", {**params, "role": "descramble"})
    spread = FirFilter(resp[::-1].copy(), resp.size - 1, "spread", {**params, "role": "spread"})
    return ShapingPair(spread, descramble, seed_filter, truncation_tol, cascade)


def convolve(buffer, fir) -> np.ndarray:
    """Full linear convolution; FFT-based for filters longer than 64 taps."""
    x = np.asarray(buffer, dtype=float)
    taps = fir.taps if isinstance(fir, FirFilter) else np.asarray(fir, dtype=float)
    if x.size == 0:
        return np.zeros(max(0, taps.size - 1))
    if taps.size > FFT_TAPS_THRESHOLD and x.size > FFT_TAPS_THRESHOLD:
        return sps.oaconvolve(x, taps)
    return np.convolve(x, taps)


def sparse_convolve(train, fir, length: int | None = None) -> np.ndarray:
    """render(train) * fir built tap by tap: sum_j A_j fir[k - k_j].

    Cost scales with pulses x taps rather than with the frame length,
    which pays off for trains much sparser than the filter is long.
    """
    taps = fir.taps if isinstance(fir, FirFilter) else np.asarray(fir, dtype=float)
    n = (train.length if length is None else length) + taps.size - 1
    out = np.zeros(n)
    idx, amp = train.indices, train.amplitudes
    if idx.size and np.all(np.diff(idx) >= taps.size):
        # pulse supports do not overlap: one vectorized write per pulse block
        out[idx[:, None] + np.arange(taps.size)] = amp[:, None] * taps
        return out
    for t, h in enumerate(taps):
        out[idx + t] += amp * h
    return out


def sampled_convolve(buffer, fir, indices) -> np.ndarray:
    """(buffer * fir)[indices] without forming the full convolution."""
    x = np.asarray(buffer, dtype=float)
    taps = fir.taps if isinstance(fir, FirFilter) else np.asarray(fir, dtype=float)
    k = np.asarray(indices, dtype=np.int64)
    L = taps.size
    if k.size and (k.min() < 0 or k.max() >= x.size + L - 1):
        raise ValueError("sample index outside the full convolution")
    pad = np.concatenate([np.zeros(L - 1), x, np.zeros(L - 1)])
    win = np.lib.stride_tricks.sliding_window_view(pad, L)
    return win[k] @ taps[::-1]


def filter_from_params(params: dict) -> FirFilter:
    """Regenerate a filter from its JSON descriptor."""
    kind = params.get("kind")
    if kind == "rrc":
        return design_rrc(params["beta"], params["n_s"], params["span"])
    if kind == "rc":
        return design_rc(params["beta"], params["n_s"], params["span"])
    if kind == "delta":
        return delta_filter()
    if kind == "pair":
        seed = filter_from_params(params["seed_filter"])
        lo, hi = params["radius_range"]
        casc = random_allpass_cascade(params["n_sections"], lo, hi, params["cascade_seed"])
        pair = make_shaping_pair(seed, casc, params["truncation_tol"])
        return pair.descramble if params.get("role") == "descramble" else pair.spread
    raise ValueError(f"cannot regenerate filter of kind {kind!r}")


def filter_to_csv(fir: FirFilter, path=None) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["tap_index", "value"])
    for i, v in enumerate(fir.taps.tolist()):
        w.writerow([i, repr(v)])
    text = out.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def filter_from_csv(path, label: str = "") -> FirFilter:
    rows = Path(path).read_text().splitlines()
    if rows[0].strip() != "tap_index,value":
        raise ValueError("expected a 'tap_index,value' header")
    vals = [float(r.split(",")[1]) for r in rows[1:] if r.strip()]
    return FirFilter(np.array(vals), 0, label)


def descriptor(fir: FirFilter) -> str:
    body = {"label": fir.label, "delay": fir.delay, "n_taps": len(fir), "params": fir.params}
    return json.dumps(body, indent=2, sort_keys=True)
