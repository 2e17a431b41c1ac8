"""Crest factor, TBP ratios, robust spread and Gaussianity diagnostics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.signal as sps

from .filters import FirFilter


class DegenerateInputError(ValueError):
    pass


class InvalidComparisonError(ValueError):
    pass


@dataclass(frozen=True)
class CrestReport:
    papr: float
    papr_db: float
    support: tuple[int, int]

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass(frozen=True)
class GaussianityReport:
    excess_kurtosis: float
    iqr: float
    sigma_hat: float
    n: int

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _slice(x: np.ndarray, interval) -> tuple[np.ndarray, tuple[int, int]]:
    if interval is None:
        lo, hi = 0, x.size
    else:
        lo, hi = int(interval[0]), int(interval[1])
    if not 0 <= lo < hi <= x.size:
        raise ValueError(f"interval [{lo}, {hi}) is empty or outside the buffer")
    return x[lo:hi], (lo, hi)


def papr(buffer, interval=None) -> CrestReport:
    """Peak over mean squared sample on the half-open sample interval [lo, hi)."""
    x, support = _slice(np.asarray(buffer, dtype=float), interval)
    p = x * x
    mean = float(np.mean(p))
    if mean == 0.0:
        raise DegenerateInputError("all-zero interval has no PAPR")
    r = float(np.max(p)) / mean
    return CrestReport(r, 10 * np.log10(r), support)


def centered_papr(pulse, center: int, width: int) -> float:
    """PAPR of a single pulse on [center - width/2, center + width/2), zero-padded outside its support."""
    x = np.asarray(pulse, dtype=float)
    lo = center - width // 2
    seg = np.zeros(width)
    a, b = max(lo, 0), min(lo + width, x.size)
    if b > a:
        seg[a - lo : b - lo] = x[a:b]
    return papr(seg).papr


def _taps(f) -> np.ndarray:
    return f.taps if isinstance(f, FirFilter) else np.asarray(f, dtype=float)


def psd_mismatch(f1, f2, nfft: int | None = None) -> float:
    """Relative L2 distance between the two power responses."""
    a, b = _taps(f1), _taps(f2)
    n = nfft or int(2 ** np.ceil(np.log2(max(a.size, b.size) * 4)))
    pa = np.abs(np.fft.rfft(a, n)) ** 2
    pb = np.abs(np.fft.rfft(b, n)) ** 2
    return float(np.linalg.norm(pa - pb) / np.linalg.norm(pa))


def tbp_ratio(f1, f2, interval: int | None = None, psd_tol: float = 0.01) -> float:
    """TBP_f2 / TBP_f1 = PAPR_f1 / PAPR_f2 for filters with equal power spectra.

    Both filters are placed on a common support of ``interval`` samples
    (default: the longer of the two), so the ratio reduces to the ratio of
    peak powers when the energies agree.
    """
    a, b = _taps(f1), _taps(f2)
    mismatch = psd_mismatch(a, b)
    if mismatch > psd_tol:
        raise InvalidComparisonError(f"power spectra differ by {mismatch:.3g} (relative L2)")
    n = interval or max(a.size, b.size)
    if n < max(a.size, b.size):
        raise ValueError("interval must cover both filters")
    pa = papr(np.pad(a, (0, n - a.size))).papr
    pb = papr(np.pad(b, (0, n - b.size))).papr
    return pa / pb


def gabor_tbp(f, nfft: int = 1 << 18) -> float:
    """4*pi*sigma_t*sigma_f from the temporal and spectral power densities."""
    h = _taps(f)
    n = np.arange(h.size)
    pt = h * h / np.sum(h * h)
    mt = np.sum(n * pt)
    st = np.sqrt(np.sum((n - mt) ** 2 * pt))
    pf = np.abs(np.fft.fft(h, max(nfft, 4 * h.size))) ** 2
    freqs = np.fft.fftfreq(pf.size)
    pf /= pf.sum()
    mf = np.sum(freqs * pf)
    sf = np.sqrt(np.sum((freqs - mf) ** 2 * pf))
    return float(4 * np.pi * st * sf)


def exact_quartiles(buffer) -> tuple[float, float]:
    """Q1, Q3 by linear interpolation between order statistics (type 7)."""
    x = np.asarray(buffer, dtype=float).reshape(-1)
    if x.size < 4:
        raise ValueError("need at least 4 samples for quartiles")
    q1, q3 = np.quantile(x, [0.25, 0.75], method="linear")
    return float(q1), float(q3)


def iqr(buffer) -> float:
    q1, q3 = exact_quartiles(buffer)
    return q3 - q1


def excess_kurtosis(buffer) -> float:
    x = np.asarray(buffer, dtype=float).reshape(-1)
    if x.size < 8:
        raise ValueError("need at least 8 samples for kurtosis")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if m2 == 0.0:
        raise DegenerateInputError("zero variance")
    m4 = np.mean(d**4)
    return float(m4 / (m2 * m2) - 3.0)


def gaussianity(buffer) -> GaussianityReport:
    x = np.asarray(buffer, dtype=float).reshape(-1)
    r = iqr(x)
    return GaussianityReport(excess_kurtosis(x), r, r / 1.349, int(x.size))


def upcrossing_rate(buffer, threshold: float) -> float:
    """Fraction of samples k with x[k-1] <= threshold < x[k]."""
    x = np.asarray(buffer, dtype=float)
    if not np.isfinite(threshold):
        raise ValueError("threshold must be finite")
    if x.size < 2:
        return 0.0
    ups = np.count_nonzero((x[:-1] <= threshold) & (x[1:] > threshold))
    return ups / x.size


def saturation_rate(n_s: float) -> float:
    """Zero up-crossing rate of (R)RC-filtered noise, (2 T_s sqrt(3))^-1 with T_s = n_s samples."""
    return 1.0 / (2.0 * n_s * np.sqrt(3.0))


def occupied_bandwidth(beta: float, n_s: float) -> float:
    """One-sided occupied bandwidth of an (R)RC pulse, (1 + beta)/(2 n_s) cycles/sample."""
    return (1.0 + beta) / (2.0 * n_s)


def psd_estimate(buffer, segment_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Averaged periodogram (Hann taper, 50% overlap), two-sided, centred.

    Bins are scaled so their sum is the mean power of the buffer.
    """
    x = np.asarray(buffer, dtype=float)
    if segment_len > x.size:
        raise ValueError("segment_len exceeds buffer length")
    if segment_len < 2 or segment_len & (segment_len - 1):
        raise ValueError("segment_len must be a power of two")
    f, p = sps.welch(
        x, fs=1.0, window="hann", nperseg=segment_len, noverlap=segment_len // 2,
        detrend=False, return_onesided=False, scaling="density",
    )
    p = p / segment_len
    order = np.argsort(f)
    return f[order], p[order]


def spectrum_to_csv(freqs, psd, path=None) -> str:
    lines = ["freq,psd"] + [f"{f!r},{p!r}" for f, p in zip(np.asarray(freqs).tolist(), np.asarray(psd).tolist())]
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
