"""AWGN with calibrated SNR and power-weighted mixing."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal, Sequence

import numpy as np

from .filters import FirFilter, convolve
from .metrics import DegenerateInputError

Reference = Literal["channel-input", "matched-output"]


@dataclass(frozen=True)
class ChannelConfig:
    """``snr_db = inf`` switches the noise off."""

    snr_db: float
    seed: int = 0
    reference: Reference = "matched-output"

    def __post_init__(self):
        if self.reference not in ("channel-input", "matched-output"):
            raise ValueError(f"unknown SNR reference {self.reference!r}")

    @property
    def snr(self) -> float:
        return math.inf if math.isinf(self.snr_db) and self.snr_db > 0 else 10 ** (self.snr_db / 10)

    def to_dict(self) -> dict:
        return asdict(self)


def matched_power(buffer, matched: FirFilter) -> float:
    """Mean power of buffer * matched over the fully overlapped part of the convolution."""
    y = convolve(buffer, matched)
    lo, hi = len(matched) - 1, np.size(buffer)
    if hi - lo < max(1, len(matched) // 4):
        lo, hi = 0, y.size
    return float(np.mean(y[lo:hi] ** 2))


def awgn(
    buffer,
    config: ChannelConfig,
    matched: FirFilter | None = None,
    signal_power: float | None = None,
) -> tuple[np.ndarray, float]:
    """Add white Gaussian noise; returns (noisy buffer, sigma_n).

    sigma_n^2 = P / snr, where P is the buffer's own mean power for the
    channel-input reference, and the power after the (unit-energy)
    matched filter for the matched-output reference.  ``signal_power``
    overrides the measurement.
    """
    x = np.asarray(buffer, dtype=float)
    if math.isinf(config.snr):
        return x.copy(), 0.0
    if signal_power is None:
        if config.reference == "channel-input":
            signal_power = float(np.mean(x * x))
        else:
            if matched is None:
                raise ValueError("matched-output SNR needs the matched filter or a signal_power")
            signal_power = matched_power(x, matched) / matched.energy
    if not signal_power > 0:
        raise DegenerateInputError("signal has zero power")
    sigma = math.sqrt(signal_power / config.snr)
    rng = np.random.default_rng(config.seed)
    return x + sigma * rng.standard_normal(x.size), sigma


def scale_to_power(buffer, power: float) -> np.ndarray:
    """Copy of ``buffer`` rescaled to the given mean power (0 gives zeros)."""
    x = np.asarray(buffer, dtype=float)
    if power < 0:
        raise ValueError("power weights must be non-negative")
    if power == 0:
        return np.zeros_like(x)
    p = float(np.mean(x * x)) if x.size else 0.0
    if p == 0:
        raise DegenerateInputError("cannot rescale a zero-power component")
    return x * math.sqrt(power / p)


def mix(components: Sequence[tuple[np.ndarray, float]]) -> np.ndarray:
    """Rescale each component to its requested mean power, zero-pad to a common length, and sum."""
    if len(components) == 0:
        raise ValueError("nothing to mix")
    n = max(np.size(c) for c, _ in components)
    out = np.zeros(n)
    for buf, power in components:
        y = scale_to_power(buf, power)
        out[: y.size] += y
    return out
