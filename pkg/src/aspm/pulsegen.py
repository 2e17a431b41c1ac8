"""Sparse pulse trains: encoding, rendering, decoding and CSV I/O.

A pulse train is a frame of ``length`` samples where only a few samples
carry non-zero amplitudes.  Frames open with a silent prefix, so pulse j
(1-based) of an equidistant train sits at sample j * n_p.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np


@dataclass(frozen=True)
class SparseTrain:
    """(index, amplitude) pairs over a frame of ``length`` samples."""

    indices: np.ndarray
    amplitudes: np.ndarray
    length: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        amp = np.asarray(self.amplitudes, dtype=float).reshape(-1)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "length", int(self.length))
        if idx.shape != amp.shape:
            raise ValueError("indices and amplitudes differ in length")
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.length:
                raise ValueError("pulse index outside [0, length)")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("pulse indices must be strictly increasing")
            if np.any(amp == 0.0):
                raise ValueError("zero amplitudes are not stored")

    def __len__(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other):
        if not isinstance(other, SparseTrain):
            return NotImplemented
        return (
            self.length == other.length
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.amplitudes, other.amplitudes)
        )

    @property
    def pulses(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.amplitudes.tolist()))


@dataclass(frozen=True)
class EncodingSpec:
    """How a component's pulse train is laid out.

    ``scheme`` is ``"equidistant"`` (polarity-keyed bits every ``n_p``
    samples) or ``"random"`` (shifted-geometric gaps with mean ``n_p`` and
    minimum ``min_gap``).
    """

    scheme: Literal["equidistant", "random"] = "equidistant"
    n_p: int = 64
    min_gap: int = 1
    amplitude: float = 1.0
    random_polarity: bool = True

    def __post_init__(self):
        if self.scheme not in ("equidistant", "random"):
            raise ValueError(f"unknown encoding scheme {self.scheme!r}")
        if self.n_p < 1 or self.min_gap < 1:
            raise ValueError("n_p and min_gap must be >= 1")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if self.scheme == "random" and self.min_gap > self.n_p:
            raise ValueError("min_gap cannot exceed the mean gap n_p")


def _as_bits(bits) -> np.ndarray:
    if isinstance(bits, str):
        bits = parse_bits(bits)
    arr = np.asarray(bits, dtype=np.int64).reshape(-1)
    if arr.size == 0:
        raise ValueError("bit sequence is empty")
    if np.any((arr != 0) & (arr != 1)):
        raise ValueError("bits must be 0 or 1")
    return arr


def encode_equidistant(bits, n_p: int, amplitude: float = 1.0) -> SparseTrain:
    """Polarity-keyed train: bit b_j -> amplitude * (-1)**b_j at sample j*n_p."""
    b = _as_bits(bits)
    if n_p < 1:
        raise ValueError("n_p must be >= 1")
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    idx = n_p * np.arange(1, b.size + 1, dtype=np.int64)
    amp = amplitude * (1.0 - 2.0 * b)
    return SparseTrain(idx, amp, (b.size + 1) * n_p)


def geometric_gaps(n: int, mean_gap: float, min_gap: int, rng: np.random.Generator) -> np.ndarray:
    """Shifted geometric interarrival gaps with the given mean and minimum."""
    if not mean_gap >= min_gap >= 1:
        raise ValueError("need mean_gap >= min_gap >= 1")
    p = 1.0 / (mean_gap - min_gap + 1.0)
    return (min_gap - 1) + rng.geometric(p, size=n).astype(np.int64)


def encode_random(
    n_pulses: int,
    mean_gap: float,
    min_gap: int = 1,
    amplitude_dist: Literal["fixed-polarity-random", "fixed"] = "fixed-polarity-random",
    seed: int = 0,
    amplitude: float = 1.0,
) -> SparseTrain:
    """Randomly timed train; the first pulse sits at the first gap draw."""
    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    if amplitude_dist not in ("fixed-polarity-random", "fixed"):
        raise ValueError(f"unknown amplitude_dist {amplitude_dist!r}")
    rng = np.random.default_rng(seed)
    gaps = geometric_gaps(n_pulses, mean_gap, min_gap, rng)
    idx = np.cumsum(gaps)
    if amplitude_dist == "fixed-polarity-random":
        amp = amplitude * rng.choice(np.array([-1.0, 1.0]), size=n_pulses)
    else:
        amp = np.full(n_pulses, float(amplitude))
    length = int(idx[-1]) + int(np.ceil(mean_gap))
    return SparseTrain(idx, amp, length)


def render(train: SparseTrain) -> np.ndarray:
    buf = np.zeros(train.length)
    buf[train.indices] = train.amplitudes
    return buf


def sparsify(buffer) -> SparseTrain:
    x = np.asarray(buffer, dtype=float)
    idx = np.flatnonzero(x)
    return SparseTrain(idx, x[idx], x.size)


def decode_polarity(buffer, sample_indices) -> np.ndarray:
    """Bit 1 for negative samples, 0 otherwise (exact zero decodes as 0)."""
    x = np.asarray(buffer, dtype=float)
    k = np.asarray(sample_indices, dtype=np.int64)
    if k.size and (k.min() < 0 or k.max() >= x.size):
        raise ValueError("sample index out of range")
    return (x[k] < 0).astype(np.int8)


def parse_bits(text: str) -> np.ndarray:
    text = "".join(text.split())
    if text and set(text) - {"0", "1"}:
        raise ValueError("bit strings may contain only '0' and '1'")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def format_bits(bits: Iterable[int]) -> str:
    return "".join("1" if int(b) else "0" for b in bits)


def train_to_csv(train: SparseTrain, path=None) -> str:
    """Write ``k,A`` rows; the frame length goes in a leading comment line."""
    out = io.StringIO()
    out.write(f"# length={train.length}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["k", "A"])
    for k, a in zip(train.indices.tolist(), train.amplitudes.tolist()):
        w.writerow([k, repr(a)])
    text = out.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def train_from_csv(source) -> SparseTrain:
    text = Path(source).read_text() if isinstance(source, (str, Path)) and "\n" not in str(source) else str(source)
    length = None
    rows: list[Sequence[str]] = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key.strip() == "length":
                length = int(val)
            continue
        if line.strip():
            rows.append(line.split(","))
    if not rows or [c.strip() for c in rows[0]] != ["k", "A"]:
        raise ValueError("expected a 'k,A' header")
    k = np.array([int(r[0]) for r in rows[1:]], dtype=np.int64)
    a = np.array([float(r[1]) for r in rows[1:]], dtype=float)
    if length is None:
        length = int(k[-1]) + 1 if k.size else 0
    return SparseTrain(k, a, length)
