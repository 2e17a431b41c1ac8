"""Quantile tracking, Tukey fencing, intermittently nonlinear filtering, pulse counting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .pulsegen import SparseTrain
from .special import erfc


@njit(cache=True)
def _qtf_kernel(x, q, mu, eps, q0):
    n = x.size
    out = np.empty(n)
    bias = 2.0 * q - 1.0
    qk = q0
    for k in range(n):
        out[k] = qk
        u = x[k] - qk
        if eps > 0.0:
            s = u / eps
            if s > 1.0:
                s = 1.0
            elif s < -1.0:
                s = -1.0
        elif u > 0.0:
            s = 1.0
        elif u < 0.0:
            s = -1.0
        else:
            s = 0.0
        qk = qk + mu * (s + bias)
    return out, qk


@dataclass
class QtfState:
    """Streaming quantile tracker; ``value`` is the output for the next sample."""

    q: float
    mu: float
    eps: float = 0.0
    value: float | None = None

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ValueError("quantile q must lie in (0, 1)")
        if not self.mu > 0:
            raise ValueError("rate mu must be positive")
        if self.eps < 0:
            raise ValueError("comparator width eps must be >= 0")

    def process(self, chunk) -> np.ndarray:
        x = np.ascontiguousarray(chunk, dtype=float)
        if x.size == 0:
            return np.empty(0)
        if self.value is None:
            self.value = float(x[0])
        out, self.value = _qtf_kernel(x, float(self.q), float(self.mu), float(self.eps), float(self.value))
        return out


def qtf_run(buffer, q: float, mu: float, eps: float = 0.0, init: float | None = None) -> np.ndarray:
    """Q[k+1] = Q[k] + mu * (S_eps(x[k] - Q[k]) + 2q - 1), Q[0] = init (default x[0]).

    S_eps is sign() for eps = 0 and clip(u/eps, -1, 1) otherwise.
    """
    return QtfState(q, mu, eps, init).process(buffer)


def default_mu(buffer, window_target: int = 10_000) -> float:
    """mu = IQR / window_target with the IQR bootstrapped from the leading samples."""
    from .metrics import iqr

    x = np.asarray(buffer, dtype=float)[:window_target]
    r = iqr(x)
    if r <= 0:
        raise ValueError("bootstrap window has zero IQR")
    return r / window_target


def beta_for_fp(eps_fp: float, rate: float, rate_max: float) -> float:
    """Tukey scale giving a false-positive count rate of eps_fp relative to the pulse rate."""
    if not 0 < eps_fp < 1:
        raise ValueError("eps_fp must lie in (0, 1)")
    if not 0 < rate < rate_max:
        raise ValueError("need 0 < rate < rate_max")
    return 1.05 * math.sqrt(math.log(rate_max / (eps_fp * rate))) - 0.5


def fn_rate_theory(a_over_sigma: float, eps_fp: float, rate: float, rate_max: float) -> float:
    """Probability that a pulse of peak |A| = a_over_sigma * sigma_n is not counted."""
    if a_over_sigma < 0 or eps_fp <= 0 or rate <= 0 or rate_max <= 0:
        raise ValueError("arguments must be positive")
    if math.isinf(a_over_sigma):
        return 0.0
    return 0.5 * erfc(a_over_sigma / math.sqrt(2) - math.sqrt(math.log(rate_max / (eps_fp * rate))))


@dataclass
class FenceTrack:
    lower: np.ndarray
    upper: np.ndarray
    beta: float = math.nan
    clamped: int = 0

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ValueError("fence tracks differ in length")
        if np.any(self.upper < self.lower):
            raise ValueError("upper fence below lower fence")

    def __len__(self) -> int:
        return self.lower.size

    @classmethod
    def constant(cls, lower: float, upper: float, n: int, beta: float = math.nan) -> "FenceTrack":
        return cls(np.full(n, float(lower)), np.full(n, float(upper)), beta)

    @property
    def midrange(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


def tukey_fences(q1_track, q3_track, beta: float) -> FenceTrack:
    """[Q1 - beta*(Q3-Q1), Q3 + beta*(Q3-Q1)]; points with Q3 < Q1 are clamped to Q1 and counted."""
    q1 = np.asarray(q1_track, dtype=float)
    q3 = np.asarray(q3_track, dtype=float)
    if q1.shape != q3.shape:
        raise ValueError("quartile tracks differ in length")
    bad = q3 < q1
    q3 = np.where(bad, q1, q3)
    spread = q3 - q1
    return FenceTrack(q1 - beta * spread, q3 + beta * spread, beta, int(np.count_nonzero(bad)))


def _split_exact(x, lo, hi):
    """(prime, aux) for outliers: prime in [lo, hi] near the mid-range, prime + aux == x in floats.

    The plain pair (m, x - m) loses the identity to rounding about one time
    in five.  A few candidate primes within an ulp or two of m, each with aux
    within an ulp of x - prime, recover it.  With |x| >= |m| the pair
    (x - fl(x - m), fl(x - m)) is exact (Fast2Sum).  Whatever still fails
    moves prime further from m, see ``_nearest_exact``.  The target can be
    unrepresentable (x = 0.3 against fences [5, 7] puts prime + aux on a
    grid of 2**-50); such samples keep (m, x - m).
    """
    m = 0.5 * (lo + hi)
    prime, aux = m.copy(), x - m
    for _ in range(3):
        idx = np.flatnonzero(prime + aux != x)
        if idx.size == 0:
            break
        xi, li, hi_, mi = x[idx], lo[idx], hi[idx], m[idx]
        done = np.zeros(idx.size, dtype=bool)
        up = np.nextafter(mi, np.inf)
        for cand in (xi - aux[idx], up, np.nextafter(mi, -np.inf), np.nextafter(up, np.inf)):
            cand = np.clip(cand, li, hi_)
            base = xi - cand
            for ca in (base, np.nextafter(base, np.inf), np.nextafter(base, -np.inf)):
                ok = (cand + ca == xi) & ~done
                prime[idx[ok]] = cand[ok]
                aux[idx[ok]] = ca[ok]
                done |= ok
    bad = np.flatnonzero(prime + aux != x)
    if bad.size:
        p, a = _nearest_exact(x[bad], lo[bad], hi[bad], m[bad])
        prime[bad], aux[bad] = p, a
    return prime, aux


def _nearest_exact(x, lo, hi, m):
    """Second stage: the prime closest to m for which x - prime is exact.

    x - p is a float whenever p lies on x's ulp grid and |x - p| < 2**53 ulp(x),
    so m is clamped into that window and snapped to the grid.  Outliers
    beyond reach keep (m, x - m).
    """
    with np.errstate(over="ignore", invalid="ignore"):
        u = np.spacing(np.abs(x))
        reach = 2.0**53 * u - u
        p0 = np.clip(m, np.maximum(lo, x - reach), np.minimum(hi, x + reach))
        cands = []
        for g in (u, 2 * u):
            c = np.round(p0 / g) * g
            cands += [c, c + g, c - g]
        c = np.stack(cands)
        a = x - c
        ok = (c >= lo) & (c <= hi) & (c + a == x) & np.isfinite(c)
    dist = np.where(ok, np.abs(c - m), np.inf)
    best = np.argmin(dist, axis=0)
    cols = np.arange(x.size)
    found = ok[best, cols]
    prime = np.where(found, c[best, cols], m)
    aux = np.where(found, a[best, cols], x - m)
    for i in np.flatnonzero(~found):
        prime[i], aux[i] = _aux_first(float(x[i]), float(lo[i]), float(hi[i]), float(m[i]))
    return prime, aux


def _binade_edges(lo: float, hi: float, near: float, limit: int = 24) -> list[float]:
    """Signed powers of two inside [lo, hi], and their lower neighbours, closest in exponent to ``near``."""
    out = []
    for sign, a, b in ((1.0, max(lo, 0.0), hi), (-1.0, max(-hi, 0.0), -lo)):
        if b <= 0 or a > b:
            continue
        k_lo = math.ceil(math.log2(a)) if a > 0 else -1074
        k_hi = math.floor(math.log2(b))
        k0 = math.frexp(near)[1] if near else 0
        ks = sorted(range(k_lo, k_hi + 1), key=lambda k: abs(k - k0))[:limit]
        for k in ks:
            e = math.ldexp(1.0, k)
            out += [sign * e, sign * math.nextafter(e, 0.0)]
    return out


def _aux_first(x: float, lo: float, hi: float, m: float) -> tuple[float, float]:
    """Third stage: fix aux = fl(x - c) for targets c at the fences and binade edges, then prime = x - aux.

    Reaches primes whose binade is finer than x's while aux sits in a coarser one.
    """
    best, best_d = (m, x - m), math.inf
    for c in [m, lo, hi, *_binade_edges(lo, hi, x)]:
        a0 = x - c
        for a in (a0, math.nextafter(a0, math.inf), math.nextafter(a0, -math.inf)):
            p0 = x - a
            for p in (p0, math.nextafter(p0, math.inf), math.nextafter(p0, -math.inf)):
                if lo <= p <= hi and p + a == x and abs(p - m) < best_d:
                    best, best_d = (p, a), abs(p - m)
    return best


def inf_filter(buffer, fences: FenceTrack) -> tuple[np.ndarray, np.ndarray]:
    """Replace samples outside the fences by the mid-range; returns (prime, aux = input - prime).

    prime + aux reproduces the input bit for bit wherever that is
    representable.  Outliers with |x| >= |mid-range| get exactly the
    mid-range up to an ulp or two, which covers all of them when
    lo <= 0 <= hi and neither fence exceeds three times the other in
    magnitude.  Elsewhere prime may move toward x, but never outside the
    fences.
    """
    x = np.asarray(buffer, dtype=float)
    if len(fences) < x.size:
        raise ValueError("fences do not cover the buffer")
    lo, hi = fences.lower[: x.size], fences.upper[: x.size]
    outside = np.flatnonzero((x < lo) | (x > hi))
    prime = x.copy()
    aux = np.zeros_like(x)
    if outside.size:
        prime[outside], aux[outside] = _split_exact(x[outside], lo[outside], hi[outside])
    return prime, aux


def count_indicator(buffer, fences: FenceTrack) -> np.ndarray:
    """Unit at local extrema that protrude from the fences; endpoints are never counted."""
    x = np.asarray(buffer, dtype=float)
    if len(fences) < x.size:
        raise ValueError("fences do not cover the buffer")
    c = np.zeros(x.size, dtype=np.int8)
    if x.size < 3:
        return c
    xk, xp, xn = x[1:-1], x[:-2], x[2:]
    up = (xk > fences.upper[1 : x.size - 1]) & (xk > xp) & (xk >= xn)
    dn = (xk < fences.lower[1 : x.size - 1]) & (xk < xp) & (xk <= xn)
    c[1:-1] = up | dn
    return c


def pulse_count(buffer, fences: FenceTrack) -> SparseTrain:
    """Sample the buffer at counted peaks: a train of (k, x[k])."""
    x = np.asarray(buffer, dtype=float)
    idx = np.flatnonzero(count_indicator(x, fences))
    idx = idx[x[idx] != 0.0]
    return SparseTrain(idx, x[idx], x.size)


@dataclass
class FencePipeline:
    """Chunked QTF quartile tracking + Tukey fences + INF.

    State lives in the two trackers, so splitting the input into chunks
    of any size yields bit-identical output.
    """

    beta: float
    mu: float
    eps: float = 0.0
    q1_init: float | None = None
    q3_init: float | None = None
    clamped: int = 0
    _q1: QtfState = field(init=False, repr=False)
    _q3: QtfState = field(init=False, repr=False)

    def __post_init__(self):
        self._q1 = QtfState(0.25, self.mu, self.eps, self.q1_init)
        self._q3 = QtfState(0.75, self.mu, self.eps, self.q3_init)

    @classmethod
    def bootstrap(cls, head, beta: float, window_target: int = 10_000, eps: float = 0.0) -> "FencePipeline":
        """mu and initial quartiles from exact statistics of the leading samples."""
        from .metrics import exact_quartiles

        x = np.asarray(head, dtype=float)[:window_target]
        q1, q3 = exact_quartiles(x)
        return cls(beta, (q3 - q1) / window_target, eps, q1, q3)

    def fences(self, chunk) -> FenceTrack:
        q1 = self._q1.process(chunk)
        q3 = self._q3.process(chunk)
        f = tukey_fences(q1, q3, self.beta)
        self.clamped += f.clamped
        return f

    def process(self, chunk) -> tuple[np.ndarray, np.ndarray, FenceTrack]:
        f = self.fences(chunk)
        prime, aux = inf_filter(chunk, f)
        return prime, aux, f


def run_fence_pipeline(buffer, beta: float, mu: float | None = None, chunk: int | None = None,
                       window_target: int = 10_000, start: int = 0) -> tuple[np.ndarray, np.ndarray, FenceTrack]:
    """Whole-buffer convenience wrapper around FencePipeline.

    The bootstrap statistics come from ``window_target`` samples at
    ``start``; skip filter ramp-up there, or the trackers begin with a
    tiny spread and a tiny rate.
    """
    x = np.asarray(buffer, dtype=float)
    pipe = FencePipeline.bootstrap(x[start:] if start < x.size else x, beta, window_target)
    if mu is not None:
        pipe = FencePipeline(beta, mu, 0.0, pipe.q1_init, pipe.q3_init)
    step = chunk or max(1, x.size)
    parts = [pipe.process(x[i : i + step]) for i in range(0, x.size, step)]
    prime = np.concatenate([p[0] for p in parts])
    aux = np.concatenate([p[1] for p in parts])
    f = FenceTrack(np.concatenate([p[2].lower for p in parts]), np.concatenate([p[2].upper for p in parts]),
                   beta, pipe.clamped)
    return prime, aux, f
