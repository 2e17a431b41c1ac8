"""End-to-end compositions: basic link, stego mixture, layered cover, friendly jamming, OFDM PAPR.

Every random draw comes from one master seed.  Each consumer gets its own
stream, keyed by a component id string (see ``component_rng``), so adding a
component or a trial never perturbs the others.
"""

from __future__ import annotations

import configparser
import datetime as _dt
import functools
import json
import math
import time
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelConfig, awgn, matched_power, scale_to_power
from .filters import (
    DEFAULT_TRUNCATION_TOL,
    ShapingPair,
    convolve,
    delta_filter,
    design_rc,
    design_rrc,
    make_shaping_pair,
    random_allpass_cascade,
    sampled_convolve,
    sparse_convolve,
)
from .inf import beta_for_fp, pulse_count, run_fence_pipeline
from .metrics import excess_kurtosis, iqr, papr, psd_estimate, saturation_rate
from .pulsegen import EncodingSpec, encode_equidistant, encode_random, render
from .receiver import detect_synchronous, ber_theory, rc_train_papr, run_sync

SCENARIOS = ("basic", "stego", "layered", "jamming", "ofdm-papr")


# -- seeding ---------------------------------------------------------------

def component_seed(master: int, component: str) -> np.random.SeedSequence:
    """Stream for one component: the master seed plus the CRC-32 of its id."""
    if master < 0:
        raise ValueError("master seed must be non-negative")
    return np.random.SeedSequence([int(master), zlib.crc32(component.encode())])


def component_rng(master: int, component: str) -> np.random.Generator:
    return np.random.default_rng(component_seed(master, component))


def component_int(master: int, component: str) -> int:
    """63-bit integer seed for APIs that take plain ints."""
    return int(component_seed(master, component).generate_state(1, np.uint64)[0] >> np.uint64(1))


# -- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class KeySpec:
    """Everything needed to regenerate a shaping pair."""

    key: int = 1
    sections: int = 21
    radius_min: float = 0.85
    radius_max: float = 0.98
    seed_filter: str = "rrc"  # "rrc" or "delta"
    beta: float = 0.5
    n_s: int = 2
    span: int = 32
    truncation_tol: float = DEFAULT_TRUNCATION_TOL

    def __post_init__(self):
        if self.seed_filter not in ("rrc", "delta"):
            raise ValueError(f"unknown seed filter {self.seed_filter!r}")
        if self.sections < 0:
            raise ValueError("sections must be >= 0")

    @property
    def cascade_key(self) -> tuple:
        return (self.key, self.sections, self.radius_min, self.radius_max)


@functools.lru_cache(maxsize=32)
def shaping_pair(spec: KeySpec) -> ShapingPair:
    """Cached key -> pair construction (long cascades are costly to ring down)."""
    seed = delta_filter() if spec.seed_filter == "delta" else design_rrc(spec.beta, spec.n_s, spec.span)
    cascade = random_allpass_cascade(spec.sections, spec.radius_min, spec.radius_max, seed=spec.key)
    return make_shaping_pair(seed, cascade, spec.truncation_tol)


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    encoding: EncodingSpec = EncodingSpec()
    key: KeySpec = KeySpec()
    power_db: float = 0.0
    # pulse pre-shaping before the key's spreading filter: "none" or "rc"
    pulse: str = "none"

    def __post_init__(self):
        if self.pulse not in ("none", "rc"):
            raise ValueError(f"unknown pulse shape {self.pulse!r}")

    @property
    def power(self) -> float:
        return 10 ** (self.power_db / 10)


@dataclass(frozen=True)
class ReceiverPlan:
    sync: str = "ideal"  # "ideal", "MPA" or "MMA"
    M: float = 8.0
    inf: bool = False
    eps_fp: float = 1e-3
    beta: float | None = None  # overrides the eps_fp rule when set
    window_target: int = 10_000

    def __post_init__(self):
        if self.sync not in ("ideal", "MPA", "MMA"):
            raise ValueError(f"unknown sync mode {self.sync!r}")

    def fence_beta(self, rate: float, rate_max: float) -> float:
        return self.beta if self.beta is not None else beta_for_fp(self.eps_fp, rate, rate_max)


@dataclass(frozen=True)
class OfdmPlan:
    carriers: int = 64
    symbols: int = 200
    oversample: int = 4
    alphabet: str = "antipodal"


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    components: tuple[ComponentSpec, ...]
    channel: ChannelConfig = ChannelConfig(math.inf)
    receiver: ReceiverPlan = ReceiverPlan()
    ofdm: OfdmPlan = OfdmPlan()
    trials: int = 1
    seed: int = 0
    n_bits: int = 2000

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.trials < 0 or self.n_bits < 1:
            raise ValueError("trials must be >= 0 and n_bits >= 1")
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise ValueError("component names must be unique")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channel"]["snr_db"] = _json_float(self.channel.snr_db)
        return d


def _json_float(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


_SECTION_KEYS = {
    "scenario": {"kind", "seed", "trials", "n_bits"},
    "channel": {"snr_db", "reference"},
    "receiver": {"sync", "m", "inf", "eps_fp", "beta", "window_target"},
    "ofdm": {"carriers", "symbols", "oversample", "alphabet"},
}
_COMPONENT_KEYS = {
    "scheme", "n_p", "min_gap", "amplitude", "random_polarity", "power_db", "pulse",
    "key", "sections", "radius_min", "radius_max", "seed_filter", "beta", "n_s", "span", "truncation_tol",
}


def parse_config(text: str) -> ScenarioConfig:
    """Parse a sectioned key-value scenario file; unknown sections or keys are errors.

    Components are sections named ``component:<name>`` in mixing order.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([str(exc)]) from exc
    problems: list[str] = []
    for sec in cp.sections():
        allowed = _COMPONENT_KEYS if sec.startswith("component:") else _SECTION_KEYS.get(sec)
        if allowed is None:
            problems.append(f"unknown section [{sec}]")
            continue
        for k in cp[sec]:
            if k not in allowed:
                problems.append(f"unknown key '{k}' in [{sec}]")
    if "scenario" not in cp:
        problems.append("missing [scenario] section")
    if problems:
        raise ConfigError(problems)

    def get(sec, key, conv, default):
        if sec not in cp or key not in cp[sec]:
            return default
        raw = cp[sec][key]
        try:
            return conv(raw)
        except ValueError:
            problems.append(f"bad value {raw!r} for '{key}' in [{sec}]")
            return default

    def boolean(s):
        v = s.strip().lower()
        if v in ("1", "yes", "true", "on"):
            return True
        if v in ("0", "no", "false", "off"):
            return False
        raise ValueError(s)

    def opt_float(s):
        return None if s.strip().lower() in ("", "none") else float(s)

    comps = []
    for sec in cp.sections():
        if not sec.startswith("component:"):
            continue
        g = functools.partial(get, sec)
        try:
            enc = EncodingSpec(g("scheme", str, "equidistant"), g("n_p", int, 64), g("min_gap", int, 1),
                               g("amplitude", float, 1.0), g("random_polarity", boolean, True))
            key = KeySpec(g("key", int, 1), g("sections", int, 21), g("radius_min", float, 0.85),
                          g("radius_max", float, 0.98), g("seed_filter", str, "rrc"), g("beta", float, 0.5),
                          g("n_s", int, 2), g("span", int, 32), g("truncation_tol", float, DEFAULT_TRUNCATION_TOL))
            comps.append(ComponentSpec(sec.split(":", 1)[1], enc, key, g("power_db", float, 0.0), g("pulse", str, "none")))
        except ValueError as exc:
            problems.append(f"[{sec}]: {exc}")
    try:
        cfg = ScenarioConfig(
            scenario=get("scenario", "kind", str, ""),
            components=tuple(comps),
            channel=ChannelConfig(get("channel", "snr_db", float, math.inf),
                                  reference=get("channel", "reference", str, "matched-output")),
            receiver=ReceiverPlan(get("receiver", "sync", str, "ideal"), get("receiver", "m", float, 8.0),
                                  get("receiver", "inf", boolean, False), get("receiver", "eps_fp", float, 1e-3),
                                  get("receiver", "beta", opt_float, None),
                                  get("receiver", "window_target", int, 10_000)),
            ofdm=OfdmPlan(get("ofdm", "carriers", int, 64), get("ofdm", "symbols", int, 200),
                          get("ofdm", "oversample", int, 4), get("ofdm", "alphabet", str, "antipodal")),
            trials=get("scenario", "trials", int, 1),
            seed=get("scenario", "seed", int, 0),
            n_bits=get("scenario", "n_bits", int, 2000),
        )
    except ValueError as exc:
        problems.append(str(exc))
        cfg = None
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


# -- reports ---------------------------------------------------------------

def tap_stats(buffer) -> dict:
    """Kurtosis / IQR / PAPR / power of one tap point."""
    x = np.asarray(buffer, dtype=float)
    out = {"n": int(x.size), "power": float(np.mean(x * x)) if x.size else 0.0}
    if x.size >= 8 and np.any(x != 0):
        out.update(excess_kurtosis=excess_kurtosis(x), iqr=iqr(x), papr_db=papr(x).papr_db)
    return out


@dataclass
class ScenarioReport:
    scenario: str
    config: dict
    components: dict = field(default_factory=dict)
    taps: dict = field(default_factory=dict)
    psd_bump_db: float | None = None
    notes: list = field(default_factory=list)
    version: str = __version__
    runtime_s: float = 0.0
    created: str = ""
    tap_buffers: dict = field(default_factory=dict, repr=False)

    VOLATILE = ("runtime_s", "created")

    def to_dict(self, stable: bool = False) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "tap_buffers"}
        if stable:
            for k in self.VOLATILE:
                d.pop(k)
        return d

    def to_json(self, stable: bool = False) -> str:
        return json.dumps(_jsonable(self.to_dict(stable)), indent=2, sort_keys=True)

    def add_tap(self, name: str, buffer, region: slice | None = None):
        x = np.asarray(buffer, dtype=float)
        self.tap_buffers[name] = x
        self.taps[name] = tap_stats(x[region] if region is not None else x)

    def dump_taps(self, outdir) -> list[Path]:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, x in self.tap_buffers.items():
            p = out / f"tap_{name}.csv"
            with open(p, "w") as fh:
                fh.write("k,x\n")
                fh.writelines(f"{k},{v!r}\n" for k, v in enumerate(x.tolist()))
            paths.append(p)
        return paths


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _json_float(float(obj))
    return obj


def _new_report(config: ScenarioConfig) -> ScenarioReport:
    return ScenarioReport(config.scenario, config.to_dict(),
                          created=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))


def _finish(report: ScenarioReport, t0: float) -> ScenarioReport:
    report.runtime_s = time.perf_counter() - t0
    return report


# -- shared stages ---------------------------------------------------------

def _bits(config: ScenarioConfig, comp: ComponentSpec, trial: int, n: int | None = None) -> np.ndarray:
    return component_rng(config.seed, f"{comp.name}/bits/{trial}").integers(0, 2, n or config.n_bits)


def _pre_shape(comp: ComponentSpec, buf: np.ndarray) -> tuple[np.ndarray, int]:
    if comp.pulse == "none":
        return buf, 0
    rc = design_rc(comp.key.beta, comp.key.n_s, comp.key.span)
    return convolve(buf, rc), rc.delay


def _transmit(comp: ComponentSpec, train) -> tuple[np.ndarray, int]:
    """Render, pre-shape and spread; returns (buffer, extra delay of the pre-shaping)."""
    pair = shaping_pair(comp.key)
    shaped, d = _pre_shape(comp, render(train))
    return convolve(shaped, pair.spread), d


def _steady(n: int, lo: int, hi: int) -> slice:
    """[lo, hi) clipped to the buffer, falling back to everything if empty."""
    lo, hi = max(0, lo), min(n, hi)
    return slice(lo, hi) if hi - lo >= 8 else slice(0, n)


def _fence_rates(comp: ComponentSpec) -> tuple[float, float]:
    return 1.0 / comp.encoding.n_p, saturation_rate(comp.key.n_s)


def psd_bump_db(with_payload, without_payload, segment_len: int = 1024) -> float:
    """Largest per-bin PSD difference (dB) between two recordings of the same channel."""
    n = min(np.size(with_payload), np.size(without_payload))
    seg = min(segment_len, 1 << int(math.log2(max(n, 2))))
    _, a = psd_estimate(np.asarray(with_payload)[:n], seg)
    _, b = psd_estimate(np.asarray(without_payload)[:n], seg)
    ok = (a > 0) & (b > 0)
    return float(np.max(np.abs(10 * np.log10(a[ok] / b[ok]))))


# -- basic link ------------------------------------------------------------

def run_basic_link(config: ScenarioConfig) -> ScenarioReport:
    """encode -> spread -> AWGN -> [INF] -> descramble -> sync -> detect, first component only."""
    t0 = time.perf_counter()
    rep = _new_report(config)
    comp = config.components[0]
    if comp.encoding.scheme != "equidistant":
        raise ValueError("the basic link needs an equidistant (synchronous) encoding")
    pair = shaping_pair(comp.key)
    n_p, plan = comp.encoding.n_p, config.receiver
    errs = nbits = 0
    offsets = []
    sigma = 0.0
    for trial in range(config.trials):
        bits = _bits(config, comp, trial)
        train = encode_equidistant(bits, n_p, comp.encoding.amplitude)
        tx, _ = _transmit(comp, train)
        ch = replace(config.channel, seed=component_int(config.seed, f"channel/{trial}"))
        rx, sigma = awgn(tx, ch, matched=pair.descramble)
        stage = rx
        if plan.inf:
            stage, _, fences = run_fence_pipeline(rx, plan.fence_beta(*_fence_rates(comp)),
                                                  window_target=plan.window_target, start=len(pair.spread) - 1)
            if fences.clamped:
                rep.notes.append(f"trial {trial}: {fences.clamped} fence samples clamped")
        y = convolve(stage, pair.descramble)
        delay = n_p + pair.delay
        sync = None
        if plan.sync != "ideal":
            # blind warm-up over the first 4M periods, then decide with a locked tracker
            sync = run_sync(y, n_p, plan.M, plan.sync, n_windows=int(math.ceil(4 * plan.M)))
        r = detect_synchronous(y, n_p, bits, delay, sync)
        errs += r.n_errors
        nbits += r.n_bits
        offsets.append(r.sync_offset_error)
        if trial == 0:
            steady = _steady(tx.size, len(pair.spread) - 1, train.length)
            rep.add_tap("transmit", tx, steady)
            rep.add_tap("channel", rx, steady)
            if plan.inf:
                rep.add_tap("post_inf", stage, steady)
            rep.add_tap("post_g", y, _steady(y.size, delay, delay + bits.size * n_p))
            if sigma > 0:
                rep.psd_bump_db = psd_bump_db(rx, rx - tx)
    snr = config.channel.snr
    theory = ber_theory(snr, rc_train_papr(n_p, comp.key.n_s)) if math.isfinite(snr) else 0.0
    rep.components[comp.name] = {
        "ber": errs / nbits if nbits else math.nan, "n_errors": errs, "n_bits": nbits,
        "ber_theory": theory, "sigma_n": sigma, "sync": plan.sync, "sync_offsets": offsets,
    }
    return _finish(rep, t0)


def simulate_ber(n_p: int, n_s: int, snr_db: float, n_bits: int, seed: int = 0, span: int = 32,
                 chunk_samples: int = 1 << 22) -> dict:
    """Ideal-sync waveform Monte-Carlo of the plain RRC link, processed in chunks.

    Noise is drawn for every channel sample, but the matched filter is
    evaluated only at the decision instants.  SNR is referenced to the
    matched-filter output; the noise level is set once from the first
    chunk's restored-train power and held fixed.
    """
    pair = make_shaping_pair(design_rrc(0.5, n_s, span), random_allpass_cascade(0, seed=0))
    per_chunk = max(1, chunk_samples // n_p)
    errs = done = 0
    power = None
    chunk = 0
    while done < n_bits:
        nb = min(per_chunk, n_bits - done)
        bits = component_rng(seed, f"ber/bits/{chunk}").integers(0, 2, nb)
        train = encode_equidistant(bits, n_p)
        if n_p >= len(pair.spread):
            tx = sparse_convolve(train, pair.spread)
        else:
            tx = convolve(render(train), pair.spread)
        if power is None:
            power = matched_power(tx, pair.descramble) / pair.descramble.energy
        rx, _ = awgn(tx, ChannelConfig(snr_db, seed=component_int(seed, f"ber/noise/{chunk}")), signal_power=power)
        k = n_p + pair.delay + n_p * np.arange(nb)
        y = sampled_convolve(rx, pair.descramble, k)
        errs += int(np.count_nonzero((y < 0) != (bits == 1)))
        done += nb
        chunk += 1
    snr = 10 ** (snr_db / 10)
    pr = rc_train_papr(n_p, n_s)
    return {"snr_db": snr_db, "n_p": n_p, "n_s": n_s, "n_bits": done, "n_errors": errs,
            "ber_sim": errs / done if done else math.nan, "ber_theory": ber_theory(snr, pr), "papr": pr}


# -- stego mixture ---------------------------------------------------------

def run_stego_mixture(K: int, config: ScenarioConfig) -> ScenarioReport:
    """K keyed components mixed and separated by descrambling with each key.

    Noise (if any) is set against the total mixture power at channel input.
    """
    t0 = time.perf_counter()
    if K < 1 or K > len(config.components):
        raise ValueError(f"K={K} needs that many configured components")
    comps = config.components[:K]
    keys = [c.key for c in comps]
    if len(set(keys)) != K:
        raise ValueError("stego components need pairwise distinct keys")
    rep = _new_report(config)
    rep.notes.append("noise referenced to total mixture power at channel input")
    pairs = [shaping_pair(k) for k in keys]
    acc = {c.name: {"n_errors": 0, "n_bits": 0, "snr": [], "cross_kurtosis": []} for c in comps}
    for trial in range(config.trials):
        bits = [_bits(config, c, trial) for c in comps]
        trains = [encode_equidistant(b, c.encoding.n_p, c.encoding.amplitude) for b, c in zip(bits, comps)]
        txs = [scale_to_power(_transmit(c, t)[0], c.power) for c, t in zip(comps, trains)]
        n = max(x.size for x in txs)
        txs = [np.pad(x, (0, n - x.size)) for x in txs]
        mixture = np.sum(txs, axis=0)
        ch = replace(config.channel, seed=component_int(config.seed, f"channel/{trial}"), reference="channel-input")
        rx, _ = awgn(mixture, ch)
        lo = max(len(p.spread) for p in pairs)
        hi = min(t.length for t in trains)
        for i, (c, p) in enumerate(zip(comps, pairs)):
            y = convolve(rx, p.descramble)
            clean = convolve(txs[i], p.descramble)
            region = _steady(y.size, lo + p.delay, hi + p.delay)
            interf = y[region] - clean[region]
            sig_p = float(np.mean(clean[region] ** 2))
            int_p = float(np.mean(interf**2))
            acc[c.name]["snr"].append(sig_p / int_p if int_p > 0 else math.inf)
            r = detect_synchronous(y, c.encoding.n_p, bits[i], c.encoding.n_p + p.delay)
            acc[c.name]["n_errors"] += r.n_errors
            acc[c.name]["n_bits"] += r.n_bits
            if K > 1:
                wrong = pairs[(i + 1) % K]
                resid = convolve(txs[i], wrong.descramble)
                acc[c.name]["cross_kurtosis"].append(excess_kurtosis(resid[_steady(resid.size, lo, hi)]))
            if trial == 0:
                rep.add_tap(f"post_g_{c.name}", y, region)
        if trial == 0:
            rep.add_tap("transmit", mixture, _steady(n, lo, hi))
            rep.add_tap("channel", rx, _steady(n, lo, hi))
            plan_db = 10 * math.log10(sum(c.power for c in comps))
            rep.taps["transmit"]["plan_power_db"] = plan_db
            rep.taps["transmit"]["mix_power_db"] = 10 * math.log10(float(np.mean(mixture**2)))
    for c in comps:
        a = acc[c.name]
        snr = float(np.mean(a["snr"])) if a["snr"] else math.nan
        rep.components[c.name] = {
            "ber": a["n_errors"] / a["n_bits"] if a["n_bits"] else math.nan,
            "n_errors": a["n_errors"], "n_bits": a["n_bits"],
            "snr": snr, "snr_db": 10 * math.log10(snr) if snr > 0 else -math.inf,
            "cross_kurtosis": a["cross_kurtosis"],
        }
    return _finish(rep, t0)


# -- layered cover ---------------------------------------------------------

def _match_pulses(truth_idx, truth_amp, found, tol: int = 1) -> tuple[int, int]:
    """(hits with matching polarity within +-tol samples, unmatched detections)."""
    fi, fa = found.indices, found.amplitudes
    hits = 0
    used = np.zeros(fi.size, dtype=bool)
    pos = np.searchsorted(fi, np.asarray(truth_idx) - tol)
    for k, a, j in zip(np.asarray(truth_idx).tolist(), np.asarray(truth_amp).tolist(), pos.tolist()):
        while j < fi.size and fi[j] <= k + tol:
            if not used[j] and np.sign(fa[j]) == np.sign(a):
                used[j] = True
                hits += 1
                break
            j += 1
    return hits, int(fi.size - used.sum())


def run_layered_cover(config: ScenarioConfig) -> ScenarioReport:
    """Strong INF-removable cover (component 0) over a weak payload (component 1).

    Receiver: descramble with the cover key, fence the restored cover
    pulses, re-spread the auxiliary output with the cover key to rebuild
    the cover, subtract it from the received mixture, then descramble with
    the payload key.  The cover key should be a pure allpass (delta seed)
    so that descramble * spread is an impulse; cover pulses then carry
    their band limit through ``pulse = rc``.  Noise is referenced to the
    payload's matched-output power.
    """
    t0 = time.perf_counter()
    if len(config.components) < 2:
        raise ValueError("layered cover needs a cover and a payload component")
    cover, payload = config.components[:2]
    if cover.key == payload.key:
        raise ValueError("cover and payload need distinct keys")
    rep = _new_report(config)
    rep.notes.append("cover removal: subtraction of the re-spread auxiliary output from the received mixture")
    pc, pp = shaping_pair(cover.key), shaping_pair(payload.key)
    npp, npc = payload.encoding.n_p, cover.encoding.n_p
    beta = config.receiver.fence_beta(1.0 / npc, saturation_rate(cover.key.n_s))
    tally = {k: [0, 0] for k in ("with_inf", "without_inf", "baseline")}
    cover_hits = cover_total = cover_false = 0
    for trial in range(config.trials):
        pbits = _bits(config, payload, trial)
        ptrain = encode_equidistant(pbits, npp, payload.encoding.amplitude)
        cbits = _bits(config, cover, trial, n=max(1, (ptrain.length // npc)))
        ctrain = encode_equidistant(cbits, npc, cover.encoding.amplitude)
        ptx = scale_to_power(_transmit(payload, ptrain)[0], payload.power)
        ctx_raw, cdelay = _transmit(cover, ctrain)
        ctx = scale_to_power(ctx_raw, cover.power) if cover.power > 0 else np.zeros_like(ctx_raw)
        n = max(ptx.size, ctx.size)
        ptx, ctx = np.pad(ptx, (0, n - ptx.size)), np.pad(ctx, (0, n - ctx.size))
        ch = replace(config.channel, seed=component_int(config.seed, f"channel/{trial}"))
        p_ref = matched_power(ptx, pp.descramble) / pp.descramble.energy
        noisy_payload, _ = awgn(ptx, ch, signal_power=p_ref)
        noise = noisy_payload - ptx
        rx = ctx + ptx + noise
        pdelay = npp + pp.delay

        lc = len(pc.descramble) - 1
        u = convolve(rx, pc.descramble)
        prime, aux, fences = run_fence_pipeline(u, beta, window_target=config.receiver.window_target,
                                                start=lc + max(len(pc.spread), len(pp.spread)))
        rebuilt = convolve(aux, pc.spread)[lc : lc + n]
        cleaned = rx - rebuilt
        y_inf = convolve(cleaned, pp.descramble)
        y_raw = convolve(rx, pp.descramble)
        y_base = convolve(noisy_payload, pp.descramble)
        for name, y in (("with_inf", y_inf), ("without_inf", y_raw), ("baseline", y_base)):
            r = detect_synchronous(y, npp, pbits, pdelay)
            tally[name][0] += r.n_errors
            tally[name][1] += r.n_bits
        if cover.power > 0:
            found = pulse_count(u, fences)
            hits, false = _match_pulses(ctrain.indices + cdelay + lc, ctrain.amplitudes, found)
            cover_hits += hits
            cover_false += false
            cover_total += len(ctrain)
        if trial == 0:
            steady = _steady(n, max(len(pc.spread), len(pp.spread)), ptrain.length)
            rep.add_tap("transmit", ctx + ptx, steady)
            rep.add_tap("channel", rx, steady)
            rep.add_tap("post_g_cover", u, _steady(u.size, lc, lc + n))
            rep.add_tap("post_inf", prime, _steady(u.size, lc, lc + n))
            rep.add_tap("post_g_payload", y_inf, _steady(y_inf.size, pdelay, pdelay + pbits.size * npp))
            rep.taps["post_inf"]["clamped"] = fences.clamped
    ber = {k: (v[0] / v[1] if v[1] else math.nan) for k, v in tally.items()}
    rep.components[payload.name] = {
        "ber_with_inf": ber["with_inf"], "ber_without_inf": ber["without_inf"], "ber_baseline": ber["baseline"],
        "n_bits": tally["with_inf"][1], "n_errors_with_inf": tally["with_inf"][0],
        "n_errors_baseline": tally["baseline"][0], "n_errors_without_inf": tally["without_inf"][0],
    }
    rep.components[cover.name] = {
        "n_pulses": cover_total, "recovered": cover_hits, "false_counts": cover_false,
        "recovery": cover_hits / cover_total if cover_total else math.nan, "fence_beta": beta,
    }
    return _finish(rep, t0)


# -- OFDM ------------------------------------------------------------------

def ofdm_frame_len(n_carriers: int, oversample: int = 4) -> int:
    return 2 * (n_carriers + 1) * oversample


def ofdm_modulate(symbols, oversample: int = 4) -> np.ndarray:
    """Real OFDM: row s of ``symbols`` (n_symbols x N) on carriers 1..N of an M-point Hermitian grid.

    Scaled so antipodal symbols give unit mean power exactly.
    """
    d = np.atleast_2d(np.asarray(symbols, dtype=float))
    n_sym, n = d.shape
    if n < 2:
        raise ValueError("need at least 2 carriers")
    m = ofdm_frame_len(n, oversample)
    grid = np.zeros((n_sym, m // 2 + 1))
    grid[:, 1 : n + 1] = d * (m / 2)
    return np.fft.irfft(grid, m, axis=1).reshape(-1) * math.sqrt(2.0 / n)


def ofdm_symbols(n_carriers: int, n_symbols: int, seed: int = 0, alphabet: str = "antipodal") -> np.ndarray:
    rng = np.random.default_rng(seed)
    if alphabet == "antipodal":
        return rng.choice(np.array([-1.0, 1.0]), size=(n_symbols, n_carriers))
    if alphabet == "on-off":
        return rng.integers(0, 2, size=(n_symbols, n_carriers)).astype(float)
    raise ValueError(f"unknown OFDM alphabet {alphabet!r}")


def gen_ofdm(n_carriers: int, n_symbols: int, seed: int = 0, oversample: int = 4,
             alphabet: str = "antipodal") -> np.ndarray:
    if n_carriers < 2:
        raise ValueError("need at least 2 carriers")
    return ofdm_modulate(ofdm_symbols(n_carriers, n_symbols, seed, alphabet), oversample)


def ofdm_demodulate(buffer, n_carriers: int, n_symbols: int, offset: int = 0, oversample: int = 4) -> np.ndarray:
    """Carrier coefficients (n_symbols x N) from frames starting at ``offset``; unit gain for ofdm_modulate."""
    m = ofdm_frame_len(n_carriers, oversample)
    x = np.asarray(buffer, dtype=float)[offset : offset + n_symbols * m]
    if x.size < n_symbols * m:
        x = np.pad(x, (0, n_symbols * m - x.size))
    spec = np.fft.rfft(x.reshape(n_symbols, m), axis=1)[:, 1 : n_carriers + 1].real
    return spec * (2.0 / m) / math.sqrt(2.0 / n_carriers)


def symbol_papr_db(buffer, frame: int, start: int = 0) -> np.ndarray:
    """PAPR (dB) of each complete frame-length window from ``start``."""
    x = np.asarray(buffer, dtype=float)[start:]
    k = x.size // frame
    if k == 0:
        raise ValueError("buffer shorter than one frame")
    p = x[: k * frame].reshape(k, frame) ** 2
    return 10 * np.log10(p.max(axis=1) / p.mean(axis=1))


def ofdm_papr_study(n_carriers: int, n_symbols: int, key: KeySpec, seed: int = 0, oversample: int = 4,
                    alphabet: str = "antipodal", percentile: float = 99.0) -> dict:
    """Per-symbol PAPR percentile of OFDM before and after spreading with ``key``'s filter."""
    x = gen_ofdm(n_carriers, n_symbols, seed, oversample, alphabet)
    m = ofdm_frame_len(n_carriers, oversample)
    pair = shaping_pair(key)
    y = convolve(x, pair.spread)[len(pair.spread) - 1 : x.size]
    un = symbol_papr_db(x, m)
    sh = symbol_papr_db(y, m)
    full = ofdm_modulate(np.ones((1, n_carriers)), oversample)
    return {
        "n_carriers": n_carriers, "alphabet": alphabet, "n_symbols": int(un.size), "n_shaped_windows": int(sh.size),
        "unshaped_db": float(np.percentile(un, percentile)), "shaped_db": float(np.percentile(sh, percentile)),
        "reduction_db": float(np.percentile(un, percentile) - np.percentile(sh, percentile)),
        "all_equal_papr": papr(full).papr, "max_papr": 2 * n_carriers, "filter_len": len(pair.spread),
    }


# -- friendly jamming ------------------------------------------------------

def run_friendly_jamming(config: ScenarioConfig) -> ScenarioReport:
    """OFDM (component 0, key g) under a friendly impulsive jammer (component 1, key h).

    OFDM is spread by g-hat then h-hat, the jammer train by h-hat only.  The
    receiver applies h, splits with the INF, demodulates OFDM from the prime
    output after g, and recovers the jammer train by pulse counting.  Key g
    should be a pure allpass (delta seed); key h carries the band limit.
    """
    t0 = time.perf_counter()
    if len(config.components) < 2:
        raise ValueError("friendly jamming needs an OFDM and a jammer component")
    oc, jc = config.components[:2]
    if oc.key == jc.key:
        raise ValueError("OFDM and jammer need distinct keys")
    rep = _new_report(config)
    rep.notes.append("jammer train recovered by pulse counting on the post-h tap")
    pg, ph = shaping_pair(oc.key), shaping_pair(jc.key)
    op = config.ofdm
    beta = config.receiver.fence_beta(1.0 / jc.encoding.n_p, saturation_rate(jc.key.n_s))
    lg, lh = len(pg.spread) - 1, len(ph.spread) - 1
    tot = {"sym": 0, "err_inf": 0, "err_raw": 0, "err_clean": 0, "evm2": 0.0}
    jam = {"n": 0, "hits": 0, "false": 0}
    for trial in range(config.trials):
        syms = ofdm_symbols(op.carriers, op.symbols, component_int(config.seed, f"{oc.name}/symbols/{trial}"),
                            op.alphabet)
        x_o = ofdm_modulate(syms, op.oversample)
        o_tx = scale_to_power(convolve(convolve(x_o, pg.spread), ph.spread), oc.power)
        n_pulses = max(1, int(x_o.size // jc.encoding.n_p))
        rp = jc.encoding.random_polarity
        jtrain = encode_random(n_pulses, jc.encoding.n_p, jc.encoding.min_gap,
                               "fixed-polarity-random" if rp else "fixed",
                               component_int(config.seed, f"{jc.name}/train/{trial}"), jc.encoding.amplitude)
        j_tx = convolve(render(jtrain), ph.spread)
        j_tx = scale_to_power(j_tx, jc.power) if jc.power > 0 else np.zeros_like(j_tx)
        n = max(o_tx.size, j_tx.size)
        o_tx, j_tx = np.pad(o_tx, (0, n - o_tx.size)), np.pad(j_tx, (0, n - j_tx.size))
        mixture = o_tx + j_tx
        ch = replace(config.channel, seed=component_int(config.seed, f"channel/{trial}"), reference="channel-input")
        rx, _ = awgn(mixture, ch)
        z = convolve(rx, ph.descramble)
        prime, aux, fences = run_fence_pipeline(z, beta, window_target=config.receiver.window_target,
                                                start=lg + 2 * lh)
        o_inf = convolve(prime, pg.descramble)
        o_raw = convolve(z, pg.descramble)
        o_clean = convolve(convolve(o_tx, ph.descramble), pg.descramble)
        off = lg + lh
        for tag, o in (("err_inf", o_inf), ("err_raw", o_raw), ("err_clean", o_clean)):
            est = ofdm_demodulate(o, op.carriers, op.symbols, off, op.oversample)
            ref = syms if op.alphabet == "antipodal" else 2 * syms - 1
            est_c = est - est.mean() if op.alphabet == "on-off" else est
            gain = float(np.sum(est_c * ref) / np.sum(ref * ref))
            dec = np.where(est_c >= 0, 1.0, -1.0)
            tot[tag] += int(np.count_nonzero(dec != ref))
            if tag == "err_inf":
                tot["evm2"] += float(np.sum((est_c / gain - ref) ** 2))
        tot["sym"] += syms.size
        if jc.power > 0:
            found = pulse_count(z, fences)
            hits, false = _match_pulses(jtrain.indices + lh, jtrain.amplitudes, found)
            jam["n"] += len(jtrain)
            jam["hits"] += hits
            jam["false"] += false
        if trial == 0:
            steady = _steady(n, lg + lh, x_o.size)
            rep.add_tap("transmit", mixture, steady)
            rep.add_tap("channel", rx, steady)
            rep.add_tap("post_h", z, _steady(z.size, lg + 2 * lh, x_o.size + lh))
            rep.add_tap("post_inf", prime, _steady(z.size, lg + 2 * lh, x_o.size + lh))
            rep.add_tap("post_g", o_inf, _steady(o_inf.size, off, off + x_o.size))
            h_region = _steady(z.size, lg + 2 * lh, x_o.size + lh)
            rep.taps["post_h"]["jammer_kurtosis"] = excess_kurtosis(convolve(j_tx, ph.descramble)[h_region]) \
                if jc.power > 0 else math.nan
            rep.taps["post_h"]["ofdm_kurtosis"] = excess_kurtosis(convolve(o_tx, ph.descramble)[h_region])
            rep.taps["post_inf"]["clamped"] = fences.clamped
    s = tot["sym"]
    rep.components[oc.name] = {
        "n_symbols": s, "ser_after_inf": tot["err_inf"] / s, "ser_before_inf": tot["err_raw"] / s,
        "ser_no_jammer_path": tot["err_clean"] / s, "evm_rms": math.sqrt(tot["evm2"] / s),
    }
    rep.components[jc.name] = {
        "n_pulses": jam["n"], "recovered": jam["hits"], "false_counts": jam["false"],
        "recovery": jam["hits"] / jam["n"] if jam["n"] else math.nan, "fence_beta": beta,
    }
    return _finish(rep, t0)


def run_ofdm_papr(config: ScenarioConfig) -> ScenarioReport:
    t0 = time.perf_counter()
    rep = _new_report(config)
    comp = config.components[0]
    op = config.ofdm
    res = ofdm_papr_study(op.carriers, op.symbols, comp.key, component_int(config.seed, f"{comp.name}/symbols"),
                          op.oversample, op.alphabet)
    rep.components[comp.name] = res
    return _finish(rep, t0)


def run_scenario(config: ScenarioConfig) -> ScenarioReport:
    if config.scenario == "basic":
        return run_basic_link(config)
    if config.scenario == "stego":
        return run_stego_mixture(len(config.components), config)
    if config.scenario == "layered":
        return run_layered_cover(config)
    if config.scenario == "jamming":
        return run_friendly_jamming(config)
    return run_ofdm_papr(config)


__all__ = [
    "ComponentSpec", "ConfigError", "KeySpec", "OfdmPlan", "ReceiverPlan", "ScenarioConfig", "ScenarioReport",
    "component_int", "component_rng", "component_seed", "gen_ofdm", "load_config", "ofdm_demodulate",
    "ofdm_modulate", "ofdm_papr_study", "ofdm_symbols", "parse_config", "psd_bump_db", "run_basic_link",
    "run_friendly_jamming", "run_layered_cover", "run_ofdm_papr", "run_scenario", "run_stego_mixture",
    "shaping_pair", "simulate_ber", "symbol_papr_db", "tap_stats",
]
