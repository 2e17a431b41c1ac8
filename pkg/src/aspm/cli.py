"""Batch front-end: ``design``, ``sweep``, ``scenario`` and ``analyze``."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .filters import (
    DEFAULT_TRUNCATION_TOL,
    FirFilter,
    delta_filter,
    descriptor,
    design_rc,
    design_rrc,
    filter_from_params,
    filter_to_csv,
    make_shaping_pair,
    random_allpass_cascade,
)
from .metrics import gaussianity, papr, psd_estimate, spectrum_to_csv
from .receiver import rc_train_papr
from .scenarios import ConfigError, load_config, run_scenario, run_stego_mixture, simulate_ber

SWEEP_AXES = ("snr_db", "Np", "M", "beta", "K")


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    master_seed: int
    artifact_version: str
    output_dir: str
    started: str
    finished: str | None = None
    wall_clock_s: float | None = None
    status: str = "running"
    outputs: list | None = None

    def write(self, out: Path):
        (out / "manifest.json").write_text(json.dumps(asdict(self), indent=2) + "\n")


class CliError(Exception):
    pass


# -- helpers ---------------------------------------------------------------

def parse_range(text: str, integer: bool = False, geometric: bool = False) -> list:
    """``a:b:step`` inclusive ranges, ``a:b`` (step 1, or doubling when ``geometric``), or comma lists."""
    conv = int if integer else float
    if ":" not in text:
        return [conv(v) for v in text.split(",") if v.strip()]
    parts = [float(p) for p in text.split(":")]
    if len(parts) == 2:
        a, b = parts
        if geometric:
            if a <= 0:
                raise CliError("geometric ranges need a positive start")
            vals, v = [], a
            while v <= b * (1 + 1e-12):
                vals.append(v)
                v *= 2
            return [conv(v) for v in vals]
        step = 1.0
    elif len(parts) == 3:
        a, b, step = parts
    else:
        raise CliError(f"bad range {text!r}")
    if step == 0 or (b - a) * step < 0:
        raise CliError(f"bad range {text!r}")
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return [conv(round(a + i * step, 12)) for i in range(n)]


def _write_rows(out: Path, stem: str, header: list[str], rows: list[dict], fmt: str) -> Path:
    if fmt == "json":
        path = out / f"{stem}.json"
        path.write_text(json.dumps(rows, indent=2, default=float) + "\n")
    else:
        path = out / f"{stem}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: r.get(k) for k in header})
    return path


def read_waveform(path) -> np.ndarray:
    """Waveform CSV: header ``k,x``, one sample per line, k = 0, 1, 2, ..."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["k", "x"]:
        raise CliError(f"{path}: expected header 'k,x'")
    body = [r for r in rows[1:] if r]
    k = np.array([int(r[0]) for r in body], dtype=np.int64)
    if not np.array_equal(k, np.arange(k.size)):
        raise CliError(f"{path}: sample indices must run 0, 1, 2, ...")
    return np.array([float(r[1]) for r in body])


def write_waveform(path, x) -> None:
    with open(path, "w") as fh:
        fh.write("k,x\n")
        fh.writelines(f"{k},{v!r}\n" for k, v in enumerate(np.asarray(x, dtype=float).tolist()))


# -- design ----------------------------------------------------------------

def _design_filters(a) -> list[FirFilter]:
    if a.from_descriptor:
        params = json.loads(Path(a.from_descriptor).read_text())
        params = params.get("params", params)
        return [filter_from_params(params)]
    if a.rrc:
        return [design_rrc(a.beta, a.ns, a.span)]
    if a.rc:
        return [design_rc(a.beta, a.ns, a.span)]
    if a.pair:
        seed_filter = delta_filter() if a.seed_filter == "delta" else design_rrc(a.beta, a.ns, a.span)
        cascade = random_allpass_cascade(a.sections, a.rmin, a.rmax, seed=a.seed)
        pair = make_shaping_pair(seed_filter, cascade, a.tol)
        return [pair.spread, pair.descramble]
    raise CliError("choose one of --rrc, --rc, --pair or --from")


def cmd_design(a, out: Path) -> list[Path]:
    written = []
    for fir in _design_filters(a):
        label = fir.label or "filter"
        if a.format == "csv":
            p = out / f"{label}.csv"
            filter_to_csv(fir, p)
            written.append(p)
        d = out / f"{label}.json"
        d.write_text(descriptor(fir) + "\n")
        written.append(d)
    return written


# -- sweep -----------------------------------------------------------------

FIG8_HEADER = ["snr_db", "Np", "Ns", "nbits", "nerrors", "ber_sim", "ber_theory", "papr"]
FIG5_HEADER = ["Np", "Ns", "papr", "papr_db", "slope"]
LONG_HEADER = ["axis", "value", "component", "metric", "result"]


def _fig8_point(args):
    n_p, n_s, snr_db, bits, seed = args
    r = simulate_ber(n_p, n_s, snr_db, bits, seed=seed)
    return {"snr_db": snr_db, "Np": n_p, "Ns": n_s, "nbits": r["n_bits"], "nerrors": r["n_errors"],
            "ber_sim": r["ber_sim"], "ber_theory": r["ber_theory"], "papr": r["papr"]}


def _axis_config(cfg, axis: str, value):
    if axis == "snr_db":
        return replace(cfg, channel=replace(cfg.channel, snr_db=float(value)))
    if axis == "Np":
        comps = tuple(replace(c, encoding=replace(c.encoding, n_p=int(value))) for c in cfg.components)
        return replace(cfg, components=comps)
    if axis == "M":
        return replace(cfg, receiver=replace(cfg.receiver, M=float(value)))
    if axis == "beta":
        return replace(cfg, receiver=replace(cfg.receiver, beta=float(value)))
    return cfg


def _config_point(args):
    path, axis, value, seed = args
    cfg = load_config(path)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    cfg = _axis_config(cfg, axis, value)
    rep = run_stego_mixture(int(value), cfg) if axis == "K" else run_scenario(cfg)
    rows = []
    for comp, metrics in rep.components.items():
        for m, v in metrics.items():
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                rows.append({"axis": axis, "value": value, "component": comp, "metric": m, "result": v})
    return rows


def _map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def cmd_sweep(a, out: Path) -> list[Path]:
    target = a.target
    if target == "fig8":
        bits = int(float(a.bits))
        snrs = parse_range(a.snr or "-22:-8:1")
        nps = parse_range(a.np or "256", integer=True)
        pts = [(n, a.ns, s, bits, a.seed) for n in nps for s in snrs] if bits > 0 else []
        rows = _map(_fig8_point, pts, a.jobs)
        return [_write_rows(out, "fig8", FIG8_HEADER, rows, a.format)]
    if target == "fig5":
        nps = parse_range(a.np or "4:512", integer=True, geometric=True)
        rows = []
        for n in nps:
            p = rc_train_papr(n, a.ns)
            rows.append({"Np": n, "Ns": a.ns, "papr": p, "papr_db": 10 * math.log10(p), "slope": p / (n / a.ns)})
        return [_write_rows(out, "fig5", FIG5_HEADER, rows, a.format)]
    # otherwise a scenario config swept along one axis
    if a.axis is None or a.values is None:
        raise CliError("config sweeps need --axis and --values")
    if a.axis not in SWEEP_AXES:
        raise CliError(f"unknown axis {a.axis!r}; choose from {', '.join(SWEEP_AXES)}")
    cfg = load_config(target)
    values = parse_range(a.values, integer=a.axis in ("Np", "K"))
    seed = a.seed if a.seed_given else None
    pts = [(target, a.axis, v, seed) for v in values] if cfg.trials > 0 else []
    rows = [r for chunk in _map(_config_point, pts, a.jobs) for r in chunk]
    return [_write_rows(out, f"sweep_{a.axis}", LONG_HEADER, rows, a.format)]


# -- scenario --------------------------------------------------------------

def cmd_scenario(a, out: Path) -> list[Path]:
    cfg = load_config(a.config)
    if a.seed_given:
        cfg = replace(cfg, seed=a.seed)
    rep = run_scenario(cfg)
    written = []
    p = out / "report.json"
    p.write_text(rep.to_json() + "\n")
    written.append(p)
    if a.format == "csv":
        rows = [{"component": c, "metric": m, "result": v} for c, ms in rep.components.items()
                for m, v in ms.items() if isinstance(v, (int, float)) and not isinstance(v, bool)]
        written.append(_write_rows(out, "report", ["component", "metric", "result"], rows, "csv"))
    if a.dump_taps:
        written += rep.dump_taps(out / "taps")
    bad = [n for n, x in rep.tap_buffers.items() if not np.all(np.isfinite(x))]
    if bad:
        raise CliError(f"non-finite samples at taps: {', '.join(bad)}")
    return written


# -- analyze ---------------------------------------------------------------

def cmd_analyze(a, out: Path) -> list[Path]:
    x = read_waveform(a.waveform)
    g = gaussianity(x)
    crest = papr(x)
    res = {"n": int(x.size), "power": float(np.mean(x * x)), "papr": crest.papr, "papr_db": crest.papr_db,
           "excess_kurtosis": g.excess_kurtosis, "iqr": g.iqr, "sigma_hat": g.sigma_hat}
    written = [_write_rows(out, "analysis", list(res), [res], a.format)]
    if a.psd:
        f, p = psd_estimate(x, a.psd)
        path = out / "psd.csv"
        spectrum_to_csv(f, p, path)
        written.append(path)
    return written


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    ap = argparse.ArgumentParser(prog="aspm", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", parents=[common], help="design and serialize filters")
    kind = d.add_mutually_exclusive_group()
    kind.add_argument("--rrc", action="store_true")
    kind.add_argument("--rc", action="store_true")
    kind.add_argument("--pair", action="store_true")
    kind.add_argument("--from", dest="from_descriptor", metavar="JSON", help="regenerate from a descriptor")
    d.add_argument("--beta", type=float, default=0.5)
    d.add_argument("--ns", type=int, default=2)
    d.add_argument("--span", type=int, default=32)
    d.add_argument("--sections", type=int, default=21)
    d.add_argument("--rmin", type=float, default=0.85)
    d.add_argument("--rmax", type=float, default=0.98)
    d.add_argument("--tol", type=float, default=DEFAULT_TRUNCATION_TOL)
    d.add_argument("--seed-filter", choices=("rrc", "delta"), default="rrc")

    s = sub.add_parser("sweep", parents=[common], help="figure recipes and config sweeps")
    s.add_argument("target", help="fig8, fig5, or a scenario config file")
    s.add_argument("--np", help="Np values: list, a:b (fig5 doubles), or a:b:step")
    s.add_argument("--ns", type=int, default=2)
    s.add_argument("--snr", help="SNR grid in dB for fig8, a:b:step")
    s.add_argument("--bits", default="1e6", help="bits per fig8 point")
    s.add_argument("--axis", help=f"config sweep axis: {', '.join(SWEEP_AXES)}")
    s.add_argument("--values", help="axis values: list or a:b:step")

    c = sub.add_parser("scenario", parents=[common], help="run one scenario config")
    c.add_argument("config")
    c.add_argument("--dump-taps", action="store_true", help="write every tap point as a k,x CSV")

    z = sub.add_parser("analyze", parents=[common], help="metrics of a k,x waveform CSV")
    z.add_argument("waveform")
    z.add_argument("--psd", type=int, default=0, metavar="SEG", help="also write a PSD with this segment length")
    return ap


COMMANDS = {"design": cmd_design, "sweep": cmd_sweep, "scenario": cmd_scenario, "analyze": cmd_analyze}


def _glue_ranges(argv: list[str]) -> list[str]:
    """Turn ``--snr -22:-8:1`` into ``--snr=-22:-8:1`` so argparse does not read it as a flag."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in ("--snr", "--values", "--np") and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    argv = _glue_ranges(list(sys.argv[1:] if argv is None else argv))
    a = build_parser().parse_args(argv)
    a.seed_given = a.seed is not None
    a.seed = a.seed if a.seed is not None else 0
    if a.seed < 0 or a.jobs < 1:
        print("error: --seed must be >= 0 and --jobs >= 1", file=sys.stderr)
        return 2
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    cfg_path = getattr(a, "config", None) or (a.target if getattr(a, "target", None) not in (None, "fig5", "fig8") else None)
    seed = a.seed
    if cfg_path and not a.seed_given:
        try:
            seed = load_config(cfg_path).seed
        except (ConfigError, OSError, ValueError):
            pass  # the command itself reports the problem
    man = RunManifest(" ".join(["aspm"] + argv),
                      cfg_path, seed, __version__, str(out),
                      _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    man.write(out)
    try:
        written = COMMANDS[a.command](a, out)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        code = 1
        written = []
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 1
        written = []
    else:
        code = 0
    man.finished = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    man.wall_clock_s = time.perf_counter() - t0
    man.status = "ok" if code == 0 else "failed"
    man.outputs = [str(p) for p in written]
    man.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
