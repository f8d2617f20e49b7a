"""Command-line front end.

Every subcommand writes CSV (or JSON with ``--json``) whose first line is a
``#`` comment carrying the tool version, a hash of the resolved configuration
and the seed. Identical inputs give byte-identical output.

Exit codes: 0 success, 1 numerical or I/O failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .allocation import (
    evaluate,
    heuristic_perception,
    monte_carlo_verify,
    rdp_curve,
    solve_gamma,
)
from .errors import ConsistencyError, FeasibilityError, NumericalError
from .kernels import (
    KernelSpec,
    eval_spectral_density,
    kernel_from_config,
    spectral_density_from_config,
)
from .mercer import EigenSpectrum, decompose
from .scalar_rdpf import allocate, solve_gamma_scalar
from .stationary import (
    DEFAULT_ALPHA_RANGE,
    DEFAULT_GAMMA_RANGE,
    per_frequency_distortion,
    sweep,
)

COMMANDS = ("scalar", "spectrum", "curve", "stationary", "profile", "sweep", "verify")
LN2 = math.log(2.0)
DEFAULT_SAMPLES = 1_000_000


class ConfigError(ValueError):
    """Invalid run configuration; ``problems`` lists every offending field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class RunConfig:
    command: str
    source: dict | None = None
    source_kind: str | None = None
    lam: float | None = None
    gamma: tuple = ()
    alpha: tuple = ()
    distortion: tuple = ()
    perception: float | None = None
    truncation: int | None = None
    resolution: int | None = None
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    unit: str = "nats"
    fmt: str = "csv"
    eigenfunctions: bool = False
    threads: int | None = None
    output: str | None = field(default=None, compare=False)

    def digest(self) -> str:
        d = asdict(self)
        d.pop("output")
        d.pop("threads")
        blob = json.dumps(d, sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def fmt_float(x) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def parse_values(text, name):
    """Parse ``v``, ``v1,v2,...`` or ``start:stop:count`` (inclusive ends)."""
    if isinstance(text, (int, float)):
        return (float(text),)
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"{name}: range must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), parts[2]
        if int(float(count)) != float(count) or int(float(count)) < 1:
            raise ValueError(f"{name}: count must be a positive integer, got {count!r}")
        count = int(float(count))
        if count == 1:
            return (start,)
        return tuple(float(v) for v in np.linspace(start, stop, count))
    return tuple(float(v) for v in text.split(",") if v.strip())


def load_source(value):
    """JSON object from an inline string, a file path, or an already-parsed dict."""
    if isinstance(value, dict):
        return value
    value = str(value)
    if value.lstrip().startswith("{"):
        return json.loads(value)
    with open(value, encoding="utf-8") as fh:
        return json.load(fh)


def source_kind(obj) -> str:
    if "eigenvalues" in obj:
        return "eigen"
    if "domain" in obj:
        return "kernel"
    if "spectrum" in obj or "family" in obj:
        return "spectral"
    raise ValueError("cannot tell whether the source is a kernel, a spectral density or an eigen-spectrum")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gp-rdpf",
        description="Rate-distortion-perception bounds for Gaussian processes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file with 'command' and option values")
    sub = parser.add_subparsers(dest="command")

    def common(p, seed=True):
        p.add_argument("-o", "--output", help="output path (default: stdout)")
        p.add_argument("--bits", action="store_true", help="report rates in bits")
        p.add_argument("--json", dest="json_out", action="store_true", help="emit JSON instead of CSV")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")

    p = sub.add_parser("scalar", help="one Gaussian coefficient")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--perception", type=float, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--gamma", type=float)
    g.add_argument("--distortion", type=float)
    common(p)

    p = sub.add_parser("spectrum", help="Mercer eigenvalues of a kernel (JSON)")
    p.add_argument("--kernel", dest="source", required=True, help="kernel config (path or inline JSON)")
    p.add_argument("--truncation", type=int)
    p.add_argument("--eigenfunctions", action="store_true", help="include sampled eigenfunctions")
    common(p)

    for name, text in (("curve", "rate vs distortion at a perception budget"),
                       ("verify", "Monte Carlo check of the test channel")):
        p = sub.add_parser(name, help=text)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--spectrum", "--spectrum-file", dest="source",
                         help="eigen-spectrum or kernel config (path or inline JSON)")
        src.add_argument("--eigenvalues", help="comma-separated coefficient variances")
        p.add_argument("--perception", type=float, required=True)
        p.add_argument("--truncation", type=int)
        if name == "curve":
            p.add_argument("--dmin", type=float)
            p.add_argument("--dmax", type=float)
            p.add_argument("--points", type=int)
            p.add_argument("--distortion", help="explicit targets: v, list or start:stop:count")
        else:
            p.add_argument("--distortion", required=True, type=float)
            p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
        common(p)

    for name, text in (("stationary", "stationary curve at given (gamma, alpha)"),
                       ("sweep", "stationary (gamma, alpha) sweep with default ranges"),
                       ("profile", "per-frequency distortion profile")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--spectrum", "--spectrum-file", dest="source", required=True,
                       help="spectral density config (path or inline JSON)")
        req = name == "stationary"
        p.add_argument("--gamma", required=req or name == "profile",
                       help="v, v1,v2,... or start:stop:count")
        p.add_argument("--alpha", required=req or name == "profile",
                       help="v, v1,v2,... or start:stop:count")
        p.add_argument("--resolution", type=int, help="frequency nodes (overrides the config)")
        p.add_argument("--threads", type=int, help="worker threads (also $GPRDPF_THREADS)")
        common(p)
    return parser


def _raw_from_namespace(ns) -> dict:
    raw = {k: v for k, v in vars(ns).items() if v is not None and v is not False}
    raw.pop("config", None)
    if raw.pop("json_out", False):
        raw["format"] = "json"
    if raw.pop("bits", False):
        raw["unit"] = "bits"
    return raw


def parse_config(argv=None) -> RunConfig:
    """Parse command-line arguments (or a ``--config`` JSON file) into a RunConfig.

    Raises :class:`ConfigError` listing every invalid field; argparse syntax
    errors exit with status 2 directly.
    """
    parser = _build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    ns = parser.parse_args(argv)
    if ns.config is not None:
        if ns.command is not None:
            raise ConfigError(["--config cannot be combined with a subcommand"])
        try:
            with open(ns.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"config: {exc}"]) from exc
        if not isinstance(raw, dict):
            raise ConfigError(["config: top level must be a JSON object"])
        return config_from_mapping(raw)
    if ns.command is None:
        raise ConfigError(["missing subcommand; one of " + ", ".join(COMMANDS)])
    return config_from_mapping(_raw_from_namespace(ns))


_KNOWN_KEYS = {
    "command", "source", "spectrum", "kernel", "eigenvalues", "lam", "lambda", "gamma", "alpha",
    "distortion", "dmin", "dmax", "points", "perception", "truncation", "resolution",
    "samples", "seed", "unit", "format", "eigenfunctions", "threads", "output",
}


def config_from_mapping(raw) -> RunConfig:
    """Validate a flat option mapping; collects all problems before raising."""
    problems = []
    raw = dict(raw)
    command = raw.get("command")
    if command not in COMMANDS:
        raise ConfigError([f"command: unknown subcommand {command!r}; expected one of {', '.join(COMMANDS)}"])
    for key in sorted(set(raw) - _KNOWN_KEYS):
        problems.append(f"{key}: unknown option")
    out = {"command": command}

    def num(key, cast=float, positive=False, nonneg=False):
        if key not in raw:
            return None
        try:
            v = cast(raw[key])
        except (TypeError, ValueError):
            problems.append(f"{key}: not a valid {cast.__name__}: {raw[key]!r}")
            return None
        if cast is float and not math.isfinite(v):
            problems.append(f"{key}: must be finite")
        elif positive and not v > 0:
            problems.append(f"{key}: must be positive, got {v}")
        elif nonneg and not v >= 0:
            problems.append(f"{key}: must be nonnegative, got {v}")
        return v

    def values(key, lo=None, hi=None, positive=False):
        if key not in raw:
            return ()
        try:
            vals = parse_values(raw[key], key)
        except ValueError as exc:
            problems.append(str(exc))
            return ()
        if not vals:
            problems.append(f"{key}: empty list")
        for v in vals:
            if not math.isfinite(v) or (positive and not v > 0) \
                    or (lo is not None and v < lo) or (hi is not None and v > hi):
                rng = "positive" if positive else f"in [{lo}, {hi}]"
                problems.append(f"{key}: value {v} must be {rng}")
                break
        return vals

    # source
    src = raw.get("source", raw.get("spectrum", raw.get("kernel")))
    if "eigenvalues" in raw:
        try:
            ev = parse_values(raw["eigenvalues"], "eigenvalues")
            if not ev or any(not (math.isfinite(v) and v >= 0) for v in ev):
                raise ValueError("eigenvalues: need a nonempty list of nonnegative numbers")
            out["source"] = {"eigenvalues": sorted(ev, reverse=True), "tail_trace": 0.0}
            out["source_kind"] = "eigen"
        except ValueError as exc:
            problems.append(str(exc))
        if src is not None:
            problems.append("eigenvalues: conflicts with --spectrum")
    elif src is not None:
        try:
            obj = load_source(src)
            out["source"] = obj
            out["source_kind"] = source_kind(obj)
        except (OSError, ValueError) as exc:
            problems.append(f"spectrum: {exc}")

    lam = num("lam") if "lam" in raw else None
    if lam is None and "lambda" in raw:
        raw["lam"] = raw["lambda"]
        lam = num("lam")
    if lam is not None and not lam > 0:
        problems.append(f"lambda: must be positive, got {lam}")
    out["lam"] = lam
    out["perception"] = num("perception", nonneg=True)
    out["truncation"] = num("truncation", int, nonneg=True)
    out["resolution"] = num("resolution", int)
    if out["resolution"] is not None and out["resolution"] < 2:
        problems.append("resolution: needs at least 2 nodes")
    samples = num("samples", int, positive=True)
    if samples is not None:
        out["samples"] = samples
    seed = num("seed", int)
    if seed is not None:
        if not 0 <= seed < 2 ** 64:
            problems.append("seed: must be a 64-bit unsigned integer")
        out["seed"] = seed
    threads = num("threads", int, positive=True)
    out["threads"] = threads
    unit = raw.get("unit", "nats")
    if unit not in ("nats", "bits"):
        problems.append(f"unit: must be 'nats' or 'bits', got {unit!r}")
    out["unit"] = unit
    fmt = raw.get("format", "csv")
    if fmt not in ("csv", "json"):
        problems.append(f"format: must be 'csv' or 'json', got {fmt!r}")
    out["fmt"] = fmt
    out["eigenfunctions"] = bool(raw.get("eigenfunctions", False))
    out["output"] = raw.get("output")

    gamma = values("gamma", positive=True)
    alpha = values("alpha", 0.0, 1.0)
    distortion = values("distortion", positive=True)

    kind = out.get("source_kind")
    need_source = command != "scalar"
    if need_source and "source" not in out and not any(p.startswith(("spectrum", "eigenvalues")) for p in problems):
        problems.append("spectrum: a source is required")

    if command == "scalar":
        if lam is None and "lam" not in raw:
            problems.append("lambda: required")
        if out["perception"] is None and "perception" not in raw:
            problems.append("perception: required")
        if gamma and distortion:
            problems.append("gamma/distortion: give exactly one, not both")
        elif not gamma and not distortion and "gamma" not in raw and "distortion" not in raw:
            problems.append("gamma/distortion: one is required")
        if len(gamma) > 1 or len(distortion) > 1:
            problems.append("scalar: gamma and distortion take a single value")
    elif command == "spectrum":
        if kind not in (None, "kernel"):
            problems.append("kernel: spectrum needs a kernel config with a 'domain'")
    elif command in ("curve", "verify"):
        if kind not in (None, "eigen", "kernel"):
            problems.append(f"spectrum: {command} needs an eigen-spectrum or a kernel config")
        if out["perception"] is None and "perception" not in raw:
            problems.append("perception: required")
        if command == "curve":
            d_range = [k for k in ("dmin", "dmax", "points") if k in raw]
            if distortion and d_range:
                problems.append("distortion: conflicts with --dmin/--dmax/--points")
            elif not distortion:
                if len(d_range) != 3:
                    problems.append("dmin/dmax/points: all three are required (or --distortion)")
                else:
                    dmin, dmax = num("dmin", positive=True), num("dmax", positive=True)
                    pts = num("points", int, positive=True)
                    if None not in (dmin, dmax, pts):
                        if dmax < dmin:
                            problems.append("dmax: must be >= dmin")
                        else:
                            distortion = parse_values(f"{dmin!r}:{dmax!r}:{pts}", "distortion")
        else:
            if len(distortion) != 1:
                problems.append("distortion: verify takes a single target")
    else:
        if kind not in (None, "spectral"):
            problems.append(f"spectrum: {command} needs a spectral density config")
        if command == "sweep":
            if not gamma and "gamma" not in raw:
                gamma = parse_values("{}:{}:{}".format(*DEFAULT_GAMMA_RANGE), "gamma")
            if not alpha and "alpha" not in raw:
                alpha = parse_values("{}:{}:{}".format(*DEFAULT_ALPHA_RANGE), "alpha")
        if command == "profile" and len(gamma) != 1:
            problems.append("gamma: profile takes a single water level")

    if problems:
        raise ConfigError(problems)
    out.update(gamma=gamma, alpha=alpha, distortion=distortion)
    return RunConfig(**out)


# --------------------------------------------------------------------------
# execution

def _rate(x, unit):
    return x / LN2 if unit == "bits" else x


def _spectrum_of(cfg: RunConfig) -> EigenSpectrum:
    if cfg.source_kind == "eigen":
        if cfg.truncation is not None:
            raise ValueError("--truncation only applies to kernel sources")
        return EigenSpectrum.from_dict(cfg.source)
    return decompose(kernel_from_config(cfg.source), n=cfg.truncation)


def _spectral_of(cfg: RunConfig):
    spec = spectral_density_from_config(cfg.source)
    grid = spec.grid(cfg.resolution)
    return spec, grid


def _run_scalar(cfg):
    lam, P = cfg.lam, cfg.perception
    if cfg.gamma:
        gamma = cfg.gamma[0]
    else:
        gamma = solve_gamma_scalar(lam, cfg.distortion[0], P)
    a = allocate(lam, min(gamma, 1e150 * lam), P)
    D, R = a.D, a.R
    if math.isinf(gamma):
        D, R = cfg.distortion[0], 0.0
    header = ["lambda", "P", "gamma", "branch", "D", "R_nats", "R_bits", "nu"]
    row = [lam, P, gamma, str(a.branch), D, R, R / LN2, a.nu]
    return header, [row]


def _run_curve(cfg):
    spec = _spectrum_of(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        points = rdp_curve(spec, cfg.perception, cfg.distortion)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    header = ["D", "P", "R", "gamma", "alpha"]
    rows = [[p.distortion, p.perception, _rate(p.rate, cfg.unit), p.gamma, p.alpha] for p in points]
    return header, rows


def _run_verify(cfg):
    spec = _spectrum_of(cfg)
    plan = heuristic_perception(spec, cfg.perception)
    result = evaluate(spec, plan, solve_gamma(spec, plan, cfg.distortion[0]))
    mc = monte_carlo_verify(spec, result, cfg.samples, cfg.seed)
    header = ["dim", "lambda", "P_i", "branch", "R", "D_analytic", "D_empirical", "D_std_error",
              "W2_analytic", "W2_empirical", "W2_std_error"]
    rows = []
    for j, d in enumerate(result.per_dim):
        rows.append([d.index, d.lam, d.P, str(d.branch), _rate(d.R, cfg.unit), d.D,
                     mc.per_dim_distortion[j], mc.per_dim_distortion_se[j],
                     d.w2, mc.per_dim_perception[j], mc.per_dim_perception_se[j]])
    rows.append(["total", math.fsum(d.lam for d in result.per_dim) + spec.tail_trace,
                 plan.total, "", _rate(result.total_rate, cfg.unit), result.total_distortion,
                 mc.empirical_distortion, mc.distortion_std_error, result.total_perception,
                 mc.empirical_perception, mc.perception_std_error])
    return header, rows


def _run_stationary(cfg):
    spec, grid = _spectral_of(cfg)
    points = sweep(spec, cfg.gamma, cfg.alpha, grid, threads=cfg.threads)
    header = ["alpha", "gamma", "R", "D", "P"]
    rows = [[p.alpha, p.gamma, _rate(p.rate, cfg.unit), p.distortion, p.perception] for p in points]
    return header, rows


def _run_profile(cfg):
    spec, grid = _spectral_of(cfg)
    s_val = eval_spectral_density(spec, grid.nodes)
    gamma = cfg.gamma[0]
    cols = [per_frequency_distortion(s_val, gamma, a) for a in cfg.alpha]
    header = ["f", "S"] + [f"D_hat(alpha={fmt_float(a)})" for a in cfg.alpha]
    rows = [[f, s] + [c[i] for c in cols] for i, (f, s) in enumerate(zip(grid.nodes, s_val))]
    return header, rows


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if v is None:
        return ""
    return str(v)


def render(cfg: RunConfig, header, rows) -> str:
    meta = f"# gp-rdpf {__version__} config={cfg.digest()} seed={cfg.seed} rate_unit={cfg.unit}"
    if cfg.fmt == "json":
        doc = {"meta": {"version": __version__, "config": cfg.digest(), "seed": cfg.seed,
                        "rate_unit": cfg.unit},
               "columns": header, "rows": [[_json_value(v) for v in r] for r in rows]}
        return json.dumps(doc) + "\n"
    buf = io.StringIO()
    buf.write(meta + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def execute(cfg: RunConfig) -> str:
    """Run a validated configuration and return the rendered output."""
    if cfg.command == "spectrum":
        kernel: KernelSpec = kernel_from_config(cfg.source)
        spec = decompose(kernel, n=cfg.truncation)
        doc = spec.to_dict(eigenfunctions=cfg.eigenfunctions)
        doc["meta"] = {"version": __version__, "config": cfg.digest(), "seed": cfg.seed}
        return json.dumps(doc) + "\n"
    handler = {
        "scalar": _run_scalar,
        "curve": _run_curve,
        "verify": _run_verify,
        "stationary": _run_stationary,
        "sweep": _run_stationary,
        "profile": _run_profile,
    }[cfg.command]
    header, rows = handler(cfg)
    return render(cfg, header, rows)


def run(cfg: RunConfig) -> int:
    """Execute and write the output; returns the process exit code."""
    try:
        text = execute(cfg)
    except (FeasibilityError, NumericalError, ConsistencyError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if cfg.output is None:
            sys.stdout.write(text)
        else:
            with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); stop quietly
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 1
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"usage error: {p}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
