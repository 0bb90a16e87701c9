"""Command-line sweeps with CSV/JSON output and a per-row result cache.

Subcommands and their CSV columns::

    acausal     r, t, I, abs_error, status
    decay       r, r_times_I, abs_error, status
    signal      sep, causal_re, causal_im, acausal_re, acausal_im, total_re, total_im,
                causal_scale, status
    negativity  r, L, M_re, M_im, abs_M, N2, N, log_scale, N2_scaled, abs_error, status
    boundary    omega, r_star, r_lo, r_hi, iterations, status
    range-diff  omega, r_star, r_star_inf, delta_r, status
    validate    check, value, tolerance, status

All quantities are in units of tau = 1 (c = 1); ``--tau`` is accepted only
with the value 1.  ``inf`` spells the cutoff-free field.

Exit codes: 0 success, 1 usage error, 2 at least one row failed, 3 a
validation check failed.
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
import tempfile
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from . import __version__
from .comm import acausal_term, acausal_term_pv_oracle, smeared_signal
from .field import (
    BandRegion,
    DetectorSpec,
    SpacetimeSeparation,
    bandlimited_timeordered_kernel,
    in_lightcone_zone,
    wightman_massless,
)
from .harvest import (
    harvest_point,
    harvesting_boundary,
    monte_carlo_M_oracle,
    nonlocal_M,
    range_difference_detail,
)

__all__ = [
    "SCHEMA_VERSION",
    "COMMANDS",
    "UsageError",
    "GridSpec",
    "RunConfig",
    "ResultRecord",
    "parse_config",
    "run",
    "cache_lookup",
    "cache_store",
    "main",
]

SCHEMA_VERSION = 1
COMMANDS = ("acausal", "decay", "signal", "negativity", "boundary", "range-diff", "validate")

COLUMNS = {
    "acausal": ["r", "t", "I", "abs_error", "status"],
    "decay": ["r", "r_times_I", "abs_error", "status"],
    "signal": ["sep", "causal_re", "causal_im", "acausal_re", "acausal_im", "total_re", "total_im",
               "causal_scale", "status"],
    "negativity": ["r", "L", "M_re", "M_im", "abs_M", "N2", "N", "log_scale", "N2_scaled",
                   "abs_error", "status"],
    "boundary": ["omega", "r_star", "r_lo", "r_hi", "iterations", "status"],
    "range-diff": ["omega", "r_star", "r_star_inf", "delta_r", "status"],
    "validate": ["check", "value", "tolerance", "status"],
}

# Primary grid per command, with its default.
PRIMARY = {
    "acausal": ("r", "1:8:8"),
    "decay": ("r", "1:50:200"),
    "signal": ("sep", None),
    "negativity": ("r", "2:40:20"),
    "boundary": ("omega", "10:30:5"),
    "range-diff": ("omega", "10:30:5"),
    "validate": (None, None),
}

DEFAULTS = {"cutoff": 1.0, "omega": 2.0, "t": 0.0, "sigma": 0.5, "tau": 1.0, "sep": 3.0}
PARAM_KEYS = tuple(DEFAULTS)
GRID_KEYS = ("omega-grid", "r-grid")
RUN_KEYS = ("out", "json", "cache-dir", "threads", "seed", "command")


class UsageError(ValueError):
    """Bad flag or config value; ``key`` names the offender."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass(frozen=True)
class GridSpec:
    start: float
    stop: float
    count: int
    spacing: str = "linear"

    def values(self) -> list[float]:
        if self.spacing == "log":
            return [float(v) for v in np.geomspace(self.start, self.stop, self.count)]
        return [float(v) for v in np.linspace(self.start, self.stop, self.count)]

    def text(self) -> str:
        tail = ":log" if self.spacing == "log" else ""
        return f"{self.start!r}:{self.stop!r}:{self.count}{tail}"

    @classmethod
    def parse(cls, key: str, text: str) -> "GridSpec":
        parts = text.strip().split(":")
        if len(parts) not in (3, 4):
            raise UsageError(key, f"grid must be a:b:n[:log], got {text!r}")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(key, f"malformed grid {text!r}") from None
        spacing = "linear"
        if len(parts) == 4:
            if parts[3] not in ("log", "linear", "lin"):
                raise UsageError(key, f"unknown spacing {parts[3]!r}")
            spacing = "log" if parts[3] == "log" else "linear"
        if count < 2:
            raise UsageError(key, "grid count must be >= 2")
        if not start < stop:
            raise UsageError(key, "grid needs start < stop")
        if spacing == "log" and not start > 0:
            raise UsageError(key, "log spacing needs start > 0")
        return cls(start, stop, count, spacing)


@dataclass
class RunConfig:
    command: str
    parameters: dict[str, Any]
    grids: dict[str, GridSpec] = field(default_factory=dict)
    output_path: str | None = None
    json_path: str | None = None
    cache_dir: str | None = None
    threads: int | str = 1
    seed: int = 0

    def canonical(self) -> dict:
        """Everything that determines the numbers (not where they go or how fast)."""
        return {
            "command": self.command,
            "parameters": {k: _canon_value(v) for k, v in sorted(self.parameters.items())},
            "grids": {k: g.text() for k, g in sorted(self.grids.items())},
            "seed": self.seed,
        }

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def worker_count(self) -> int:
        if self.threads == "auto":
            return max(1, os.cpu_count() or 1)
        return int(self.threads)


@dataclass
class ResultRecord:
    schema_version: int
    command: str
    parameters: dict
    rows: list[dict]
    errors: list[float]
    wall_time: float
    library_version: str
    config_hash: str
    cache_hits: int = 0

    @property
    def failed_rows(self) -> int:
        return sum(1 for r in self.rows if str(r.get("status", "")).startswith("error"))


def _canon_value(v):
    if isinstance(v, GridSpec):
        return v.text()
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return v


# ----------------------------------------------------------------------------- parsing

def _parse_float(key: str, text, allow_inf=False) -> float:
    try:
        val = float(text)
    except (TypeError, ValueError):
        raise UsageError(key, f"not a number: {text!r}") from None
    if math.isnan(val) or (math.isinf(val) and not (allow_inf and val > 0)):
        raise UsageError(key, f"invalid value {text!r}")
    return val


def _read_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("_", "-")
        if key in out and out[key] != value:
            raise UsageError(key, f"conflicting values {out[key]!r} and {value!r} in config file")
        out[key] = value
    return out


def _argparser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covband", description="Covariant-cutoff field observables.")
    p.add_argument("command", nargs="?", help="|".join(COMMANDS))
    for key in PARAM_KEYS + GRID_KEYS + ("out", "json", "cache-dir", "threads", "seed", "config"):
        p.add_argument(f"--{key}", dest=key.replace("-", "_"), default=None)
    return p


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError("argv", message)


def parse_config(argv: list[str] | None = None, text: str | None = None) -> RunConfig:
    """Build a validated :class:`RunConfig` from flags and/or ``key = value`` text.

    Flags override values from the file (given via ``--config`` or ``text``).

    Raises
    ------
    UsageError
        Unknown key, malformed grid or value, or a file that disagrees with itself
        or with the subcommand.
    """
    base = _argparser()
    parser = _Parser(prog=base.prog, description=base.description)
    for action in base._actions[1:]:
        parser._add_action(action)
    ns = parser.parse_args(list(argv or []))
    values: dict[str, str] = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                text = (text or "") + "\n" + fh.read()
        except OSError as exc:
            raise UsageError("config", str(exc)) from None
    if text:
        values.update(_read_config_text(text))
    allowed = set(PARAM_KEYS) | set(GRID_KEYS) | set(RUN_KEYS)
    for key in values:
        if key not in allowed:
            raise UsageError(key, "unknown key")
    for key in PARAM_KEYS + GRID_KEYS + ("out", "json", "cache-dir", "threads", "seed"):
        flag = getattr(ns, key.replace("-", "_"))
        if flag is not None:
            values[key] = flag
    command = ns.command or values.get("command")
    if ns.command and "command" in values and values["command"] != ns.command:
        raise UsageError("command", f"file says {values['command']!r}, argv says {ns.command!r}")
    if command not in COMMANDS:
        raise UsageError("command", f"expected one of {', '.join(COMMANDS)}, got {command!r}")

    params: dict[str, Any] = {}
    for key, default in DEFAULTS.items():
        raw = values.get(key)
        if key == "sep" and raw is not None and ":" in str(raw):
            continue
        params[key] = default if raw is None else _parse_float(key, raw, allow_inf=(key == "cutoff"))
    if not params["cutoff"] > 0:
        raise UsageError("cutoff", f"must be > 0 or inf, got {values.get('cutoff')}")
    if not params["sigma"] > 0:
        raise UsageError("sigma", "must be > 0")
    if params["omega"] < 0:
        raise UsageError("omega", "must be >= 0")
    if params["tau"] != 1.0:
        raise UsageError("tau", "all inputs are in units of tau; tau is fixed to 1")

    grids: dict[str, GridSpec] = {}
    for key in GRID_KEYS:
        if key in values:
            grids[key.removesuffix("-grid")] = GridSpec.parse(key, values[key])
    if "sep" in values and ":" in str(values["sep"]):
        grids["sep"] = GridSpec.parse("sep", values["sep"])
    elif "sep" in params and not params["sep"] > 0:
        raise UsageError("sep", "must be > 0")
    primary, default = PRIMARY[command]
    if primary is not None and primary not in grids and default is not None:
        grids[primary] = GridSpec.parse(primary, default)

    threads: int | str = values.get("threads", "1")
    if threads != "auto":
        try:
            threads = int(threads)
        except ValueError:
            raise UsageError("threads", f"expected N or auto, got {threads!r}") from None
        if threads < 1:
            raise UsageError("threads", "must be >= 1")
    try:
        seed = int(values.get("seed", "0"))
    except ValueError:
        raise UsageError("seed", f"not an integer: {values.get('seed')!r}") from None
    return RunConfig(command, params, grids, values.get("out"), values.get("json"),
                     values.get("cache-dir"), threads, seed)


# ----------------------------------------------------------------------------- cache

def _row_path(cache_dir: str, config_hash: str, row_key: str) -> str:
    digest = hashlib.sha256(row_key.encode()).hexdigest()[:24]
    return os.path.join(cache_dir, config_hash, f"{digest}.json")


def cache_lookup(cache_dir: str, config_hash: str, row_key: str,
                 library_version: str = __version__) -> dict | None:
    """Previously stored row, or None on a miss, a version mismatch or a corrupt entry."""
    path = _row_path(cache_dir, config_hash, row_key)
    try:
        with open(path, encoding="utf-8") as fh:
            entry = json.load(fh)
    except FileNotFoundError:
        return None
    except (OSError, ValueError) as exc:
        warnings.warn(f"ignoring corrupt cache entry {path}: {exc}", stacklevel=2)
        return None
    if not isinstance(entry, dict) or entry.get("row_key") != row_key:
        warnings.warn(f"ignoring malformed cache entry {path}", stacklevel=2)
        return None
    if entry.get("schema_version") != SCHEMA_VERSION or entry.get("library_version") != library_version:
        return None
    return entry.get("row")


def _atomic_write(path: str, data: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cache_store(cache_dir: str, config_hash: str, row_key: str, row: dict,
                library_version: str = __version__):
    entry = {"schema_version": SCHEMA_VERSION, "library_version": library_version,
             "row_key": row_key, "row": row}
    _atomic_write(_row_path(cache_dir, config_hash, row_key), json.dumps(entry, sort_keys=True))


# ----------------------------------------------------------------------------- per-row compute

def _det(p: dict, omega: float | None = None) -> DetectorSpec:
    return DetectorSpec(p["omega"] if omega is None else omega, 1.0, p["sigma"])


def _status(converged: bool) -> str:
    return "ok" if converged else "unconverged"


def _row_acausal(p, r):
    s = acausal_term(r, p["t"], p["cutoff"])
    return {"r": r, "t": p["t"], "I": s.value, "abs_error": s.estimate.abs_error,
            "status": _status(s.estimate.converged)}


def _row_decay(p, r):
    s = acausal_term(r, 0.0, p["cutoff"])
    return {"r": r, "r_times_I": r * s.value, "abs_error": r * s.estimate.abs_error,
            "status": _status(s.estimate.converged)}


def _row_signal(p, d):
    det = _det(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        amp = smeared_signal(det, det, d, p["cutoff"])
    ok = all(e.converged for e in amp.estimates.values())
    status = _status(ok) + (" overlap" if amp.overlap_warning else "")
    return {"sep": d, "causal_re": amp.causal.real, "causal_im": amp.causal.imag,
            "acausal_re": amp.acausal.real, "acausal_im": amp.acausal.imag,
            "total_re": amp.total.real, "total_im": amp.total.imag,
            "causal_scale": amp.causal_scale, "status": status}


def _row_negativity(p, r):
    hp = harvest_point(r, p["cutoff"], _det(p))
    return {"r": r, "L": hp.L, "M_re": hp.M.real, "M_im": hp.M.imag, "abs_M": abs(hp.M),
            "N2": hp.N2, "N": hp.N, "log_scale": hp.log_scale, "N2_scaled": hp.N2_scaled,
            "abs_error": hp.estimates[1].abs_error * math.exp(hp.log_scale), "status": "ok"}


def _scan(cfg_grids, omega, sigma):
    g = cfg_grids.get("r")
    return None if g is None else (g.start, g.stop, g.count)


def _row_boundary(p, omega, grids):
    b = harvesting_boundary(omega, p["cutoff"], _det(p, omega), _scan(grids, omega, p["sigma"]))
    return {"omega": omega, "r_star": b.r_star, "r_lo": b.bracket[0], "r_hi": b.bracket[1],
            "iterations": b.iterations, "status": "ok"}


def _row_range_diff(p, omega, grids):
    b_lam, b_inf = range_difference_detail(omega, p["cutoff"], _det(p, omega), None,
                                           _scan(grids, omega, p["sigma"]))
    return {"omega": omega, "r_star": b_lam.r_star, "r_star_inf": b_inf.r_star,
            "delta_r": b_lam.r_star - b_inf.r_star, "status": "ok"}


def _validate_rows(cfg: RunConfig) -> list[dict]:
    rows = []
    worst = 0.0
    for r in (1.0, 2.0, 4.0, 8.0):
        for t in (0.0, 0.5, 1.0, 2.0):
            if in_lightcone_zone(t, r):
                continue
            a = acausal_term(r, t, 1.0).value
            b = acausal_term_pv_oracle(r, t, 1.0).value
            worst = max(worst, abs(a - b) / abs(b))
    rows.append({"check": "acausal_representations", "value": worst, "tolerance": 1e-5,
                 "status": "pass" if worst <= 1e-5 else "fail"})
    worst = 0.0
    for lam in (0.2, 1.0, 5.0):
        band = BandRegion(lam)
        for t in np.linspace(-2.0, 2.0, 5):
            for r in np.linspace(0.5, 4.5, 5):
                if in_lightcone_zone(t, r):
                    continue
                kp = bandlimited_timeordered_kernel(SpacetimeSeparation(t, r), band).value
                km = bandlimited_timeordered_kernel(SpacetimeSeparation(-t, r), band).value
                d = wightman_massless(SpacetimeSeparation(t, r))
                worst = max(worst, abs(kp + np.conj(km) - d) / abs(d))
    rows.append({"check": "kernel_decomposition", "value": worst, "tolerance": 1e-6,
                 "status": "pass" if worst <= 1e-6 else "fail"})
    det = DetectorSpec(2.0, 1.0, cfg.parameters["sigma"])
    r = 6.0 * det.sigma
    m = nonlocal_M(r, 2.0, 1.0, det)
    mc = monte_carlo_M_oracle(r, 2.0, 1.0, det, samples=1_000_000, seed=cfg.seed)
    z = max(abs(m.real - mc.value.real) / mc.stderr_re, abs(m.imag - mc.value.imag) / mc.stderr_im)
    rows.append({"check": "nonlocal_M_vs_monte_carlo", "value": z, "tolerance": 3.0,
                 "status": "pass" if z <= 3.0 else "fail"})
    return rows


# ----------------------------------------------------------------------------- run

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_csv(cfg: RunConfig, rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# covband {__version__}, schema {SCHEMA_VERSION}\n")
    buf.write(f"# command = {cfg.command}\n")
    canon = cfg.canonical()
    for k, v in canon["parameters"].items():
        buf.write(f"# {k} = {v}\n")
    for k, v in canon["grids"].items():
        buf.write(f"# {k}-grid = {v}\n")
    buf.write(f"# seed = {cfg.seed}\n")
    buf.write(f"# config_hash = {cfg.config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    cols = COLUMNS[cfg.command]
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_fmt(row.get(c, "")) for c in cols])
    return buf.getvalue()


def _row_job(cfg: RunConfig) -> tuple[list, Callable | None, str | None]:
    p = cfg.parameters
    cmd = cfg.command
    if cmd == "validate":
        return [], None, None
    name, _ = PRIMARY[cmd]
    xs = cfg.grids[name].values() if name in cfg.grids else [p[name]]
    fn = {
        "acausal": _row_acausal,
        "decay": _row_decay,
        "signal": _row_signal,
        "negativity": _row_negativity,
        "boundary": lambda pp, x: _row_boundary(pp, x, cfg.grids),
        "range-diff": lambda pp, x: _row_range_diff(pp, x, cfg.grids),
    }[cmd]
    return xs, fn, name


def _failed_row(cmd: str, name: str, x: float, exc: Exception, params: dict) -> dict:
    row = {c: params.get(c, math.nan) for c in COLUMNS[cmd]}
    row[name] = x
    row["status"] = f"error: {type(exc).__name__}: {exc}"
    return row


def run(cfg: RunConfig) -> ResultRecord:
    """Evaluate every grid point (cache first), then write CSV/JSON atomically if requested."""
    t0 = time.perf_counter()
    hits = 0
    if cfg.command == "validate":
        rows = _validate_rows(cfg)
    else:
        xs, fn, name = _row_job(cfg)
        chash = cfg.config_hash

        def one(x):
            key = f"{name}={x!r}"
            if cfg.cache_dir:
                cached = cache_lookup(cfg.cache_dir, chash, key, __version__)
                if cached is not None:
                    return cached, True
            try:
                row = fn(cfg.parameters, x)
            except Exception as exc:  # recorded per row, never fatal
                return _failed_row(cfg.command, name, x, exc, cfg.parameters), False
            row = {k: (float(v) if isinstance(v, (np.floating, np.integer)) else v) for k, v in row.items()}
            if cfg.cache_dir:
                cache_store(cfg.cache_dir, chash, key, row, __version__)
            return row, False

        workers = cfg.worker_count()
        if workers > 1 and len(xs) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one, xs))
        else:
            results = [one(x) for x in xs]
        rows = [r for r, _ in results]
        hits = sum(1 for _, h in results if h)
    errors = [float(r.get("abs_error", math.nan)) if "abs_error" in r else math.nan for r in rows]
    record = ResultRecord(SCHEMA_VERSION, cfg.command, cfg.canonical(), rows, errors,
                          time.perf_counter() - t0, __version__, cfg.config_hash, hits)
    if cfg.output_path:
        _atomic_write(cfg.output_path, render_csv(cfg, rows))
    if cfg.json_path:
        _atomic_write(cfg.json_path, json.dumps(asdict(record), indent=1, sort_keys=True))
    return record


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    record = run(cfg)
    if not cfg.output_path:
        sys.stdout.write(render_csv(cfg, record.rows))
    if cfg.command == "validate":
        return 0 if all(r["status"] == "pass" for r in record.rows) else 3
    return 2 if record.failed_rows else 0


if __name__ == "__main__":
    sys.exit(main())
