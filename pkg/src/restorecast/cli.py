"""Command-line driver: scenario generation, efficiency series, updates, forecasts.

Every command reads a JSON run configuration (optional) whose fields can
be overridden by flags, writes its outputs atomically into ``--out`` and
records a ``run.json`` manifest there. Commands only talk through files,
so ``forecast --now 24`` needs the ``posterior_24.csv`` written by
``update --now 24``.

Exit status: 0 on success, 1 for invalid input, 2 for runtime or numeric
failures.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import platform
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .forecast import ForecastError, ForecastQuery, forecast_distribution, forecast_envelope
from .ingest import parse_incidents, parse_network_geometry, snap_incidents, write_incidents, write_network_geometry
from .mcmc import McmcConfig, PosteriorSamples, chain_diagnostics, mh_chain
from .network import DamageState
from .scenario import ScenarioSpec, generate_scenario
from .timeline import (
    HOUR,
    DamageTimeline,
    RestorationProgressCurve,
    TimelineError,
    expand_incidents,
    extract_restoration_curve,
    functionality_series,
    round_to_hour,
)

logger = logging.getLogger("restorecast")

SERIES_CSV = "series.csv"
CURVE_CSV = "curve.csv"
SERIES_META = "series.json"
MANIFEST = "run.json"


class ConfigError(ValueError):
    pass


@dataclass
class ForecastSettings:
    n_draws: int = 10_000
    grid: list[float] | None = None
    summary_level: float = 0.99


@dataclass
class RunConfig:
    geometry: str | None = None
    incidents: str | None = None
    out: str = "restorecast-run"
    seed: int = 0
    completion_fraction: float = 0.99
    snap_tolerance_m: float = 250.0
    trailing_hours: int = 1
    checkpoints: list[float] = field(default_factory=lambda: [12.0, 24.0, 36.0, 48.0, 60.0])
    mcmc: dict[str, Any] = field(default_factory=dict)
    forecast: ForecastSettings = field(default_factory=ForecastSettings)
    scenario: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        data = dict(data)
        fc = data.pop("forecast", {}) or {}
        bad = set(fc) - {f.name for f in fields(ForecastSettings)}
        if bad:
            raise ConfigError(f"unknown forecast field(s): {', '.join(sorted(bad))}")
        cfg = cls(**data, forecast=ForecastSettings(**fc))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not 0 < self.completion_fraction <= 1:
            raise ConfigError("completion_fraction must lie in (0, 1]")
        if not self.snap_tolerance_m > 0:
            raise ConfigError("snap_tolerance_m must be positive")
        if int(self.trailing_hours) != self.trailing_hours or self.trailing_hours < 0:
            raise ConfigError("trailing_hours must be a non-negative integer")
        if not self.checkpoints or any(not c > 0 for c in self.checkpoints):
            raise ConfigError("checkpoints must be positive hours")
        if self.forecast.n_draws < 1000:
            raise ConfigError("forecast.n_draws must be at least 1000")
        if not 0 < self.forecast.summary_level <= 1:
            raise ConfigError("forecast.summary_level must lie in (0, 1]")
        self.mcmc_config()

    def mcmc_config(self) -> McmcConfig:
        params = {k: v for k, v in self.mcmc.items() if k != "seed"}
        unknown = set(params) - set(McmcConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown mcmc field(s): {', '.join(sorted(unknown))}")
        try:
            return McmcConfig.from_dict({**params, "seed": self.seed})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad mcmc settings: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)


class _WarningLog(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record):
        self.messages.append(record.getMessage())


@contextlib.contextmanager
def _atomic(path: Path):
    """Yield a temporary sibling path and move it over ``path`` on success."""
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _write_json(path: Path, doc: Any) -> None:
    with _atomic(path) as tmp:
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _write_rows(path: Path, header: list[str], rows) -> None:
    with _atomic(path) as tmp, open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _tag(hours: float) -> str:
    return str(int(hours)) if float(hours).is_integer() else repr(float(hours))


def _require(path: Path, hint: str) -> Path:
    if not path.is_file():
        raise FileNotFoundError(f"expected {path} ({hint})")
    return path


class Run:
    """State for one CLI invocation: config, output dir, manifest."""

    def __init__(self, command: str, cfg: RunConfig, argv: list[str]):
        self.command = command
        self.cfg = cfg
        self.argv = argv
        self.out = Path(cfg.out)
        self.outputs: list[str] = []
        self.extra: dict[str, Any] = {}
        self.warnings = _WarningLog()

    def __enter__(self):
        self.out.mkdir(parents=True, exist_ok=True)
        logging.getLogger("restorecast").addHandler(self.warnings)
        return self

    def __exit__(self, *exc):
        logging.getLogger("restorecast").removeHandler(self.warnings)
        if exc[0] is None:
            self.write_manifest()
        return False

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def write_manifest(self) -> None:
        import numba
        import scipy

        doc = {
            "command": self.command,
            "argv": self.argv,
            "config": self.cfg.to_dict(),
            "seeds": {"run": self.cfg.seed, "mcmc": self.cfg.seed, "forecast": self.cfg.seed},
            "versions": {
                "restorecast": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "numba": numba.__version__,
            },
            "warnings": self.warnings.messages,
            "outputs": sorted(set(self.outputs)),
            **self.extra,
        }
        _write_json(self.out / MANIFEST, doc)


# commands ----------------------------------------------------------------


def cmd_simulate(run: Run, spec_path: str | None = None, seed: int | None = None) -> dict:
    data = dict(run.cfg.scenario)
    if spec_path:
        data.update(json.loads(Path(spec_path).read_text()))
    if seed is not None:
        data["seed"] = seed
    spec = ScenarioSpec.from_dict(data)
    scenario = generate_scenario(spec)

    geometry, incidents, truth = run.path("geometry.json"), run.path("incidents.csv"), run.path("truth.json")
    with _atomic(geometry) as tmp:
        write_network_geometry(scenario.geometry, tmp)
    with _atomic(incidents) as tmp:
        write_incidents(scenario.incidents, tmp)
    _write_json(truth, scenario.truth)
    run.cfg.scenario = spec.to_dict()
    run.cfg.geometry, run.cfg.incidents = str(geometry), str(incidents)
    return scenario.truth


def _empty_timeline(incidents) -> DamageTimeline:
    # nothing snapped: the network stays intact over the reported span
    first = round_to_hour(min(i.start for i in incidents))
    last = round_to_hour(max(i.end for i in incidents))
    steps = tuple(first + k * HOUR for k in range(int((last - first) // HOUR) + 1))
    return DamageTimeline(steps, tuple(DamageState(timestamp=s) for s in steps))


def cmd_series(run: Run) -> RestorationProgressCurve | None:
    cfg = run.cfg
    if not cfg.geometry or not cfg.incidents:
        raise ConfigError("series needs geometry and incidents paths (--geometry/--incidents or config)")
    geom = parse_network_geometry(_require(Path(cfg.geometry), "network geometry JSON"),
                                  endpoint_tolerance_m=cfg.snap_tolerance_m)
    incidents = parse_incidents(_require(Path(cfg.incidents), "incident CSV"))
    if not incidents:
        raise ConfigError(f"{cfg.incidents}: no incidents")
    snapped, unsnapped = snap_incidents(incidents, geom, cfg.snap_tolerance_m)
    net = geom.to_network()
    timeline = expand_incidents(snapped, net, int(cfg.trailing_hours)) if snapped else _empty_timeline(incidents)
    series = functionality_series(net, timeline)

    _write_rows(run.path(SERIES_CSV), ["timestamp", "efficiency"],
                ((ts.isoformat(), repr(float(e))) for ts, e in series.points))
    trough = int(np.argmin(series.efficiency))
    meta = {
        "E0": series.baseline_efficiency,
        "E_min": float(series.efficiency[trough]),
        "trough": series.timestamps[trough].isoformat(),
        "n_timesteps": len(series),
        "n_incidents": len(incidents),
        "unsnapped_incidents": [str(i.id) for i in unsnapped],
        "completion_fraction": cfg.completion_fraction,
    }
    run.extra["unsnapped_incidents"] = len(unsnapped)

    curve = None
    try:
        curve = extract_restoration_curve(series, cfg.completion_fraction)
    except TimelineError as exc:
        logger.warning("no restoration curve: %s", exc)
    if curve is not None:
        meta.update(t0=curve.t0.isoformat(), completion=curve.completion_time.isoformat(),
                    duration_hours=curve.duration_hours)
        _write_rows(run.path(CURVE_CSV), ["hours", "progress"],
                    ((repr(float(t)), repr(float(q))) for t, q in curve.points))
    _write_json(run.path(SERIES_META), meta)
    return curve


def _load_curve(out: Path) -> tuple[np.ndarray, np.ndarray]:
    path = _require(out / CURVE_CSV, "written by the series command")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["hours", "progress"]:
            raise ConfigError(f"{path}: expected header 'hours,progress'")
        rows = [(float(a), float(b)) for a, b in reader]
    if not rows:
        raise ConfigError(f"{path}: no rows")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


def _check_now(now: float, hours: np.ndarray) -> None:
    if not now > 0:
        raise ConfigError(f"--now must be positive, got {now}")
    if now > hours[-1]:
        raise ConfigError(f"--now {now} h lies after the restoration window (completion at {hours[-1]:g} h)")


def cmd_update(run: Run, now: float) -> PosteriorSamples:
    hours, progress = _load_curve(run.out)
    _check_now(now, hours)
    keep = hours <= now
    cfg = run.cfg.mcmc_config()
    post = mh_chain(cfg, (hours[keep], progress[keep]))
    tag = _tag(now)
    with _atomic(run.path(f"posterior_{tag}.csv")) as tmp:
        post.to_csv(tmp)
    diag = chain_diagnostics(post)
    diag.update(now=now, n_observations=int(keep.sum()), mcmc=cfg.to_dict())
    _write_json(run.path(f"posterior_{tag}.json"), diag)
    return post


def cmd_forecast(run: Run, now: float) -> dict:
    hours, progress = _load_curve(run.out)
    _check_now(now, hours)
    tag = _tag(now)
    post_path = _require(run.out / f"posterior_{tag}.csv", f"run 'update --now {tag}' first")
    post = PosteriorSamples.from_csv(post_path)
    q_r = float(progress[np.searchsorted(hours, now, side="right") - 1])
    if q_r <= 0:
        raise ForecastError(f"no restoration progress observed by {now:g} h; nothing to extrapolate")

    fc = run.cfg.forecast
    seed = run.cfg.seed
    envelope = forecast_envelope(post, now, q_r, fc.grid, fc.n_draws, seed)
    level = max(fc.summary_level, q_r)
    summary = forecast_distribution(post, ForecastQuery(now, q_r, level), fc.n_draws, seed)

    with _atomic(run.path(f"forecast_{tag}.csv")) as tmp:
        envelope.to_csv(tmp)
    meta = envelope.metadata()
    meta["summary"] = {"q_s": level, "mean_hours": summary.mean, "ci95": list(summary.ci95)}
    _write_json(run.path(f"forecast_{tag}.json"), meta)
    print(f"t={tag}h q_r={q_r:.4f} duration@{level:g}: mean {summary.mean:.2f} h, "
          f"95% CI [{summary.ci95[0]:.2f}, {summary.ci95[1]:.2f}] h")
    return meta


def cmd_pipeline(run: Run, simulate: bool = False, spec_path: str | None = None,
                 seed: int | None = None) -> dict:
    if simulate:
        cmd_simulate(run, spec_path, seed)
    curve = cmd_series(run)
    if curve is None:
        raise TimelineError("series produced no restoration curve; nothing to forecast")
    done = {}
    for now in run.cfg.checkpoints:
        if now > curve.duration_hours:
            logger.warning("checkpoint %g h is after completion (%g h); skipped", now, curve.duration_hours)
            continue
        if curve.progress_at(now) <= 0:
            logger.warning("no progress by checkpoint %g h; skipped", now)
            continue
        cmd_update(run, now)
        done[_tag(now)] = cmd_forecast(run, now)["summary"]
    run.extra["checkpoints"] = done
    return done


# argument handling -------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="seed for every random stream (overrides config)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--completion-fraction", type=float, help="fraction of baseline efficiency marking completion")
    p.add_argument("--snap-tolerance-m", type=float, help="incident snapping tolerance in meters")
    p.add_argument("--trailing-hours", type=int, help="hours appended after the last incident ends")
    p.add_argument("--geometry", help="network geometry JSON")
    p.add_argument("--incidents", help="incident CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="restorecast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic scenario")
    p.add_argument("--spec", help="scenario spec JSON")

    sub.add_parser("series", parents=[common], help="efficiency series and progress curve")

    for name, text in (("update", "posterior at a checkpoint"), ("forecast", "duration envelope at a checkpoint")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--now", type=float, required=True, help="hours since the trough")

    p = sub.add_parser("pipeline", parents=[common], help="series plus update and forecast at every checkpoint")
    p.add_argument("--simulate", action="store_true", help="generate the scenario first")
    p.add_argument("--spec", help="scenario spec JSON (with --simulate)")
    p.add_argument("--checkpoints", help="comma-separated hours, e.g. 12,24,36")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config:
        path = _require(Path(args.config), "run configuration")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        if "command" in data and "config" in data:
            # a run.json manifest: replay its resolved configuration
            data = data["config"]
    cfg = RunConfig.from_dict(data)
    flags = {
        "seed": args.seed,
        "out": args.out,
        "completion_fraction": args.completion_fraction,
        "snap_tolerance_m": args.snap_tolerance_m,
        "trailing_hours": args.trailing_hours,
        "geometry": args.geometry,
        "incidents": args.incidents,
    }
    if getattr(args, "checkpoints", None):
        try:
            flags["checkpoints"] = [float(v) for v in args.checkpoints.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --checkpoints: {exc}") from exc
    cfg = replace(cfg, **{k: v for k, v in flags.items() if v is not None})
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        with Run(args.command, cfg, argv) as run:
            if args.command == "simulate":
                cmd_simulate(run, args.spec, args.seed)
            elif args.command == "series":
                cmd_series(run)
            elif args.command == "update":
                cmd_update(run, args.now)
            elif args.command == "forecast":
                cmd_forecast(run, args.now)
            else:
                cmd_pipeline(run, args.simulate, args.spec, args.seed)
    except (RuntimeError, FloatingPointError, ArithmeticError) as exc:
        print(f"restorecast: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"restorecast: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
