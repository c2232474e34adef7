"""Command-line surface: simulate, replicate, ingest, fit, scan, impact.

Every command is deterministic given its configuration (seeds included).
A flat key=value config file may supply any flag's value; explicit flags
override the file. Exit codes: 0 success, 1 usage or config error, 2 data
error, 3 replication tolerance failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import (
    DataError,
    load_populations,
    read_series_csv,
    series_from_nyt,
    slice_window,
    state_series_from_nyt,
)
from .duration import DurationScan, ScanOptions, pre_post_guard, scan_durations
from .impact import ImpactOptions, run_pipeline
from .misd import FitOptions, fit
from .simulator import SimConfig, bin_to_days, generate_study, simulate
from .study import DEFAULT_MASTER_SEED, run_study

USAGE_ERROR, DATA_ERROR, ACCEPTANCE_FAILURE = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(USAGE_ERROR)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)  # mkstemp defaults to 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    import io

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue())


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    cfg: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"line {i}: expected key=value")
                key, _, value = line.partition("=")
                cfg[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        sys.exit(USAGE_ERROR)
    except ValueError as exc:
        print(f"config error in {path}: {exc}", file=sys.stderr)
        sys.exit(USAGE_ERROR)
    return cfg


def _merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Fill argument defaults from the config file; explicit flags win."""
    cfg = _load_config(getattr(args, "config", None))
    if not cfg:
        return
    for key, raw in cfg.items():
        if not hasattr(args, key):
            print(f"config error: unknown key {key!r}", file=sys.stderr)
            sys.exit(USAGE_ERROR)
        if getattr(args, key) is not None:
            continue  # flag was given explicitly
        setattr(args, key, raw)


def _resolved(args, key, default, cast=str):
    value = getattr(args, key)
    if value is None:
        return default
    try:
        if cast is bool and isinstance(value, str):
            return value.lower() in ("1", "true", "yes")
        return cast(value)
    except ValueError:
        print(f"config error: bad value for {key}: {value!r}", file=sys.stderr)
        sys.exit(USAGE_ERROR)


def _fit_options(args) -> FitOptions:
    return FitOptions(
        max_lag=_resolved(args, "max_lag", 30, int),
        tol=_resolved(args, "tol", 1e-4, float),
        max_iter=_resolved(args, "max_iter", 500, int),
        normalization=_resolved(args, "normalization", "per-parent"),
        anchor_sweeps=_resolved(args, "anchor_sweeps", 5, int),
        backend=_resolved(args, "backend", None, str) or None,
    )


def _scan_options(args) -> ScanOptions:
    return ScanOptions(
        span=_resolved(args, "span", 0.3, float),
        degree=_resolved(args, "degree", 2, int),
        warm_start=_resolved(args, "warm_start", True, bool),
    )


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--backend", choices=["numba", "numpy"],
                   help="numeric backend (default: numba when available)")


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-lag", dest="max_lag", type=int,
                   help="triggering support in days (default 30)")
    p.add_argument("--tol", type=float, help="EM convergence tolerance (default 1e-4)")
    p.add_argument("--max-iter", dest="max_iter", type=int,
                   help="EM iteration cap (default 500)")
    p.add_argument("--normalization", choices=["per-parent", "per-day"],
                   help="productivity normalization of reported levels (default per-parent)")
    p.add_argument("--anchor-sweeps", dest="anchor_sweeps", type=int,
                   help="tied burn-in sweeps anchoring the background rate (default 5)")


def _add_scan_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--span", type=float,
                   help="LOESS span for the duration scan (default 0.3)")
    p.add_argument("--degree", type=int,
                   help="LOESS local polynomial degree for the scan (default 2)")
    p.add_argument("--warm-start", dest="warm_start",
                   help="warm-start candidate fits (default true)")
    p.add_argument("--alpha", type=float,
                   help="guard test significance level (default 0.05)")
    p.add_argument("--half-window", dest="half_window", type=int,
                   help="guard window half-width in days (default 14)")


def _add_window_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--event-date", dest="event_date",
                   help="event date, ISO format (required)")
    p.add_argument("--pre-days", dest="pre_days", type=int,
                   help="days before the event in the window (default 30)")
    p.add_argument("--post-days", dest="post_days", type=int,
                   help="days after the event in the window (default 150)")


def _require(args, key, parser):
    value = getattr(args, key)
    if value is None:
        parser.error(f"missing required option --{key.replace('_', '-')}")
    return value


def _event_date(args, parser) -> dt.date:
    raw = _require(args, "event_date", parser)
    try:
        return dt.date.fromisoformat(str(raw))
    except ValueError:
        parser.error(f"bad --event-date {raw!r}; expected YYYY-MM-DD")


# --- commands ----------------------------------------------------------------

def cmd_simulate(args, parser) -> int:
    out_dir = Path(_require(args, "out_dir", parser))
    if _resolved(args, "study", False, bool):
        master = _resolved(args, "master_seed", DEFAULT_MASTER_SEED, int)
        catalogs = generate_study(master)
        manifest = []
        for cat in catalogs:
            _atomic_write_csv(
                out_dir / f"{cat.catalog_id}.csv",
                ["date", "count"],
                [
                    {"date": cat.series.date_of(d).isoformat(), "count": int(v)}
                    for d, v in enumerate(cat.series.counts)
                ],
            )
            manifest.append(
                {
                    "catalog_id": cat.catalog_id,
                    "scenario": cat.scenario,
                    "duration": cat.duration,
                    "seed": "-".join(str(s) for s in cat.seed),
                }
            )
        _atomic_write_csv(out_dir / "manifest.csv",
                          ["catalog_id", "scenario", "duration", "seed"], manifest)
        print(f"wrote {len(catalogs)} catalogs and manifest.csv to {out_dir}")
        return 0
    config = SimConfig(
        mu=_resolved(args, "mu", 3.0, float),
        decay_rate=_resolved(args, "decay_rate", 0.25, float),
        levels=(
            _resolved(args, "base_level", 0.2, float),
            _resolved(args, "during_level", 0.2, float),
            _resolved(args, "after_level", 0.2, float),
        ),
        t_star=_resolved(args, "t_star", 31.0, float),
        t_prime=_resolved(args, "t_prime", 31.0, float),
        horizon=_resolved(args, "horizon", 100.0, float),
        seed=_resolved(args, "seed", 0, int),
    )
    times = simulate(config)
    series = bin_to_days(times, int(np.ceil(config.horizon)), region_id="catalog")
    _atomic_write_csv(
        out_dir / "catalog.csv",
        ["date", "count"],
        [
            {"date": series.date_of(d).isoformat(), "count": int(v)}
            for d, v in enumerate(series.counts)
        ],
    )
    _atomic_write_csv(
        out_dir / "manifest.csv",
        ["catalog_id", "scenario", "duration", "seed"],
        [{
            "catalog_id": "catalog",
            "scenario": "custom",
            "duration": int(config.t_prime - config.t_star),
            "seed": str(config.seed),
        }],
    )
    print(f"wrote catalog.csv ({len(times)} points) and manifest.csv to {out_dir}")
    return 0


def cmd_replicate(args, parser) -> int:
    out_dir = Path(_require(args, "out_dir", parser))
    master = _resolved(args, "master_seed", DEFAULT_MASTER_SEED, int)
    jobs = _resolved(args, "jobs", 1, int)
    report = run_study(
        master,
        fit_options=_fit_options(args),
        scan_options=_scan_options(args),
        alpha=_resolved(args, "alpha", 0.05, float),
        jobs=jobs,
    )
    _atomic_write_csv(
        out_dir / "results.csv",
        ["catalog_id", "duration_true", "duration_est", "error", "guard_p",
         "mu", "k", "k_star", "ratio", "converged"],
        [
            {
                "catalog_id": r.catalog_id,
                "duration_true": r.duration_true,
                "duration_est": r.duration_est,
                "error": r.error,
                "guard_p": f"{r.guard_p:.6g}",
                "mu": f"{r.mu:.6g}",
                "k": f"{r.k:.6g}",
                "k_star": f"{r.k_star:.6g}",
                "ratio": f"{r.ratio:.6g}",
                "converged": "yes" if r.converged else "no",
            }
            for r in report.results
        ],
    )
    pct_header = ["min", "p5", "p25", "median", "p75", "p95", "max"]
    pct_keys = (0, 5, 25, 50, 75, 95, 100)

    def pct_row(values: dict[int, float]) -> dict:
        return {name: f"{values[key]:.2f}" for name, key in zip(pct_header, pct_keys)}

    _atomic_write_csv(
        out_dir / "duration_errors.csv",
        ["duration", "n", *pct_header, "nonzero_estimates", "missed_detections"],
        [
            {
                "duration": s.duration,
                "n": s.n,
                **pct_row(s.error_percentiles),
                "nonzero_estimates": s.nonzero_estimates,
                "missed_detections": s.missed_detections,
            }
            for s in report.summaries
        ],
    )
    _atomic_write_csv(
        out_dir / "productivity_ratios.csv",
        ["duration", "n", *pct_header],
        [
            {"duration": s.duration, "n": s.n, **pct_row(s.ratio_percentiles)}
            for s in report.summaries
            if s.duration > 0
        ],
    )
    _atomic_write(out_dir / "checks.json", _json_text(
        {"passed": report.passed, "checks": [c.row() for c in report.checks]}
    ))
    for check in report.checks:
        status = "pass" if check.passed else "FAIL"
        print(f"{status}  {check.name}: {check.value:.3f} "
              f"(allowed [{check.low:.3f}, {check.high:.3f}])")
    if not report.passed:
        print("replication outside tolerances", file=sys.stderr)
        return ACCEPTANCE_FAILURE
    print(f"replication within tolerances; outputs in {out_dir}")
    return 0


def cmd_ingest(args, parser) -> int:
    csv_path = _require(args, "csv", parser)
    region = _require(args, "region", parser)
    out = Path(_require(args, "out", parser))
    series = series_from_nyt(csv_path, region)
    _atomic_write_csv(
        out,
        ["date", "count"],
        [
            {"date": series.date_of(d).isoformat(), "count": int(v)}
            for d, v in enumerate(series.counts)
        ],
    )
    print(f"wrote {len(series)} days for region {region} to {out}")
    return 0


def _windowed_series(args, parser):
    series = read_series_csv(_require(args, "series", parser))
    event = _event_date(args, parser)
    return slice_window(
        series,
        event,
        _resolved(args, "pre_days", 30, int),
        _resolved(args, "post_days", 150, int),
    )


def cmd_fit(args, parser) -> int:
    sub, window = _windowed_series(args, parser)
    t_prime = _resolved(args, "t_prime", None, int)
    if t_prime is None:
        parser.error("missing required option --t-prime (day offset from the event)")
    if t_prime > 0:
        window = window.with_t_prime(window.t_star + t_prime)
    result = fit(sub, window, _fit_options(args))
    _atomic_write(Path(_require(args, "out", parser)), _json_text(result.to_json_dict()))
    print(f"fit: mu={result.mu:.4f} k={result.step.k:.4f} "
          f"k_star={result.step.k_star:.4f} converged={result.converged}")
    return 0


def cmd_scan(args, parser) -> int:
    sub, window = _windowed_series(args, parser)
    out_dir = Path(_require(args, "out_dir", parser))
    alpha = _resolved(args, "alpha", 0.05, float)
    guard = pre_post_guard(
        sub, window.t_star, _resolved(args, "half_window", 14, int), alpha
    )
    if guard.effect_detected:
        scan = scan_durations(sub, window, _fit_options(args), _scan_options(args))
    else:
        scan = DurationScan.no_effect(window.t_star)
    rows = [
        {
            "duration": int(d),
            "k_star": f"{k:.6g}",
            "smoothed": "" if np.isnan(s) else f"{s:.6g}",
            "converged": "yes" if c else "no",
        }
        for d, k, s, c in zip(
            scan.candidate_durations, scan.k_star_values,
            scan.smoothed_values, scan.converged,
        )
    ]
    _atomic_write_csv(out_dir / "scan.csv",
                      ["duration", "k_star", "smoothed", "converged"], rows)
    _atomic_write(out_dir / "scan_summary.json", _json_text(
        {
            "chosen_duration": scan.chosen_duration,
            "chosen_t_prime": scan.chosen_t_prime,
            **guard.to_json_dict(),
        }
    ))
    print(f"chosen duration: {scan.chosen_duration} days "
          f"(guard p={guard.p_value:.4g})")
    return 0


def cmd_impact(args, parser) -> int:
    csv_path = _require(args, "csv", parser)
    county = _require(args, "county", parser)
    state = _require(args, "state", parser)
    out_dir = Path(_require(args, "out_dir", parser))
    pops = load_populations(_require(args, "populations", parser))
    event = _event_date(args, parser)
    county_series = series_from_nyt(csv_path, county)
    state_series = state_series_from_nyt(csv_path, state)
    rally = _resolved(args, "rally_regions", "", str)
    options = ImpactOptions(
        pre_days=_resolved(args, "pre_days", 30, int),
        post_days=_resolved(args, "post_days", 150, int),
        guard_half_window=_resolved(args, "half_window", 14, int),
        alpha=_resolved(args, "alpha", 0.05, float),
        fit=_fit_options(args),
        scan=_scan_options(args),
        rally_regions=frozenset(r for r in rally.split(",") if r) | {county},
        state_label=state,
    )
    report = run_pipeline(county_series, state_series, event, pops, options)
    _atomic_write(out_dir / "impact.json", _json_text(report.to_json_dict()))
    _atomic_write_csv(
        out_dir / "impact_summary.csv",
        ["county", "state", "date", "mu", "k", "k_star", "duration", "cases",
         "outcome", "converged"],
        [report.table_row()],
    )
    print(f"{county}: outcome={report.outcome.value} duration={report.duration} "
          f"excess_cases={report.excess_cases}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="eventimpact", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write synthetic catalogs and a manifest")
    _add_common(p)
    p.add_argument("--out-dir", dest="out_dir", help="output directory (required)")
    p.add_argument("--study", help="generate the full 250-catalog study (true/false)")
    p.add_argument("--master-seed", dest="master_seed", type=int,
                   help=f"study master seed (default {DEFAULT_MASTER_SEED})")
    p.add_argument("--mu", type=float, help="background rate per day (default 3.0)")
    p.add_argument("--decay-rate", dest="decay_rate", type=float,
                   help="exponential offset rate per day (default 0.25)")
    p.add_argument("--base-level", dest="base_level", type=float,
                   help="baseline offspring per point (default 0.2)")
    p.add_argument("--during-level", dest="during_level", type=float,
                   help="offspring per point inside the excess window (default 0.2)")
    p.add_argument("--after-level", dest="after_level", type=float,
                   help="offspring per point after the excess window (default 0.2)")
    p.add_argument("--t-star", dest="t_star", type=float,
                   help="excess window start time (default 31.0)")
    p.add_argument("--t-prime", dest="t_prime", type=float,
                   help="excess window end time (default 31.0)")
    p.add_argument("--horizon", type=float, help="days simulated (default 100)")
    p.add_argument("--seed", type=int, help="catalog seed (default 0)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replicate",
                       help="run the 250-catalog study and check published tolerances")
    _add_common(p)
    _add_fit_flags(p)
    _add_scan_flags(p)
    p.add_argument("--out-dir", dest="out_dir", help="output directory (required)")
    p.add_argument("--master-seed", dest="master_seed", type=int,
                   help=f"study master seed (default {DEFAULT_MASTER_SEED})")
    p.add_argument("--jobs", type=int, help="parallel workers over catalogs (default 1)")
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("ingest", help="cumulative case CSV -> daily count series CSV")
    _add_common(p)
    p.add_argument("--csv", help="county-level cumulative CSV (required)")
    p.add_argument("--region", help="region id (fips) to extract (required)")
    p.add_argument("--out", help="output series CSV (required)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", help="fit the three-period model on a series window")
    _add_common(p)
    _add_fit_flags(p)
    _add_window_flags(p)
    p.add_argument("--series", help="daily count series CSV date,count (required)")
    p.add_argument("--t-prime", dest="t_prime", type=int,
                   help="fixed excess duration in days after the event (required)")
    p.add_argument("--out", help="output FitResult JSON (required)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("scan", help="guard + duration scan on a series window")
    _add_common(p)
    _add_fit_flags(p)
    _add_scan_flags(p)
    _add_window_flags(p)
    p.add_argument("--series", help="daily count series CSV date,count (required)")
    p.add_argument("--out-dir", dest="out_dir", help="output directory (required)")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("impact", help="county vs state impact pipeline")
    _add_common(p)
    _add_fit_flags(p)
    _add_scan_flags(p)
    _add_window_flags(p)
    p.add_argument("--csv", help="county-level cumulative CSV (required)")
    p.add_argument("--county", help="event county fips (required)")
    p.add_argument("--state", help="state name for the reference aggregate (required)")
    p.add_argument("--populations", help="population CSV fips,population (required)")
    p.add_argument("--rally-regions", dest="rally_regions",
                   help="comma-separated fips excluded from the state aggregate")
    p.add_argument("--out-dir", dest="out_dir", help="output directory (required)")
    p.set_defaults(func=cmd_impact)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _merge_config(args, parser)
    if getattr(args, "backend", None):
        os.environ["EVENTIMPACT_BACKEND"] = args.backend
    try:
        return args.func(args, parser)
    except (DataError, KeyError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
