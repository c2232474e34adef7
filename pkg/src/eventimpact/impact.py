"""Event impact assessment: population-adjusted productivity multiplier,
excess case counts, outcome classification, and the county-versus-state
pipeline."""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass
from typing import Sequence

from .catalog import (
    DailyCountSeries,
    RegionTable,
    StudyWindow,
    aggregate_excluding,
    slice_window,
)
from .duration import (
    DurationScan,
    GuardResult,
    ScanOptions,
    pre_post_guard,
    scan_durations,
)
from .misd import FitOptions, FitResult, fit

__all__ = [
    "Outcome",
    "ImpactOptions",
    "ImpactReport",
    "reported_productivity",
    "compute_kappa",
    "excess_cases",
    "classify",
    "run_pipeline",
]


class Outcome(enum.Enum):
    RALLY_EFFECT = "RallyEffect"
    NO_EFFECT = "NoEffect"
    BELOW_STATE = "BelowState"
    NOT_CONVERGED = "NotConverged"


@dataclass(frozen=True)
class ImpactOptions:
    pre_days: int = 30
    post_days: int = 150
    guard_half_window: int = 14
    alpha: float = 0.05
    fit: FitOptions = FitOptions()
    scan: ScanOptions = ScanOptions()
    baseline_subtracted: bool = True
    rally_regions: frozenset[str] = frozenset()
    state_label: str = "state"


def reported_productivity(result: FitResult) -> tuple[float, float]:
    """(k, k_star) on the case-count scale used for impact arithmetic.

    These are the within-period offspring masses per day of each period: the
    baseline period's triggered cases per day, and the excess window's
    triggered cases per day above that baseline. On this scale
    k_star x duration is a case count, which is what the excess-case formula
    multiplies out.
    """
    per_day = result.summary.realized_per_day()
    k = float(per_day[0])
    k_star = float(per_day[1] - per_day[0]) if result.summary.days[1] > 0 else 0.0
    return k, k_star


def compute_kappa(
    county_fit: FitResult,
    state_fit: FitResult,
    pops: RegionTable,
    county_region: str,
    state_region: str,
    baseline_subtracted: bool = True,
) -> float:
    """Population-adjusted excess-productivity multiplier.

    kappa = (k*_county - k_county) / pop_county - (k*_state - k_state) / pop_state,
    as printed in the source method; ``baseline_subtracted=False`` computes the
    variant using k* alone at each level (k* is already an excess over
    baseline, so the printed formula arguably subtracts the baseline twice).
    """
    if not (county_fit.converged and state_fit.converged):
        raise ValueError("unusable fit: both fits must have converged")
    for region in (county_region, state_region):
        if region not in pops:
            raise KeyError(f"unknown population: {region!r}")
        if pops[region] <= 0:
            raise ValueError(f"population must be positive: {region!r}")
    k_c, ks_c = reported_productivity(county_fit)
    k_s, ks_s = reported_productivity(state_fit)
    if baseline_subtracted:
        return (ks_c - k_c) / pops[county_region] - (ks_s - k_s) / pops[state_region]
    return ks_c / pops[county_region] - ks_s / pops[state_region]


def excess_cases(kappa: float, population: int, duration: int) -> int:
    """Excess case count kappa x population x duration, rounded to the
    nearest integer and floored at zero."""
    if population <= 0:
        raise ValueError("population must be positive")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    return int(round(max(kappa, 0.0) * population * duration))


def classify(
    county_fit: FitResult,
    state_fit: FitResult,
    guard: GuardResult,
    kappa: float,
) -> Outcome:
    """Four-way outcome for one event.

    Not converged beats everything; a vetoed guard or a non-positive county
    excess means no effect; a county effect that does not out-pace the state
    (kappa <= 0) is below-state; otherwise the event shows an effect.
    """
    if not (county_fit.converged and state_fit.converged):
        return Outcome.NOT_CONVERGED
    _, county_k_star = reported_productivity(county_fit)
    if not guard.effect_detected or county_k_star <= 0:
        return Outcome.NO_EFFECT
    if kappa <= 0:
        return Outcome.BELOW_STATE
    return Outcome.RALLY_EFFECT


@dataclass(frozen=True)
class ImpactReport:
    region_id: str
    state_label: str
    event_date: dt.date
    kappa: float
    duration: int
    excess_cases: int
    outcome: Outcome
    guard: GuardResult
    county_fit: FitResult
    state_fit: FitResult
    scan: DurationScan
    window: StudyWindow
    population: int
    state_population: int
    options: ImpactOptions

    def to_json_dict(self) -> dict:
        county_k, county_k_star = reported_productivity(self.county_fit)
        return {
            "region_id": self.region_id,
            "state": self.state_label,
            "event_date": self.event_date.isoformat(),
            "kappa": self.kappa,
            "duration": self.duration,
            "excess_cases": self.excess_cases,
            "outcome": self.outcome.value,
            "population": self.population,
            "state_population": self.state_population,
            "guard": self.guard.to_json_dict(),
            "window": {
                "t0": self.window.t0,
                "t_star": self.window.t_star,
                "t_prime": self.window.t_prime,
                "T": self.window.T,
                "truncated": self.window.truncated,
            },
            "county": {"k_per_day": county_k, "k_star_per_day": county_k_star,
                       **self.county_fit.to_json_dict()},
            "state": {**self.state_fit.to_json_dict()},
            "options": {
                "pre_days": self.options.pre_days,
                "post_days": self.options.post_days,
                "guard_half_window": self.options.guard_half_window,
                "alpha": self.options.alpha,
                "max_lag": self.options.fit.max_lag,
                "tol": self.options.fit.tol,
                "max_iter": self.options.fit.max_iter,
                "normalization": self.options.fit.normalization,
                "anchor_sweeps": self.options.fit.anchor_sweeps,
                "span": self.options.scan.span,
                "degree": self.options.scan.degree,
                "baseline_subtracted": self.options.baseline_subtracted,
            },
        }

    def table_row(self) -> dict:
        """Row for the batch summary CSV (county,state,date,mu,k,k_star,
        duration,cases,outcome,converged)."""
        k, k_star = reported_productivity(self.county_fit)
        return {
            "county": self.region_id,
            "state": self.state_label,
            "date": self.event_date.isoformat(),
            "mu": f"{self.county_fit.mu:.4f}",
            "k": f"{k:.4f}",
            "k_star": f"{k_star:.4f}",
            "duration": self.duration,
            "cases": self.excess_cases,
            "outcome": self.outcome.value,
            "converged": "yes" if self.county_fit.converged and self.state_fit.converged else "no",
        }


def run_pipeline(
    county_series: DailyCountSeries,
    state_series: Sequence[DailyCountSeries],
    event_date: dt.date,
    pops: RegionTable,
    options: ImpactOptions = ImpactOptions(),
) -> ImpactReport:
    """Full impact analysis for one event.

    Fits the event county (guard, duration scan, final three-period fit),
    aggregates the state from its non-event counties, fits the state with the
    county's (t_star, t_prime) held fixed, and converts the productivity
    excess into a classified excess-case estimate. The state population is
    the sum over the included counties, consistent with the case exclusion.
    """
    county_region = county_series.region_id
    if county_region not in pops:
        raise KeyError(f"unknown population: {county_region!r}")
    rally_regions = options.rally_regions or frozenset({county_region})
    county_window_series, window = slice_window(
        county_series, event_date, options.pre_days, options.post_days
    )
    guard = pre_post_guard(
        county_window_series, window.t_star, options.guard_half_window, options.alpha
    )
    if guard.effect_detected:
        scan = scan_durations(county_window_series, window, options.fit, options.scan)
    else:
        scan = DurationScan.no_effect(window.t_star)
    final_window = (
        window.with_t_prime(scan.chosen_t_prime) if scan.chosen_duration > 0 else window
    )
    county_fit = fit(county_window_series, final_window, options.fit)

    included = [s for s in state_series if s.region_id not in rally_regions]
    state_aggregate = aggregate_excluding(
        state_series, frozenset(rally_regions), label=options.state_label
    )
    state_window_series, _ = slice_window(
        state_aggregate, event_date, options.pre_days, options.post_days
    )
    if len(state_window_series) != len(county_window_series):
        raise ValueError("state data does not cover the county analysis window")
    state_fit = fit(state_window_series, final_window, options.fit)

    state_pop = 0
    for s in included:
        if s.region_id not in pops:
            raise KeyError(f"unknown population: {s.region_id!r}")
        state_pop += pops[s.region_id]
    pops_with_aggregate = dict(pops)
    pops_with_aggregate[state_aggregate.region_id] = state_pop

    if county_fit.converged and state_fit.converged:
        kappa = compute_kappa(
            county_fit, state_fit, pops_with_aggregate,
            county_region, state_aggregate.region_id,
            baseline_subtracted=options.baseline_subtracted,
        )
    else:
        kappa = 0.0
    outcome = classify(county_fit, state_fit, guard, kappa)
    duration = scan.chosen_duration
    cases = (
        excess_cases(kappa, pops[county_region], duration)
        if outcome is Outcome.RALLY_EFFECT
        else 0
    )
    return ImpactReport(
        region_id=county_region,
        state_label=state_aggregate.region_id,
        event_date=event_date,
        kappa=kappa,
        duration=duration,
        excess_cases=cases,
        outcome=outcome,
        guard=guard,
        county_fit=county_fit,
        state_fit=state_fit,
        scan=scan,
        window=final_window,
        population=pops[county_region],
        state_population=state_pop,
        options=options,
    )
