"""Excess-duration estimation: pre/post guard test, candidate scan with
warm-started refits, LOESS smoothing of the excess-productivity trajectory,
and first-maximum selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import stats

from .catalog import DailyCountSeries, StudyWindow
from .misd import FitOptions, FitResult, fit

__all__ = [
    "GuardResult",
    "DurationScan",
    "ScanOptions",
    "welch_t_test",
    "pre_post_guard",
    "loess_smooth",
    "first_maximum",
    "scan_durations",
]


@dataclass(frozen=True)
class GuardResult:
    mean_before: float
    mean_after: float
    t_statistic: float
    df: float
    p_value: float
    alpha: float
    effect_detected: bool

    def to_json_dict(self) -> dict:
        return {
            "mean_before": self.mean_before,
            "mean_after": self.mean_after,
            "t_statistic": self.t_statistic,
            "df": self.df,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "effect_detected": self.effect_detected,
        }


@dataclass(frozen=True)
class ScanOptions:
    span: float = 0.3
    degree: int = 2
    warm_start: bool = True


@dataclass(frozen=True)
class DurationScan:
    """Scan record: one candidate per possible duration 1..T - t_star.

    ``k_star_values`` holds the per-day excess productivity of the candidate
    excess window (offspring mass per day above baseline); non-converged
    candidates carry NaN in ``smoothed_values`` and are excluded from the
    smoothing. A guard veto yields the no-effect scan with duration 0 and
    empty candidate arrays.
    """

    candidate_durations: np.ndarray
    k_star_values: np.ndarray
    smoothed_values: np.ndarray
    converged: np.ndarray
    chosen_duration: int
    chosen_t_prime: int
    fits: tuple[FitResult, ...] = ()

    @classmethod
    def no_effect(cls, t_star: int) -> "DurationScan":
        empty = np.empty(0)
        return cls(
            candidate_durations=np.empty(0, dtype=np.int64),
            k_star_values=empty,
            smoothed_values=empty,
            converged=np.empty(0, dtype=bool),
            chosen_duration=0,
            chosen_t_prime=int(t_star),
        )


def welch_t_test(
    a, b, sided: Literal["one", "two"] = "one"
) -> tuple[float, float, float]:
    """Welch two-sample t test of mean(b) against mean(a).

    Returns (t, df, p) with t = (mean_b - mean_a) / sqrt(s2_a/n_a + s2_b/n_b)
    and the Welch-Satterthwaite degrees of freedom. One-sided tests
    H1: mean_b > mean_a. When both samples have zero variance the test
    degenerates: p = 1 for equal means, otherwise p = 0 in the alternative's
    direction (df reported as 0).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("need at least 2 observations per sample")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    na, nb = a.size, b.size
    se2 = va / na + vb / nb
    diff = b.mean() - a.mean()
    if se2 == 0:
        if diff == 0:
            return 0.0, 0.0, 1.0
        t = float("inf") if diff > 0 else float("-inf")
        if sided == "two":
            return t, 0.0, 0.0
        return t, 0.0, 0.0 if diff > 0 else 1.0
    t = diff / np.sqrt(se2)
    df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    if sided == "one":
        p = float(stats.t.sf(t, df))
    elif sided == "two":
        p = float(2 * stats.t.sf(abs(t), df))
    else:
        raise ValueError(f"unknown sidedness {sided!r}")
    return float(t), float(df), p


def pre_post_guard(
    series: DailyCountSeries,
    t_star: int,
    half_window: int = 14,
    alpha: float = 0.05,
) -> GuardResult:
    """One-sided Welch test of the daily counts just after the event against
    those just before it.

    Windows are [t_star - half_window, t_star - 1] and
    [t_star + 1, t_star + half_window], truncated at the data boundaries; the
    event day itself belongs to neither. The test is one-sided (after >
    before): the guard exists to veto spurious excess, so a decrease must not
    trigger a scan.
    """
    c = series.values()
    before = c[max(0, t_star - half_window) : t_star]
    after = c[t_star + 1 : t_star + 1 + half_window]
    if before.size < 2 or after.size < 2:
        raise ValueError("insufficient guard data: need 2 days on each side")
    t, df, p = welch_t_test(before, after, sided="one")
    return GuardResult(
        mean_before=float(before.mean()),
        mean_after=float(after.mean()),
        t_statistic=t,
        df=df,
        p_value=p,
        alpha=alpha,
        effect_detected=bool(p < alpha),
    )


def loess_smooth(xs, ys, span: float = 0.75, degree: int = 1) -> np.ndarray:
    """LOESS: local polynomial regression with tricube weights.

    At each x the nearest ceil(span * n) points are fit by weighted least
    squares (no robustness iterations). A neighborhood whose local design is
    singular is widened to the minimal nonsingular size.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    n = xs.size
    if n < 3:
        raise ValueError("need at least 3 points")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    q0 = int(np.ceil(span * n))
    out = np.empty(n)
    for i in range(n):
        d = np.abs(xs - xs[i])
        order = np.argsort(d, kind="stable")
        q = max(q0, degree + 1)
        while True:
            idx = order[:q]
            h = d[idx].max()
            if h == 0:
                out[i] = ys[i]
                break
            w = np.clip(1.0 - (d[idx] / h) ** 3, 0.0, None) ** 3
            positive = w > 0
            if q < n and np.unique(xs[idx][positive]).size < degree + 1:
                q += 1  # singular local design: widen
                continue
            xc = xs[idx] - xs[i]
            X = np.vander(xc, degree + 1, increasing=True)
            sw = np.sqrt(w)
            beta, *_ = np.linalg.lstsq(X * sw[:, None], ys[idx] * sw, rcond=None)
            out[i] = beta[0]
            break
    return out


def first_maximum(smoothed) -> int:
    """Index of the first local maximum.

    Scans for the smallest index whose value is >= both neighbors, treating
    only the right end of the sequence as falling to -infinity; index 0 is
    never selected by the local rule (the leftmost candidate windows of a
    scan are too noisy to smooth), so a sequence with no interior or terminal
    local maximum, e.g. a strictly decreasing one, falls back to the global
    argmax.
    """
    v = np.asarray(smoothed, dtype=np.float64)
    n = v.size
    if n < 1:
        raise ValueError("need at least 1 value")
    for i in range(1, n):
        if v[i] >= v[i - 1] and (i == n - 1 or v[i] >= v[i + 1]):
            return i
    return int(np.argmax(v))


def scan_durations(
    series: DailyCountSeries,
    window: StudyWindow,
    fit_options: FitOptions = FitOptions(),
    scan_options: ScanOptions = ScanOptions(),
) -> DurationScan:
    """Profile the excess duration: refit the three-period model at every
    candidate end time t_prime = t_star + 1 .. T and pick the first maximum
    of the smoothed excess-productivity trajectory.

    The recorded statistic per candidate is the per-day excess of the
    candidate excess window (its offspring mass per day minus the baseline
    period's). Candidate fits warm-start from the previous candidate's
    levels; because the level subproblem is concave given the shared anchors,
    a cold (parallel) scan chooses the same duration. Candidates whose fit
    did not converge are excluded from smoothing; if more than half fail the
    scan is unusable.

    The caller is expected to have run ``pre_post_guard`` first and to map a
    vetoed guard to ``DurationScan.no_effect``.
    """
    t_star, T = window.t_star, window.T
    durations = np.arange(1, T - t_star + 1, dtype=np.int64)
    k_stars = np.empty(durations.size)
    converged = np.zeros(durations.size, dtype=bool)
    fits: list[FitResult] = []
    levels = None
    for j, dur in enumerate(durations):
        init = levels if scan_options.warm_start else None
        result = fit(series, window.with_t_prime(t_star + int(dur)), fit_options,
                     init_levels=init)
        levels = result.summary.per_parent()
        fits.append(result)
        per_day = result.summary.per_day()
        k_stars[j] = per_day[1] - per_day[0]
        converged[j] = result.converged
    ok = converged
    if ok.sum() < ok.size / 2 or ok.sum() < 1:
        raise RuntimeError(
            f"unstable scan: {ok.size - int(ok.sum())} of {ok.size} candidate fits "
            "did not converge"
        )
    smoothed = np.full(durations.size, np.nan)
    if ok.sum() >= 3:
        sm = loess_smooth(
            durations[ok].astype(np.float64), k_stars[ok],
            span=scan_options.span, degree=scan_options.degree,
        )
    else:
        sm = k_stars[ok].copy()
    smoothed[ok] = sm
    chosen = int(durations[ok][first_maximum(sm)])
    return DurationScan(
        candidate_durations=durations,
        k_star_values=k_stars,
        smoothed_values=smoothed,
        converged=converged,
        chosen_duration=chosen,
        chosen_t_prime=t_star + chosen,
        fits=tuple(fits),
    )
