"""Delay, efficiency, and erasure-rate metrics plus cross-replication summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def delay_stats(samples) -> tuple[float, float, float]:
    """Sample mean, unbiased variance, and standard deviation of delays (ms)."""
    n = len(samples)
    if n == 0:
        raise ValueError("delay_stats needs at least one sample")
    mean = sum(samples) / n
    if n == 1:
        return mean, 0.0, 0.0
    var = sum((s - mean) ** 2 for s in samples) / (n - 1)
    return mean, var, math.sqrt(var)


def efficiency(dof_needed: int, sink_received: int) -> float:
    """Information packets needed over total packets received by the sink."""
    if dof_needed < 1:
        raise ValueError(f"dof_needed must be >= 1, got {dof_needed}")
    if sink_received < 1:
        raise ValueError(f"sink_received must be >= 1, got {sink_received}")
    return dof_needed / sink_received


def per(erased: int, total: int) -> float:
    """Upper-layer packet erasure rate."""
    if total < 1:
        raise ValueError(f"total must be >= 1, got {total}")
    if not 0 <= erased <= total:
        raise ValueError(f"erased must be in [0, {total}], got {erased}")
    return erased / total


@dataclass
class PointSummary:
    """Aggregated results for one sweep point across replications."""

    reps: int
    mean_delay_ms: float
    var_delay: float       # pooled across all delay samples, unbiased
    std_delay: float
    eta: float             # mean of per-run efficiencies
    per_rate: float        # mean of per-run PERs
    ci_delay: float        # 1.96 * stderr of per-run mean delays
    ci_eta: float
    ci_per: float
    run_mean_delays: list = field(default_factory=list)
    run_etas: list = field(default_factory=list)
    run_pers: list = field(default_factory=list)


def _ci_halfwidth(values) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return 1.96 * math.sqrt(var / n)


def summarize_runs(runs) -> PointSummary:
    """Aggregate RunMetrics replications; order of the input list is immaterial.

    Runs are sorted by seed before any floating-point reduction so permuting
    the input cannot change the result.
    """
    runs = sorted(runs, key=lambda r: r.seed)
    if not runs:
        raise ValueError("summarize_runs needs at least one run")
    all_delays = [d for r in runs for _, d in r.delay_samples]
    if all_delays:
        mean_d, var_d, std_d = delay_stats(all_delays)
    else:
        mean_d = var_d = std_d = float("nan")
    run_means = [delay_stats([d for _, d in r.delay_samples])[0]
                 for r in runs if r.delay_samples]
    run_etas = [efficiency(r.dof_needed, r.sink_received_count) for r in runs]
    run_pers = [per(r.erased_count, r.dof_needed) for r in runs]
    return PointSummary(
        reps=len(runs),
        mean_delay_ms=mean_d,
        var_delay=var_d,
        std_delay=std_d,
        eta=sum(run_etas) / len(run_etas),
        per_rate=sum(run_pers) / len(run_pers),
        ci_delay=_ci_halfwidth(run_means),
        ci_eta=_ci_halfwidth(run_etas),
        ci_per=_ci_halfwidth(run_pers),
        run_mean_delays=run_means,
        run_etas=run_etas,
        run_pers=run_pers,
    )
