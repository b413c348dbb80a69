"""Signal-detection metrics and resampling statistics.

Implements the sensitivity index d' = Z(hit rate) - Z(false discovery rate),
where Z is the standard normal quantile.  Note the per-response sense of
"false discovery rate" here (wrong "present" reports / all "present" reports);
the classic false-alarm-rate convention is available behind ``FdrMode``.
Also: accuracy/precision/recall/F1, a seeded percentile bootstrap for group
differences, and Benjamini-Hochberg adjustment for multiple comparisons.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, EmptyGroup, LengthMismatch, UndefinedRate

_SQRT2 = math.sqrt(2.0)


def normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / _SQRT2))


# Acklam's rational approximation to the normal quantile (|error| < 1.15e-9),
# tightened by one Halley step against the erf-based CDF.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def inverse_normal_cdf(p: float) -> float:
    """Standard normal quantile Z(p), accurate to ~1e-12 over (0, 1)."""
    if not 0.0 < p < 1.0 or not math.isfinite(p):
        raise DomainError(f"quantile requires p in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        z = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        z = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        z = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    # Halley refinement
    e = normal_cdf(z) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * z * z)
    return z - u / (1.0 + 0.5 * z * u)


class Pooling(enum.Enum):
    #: each trial contributes a people-event and a cars-event
    PER_TARGET_TYPE = "per_target_type"
    #: each trial is one event: "any target present" vs "reported any"
    PER_TRIAL_ANY = "per_trial_any"


class FdrMode(enum.Enum):
    #: false discoveries / yes-responses (the quotation-literal definition)
    FD_OVER_YES = "fd_over_yes"
    #: false discoveries / noise events (classic false-alarm rate)
    FALSE_ALARM = "false_alarm"


class RateCorrection(enum.Enum):
    NONE = "none"
    #: replace rates of exactly 0 or 1 by 1/(2N) and 1 - 1/(2N)
    LOG_LINEAR = "log_linear"


@dataclass(frozen=True)
class DetectionCounts:
    hits: int
    misses: int
    false_discoveries: int
    correct_rejections: int

    def __post_init__(self):
        if min(self.hits, self.misses, self.false_discoveries, self.correct_rejections) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def signal_events(self) -> int:
        return self.hits + self.misses

    @property
    def noise_events(self) -> int:
        return self.false_discoveries + self.correct_rejections

    @property
    def yes_responses(self) -> int:
        return self.hits + self.false_discoveries

    @property
    def total_events(self) -> int:
        return self.signal_events + self.noise_events


def compute_counts(records, pooling: Pooling = Pooling.PER_TARGET_TYPE) -> DetectionCounts:
    """Aggregate trial records into detection counts.

    Each record needs boolean attributes/keys ``saw_people``/``saw_cars`` and
    ground truth ``has_people``/``has_cars`` (see ``session.TrialRecord``).
    """
    records = list(records)
    if not records:
        raise EmptyGroup("no trial records")
    hits = misses = fd = cr = 0

    def fields(rec):
        if isinstance(rec, dict):
            return (rec["saw_people"], rec["saw_cars"], rec["has_people"], rec["has_cars"])
        return (rec.saw_people, rec.saw_cars, rec.has_people, rec.has_cars)

    for rec in records:
        saw_p, saw_c, has_p, has_c = fields(rec)
        if pooling == Pooling.PER_TARGET_TYPE:
            events = [(has_p, saw_p), (has_c, saw_c)]
        else:
            events = [(has_p or has_c, saw_p or saw_c)]
        for present, reported in events:
            if present and reported:
                hits += 1
            elif present:
                misses += 1
            elif reported:
                fd += 1
            else:
                cr += 1
    return DetectionCounts(hits=hits, misses=misses, false_discoveries=fd,
                           correct_rejections=cr)


def _corrected_rate(numerator: int, denominator: int, correction: RateCorrection,
                    what: str) -> float:
    if denominator == 0:
        raise UndefinedRate(f"{what} undefined: zero denominator")
    rate = numerator / denominator
    if correction == RateCorrection.LOG_LINEAR:
        if rate == 0.0:
            rate = 1.0 / (2.0 * denominator)
        elif rate == 1.0:
            rate = 1.0 - 1.0 / (2.0 * denominator)
    return rate


def d_prime(
    counts: DetectionCounts,
    correction: RateCorrection = RateCorrection.LOG_LINEAR,
    fdr_mode: FdrMode = FdrMode.FD_OVER_YES,
) -> tuple[float, float, float]:
    """(d_prime, hit_rate, fdr); rates after the degenerate-rate correction."""
    if counts.signal_events == 0:
        raise UndefinedRate("hit rate undefined: no signal events")
    hit_rate = _corrected_rate(counts.hits, counts.signal_events, correction, "hit rate")
    if fdr_mode == FdrMode.FD_OVER_YES:
        fdr = _corrected_rate(counts.false_discoveries, counts.yes_responses, correction,
                              "false discovery rate")
    else:
        fdr = _corrected_rate(counts.false_discoveries, counts.noise_events, correction,
                              "false alarm rate")
    return inverse_normal_cdf(hit_rate) - inverse_normal_cdf(fdr), hit_rate, fdr


def classification_metrics(counts: DetectionCounts) -> dict:
    """accuracy/precision/recall/f1; metrics with a zero denominator are None."""
    out: dict = {"accuracy": None, "precision": None, "recall": None, "f1": None}
    if counts.total_events > 0:
        out["accuracy"] = (counts.hits + counts.correct_rejections) / counts.total_events
    if counts.yes_responses > 0:
        out["precision"] = counts.hits / counts.yes_responses
    if counts.signal_events > 0:
        out["recall"] = counts.hits / counts.signal_events
    p, r = out["precision"], out["recall"]
    if p is not None and r is not None and p + r > 0:
        out["f1"] = 2.0 * p * r / (p + r)
    return out


@dataclass(frozen=True)
class MetricsReport:
    d_prime: float
    hit_rate: float
    fdr: float
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    n_trials: int
    correction_applied: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def metrics_report(
    counts: DetectionCounts,
    n_trials: int,
    correction: RateCorrection = RateCorrection.LOG_LINEAR,
    fdr_mode: FdrMode = FdrMode.FD_OVER_YES,
) -> MetricsReport:
    dp, hit, fdr = d_prime(counts, correction, fdr_mode)
    cls = classification_metrics(counts)
    raw_hit = counts.hits / counts.signal_events
    raw_fdr_den = counts.yes_responses if fdr_mode == FdrMode.FD_OVER_YES else counts.noise_events
    raw_fdr = counts.false_discoveries / raw_fdr_den if raw_fdr_den else None
    applied = correction == RateCorrection.LOG_LINEAR and (
        raw_hit in (0.0, 1.0) or raw_fdr in (0.0, 1.0)
    )
    return MetricsReport(
        d_prime=dp, hit_rate=hit, fdr=fdr, n_trials=n_trials,
        correction_applied=applied, **cls,
    )


@dataclass(frozen=True)
class StatTestResult:
    comparison: str
    observed_diff: float
    boot_p: float
    n_resamples: int
    seed: int
    fdr_adjusted_p: float | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def bootstrap_diff(
    group_a,
    group_b,
    n_resamples: int = 10_000,
    seed: int = 0,
    paired: bool = False,
    comparison: str = "",
) -> StatTestResult:
    """Two-sided percentile-bootstrap p value for the mean difference A - B.

    p = min(1, 2 * min(P(diff* <= 0), P(diff* >= 0))) with add-one smoothing,
    deterministic for a fixed seed.
    """
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptyGroup("bootstrap groups must be nonempty")
    if paired and a.size != b.size:
        raise LengthMismatch(f"paired groups differ in length: {a.size} vs {b.size}")
    rng = np.random.default_rng(seed)
    observed = float(a.mean() - b.mean())
    if paired:
        d = a - b
        idx = rng.integers(0, d.size, size=(n_resamples, d.size))
        diffs = d[idx].mean(axis=1)
    else:
        ia = rng.integers(0, a.size, size=(n_resamples, a.size))
        ib = rng.integers(0, b.size, size=(n_resamples, b.size))
        diffs = a[ia].mean(axis=1) - b[ib].mean(axis=1)
    p_low = (np.count_nonzero(diffs <= 0.0) + 1) / (n_resamples + 1)
    p_high = (np.count_nonzero(diffs >= 0.0) + 1) / (n_resamples + 1)
    p = min(1.0, 2.0 * min(p_low, p_high))
    return StatTestResult(
        comparison=comparison, observed_diff=observed, boot_p=p,
        n_resamples=n_resamples, seed=seed,
    )


def fdr_adjust(p_values) -> list[float]:
    """Benjamini-Hochberg step-up adjusted p values, in the original order."""
    p = np.asarray(list(p_values), dtype=float)
    if p.size == 0:
        return []
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise DomainError("p values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order] * m / np.arange(1, m + 1)
    adjusted_sorted = np.minimum(1.0, np.minimum.accumulate(ranked[::-1])[::-1])
    out = np.empty(m)
    out[order] = adjusted_sorted
    return out.tolist()


def adjust_results(results: list[StatTestResult]) -> list[StatTestResult]:
    """Apply BH correction across a family of bootstrap results."""
    adjusted = fdr_adjust([r.boot_p for r in results])
    return [replace(r, fdr_adjusted_p=adj) for r, adj in zip(results, adjusted)]
