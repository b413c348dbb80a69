"""Experimental design: session plans, trial records, and analysis helpers.

A session is 192 main trials (16 clips x 4 strategies x 3 grid sizes, each
combination exactly once, order shuffled by a seeded RNG) plus 8 practice
trials whose clips never reappear in the main block.  Subjects are assigned
between-subjects to one of nine (rho, lambda) model parameter cells.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import StimulusCatalog
from .errors import UnbalancedCatalog
from .render import STANDARD_LAMBDAS, STANDARD_RHOS
from .scene import Strategy
from .stats import (
    DetectionCounts,
    FdrMode,
    MetricsReport,
    Pooling,
    RateCorrection,
    compute_counts,
    metrics_report,
)

GRID_SIZES = (8, 16, 32)
PARAM_CELLS = tuple(itertools.product(STANDARD_RHOS, STANDARD_LAMBDAS))
N_PRACTICE = 8
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TrialSpec:
    clip_id: str
    strategy: Strategy
    grid: int

    def to_json(self) -> dict:
        return {"clip_id": self.clip_id, "strategy": self.strategy.value, "grid": self.grid}

    @classmethod
    def from_json(cls, obj: dict) -> "TrialSpec":
        return cls(clip_id=obj["clip_id"], strategy=Strategy(obj["strategy"]), grid=obj["grid"])


@dataclass(frozen=True)
class SessionPlan:
    subject_id: str
    param_cell: tuple[float, float]  # (rho, lambda) um
    trials: tuple[TrialSpec, ...]
    practice_trials: tuple[TrialSpec, ...]
    rng_seed: int

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "subject_id": self.subject_id,
            "param_cell": {"rho": self.param_cell[0], "lam": self.param_cell[1]},
            "trials": [t.to_json() for t in self.trials],
            "practice_trials": [t.to_json() for t in self.practice_trials],
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SessionPlan":
        return cls(
            subject_id=obj["subject_id"],
            param_cell=(obj["param_cell"]["rho"], obj["param_cell"]["lam"]),
            trials=tuple(TrialSpec.from_json(t) for t in obj["trials"]),
            practice_trials=tuple(TrialSpec.from_json(t) for t in obj["practice_trials"]),
            rng_seed=obj["rng_seed"],
        )


def save_session(plan: SessionPlan, path) -> None:
    Path(path).write_text(json.dumps(plan.to_json(), indent=2))


def load_session(path) -> SessionPlan:
    return SessionPlan.from_json(json.loads(Path(path).read_text()))


def make_session(
    subject_id: str,
    catalog: StimulusCatalog,
    param_cell: tuple[float, float],
    seed: int,
    practice_clips: tuple[str, ...] | None = None,
) -> SessionPlan:
    """Full 192-combination cross product in seeded shuffled order.

    ``practice_clips`` defaults to synthetic ids practice_00..07; they must be
    disjoint from the catalog's main clips.
    """
    if not catalog.balanced:
        raise UnbalancedCatalog("session design needs a balanced 16-clip catalog")
    cell = (float(param_cell[0]), float(param_cell[1]))
    if cell not in PARAM_CELLS:
        raise ValueError(f"param cell {param_cell} not in the 3x3 sweep")
    main_ids = [c.clip_id for c in catalog.clips]
    if practice_clips is None:
        practice_clips = tuple(f"practice_{i:02d}" for i in range(N_PRACTICE))
    if len(practice_clips) != N_PRACTICE:
        raise ValueError(f"need exactly {N_PRACTICE} practice clips")
    if set(practice_clips) & set(main_ids):
        raise ValueError("practice clips must be disjoint from main clips")

    trials = [
        TrialSpec(clip_id=c, strategy=s, grid=g)
        for c, s, g in itertools.product(main_ids, list(Strategy), GRID_SIZES)
    ]
    rng = np.random.default_rng(seed)
    rng.shuffle(trials)
    strategies = list(Strategy)
    practice = tuple(
        TrialSpec(clip_id=pc, strategy=strategies[i % 4], grid=GRID_SIZES[i % 3])
        for i, pc in enumerate(practice_clips)
    )
    return SessionPlan(
        subject_id=subject_id,
        param_cell=cell,
        trials=tuple(trials),
        practice_trials=practice,
        rng_seed=seed,
    )


def assign_param_cells(subject_ids) -> dict[str, tuple[float, float]]:
    """Round-robin assignment of subjects to the nine (rho, lambda) cells."""
    return {sid: PARAM_CELLS[i % len(PARAM_CELLS)] for i, sid in enumerate(subject_ids)}


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    saw_people: bool
    saw_cars: bool
    confidence: int
    response_time_ms: float
    has_people: bool
    has_cars: bool

    def __post_init__(self):
        if not 1 <= self.confidence <= 5:
            raise ValueError(f"confidence must be 1..5, got {self.confidence}")

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_json(cls, obj: dict) -> "TrialRecord":
        return cls(**{k: obj[k] for k in (
            "trial_index", "saw_people", "saw_cars", "confidence",
            "response_time_ms", "has_people", "has_cars")})


@dataclass(frozen=True)
class SessionAnalysis:
    report: MetricsReport
    counts: DetectionCounts
    n_expected: int
    n_answered: int

    @property
    def coverage(self) -> float:
        return self.n_answered / self.n_expected if self.n_expected else 0.0


def analyze_records(
    records,
    n_expected: int,
    pooling: Pooling = Pooling.PER_TARGET_TYPE,
    correction: RateCorrection = RateCorrection.LOG_LINEAR,
    fdr_mode: FdrMode = FdrMode.FD_OVER_YES,
) -> SessionAnalysis:
    """Metrics over answered trials; missing trials are excluded and reported
    via coverage."""
    records = list(records)
    counts = compute_counts(records, pooling)
    report = metrics_report(counts, n_trials=len(records), correction=correction,
                            fdr_mode=fdr_mode)
    return SessionAnalysis(report=report, counts=counts, n_expected=n_expected,
                           n_answered=len(records))


# ---------------------------------------------------------------------------
# scripted responder policies, used for end-to-end checks and demos


def simulate_responses(
    plan: SessionPlan,
    catalog: StimulusCatalog,
    policy: str,
    seed: int,
    accuracy: float = 0.9,
) -> list[TrialRecord]:
    """Answer every main trial with a scripted policy.

    ``informed`` reports each ground truth correctly with probability
    ``accuracy``; ``random`` flips fair coins; ``always_yes``/``always_no``
    are degenerate baselines.
    """
    rng = np.random.default_rng(seed)
    records = []
    for i, trial in enumerate(plan.trials):
        clip = catalog.clip(trial.clip_id)
        if policy == "informed":
            saw_p = clip.has_people if rng.random() < accuracy else not clip.has_people
            saw_c = clip.has_cars if rng.random() < accuracy else not clip.has_cars
            confidence = 4
        elif policy == "random":
            saw_p, saw_c = bool(rng.random() < 0.5), bool(rng.random() < 0.5)
            confidence = 2
        elif policy == "always_yes":
            saw_p = saw_c = True
            confidence = 5
        elif policy == "always_no":
            saw_p = saw_c = False
            confidence = 1
        else:
            raise ValueError(f"unknown policy {policy!r}")
        records.append(TrialRecord(
            trial_index=i,
            saw_people=bool(saw_p),
            saw_cars=bool(saw_c),
            confidence=confidence,
            response_time_ms=float(rng.integers(500, 3000)),
            has_people=clip.has_people,
            has_cars=clip.has_cars,
        ))
    return records
