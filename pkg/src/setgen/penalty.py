"""Max-margin calibration of the repeat penalty.

The scalar penalty is the minimizer of a one-dimensional quadratic subject to
box constraints collected from every flattened pair: the penalized posterior
of a produced element must stay above the best negative and below the worst
unproduced positive.  The minimizer is therefore either the unconstrained
mean or one of the interval ends.  When the constraints conflict (interval
empty) a hinge-penalized scan picks a graceful compromise and the result is
flagged infeasible.

Sequence sets get one penalty per output position, each solved the same way
on records built from teacher-forced next-token posteriors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import Dataset, TokenSeq, ValidationError, flatten, group_by_input
from .models import make_prefix_scorer

log = logging.getLogger(__name__)

HINGE_WEIGHT = 1e3  # constraint-violation weight in the infeasible fallback
SCAN_RANGE = (-1.0, 1.0)  # posteriors live in [0,1], so gaps live in [-1,1]
SCAN_STEP = 1e-3


@dataclass(frozen=True)
class MarginRecord:
    """Per-pair statistics: positive posterior and its group's ranking bounds.

    ``l_pos_min``/``l_neg_max`` are the minimum positive and maximum negative
    posteriors within the pair's group; ``p_hat`` is their midpoint.
    """

    p: float
    l_pos_min: float
    l_neg_max: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.l_pos_min <= 1.0
                and 0.0 <= self.l_neg_max <= 1.0):
            raise ValidationError("margin statistics must be probabilities")
        if self.l_pos_min > self.p + 1e-12:
            raise ValidationError("l_pos_min cannot exceed the pair's own posterior")

    @property
    def p_hat(self) -> float:
        return (self.l_neg_max + self.l_pos_min) / 2.0


@dataclass(frozen=True)
class FeasibleInterval:
    """Intersection of all per-record penalty bounds."""

    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi


@dataclass(frozen=True)
class LambdaSolution:
    """One solved penalty: value, interval, and which candidate won."""

    value: float
    interval: FeasibleInterval
    candidate: str  # "interior" | "boundary-low" | "boundary-high" | "infeasible"
    objective: float
    carried: bool = False  # true when copied forward into a record-free position

    @property
    def feasible(self) -> bool:
        return self.candidate != "infeasible"

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "lo": self.interval.lo,
            "hi": self.interval.hi,
            "candidate": self.candidate,
            "objective": self.objective,
            "feasible": self.feasible,
            "carried": self.carried,
        }


@dataclass
class PenaltyParams:
    """The calibrated penalty in one of three variants.

    ``scalar`` carries one value; ``per-position`` one value per output
    position; ``learned`` delegates to a classifier object exposing
    ``classify(logits, position_id, prefix=None) -> frozenset[int]``.
    ``model_hash`` records the base-model checkpoint the calibration ran
    against; decoding refuses a mismatch unless overridden.
    """

    variant: str  # "scalar" | "per-position" | "learned"
    value: float | None = None
    values: tuple[float, ...] | None = None
    solutions: tuple[LambdaSolution, ...] = ()
    classifier: object | None = None
    classifier_ref: str | None = None
    model_hash: str | None = None

    def __post_init__(self) -> None:
        if self.variant not in ("scalar", "per-position", "learned"):
            raise ValidationError(f"unknown penalty variant {self.variant!r}")
        if self.variant == "scalar" and (self.value is None or not np.isfinite(self.value)):
            raise ValidationError("scalar penalty requires a finite value")
        if self.variant == "per-position":
            if not self.values or any(not np.isfinite(v) for v in self.values):
                raise ValidationError("per-position penalty requires finite values")

    def position_value(self, position: int) -> float:
        """Penalty for 1-based output position; positions past the table reuse the last."""
        if self.variant == "scalar":
            return float(self.value)
        if self.variant == "per-position":
            return float(self.values[min(position, len(self.values)) - 1])
        raise ValidationError("learned penalties have no scalar value")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "value": self.value,
            "values": list(self.values) if self.values is not None else None,
            "feasibility": [s.to_dict() for s in self.solutions],
            "classifier_ref": self.classifier_ref,
            "model_hash": self.model_hash,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PenaltyParams":
        sols = tuple(
            LambdaSolution(
                value=s["value"],
                interval=FeasibleInterval(s["lo"], s["hi"]),
                candidate=s["candidate"],
                objective=s["objective"],
                carried=s.get("carried", False),
            )
            for s in doc.get("feasibility", [])
        )
        values = doc.get("values")
        return cls(
            variant=doc["variant"],
            value=doc.get("value"),
            values=tuple(values) if values is not None else None,
            solutions=sols,
            classifier_ref=doc.get("classifier_ref"),
            model_hash=doc.get("model_hash"),
        )


def margin_stats(model, dataset: Dataset) -> list[MarginRecord]:
    """One record per flattened pair of a label dataset.

    Groups whose negative set is empty (targets covering the whole universe)
    contribute nothing and are logged, since no negative bounds exist there.
    """
    if dataset.kind != "labels":
        raise ValidationError("margin_stats expects a label dataset")
    flat = flatten(dataset)
    groups = group_by_input(flat, universe=dataset.universe)
    records: list[MarginRecord] = []
    skipped = 0
    for gid in sorted(groups):
        grp = groups[gid]
        probs = np.asarray(model.posterior(grp.x), dtype=float)
        pos = sorted(grp.positives)
        neg = sorted(grp.negatives)
        if not neg:
            skipped += 1
            continue
        l_pos_min = float(np.min(probs[pos]))
        l_neg_max = float(np.max(probs[neg]))
        for lab in pos:
            records.append(MarginRecord(p=float(probs[lab]),
                                        l_pos_min=l_pos_min, l_neg_max=l_neg_max))
    if skipped:
        log.warning("margin_stats: skipped %d group(s) with empty negative sets", skipped)
    return records


def _objective(diffs: np.ndarray, lam: float) -> float:
    return float(np.sum((diffs - lam) ** 2))


def _hinge_objective(diffs: np.ndarray, los: np.ndarray, his: np.ndarray,
                     lam: float | np.ndarray):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))[:, None]
    quad = np.sum((diffs[None, :] - lam) ** 2, axis=1)
    viol = np.sum(np.maximum(0.0, los[None, :] - lam), axis=1)
    viol += np.sum(np.maximum(0.0, lam - his[None, :]), axis=1)
    return quad + HINGE_WEIGHT * viol


def solve_lambda(records: list[MarginRecord]) -> LambdaSolution:
    """Closed-form penalty fit: interval ends or the mean gap, whichever wins.

    With an empty interval, minimizes the quadratic plus hinge penalties on
    every per-record bound by coarse scan and local refinement, and flags the
    result infeasible.  Ties break toward the smaller penalty.
    """
    if not records:
        raise ValidationError("solve_lambda requires at least one margin record")
    p = np.asarray([r.p for r in records])
    los = p - np.asarray([r.l_pos_min for r in records])
    his = p - np.asarray([r.l_neg_max for r in records])
    diffs = p - np.asarray([r.p_hat for r in records])
    interval = FeasibleInterval(lo=float(np.max(los)), hi=float(np.min(his)))

    if not interval.empty:
        mean = float(np.mean(diffs))
        candidates = [(interval.lo, "boundary-low"), (interval.hi, "boundary-high")]
        if interval.lo <= mean <= interval.hi:
            candidates.append((mean, "interior"))
        best = min(candidates, key=lambda c: (_objective(diffs, c[0]), c[0]))
        return LambdaSolution(value=best[0], interval=interval, candidate=best[1],
                              objective=_objective(diffs, best[0]))

    # Infeasible: 1-D scan over the plausible range, then a fine pass around
    # the coarse winner.
    coarse = np.arange(SCAN_RANGE[0], SCAN_RANGE[1] + SCAN_STEP, SCAN_STEP)
    vals = _hinge_objective(diffs, los, his, coarse)
    best_idx = int(np.argmin(vals))
    center = coarse[best_idx]
    fine = np.arange(center - 2 * SCAN_STEP, center + 2 * SCAN_STEP, 1e-6)
    fvals = _hinge_objective(diffs, los, his, fine)
    lam = float(fine[int(np.argmin(fvals))])
    return LambdaSolution(value=lam, interval=interval, candidate="infeasible",
                          objective=_objective(diffs, lam))


def position_candidates(targets, prefix: TokenSeq, vocab: int
                        ) -> tuple[frozenset[int], frozenset[int]]:
    """Positive and negative token sets at the position following ``prefix``.

    A token is positive when appending it to the prefix still matches some
    target; because complete targets end in the end-of-sequence token, a
    prefix that spells out a full target gets the end token as a positive.
    """
    targets = list(targets)
    if not targets:
        raise ValidationError("position_candidates requires a non-empty target set")
    k = len(prefix)
    positives = set()
    matched = False
    for t in targets:
        if len(t) > k and tuple(t[:k]) == tuple(prefix):
            matched = True
            positives.add(int(t[k]))
    if not matched:
        raise ValidationError(f"prefix {prefix!r} matches no target")
    negatives = frozenset(range(vocab)) - positives
    return frozenset(positives), negatives


def solve_lambda_per_position(model, dataset: Dataset,
                              max_len: int | None = None) -> PenaltyParams:
    """One closed-form penalty per output position of a sequence dataset.

    Records at position j come from the teacher-forced next-token posterior
    of every (sample, target) pair whose target reaches that position.
    Positions with no records inherit the previous position's value and are
    flagged as carried.
    """
    if dataset.kind != "sequences":
        raise ValidationError("per-position calibration expects a sequence dataset")
    max_len = max_len or dataset.max_len
    vocab = dataset.universe
    per_position: list[list[MarginRecord]] = [[] for _ in range(max_len)]
    for sample in dataset.samples:
        if not sample.y:
            continue
        # Cache one posterior per distinct prefix; targets sharing a prefix
        # still contribute one record each, mirroring the flattened pairs.
        _, probs_for = make_prefix_scorer(model, sample.x)
        probs_cache: dict[TokenSeq, np.ndarray] = {}
        for target in sample.y:
            for j in range(1, len(target) + 1):
                prefix = tuple(target[:j - 1])
                if prefix not in probs_cache:
                    probs_cache[prefix] = probs_for(prefix)
                probs = probs_cache[prefix]
                pos, neg = position_candidates(sample.y, prefix, vocab)
                if not neg:
                    continue
                l_pos_min = float(np.min(probs[sorted(pos)]))
                l_neg_max = float(np.max(probs[sorted(neg)]))
                per_position[j - 1].append(
                    MarginRecord(p=float(probs[target[j - 1]]),
                                 l_pos_min=l_pos_min, l_neg_max=l_neg_max)
                )
    solutions: list[LambdaSolution] = []
    last: LambdaSolution | None = None
    n_empty = 0
    for j in range(max_len):
        if per_position[j]:
            last = solve_lambda(per_position[j])
            solutions.append(last)
        else:
            n_empty += 1
            if last is None:
                raise ValidationError("no margin records at any position; is the model trained?")
            solutions.append(LambdaSolution(value=last.value, interval=last.interval,
                                            candidate=last.candidate,
                                            objective=last.objective, carried=True))
    if n_empty:
        log.info("per-position calibration: %d position(s) carried forward", n_empty)
    return PenaltyParams(
        variant="per-position",
        values=tuple(s.value for s in solutions),
        solutions=tuple(solutions),
    )
