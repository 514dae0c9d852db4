"""Pairwise preference aggregation from per-rater evidence.

Scalar rater scores are combined into an empirical preference confidence per
pair (each rater votes by score comparison, exact ties split 0.5/0.5), and
directional A/B vote counts are de-biased by averaging the two presentation
orders. A confidence-margin filter drops low-agreement pairs, exempting
neutral parallel pairs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ParseError, ValidationError

KINDS = ("english", "monolingual", "crosslingual", "parallel")


@dataclass(frozen=True)
class RaterScoreRecord:
    rater_id: str
    doc_id: str
    score: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValidationError(
                f"rater {self.rater_id!r}, doc {self.doc_id!r}: score must be finite"
            )


@dataclass(frozen=True)
class DirectionalJudgment:
    """A/B vote counts for one presentation order; doc_a was shown first."""

    rater_id: str
    doc_a: str
    doc_b: str
    votes_a: int
    votes_b: int

    def __post_init__(self) -> None:
        if self.votes_a < 0 or self.votes_b < 0:
            raise ValidationError("vote counts must be non-negative")
        if self.votes_a + self.votes_b < 1:
            raise ValidationError(
                f"pair ({self.doc_a!r}, {self.doc_b!r}): needs at least one vote"
            )


@dataclass(frozen=True)
class PairJudgment:
    """A training example: probability that doc_b is preferred over doc_a."""

    doc_a: str
    doc_b: str
    p_b_over_a: float
    kind: str
    source_pair: str | None = None

    def __post_init__(self) -> None:
        if self.doc_a == self.doc_b:
            raise ValidationError(f"degenerate pair: doc_a == doc_b == {self.doc_a!r}")
        if not 0.0 <= self.p_b_over_a <= 1.0:
            raise ValidationError(f"p_b_over_a {self.p_b_over_a} outside [0, 1]")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "parallel" and self.p_b_over_a != 0.5:
            raise ValidationError("parallel pairs must carry p_b_over_a == 0.5 exactly")

    @property
    def confidence_margin(self) -> float:
        return abs(2.0 * self.p_b_over_a - 1.0)


def aggregate_pair(
    doc_a: str,
    doc_b: str,
    scores_a: Mapping[str, float],
    scores_b: Mapping[str, float],
) -> PairJudgment:
    """Combine per-rater scalar scores into one preference confidence.

    Each rater contributes 1 if it scores doc_a above doc_b, 0 if below, and
    0.5 on an exact tie; the fraction preferring doc_a is then complemented
    into p_b_over_a.
    """
    if not scores_a:
        raise ValidationError(f"pair ({doc_a!r}, {doc_b!r}): empty rater set")
    if set(scores_a) != set(scores_b):
        only_a = sorted(set(scores_a) - set(scores_b))
        only_b = sorted(set(scores_b) - set(scores_a))
        raise ValidationError(
            f"pair ({doc_a!r}, {doc_b!r}): rater sets differ "
            f"(only scoring a: {only_a}, only scoring b: {only_b})"
        )
    wins_a = 0.0
    for rater, sa in scores_a.items():
        sb = scores_b[rater]
        if sa > sb:
            wins_a += 1.0
        elif sa == sb:
            wins_a += 0.5
    p_a_over_b = wins_a / len(scores_a)
    return PairJudgment(doc_a=doc_a, doc_b=doc_b, p_b_over_a=1.0 - p_a_over_b, kind="english")


def aggregate_directional(
    j: DirectionalJudgment,
    reverse: DirectionalJudgment | None = None,
) -> PairJudgment:
    """De-bias presentation order by averaging forward and reversed fractions.

    `reverse`, when given, must be the same unordered pair with roles swapped
    (its doc_a is j's doc_b). A single direction is used as-is.
    """
    forward = j.votes_a / (j.votes_a + j.votes_b)
    if reverse is None:
        p_a_over_b = forward
    else:
        if (reverse.doc_a, reverse.doc_b) != (j.doc_b, j.doc_a):
            raise ValidationError(
                f"reverse judgment pair ({reverse.doc_a!r}, {reverse.doc_b!r}) does not "
                f"mirror forward pair ({j.doc_a!r}, {j.doc_b!r})"
            )
        rev = reverse.votes_a / (reverse.votes_a + reverse.votes_b)
        p_a_over_b = (forward + (1.0 - rev)) / 2.0
    return PairJudgment(doc_a=j.doc_a, doc_b=j.doc_b, p_b_over_a=1.0 - p_a_over_b, kind="english")


def margin_filter(judgments: Iterable[PairJudgment], margin: float) -> list[PairJudgment]:
    """Keep judgments whose confidence margin reaches `margin`; parallel pairs always pass."""
    if not 0.0 <= margin <= 1.0:
        raise ValidationError(f"margin {margin} outside [0, 1]")
    return [
        j for j in judgments
        if j.kind == "parallel" or j.confidence_margin >= margin
    ]


# -- file I/O --

def load_rater_scores(path: str | Path) -> dict[str, dict[str, float]]:
    """Read {rater_id, doc_id, score} JSON Lines into rater -> doc -> score."""
    path = Path(path)
    scores: dict[str, dict[str, float]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            try:
                record = RaterScoreRecord(
                    rater_id=str(rec["rater_id"]),
                    doc_id=str(rec["doc_id"]),
                    score=float(rec["score"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}: line {lineno}: bad score record ({exc})") from exc
            except ValidationError as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc}") from exc
            per_rater = scores.setdefault(record.rater_id, {})
            if record.doc_id in per_rater:
                raise ValidationError(
                    f"{path}: line {lineno}: duplicate score for rater "
                    f"{record.rater_id!r}, doc {record.doc_id!r}"
                )
            per_rater[record.doc_id] = record.score
    return scores


def load_directional_judgments(path: str | Path) -> list[DirectionalJudgment]:
    """Read {rater_id, doc_a, doc_b, votes_a, votes_b, order} JSON Lines.

    Records with order "ba" are swapped into presentation order, so the
    returned judgments all have doc_a = first-presented document.
    """
    path = Path(path)
    out: list[DirectionalJudgment] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            try:
                order = rec["order"]
                if order not in ("ab", "ba"):
                    raise ParseError(f"{path}: line {lineno}: order must be 'ab' or 'ba'")
                a, b = str(rec["doc_a"]), str(rec["doc_b"])
                va, vb = int(rec["votes_a"]), int(rec["votes_b"])
            except KeyError as exc:
                raise ParseError(f"{path}: line {lineno}: missing field {exc}") from exc
            if order == "ba":
                a, b, va, vb = b, a, vb, va
            try:
                out.append(DirectionalJudgment(
                    rater_id=str(rec["rater_id"]), doc_a=a, doc_b=b, votes_a=va, votes_b=vb,
                ))
            except ValidationError as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc}") from exc
    return out


def judgment_to_record(j: PairJudgment) -> dict:
    return {
        "doc_a": j.doc_a,
        "doc_b": j.doc_b,
        "p_b_over_a": j.p_b_over_a,
        "kind": j.kind,
        "source_pair": j.source_pair,
    }


def save_judgments(judgments: Sequence[PairJudgment], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for j in judgments:
            fh.write(json.dumps(judgment_to_record(j), ensure_ascii=False, sort_keys=True) + "\n")


def load_judgments(path: str | Path) -> list[PairJudgment]:
    path = Path(path)
    out: list[PairJudgment] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            try:
                out.append(PairJudgment(
                    doc_a=str(rec["doc_a"]),
                    doc_b=str(rec["doc_b"]),
                    p_b_over_a=float(rec["p_b_over_a"]),
                    kind=str(rec["kind"]),
                    source_pair=rec.get("source_pair"),
                ))
            except KeyError as exc:
                raise ParseError(f"{path}: line {lineno}: missing field {exc}") from exc
            except ValidationError as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc}") from exc
    return out
