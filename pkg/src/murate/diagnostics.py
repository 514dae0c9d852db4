"""Cross-lingual consistency diagnostics.

Parallel-score regression (slope/intercept against the identity line, plus
mean squared score discrepancy), tie-corrected Kendall rank correlation with
an O(n log n) merge-sort counting core, correlation matrices over aligned
score sequences, and margin-stratified accuracy tables. All reports are
plain JSON documents (optionally flattened to CSV); nothing here plots.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, LANGUAGES
from .errors import ValidationError
from .raters import PairJudgment
from .scorer import ScorerState, evaluate_accuracy


def _tie_term(sorted_arr: np.ndarray) -> int:
    _, counts = np.unique(sorted_arr, return_counts=True)
    return int(np.sum(counts * (counts - 1)) // 2)


def _joint_tie_term(x_sorted: np.ndarray, y_sorted: np.ndarray) -> int:
    boundary = np.empty(len(x_sorted), dtype=bool)
    boundary[0] = True
    boundary[1:] = (x_sorted[1:] != x_sorted[:-1]) | (y_sorted[1:] != y_sorted[:-1])
    counts = np.diff(np.append(np.flatnonzero(boundary), len(x_sorted)))
    return int(np.sum(counts * (counts - 1)) // 2)


def _count_inversions(values: list[float]) -> int:
    """Pairs (i < j) with values[i] > values[j], by bottom-up merge sort."""
    arr = list(values)
    n = len(arr)
    inversions = 0
    width = 1
    buf = [0.0] * n
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if arr[i] <= arr[j]:
                    buf[k] = arr[i]
                    i += 1
                else:
                    buf[k] = arr[j]
                    inversions += mid - i
                    j += 1
                k += 1
            buf[k:hi] = arr[i:mid] if i < mid else arr[j:hi]
            arr[lo:hi] = buf[lo:hi]
        width *= 2
    return inversions


def kendall_tau(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Tie-corrected rank correlation (tau-b), O(n log n)."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or len(x) != len(y):
        raise ValidationError(f"sequence lengths differ: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise ValidationError("rank correlation needs at least two observations")

    perm = np.lexsort((y, x))
    xs_, ys_ = x[perm], y[perm]
    n0 = n * (n - 1) // 2
    xtie = _tie_term(xs_)
    ytie = _tie_term(np.sort(y))
    ntie = _joint_tie_term(xs_, ys_)
    discordant = _count_inversions(list(ys_))
    con_minus_dis = n0 - xtie - ytie + ntie - 2 * discordant

    denom = math.sqrt(n0 - xtie) * math.sqrt(n0 - ytie)
    if denom == 0.0:
        raise ValidationError("rank correlation undefined: a sequence is constant")
    return max(-1.0, min(1.0, con_minus_dis / denom))


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    mse: float  # mean of (y - x)^2: discrepancy from the identity line


def parallel_regression(points: Sequence[tuple[float, float]]) -> RegressionResult:
    """Least-squares y-on-x fit plus the raw score-sequence MSE."""
    if len(points) < 2:
        raise ValidationError("regression needs at least two points")
    arr = np.asarray(points, dtype=np.float64)
    x, y = arr[:, 0], arr[:, 1]
    x_mean = float(np.mean(x))
    var = float(np.mean((x - x_mean) ** 2))
    if var == 0.0:
        raise ValidationError("regression undefined: x values are all equal")
    slope = float(np.mean((x - x_mean) * (y - np.mean(y))) / var)
    intercept = float(np.mean(y) - slope * x_mean)
    mse = float(np.mean((y - x) ** 2))
    return RegressionResult(slope=slope, intercept=intercept, mse=mse)


@dataclass(frozen=True)
class ParallelEval:
    lang_x: str
    lang_y: str
    points: tuple[tuple[float, float], ...]
    slope: float
    intercept: float
    mse: float

    def to_report(self) -> dict:
        return {
            "kind": "parallel_scatter",
            "lang_x": self.lang_x,
            "lang_y": self.lang_y,
            "slope": self.slope,
            "intercept": self.intercept,
            "mse": self.mse,
            "points": [list(p) for p in self.points],
        }


def parallel_eval(
    lang_x: str, lang_y: str, points: Sequence[tuple[float, float]]
) -> ParallelEval:
    reg = parallel_regression(points)
    return ParallelEval(
        lang_x=lang_x, lang_y=lang_y,
        points=tuple((float(x), float(y)) for x, y in points),
        slope=reg.slope, intercept=reg.intercept, mse=reg.mse,
    )


@dataclass(frozen=True)
class TauMatrix:
    labels: tuple[str, ...]
    values: np.ndarray  # symmetric, unit diagonal

    def to_report(self) -> dict:
        return {
            "kind": "tau_matrix",
            "labels": list(self.labels),
            "values": [[float(v) for v in row] for row in self.values],
        }


def tau_matrix(sequences: Mapping[str, Sequence[float]]) -> TauMatrix:
    """Pairwise rank correlations over aligned score sequences."""
    if len(sequences) < 2:
        raise ValidationError("correlation matrix needs at least two labelled sequences")
    lengths = {label: len(seq) for label, seq in sequences.items()}
    if len(set(lengths.values())) != 1:
        detail = ", ".join(f"{label}: {n}" for label, n in sorted(lengths.items()))
        raise ValidationError(f"sequences are not aligned ({detail})")
    if all(label in LANGUAGES for label in sequences):
        labels = tuple(l for l in LANGUAGES if l in sequences)
    else:
        labels = tuple(sorted(sequences))
    k = len(labels)
    values = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            tau = kendall_tau(sequences[labels[i]], sequences[labels[j]])
            values[i, j] = values[j, i] = tau
    return TauMatrix(labels=labels, values=values)


def margin_accuracy_report(
    state: ScorerState,
    held_in: Sequence[PairJudgment],
    held_out: Sequence[PairJudgment],
    corpus: Corpus,
    margins: Sequence[float] = (0.5, 0.8),
) -> dict:
    """Accuracy per (split, margin) as a flat JSON table."""
    table = []
    for split, judgments in (("held_in", held_in), ("held_out", held_out)):
        accs = evaluate_accuracy(state, judgments, corpus, margins)
        for margin in margins:
            table.append({"split": split, "margin": margin, "accuracy": accs[margin]})
    return {"kind": "margin_accuracy", "table": table}


# -- report serialization --

def report_to_json(report: dict) -> str:
    return json.dumps(report, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def report_to_csv(report: dict) -> str:
    """Flatten a report for external plotting."""
    out = io.StringIO()
    kind = report.get("kind")
    if kind == "parallel_scatter":
        out.write("lang_x,lang_y,score_x,score_y\n")
        for x, y in report["points"]:
            out.write(f"{report['lang_x']},{report['lang_y']},{x!r},{y!r}\n")
    elif kind == "tau_matrix":
        out.write("label_row,label_col,tau\n")
        labels = report["labels"]
        for i, row in enumerate(report["values"]):
            for j, value in enumerate(row):
                out.write(f"{labels[i]},{labels[j]},{value!r}\n")
    elif kind == "margin_accuracy":
        out.write("split,margin,accuracy\n")
        for row in report["table"]:
            acc = "" if row["accuracy"] is None else repr(row["accuracy"])
            out.write(f"{row['split']},{row['margin']!r},{acc}\n")
    else:
        raise ValidationError(f"cannot flatten report of kind {kind!r}")
    return out.getvalue()
