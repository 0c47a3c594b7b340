"""Validation statistics for metric-vs-human comparisons.

Likert consensus labeling, the per-prompt agreement rate between metric
score orderings and human preference directions, a Wilcoxon signed-rank
paired test (exact null for small samples, tie-corrected normal
approximation otherwise), and Fleiss' kappa for inter-annotator
agreement.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DegenerateSampleError,
    EmptySampleError,
    IngestionError,
    InvalidInputError,
    UndefinedKappaError,
)

NO_CONSENSUS = "NO_CONSENSUS"

SCALES = ("five", "three")

DEFAULT_TIE_EPS = 1e-9

# Exact Wilcoxon null enumeration up to this many nonzero pairs; the
# normal approximation takes over beyond it.
WILCOXON_EXACT_MAX_N = 25


class Direction(Enum):
    X_BETTER = "X_BETTER"
    SAME = "SAME"
    Y_BETTER = "Y_BETTER"


def _check_rating(rating) -> int:
    r = int(rating)
    if r != rating or not (1 <= r <= 5):
        raise IngestionError(f"rating must be an integer in 1..5, got {rating!r}")
    return r


def collapse_to_direction(rating) -> Direction:
    """Collapse a 5-point preference rating to its direction: 1 and 2
    favor system X, 3 is a tie, 4 and 5 favor system Y."""
    r = _check_rating(rating)
    if r <= 2:
        return Direction.X_BETTER
    if r == 3:
        return Direction.SAME
    return Direction.Y_BETTER


@dataclass(frozen=True)
class AnnotationRecord:
    """Three annotators' preference ratings for one prompt's X-vs-Y pair."""

    prompt_id: str
    system_x: str
    system_y: str
    ratings: tuple

    def __post_init__(self):
        ratings = tuple(_check_rating(r) for r in self.ratings)
        object.__setattr__(self, "ratings", ratings)
        if len(ratings) != 3:
            raise IngestionError(
                f"prompt {self.prompt_id!r} needs exactly 3 ratings, "
                f"got {len(ratings)}"
            )
        if not self.prompt_id:
            raise IngestionError("prompt_id must be non-empty")


@dataclass(frozen=True)
class ConsensusLabel:
    """Majority label among the three ratings at a given scale.

    support is 3of3 when unanimous, 2of3 when exactly two agree, none
    when all three differ (label is then the NO_CONSENSUS sentinel).
    """

    scale: str
    label: object
    support: str

    def __post_init__(self):
        if self.scale not in SCALES:
            raise InvalidInputError(f"scale must be one of {SCALES}")
        if self.support not in ("3of3", "2of3", "none"):
            raise InvalidInputError(f"bad support {self.support!r}")
        if (self.support == "none") != (self.label == NO_CONSENSUS):
            raise InvalidInputError(
                "label must be NO_CONSENSUS exactly when support is none"
            )

    @property
    def direction(self):
        """The label's direction, or None without consensus."""
        if self.support == "none":
            return None
        if self.scale == "three":
            return self.label
        return collapse_to_direction(self.label)


def consensus(ratings, scale: str = "five") -> ConsensusLabel:
    """Majority vote over three ratings, possibly after collapsing to
    directions. Permutation-invariant in the ratings."""
    if scale not in SCALES:
        raise InvalidInputError(f"scale must be one of {SCALES}")
    values = [_check_rating(r) for r in ratings]
    if len(values) != 3:
        raise InvalidInputError(f"need exactly 3 ratings, got {len(values)}")
    if scale == "three":
        values = [collapse_to_direction(r) for r in values]
    (label, count), = Counter(values).most_common(1)
    if count == 3:
        return ConsensusLabel(scale=scale, label=label, support="3of3")
    if count == 2:
        return ConsensusLabel(scale=scale, label=label, support="2of3")
    return ConsensusLabel(scale=scale, label=NO_CONSENSUS, support="none")


def agreement_rate(scores_x, scores_y, labels, tie_eps: float = DEFAULT_TIE_EPS):
    """Fraction of fully-agreed directional prompts where the score
    ordering matches the human direction.

    Only prompts with 3of3 consensus and a non-SAME direction count.
    Score differences within tie_eps are disagreements: the filtered
    labels all express a strict preference the tied scores fail to
    reproduce. Returns (rate, number of prompts used).
    """
    xs = np.asarray(scores_x, dtype=np.float64)
    ys = np.asarray(scores_y, dtype=np.float64)
    labels = list(labels)
    if xs.shape != ys.shape or xs.ndim != 1 or len(labels) != xs.size:
        raise InvalidInputError("scores and labels must be aligned 1-D arrays")
    used = 0
    agreed = 0
    for sx, sy, lab in zip(xs, ys, labels):
        if lab.support != "3of3":
            continue
        direction = lab.direction
        if direction is None or direction == Direction.SAME:
            continue
        used += 1
        diff = float(sx) - float(sy)
        if abs(diff) <= tie_eps:
            continue
        if diff > 0 and direction == Direction.X_BETTER:
            agreed += 1
        elif diff < 0 and direction == Direction.Y_BETTER:
            agreed += 1
    if used == 0:
        raise EmptySampleError(
            "no prompts with full directional consensus to score against"
        )
    return agreed / used, used


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j < values.size and sorted_vals[j] == sorted_vals[i]:
            j += 1
        ranks[order[i:j]] = (i + 1 + j) / 2.0
        i = j
    return ranks


def _exact_two_sided_p(ranks: np.ndarray, w_plus: float) -> float:
    # Doubled ranks are integers even with .5 average ranks, so the null
    # distribution is a dense integer DP over 2^n sign assignments.
    r2 = np.rint(ranks * 2.0).astype(np.int64)
    total2 = int(r2.sum())
    counts = np.zeros(total2 + 1, dtype=np.int64)
    counts[0] = 1
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total2 + 1 - r]
        counts = counts + shifted
    mean2 = total2 // 2
    dev = abs(int(round(2.0 * w_plus)) - mean2)
    mask = np.abs(np.arange(total2 + 1) - mean2) >= dev
    return float(min(1.0, int(counts[mask].sum()) / 2.0 ** ranks.size))


def _normal_two_sided_p(diffs: np.ndarray, ranks: np.ndarray,
                        w_plus: float) -> float:
    n = diffs.size
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(diffs), return_counts=True)
    tie_term = float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts))
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    if var <= 0.0:
        raise DegenerateSampleError("zero variance in signed-rank statistic")
    adj = max(abs(w_plus - mean) - 0.5, 0.0)
    return float(min(1.0, math.erfc(adj / math.sqrt(var) / math.sqrt(2.0))))


def wilcoxon_signed_rank(x, y):
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped; tied absolute differences share
    average ranks. The null distribution is enumerated exactly for up
    to 25 nonzero pairs, otherwise approximated normally with a 0.5
    continuity correction and tie-corrected variance. Returns
    (W+, p_value).
    """
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise InvalidInputError("paired samples must be equal-length 1-D arrays")
    diffs = xs - ys
    diffs = diffs[diffs != 0.0]
    if diffs.size == 0:
        raise DegenerateSampleError("all paired differences are zero")
    if diffs.size < 5:
        raise DegenerateSampleError(
            f"only {diffs.size} nonzero differences; need at least 5"
        )
    ranks = _average_ranks(np.abs(diffs))
    w_plus = float(np.sum(ranks[diffs > 0.0]))
    if diffs.size <= WILCOXON_EXACT_MAX_N:
        p = _exact_two_sided_p(ranks, w_plus)
    else:
        p = _normal_two_sided_p(diffs, ranks, w_plus)
    return w_plus, p


def fleiss_kappa(ratings_matrix, raters_per_item=None) -> float:
    """Fleiss' kappa over an items-by-categories count table.

    Every row must sum to the same number of raters. Returns
    (P_bar - P_bar_e) / (1 - P_bar_e); exactly 1.0 for perfect
    agreement spread over more than one category.
    """
    mat = np.asarray(ratings_matrix, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise InvalidInputError("count table must be 2-D and non-empty")
    if np.any(mat < 0) or np.any(mat != np.rint(mat)):
        raise InvalidInputError("count table entries must be nonnegative integers")
    row_sums = mat.sum(axis=1)
    if raters_per_item is None:
        raters_per_item = int(row_sums[0])
    raters = int(raters_per_item)
    if raters < 2:
        raise InvalidInputError("need at least 2 raters per item")
    if np.any(row_sums != raters):
        raise InvalidInputError(
            f"every row must sum to {raters} raters; got sums "
            f"{sorted(set(row_sums.tolist()))}"
        )
    n_items = mat.shape[0]
    p_cat = mat.sum(axis=0) / (n_items * raters)
    p_bar_e = float(np.sum(p_cat**2))
    p_items = (np.sum(mat**2, axis=1) - raters) / (raters * (raters - 1))
    p_bar = float(np.mean(p_items))
    if p_bar_e >= 1.0:
        raise UndefinedKappaError(
            "all ratings fall in a single category; chance agreement is 1"
        )
    return float((p_bar - p_bar_e) / (1.0 - p_bar_e))


def ratings_to_count_table(items, scale: str = "five") -> np.ndarray:
    """Build the Fleiss count table from rating triples.

    Accepts AnnotationRecords or bare rating sequences. Categories are
    the five rating levels, or the three directions when scale=three.
    """
    if scale not in SCALES:
        raise InvalidInputError(f"scale must be one of {SCALES}")
    directions = list(Direction)
    rows = []
    for item in items:
        ratings = item.ratings if isinstance(item, AnnotationRecord) else item
        values = [_check_rating(r) for r in ratings]
        if scale == "five":
            idx = [r - 1 for r in values]
            rows.append(np.bincount(idx, minlength=5))
        else:
            idx = [directions.index(collapse_to_direction(r)) for r in values]
            rows.append(np.bincount(idx, minlength=3))
    if not rows:
        raise EmptySampleError("no annotation records to tabulate")
    return np.stack(rows).astype(np.int64)
