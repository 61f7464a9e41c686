"""Relative Contribution Quantification over pooled Grad-CAM frames.

For each frame category c, the mean score is pooled over every frame of every
included utterance (not averaged per utterance first).  RCQ_c is the percent
deviation of that mean from the all-frame mean.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .annotate import CATEGORIES
from .model import CLASS_NAMES

N_BINS = 10
FILTERS = ("all_spoofed", "correct_only", "incorrect_only")


class UndefinedRCQError(ValueError):
    """Raised when the all-frame mean is zero, so no ratio exists."""


@dataclass
class CategoryStats:
    frames: int
    mean_score: float | None
    rcq_percent: float | None

    @property
    def present(self) -> bool:
        return self.frames > 0


@dataclass
class RcqReport:
    target_class: int
    sample_filter: str
    n_utterances: int
    all_frames: int
    all_mean: float
    categories: dict[str, CategoryStats] = field(default_factory=dict)

    def rcq(self, category: str) -> float | None:
        return self.categories[category].rcq_percent

    def present(self) -> list[str]:
        return [c for c in CATEGORIES if self.categories[c].present]

    def to_dict(self) -> dict:
        return {
            "target_class": CLASS_NAMES[self.target_class],
            "filter": self.sample_filter,
            "n_utterances": self.n_utterances,
            "all_frames": self.all_frames,
            "all_mean_score": self.all_mean,
            "categories": [
                {
                    "category": c,
                    "frames": s.frames,
                    "mean_score": s.mean_score,
                    "rcq_percent": s.rcq_percent,
                }
                for c, s in self.categories.items()
            ],
        }

    def to_csv(self) -> str:
        lines = [
            f"# target_class={CLASS_NAMES[self.target_class]}",
            f"# filter={self.sample_filter}",
            f"# n_utterances={self.n_utterances}",
            f"# all_mean_score={_fmt(self.all_mean)}",
            "category,frames,mean_score,rcq_percent",
        ]
        for c, s in self.categories.items():
            lines.append(f"{c},{s.frames},{_fmt(s.mean_score)},{_fmt(s.rcq_percent)}")
        return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    return "n/a" if x is None else repr(float(x))


def _pooled_sum(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def category_means(maps, annotations) -> tuple[dict[str, float | None], float, dict[str, int]]:
    """Globally pooled per-category mean scores.

    ``maps`` are score arrays (or objects with ``.scores``), ``annotations``
    label sequences of the same lengths.  Absent categories map to ``None``.
    Sums use exactly rounded ``math.fsum`` so results do not depend on order.
    """
    maps = list(maps)
    annotations = list(annotations)
    if len(maps) != len(annotations):
        raise ValueError(f"{len(maps)} maps but {len(annotations)} annotations")
    scores, labels = [], []
    for i, (m, a) in enumerate(zip(maps, annotations)):
        s = np.asarray(getattr(m, "scores", m), dtype=np.float64)
        lab = np.asarray(getattr(a, "labels", a))
        if s.shape != lab.shape:
            raise ValueError(f"utterance {i}: {len(s)} scores but {len(lab)} frame labels")
        scores.append(s)
        labels.append(lab)
    all_scores = np.concatenate(scores) if scores else np.zeros(0)
    all_labels = np.concatenate(labels) if labels else np.zeros(0, dtype=str)

    counts, means = {}, {}
    for c in CATEGORIES:
        sel = all_scores[all_labels == c]
        counts[c] = int(sel.size)
        means[c] = _pooled_sum(sel) / sel.size if sel.size else None
    all_mean = _pooled_sum(all_scores) / all_scores.size if all_scores.size else 0.0
    return means, all_mean, counts


def rcq(category_mean: float, all_mean: float) -> float:
    """Percent deviation of a category mean from the all-frame mean."""
    if not all_mean > 0:
        raise UndefinedRCQError(f"RCQ is undefined when the all-frame mean is {all_mean}")
    return (category_mean - all_mean) / all_mean * 100.0


def rcq_report(maps, annotations, target_class: int, sample_filter: str = "all_spoofed") -> RcqReport:
    """Report over the given (already filtered) utterances.

    When the all-frame mean is zero, RCQ values are left as ``None`` rather
    than invented; :func:`rcq` itself raises in that case.
    """
    maps, annotations = list(maps), list(annotations)
    means, all_mean, counts = category_means(maps, annotations)
    cats = {}
    for c in CATEGORIES:
        value = None
        if means[c] is not None and all_mean > 0:
            value = rcq(means[c], all_mean)
        cats[c] = CategoryStats(counts[c], means[c], value)
    return RcqReport(target_class, sample_filter, len(maps), sum(counts.values()), all_mean, cats)


def weighted_rcq_sum(report: RcqReport) -> float:
    """sum_c F_c * RCQ_c over present categories; zero by construction."""
    return math.fsum(
        s.frames * s.rcq_percent for s in report.categories.values() if s.present and s.rcq_percent is not None
    )


# ----------------------------------------------------------------------------
# score-bin analysis


@dataclass
class BinGroup:
    index: int  # 1..11
    members: list[int]
    lower: float | None
    upper: float | None
    report: RcqReport | None

    def to_dict(self) -> dict:
        return {
            "group": self.index,
            "kind": "misclassified" if self.index == N_BINS + 1 else "score_bin",
            "score_range": None if self.lower is None else [self.lower, self.upper],
            "n_samples": len(self.members),
            "report": None if self.report is None else self.report.to_dict(),
        }


@dataclass
class BinAnalysis:
    target_class: int
    edges: list[float]
    groups: list[BinGroup]

    def to_list(self) -> list[dict]:
        return [g.to_dict() for g in self.groups]

    def to_json(self) -> str:
        return json.dumps(self.to_list(), indent=2)


def assign_bins(scores, n_bins: int = N_BINS) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width bins over [min, max]; left-inclusive, last bin right-closed.

    Returns (0-based bin index per score, bin edges).  A zero-width range puts
    everything in the first bin.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("cannot bin an empty score set")
    lo, hi = float(s.min()), float(s.max())
    edges = np.linspace(lo, hi, n_bins + 1)
    if hi == lo:
        return np.zeros(s.size, dtype=int), edges
    idx = np.searchsorted(edges[1:-1], s, side="right")
    return idx.astype(int), edges


def bin_analysis(scores, correct, maps, annotations, target_class: int) -> BinAnalysis:
    """Ten equal-width p_spoof bins over correctly classified spoofed samples,
    plus an eleventh group of the misclassified ones.

    All inputs are per spoofed utterance and aligned.
    """
    s = np.asarray(scores, dtype=np.float64)
    ok = np.asarray(correct, dtype=bool)
    maps, annotations = list(maps), list(annotations)
    if not (len(s) == len(ok) == len(maps) == len(annotations)):
        raise ValueError("scores, correctness flags, maps and annotations must align")
    correct_idx = np.flatnonzero(ok)
    if correct_idx.size == 0:
        raise ValueError("bin analysis needs at least one correctly classified sample")
    bins, edges = assign_bins(s[correct_idx])

    def group_report(members, label):
        if not members:
            return None
        return rcq_report([maps[i] for i in members], [annotations[i] for i in members], target_class, label)

    groups = []
    for b in range(N_BINS):
        members = [int(i) for i in correct_idx[bins == b]]
        groups.append(
            BinGroup(b + 1, members, float(edges[b]), float(edges[b + 1]), group_report(members, f"bin_{b + 1}"))
        )
    wrong = [int(i) for i in np.flatnonzero(~ok)]
    groups.append(BinGroup(N_BINS + 1, wrong, None, None, group_report(wrong, "incorrect_only")))
    return BinAnalysis(target_class, [float(e) for e in edges], groups)
