"""Utterance-level scoring: EER and threshold classification.

Scores are p_spoof, so a trial is called spoofed when ``score >= threshold``.
False rejection = bona fide trial called spoofed; false acceptance = spoofed
trial called bona fide.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoredTrial:
    utterance_id: str
    score: float
    spoofed: bool


def _as_arrays(scores, spoofed) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(spoofed, dtype=bool).ravel()
    if s.shape != y.shape:
        raise ValueError(f"{len(s)} scores but {len(y)} labels")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if y.all() or not y.any():
        raise ValueError("EER needs both bona fide and spoofed trials")
    return s, y


def candidate_thresholds(scores) -> np.ndarray:
    """Midpoints between distinct scores, bracketed one unit beyond each end."""
    u = np.unique(np.asarray(scores, dtype=np.float64))
    return np.concatenate([[u[0] - 1.0], (u[:-1] + u[1:]) / 2.0, [u[-1] + 1.0]])


def error_rates(scores, spoofed, thresholds) -> tuple[np.ndarray, np.ndarray]:
    """(false acceptance, false rejection) rates at each threshold."""
    s, y = np.asarray(scores, dtype=np.float64), np.asarray(spoofed, dtype=bool)
    spoof_sorted = np.sort(s[y])
    bona_sorted = np.sort(s[~y])
    t = np.asarray(thresholds, dtype=np.float64)
    far = np.searchsorted(spoof_sorted, t, side="left") / len(spoof_sorted)
    frr = 1.0 - np.searchsorted(bona_sorted, t, side="left") / len(bona_sorted)
    return far, frr


def eer(scores, spoofed) -> tuple[float, float]:
    """(EER in percent, threshold), linearly interpolated where FAR meets FRR.

    The crossing is the first candidate (lowest threshold) with FAR >= FRR;
    both the rate and the threshold are interpolated from its predecessor.
    """
    s, y = _as_arrays(scores, spoofed)
    thr = candidate_thresholds(s)
    far, frr = error_rates(s, y, thr)
    diff = far - frr
    j = int(np.argmax(diff >= 0))
    if j == 0:  # cannot happen with both classes present
        return 100.0 * frr[0], float(thr[0])
    d0, d1 = diff[j - 1], diff[j]
    alpha = -d0 / (d1 - d0)
    rate = frr[j - 1] + alpha * (frr[j] - frr[j - 1])
    threshold = thr[j - 1] + alpha * (thr[j] - thr[j - 1])
    return float(100.0 * rate), float(threshold)


def eer_trials(trials: list[ScoredTrial]) -> tuple[float, float]:
    return eer([t.score for t in trials], [t.spoofed for t in trials])


def classify(scores, spoofed, threshold: float) -> np.ndarray:
    """Per-trial correctness: spoofed trials need score >= threshold,
    bona fide trials score < threshold."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(spoofed, dtype=bool)
    return np.where(y, s >= threshold, s < threshold)


def write_scores(path, trials: list[ScoredTrial]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["utterance_id", "p_spoof"])
        for t in trials:
            w.writerow([t.utterance_id, repr(float(t.score))])


def read_scores(path) -> list[tuple[str, float]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["utterance_id", "p_spoof"]:
            raise ValueError(f"{path}: expected header 'utterance_id,p_spoof'")
        for row in reader:
            if not row:
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: malformed row {row}")
            rows.append((row[0], float(row[1])))
    return rows

