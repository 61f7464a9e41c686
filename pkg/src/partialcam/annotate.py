"""Five-category frame labels on the 20 ms grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FRAME_MS, FRAME_SAMPLES

CATEGORIES = ("TR", "BS", "BN", "SS", "SN")


@dataclass(frozen=True)
class FrameAnnotation:
    labels: tuple[str, ...]
    frame_ms: int = FRAME_MS

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        bad = sorted(set(self.labels) - set(CATEGORIES))
        if bad:
            raise ValueError(f"unknown frame labels {bad}")

    def __len__(self) -> int:
        return len(self.labels)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.labels)


def label_frames(
    segment_intervals: list[tuple[str, int, int]],
    transitions: list[tuple[int, int]],
    num_frames: int,
    frame_samples: int = FRAME_SAMPLES,
) -> FrameAnnotation:
    """Label frames from sample-domain intervals.

    ``segment_intervals`` are (label, start, end) half-open sample ranges that
    must tile [0, n) without gaps.  A frame overlapping any transition by at
    least half a frame is TR; otherwise it takes the label of the interval
    holding its midpoint.
    """
    if not segment_intervals:
        raise ValueError("no segment intervals given")
    ordered = sorted(segment_intervals, key=lambda iv: iv[1])
    if ordered[0][1] != 0:
        raise ValueError("segment intervals must start at sample 0")
    for (_, _, end), (_, start, _) in zip(ordered, ordered[1:]):
        if start != end:
            raise ValueError(f"segment intervals leave a gap or overlap at sample {end}")
    covered = ordered[-1][2]
    if covered < num_frames * frame_samples:
        raise ValueError(
            f"intervals cover {covered} samples but {num_frames} frames need {num_frames * frame_samples}"
        )

    starts = np.array([iv[1] for iv in ordered])
    out = []
    for f in range(num_frames):
        lo, hi = f * frame_samples, (f + 1) * frame_samples
        overlap = max((min(hi, b) - max(lo, a) for a, b in transitions), default=0)
        if 2 * overlap >= frame_samples:
            out.append("TR")
            continue
        mid = lo + frame_samples // 2
        out.append(ordered[int(np.searchsorted(starts, mid, side="right")) - 1][0])
    return FrameAnnotation(tuple(out))


def label_utterance(utterance, num_frames: int | None = None) -> FrameAnnotation:
    """Labels for a :class:`~partialcam.synth.SplicedUtterance`."""
    n = num_frames if num_frames is not None else len(utterance.waveform) // FRAME_SAMPLES
    return label_frames(utterance.segment_intervals, utterance.transitions, n)


def category_masks(annotation: FrameAnnotation | list[str]) -> dict[str, np.ndarray]:
    """Frame-index arrays per category; disjoint and together covering every frame."""
    labels = np.asarray(annotation.labels if isinstance(annotation, FrameAnnotation) else annotation)
    return {c: np.flatnonzero(labels == c) for c in CATEGORIES}
