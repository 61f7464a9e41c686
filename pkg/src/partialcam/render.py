"""Waveform + Grad-CAM heat strip + annotation band, as SVG or PGM."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .annotate import CATEGORIES

CATEGORY_COLOURS = {
    "TR": "#d62728",
    "BS": "#2ca02c",
    "BN": "#98df8a",
    "SS": "#1f77b4",
    "SN": "#aec7e8",
}
# grey levels for the PGM band, one per category
CATEGORY_GREYS = {"TR": 0, "BS": 200, "BN": 235, "SS": 90, "SN": 150}

WIDTH = 1000
WAVE_H = 160
STRIP_H = 40
BAND_H = 18
PAD = 10


def _shade(v: float) -> str:
    """0 -> white, 1 -> deep red; deeper shade means a higher score."""
    g = int(round(255 * (1.0 - v)))
    return f"#{255 - int(round(100 * v)):02x}{g:02x}{g:02x}"


def _normalise(scores: np.ndarray) -> np.ndarray:
    top = float(scores.max()) if scores.size else 0.0
    return scores / top if top > 0 else np.zeros_like(scores)


def _envelope(samples: np.ndarray, columns: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(0, len(samples), columns + 1).astype(int)
    lo = np.array([samples[a:b].min() if b > a else 0.0 for a, b in zip(edges[:-1], edges[1:])])
    hi = np.array([samples[a:b].max() if b > a else 0.0 for a, b in zip(edges[:-1], edges[1:])])
    return lo, hi


def render_svg(
    samples: np.ndarray,
    scores: np.ndarray,
    labels,
    *,
    title: str = "",
    frame_samples: int = 320,
) -> str:
    samples = np.asarray(samples, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    labels = list(labels)
    if len(scores) != len(labels):
        raise ValueError(f"{len(scores)} scores but {len(labels)} labels")
    n_frames = len(scores)
    span = max(n_frames * frame_samples, len(samples), 1)
    x0, w = PAD, WIDTH - 2 * PAD
    top = PAD + 16

    def x_of(sample_index: float) -> float:
        return x0 + w * sample_index / span

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{top + WAVE_H + STRIP_H + BAND_H + 3 * PAD + 20}" font-family="sans-serif" font-size="11">',
        f'<text x="{x0}" y="{PAD + 10}">{escape(title)}</text>',
    ]

    lo, hi = _envelope(samples, w)
    mid = top + WAVE_H / 2
    scale = WAVE_H / 2 / max(float(np.abs(samples).max()) if samples.size else 1.0, 1e-9)
    cols = len(samples) * w / span
    pts_hi = " ".join(f"{x0 + i * cols / w:.2f},{mid - v * scale:.2f}" for i, v in enumerate(hi))
    pts_lo = " ".join(f"{x0 + i * cols / w:.2f},{mid - v * scale:.2f}" for i, v in reversed(list(enumerate(lo))))
    out.append(f'<polygon points="{pts_hi} {pts_lo}" fill="#444" stroke="none"/>')

    y_strip = top + WAVE_H + PAD
    heat = _normalise(scores)
    for t, v in enumerate(heat):
        a, b = x_of(t * frame_samples), x_of((t + 1) * frame_samples)
        out.append(
            f'<rect x="{a:.2f}" y="{y_strip}" width="{b - a:.2f}" height="{STRIP_H}" fill="{_shade(float(v))}"/>'
        )
    out.append(f'<rect x="{x0}" y="{y_strip}" width="{w}" height="{STRIP_H}" fill="none" stroke="#999"/>')

    y_band = y_strip + STRIP_H + PAD
    for t, lab in enumerate(labels):
        a, b = x_of(t * frame_samples), x_of((t + 1) * frame_samples)
        colour = CATEGORY_COLOURS.get(lab, "#ffffff")
        out.append(f'<rect x="{a:.2f}" y="{y_band}" width="{b - a:.2f}" height="{BAND_H}" fill="{colour}"/>')

    y_leg = y_band + BAND_H + 14
    for i, c in enumerate(CATEGORIES):
        lx = x0 + i * 70
        out.append(f'<rect x="{lx}" y="{y_leg - 9}" width="10" height="10" fill="{CATEGORY_COLOURS[c]}"/>')
        out.append(f'<text x="{lx + 14}" y="{y_leg}">{c}</text>')
    out.append(f'<text x="{x0 + 5 * 70 + 20}" y="{y_leg}">heat: darker = higher Grad-CAM score</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_pgm(scores: np.ndarray, labels, *, frame_px: int = 4) -> bytes:
    """Binary PGM: heat strip on top (black = highest), category band below."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = list(labels)
    if len(scores) != len(labels):
        raise ValueError(f"{len(scores)} scores but {len(labels)} labels")
    heat = np.round(255 * (1.0 - _normalise(scores))).astype(np.uint8)
    band = np.array([CATEGORY_GREYS.get(lab, 255) for lab in labels], dtype=np.uint8)
    rows = [np.repeat(heat, frame_px)] * 24 + [np.full(len(heat) * frame_px, 255, np.uint8)] * 2
    rows += [np.repeat(band, frame_px)] * 10
    img = np.stack(rows)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    return header + img.tobytes()


def write_rendering(path, samples, scores, labels, title: str = "") -> None:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        path.write_bytes(render_pgm(scores, labels))
    else:
        path.write_text(render_svg(samples, scores, labels, title=title))
