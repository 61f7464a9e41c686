"""Synthetic segment generators and overlap-add splicing.

Speech is a jittered harmonic source under a ~4 Hz syllabic envelope plus
aspiration noise and the recording's noise floor, fading in and out at the
segment edges; non-speech is the noise floor alone.  Spoofed material shares
the f0, floor and channel of the utterance it is inserted into, so in a
splice_only corpus the only thing separating the classes is the splice: a
crossfade between two independently generated stretches in mid-speech.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

SAMPLE_RATE = 16000

BONAFIDE_SPEECH = "bonafide_speech"
SPOOFED_SPEECH = "spoofed_speech"
BONAFIDE_NONSPEECH = "bonafide_nonspeech"
SPOOFED_NONSPEECH = "spoofed_nonspeech"
SEGMENT_KINDS = (BONAFIDE_SPEECH, SPOOFED_SPEECH, BONAFIDE_NONSPEECH, SPOOFED_NONSPEECH)

# short frame-label codes for each segment kind
KIND_LABELS = {
    BONAFIDE_SPEECH: "BS",
    SPOOFED_SPEECH: "SS",
    BONAFIDE_NONSPEECH: "BN",
    SPOOFED_NONSPEECH: "SN",
}

MODES = ("artifact", "splice_only")
MIN_SEGMENT_S = 0.1
MAX_CROSSFADE_MS = 40.0

VOICED_PEAK = 0.45
ASPIRATION_PEAK = 0.05
NOISE_FLOOR_PEAK = 0.05
JITTER = 0.015
HARMONIC_CEILING_HZ = 5500.0
MAX_HARMONICS = 40
EDGE_RAMP_S = 0.04


def is_spoofed(kind: str) -> bool:
    return kind in (SPOOFED_SPEECH, SPOOFED_NONSPEECH)


def is_speech(kind: str) -> bool:
    return kind in (BONAFIDE_SPEECH, SPOOFED_SPEECH)


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or len(s) < 1:
            raise ValueError("waveform must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform contains non-finite samples")
        if np.max(np.abs(s)) > 1.0:
            raise ValueError("waveform samples must lie in [-1, 1]")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class SegmentSpec:
    kind: str
    duration: float
    f0: float = 150.0
    artifact_strength: float = 0.0
    noise_level: float = 0.2
    seed: int = 0
    channel_tilt: float = 0.0

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.duration < MIN_SEGMENT_S:
            raise ValueError(f"segment duration {self.duration} s is below {MIN_SEGMENT_S} s")
        if not 80.0 <= self.f0 <= 300.0:
            raise ValueError(f"f0 {self.f0} Hz outside [80, 300]")
        if not 0.0 <= self.artifact_strength <= 1.0:
            raise ValueError("artifact_strength must lie in [0, 1]")
        if not 0.0 <= self.noise_level <= 1.0:
            raise ValueError("noise_level must lie in [0, 1]")
        if not -0.9 <= self.channel_tilt <= 0.9:
            raise ValueError("channel_tilt must lie in [-0.9, 0.9]")

    @property
    def label(self) -> str:
        return KIND_LABELS[self.kind]

    @property
    def num_samples(self) -> int:
        return int(round(self.duration * SAMPLE_RATE))


@dataclass(frozen=True)
class UtteranceSpec:
    segments: tuple[SegmentSpec, ...]
    crossfade_ms: float = 20.0
    utterance_id: str = ""
    mode: str = "artifact"

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("an utterance needs at least one segment")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.crossfade_ms <= MAX_CROSSFADE_MS:
            raise ValueError(f"crossfade_ms {self.crossfade_ms} outside [0, {MAX_CROSSFADE_MS:g}]")
        xf = crossfade_samples(self.crossfade_ms)
        for seg in self.segments:
            if seg.num_samples <= xf and len(self.segments) > 1:
                raise ValueError(
                    f"crossfade of {xf} samples is not shorter than a {seg.num_samples}-sample segment"
                )

    @property
    def is_spoofed(self) -> bool:
        return any(is_spoofed(s.kind) for s in self.segments)


def crossfade_samples(crossfade_ms: float, sample_rate: int = SAMPLE_RATE) -> int:
    return int(round(crossfade_ms * sample_rate / 1000.0))


# ----------------------------------------------------------------------------
# segment generators


def _channel(x: np.ndarray, tilt: float) -> np.ndarray:
    """First-order spectral tilt: positive boosts highs, negative boosts lows."""
    return lfilter([1.0, -tilt], [1.0], x) if tilt else x


def _peak_normalise(x: np.ndarray, peak: float) -> np.ndarray:
    m = np.max(np.abs(x))
    return x / m * peak if m > 0 else x


def _noise_floor(rng: np.random.Generator, n: int, noise_level: float, tilt: float) -> np.ndarray:
    if noise_level == 0.0:
        return np.zeros(n)
    # mildly low-passed ("pink-ish") background noise
    x = lfilter([1.0], [1.0, -0.7], rng.standard_normal(n))
    return _peak_normalise(_channel(x, tilt), noise_level * NOISE_FLOOR_PEAK)


def _speech(rng: np.random.Generator, n: int, f0: float, buzz: float, tilt: float) -> np.ndarray:
    sr = SAMPLE_RATE
    t = np.arange(n) / sr

    # f0 contour: slow drift plus per-period jitter, the jitter fading with buzz
    drift = 1.0 + 0.04 * np.sin(2 * np.pi * rng.uniform(0.3, 0.9) * t + rng.uniform(0, 2 * np.pi))
    periods = int(np.ceil(t[-1] * f0 * 1.2)) + 2
    jitter = 1.0 + JITTER * (1.0 - buzz) * rng.standard_normal(periods)
    per_period = jitter[np.minimum((t * f0).astype(int), periods - 1)]
    phase = 2 * np.pi * np.cumsum(f0 * drift * per_period) / sr

    n_harm = int(min(MAX_HARMONICS, HARMONIC_CEILING_HZ // f0))
    h = np.arange(1, n_harm + 1)
    # natural roll-off ~1/h; a buzzy source flattens towards a bare pulse train
    tilt = 1.0 - 0.8 * buzz
    amps = h ** (-tilt)
    offsets = rng.uniform(0, 2 * np.pi, n_harm) * (1.0 - buzz)
    voiced = amps @ np.sin(np.outer(h, phase) + offsets[:, None])
    voiced = _peak_normalise(_channel(voiced, tilt), VOICED_PEAK)

    aspiration = _channel(lfilter([1.0, -0.9], [1.0], rng.standard_normal(n)), tilt)
    aspiration = _peak_normalise(aspiration, ASPIRATION_PEAK * (1.0 - buzz))

    rate = rng.uniform(3.5, 4.5)
    envelope = 0.2 + 0.8 * np.sin(np.pi * rate * t + rng.uniform(0, np.pi)) ** 2
    # speech fades in and out at segment edges
    ramp = min(int(EDGE_RAMP_S * sr), n // 2)
    if ramp:
        up = np.sin(0.5 * np.pi * (np.arange(ramp) + 0.5) / ramp) ** 2
        envelope[:ramp] *= up
        envelope[n - ramp :] *= up[::-1]
    return envelope * (voiced + aspiration)


def synth_segment(spec: SegmentSpec, mode: str = "artifact") -> Waveform:
    """Render one segment; deterministic in ``spec.seed``.

    In splice_only mode the generator ignores whether the segment is spoofed,
    so bona fide and spoofed speech with equal parameters are identical.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    rng = np.random.default_rng(spec.seed)
    n = spec.num_samples
    buzz = spec.artifact_strength if (mode == "artifact" and spec.kind == SPOOFED_SPEECH) else 0.0
    floor = _noise_floor(rng, n, spec.noise_level, spec.channel_tilt)
    if is_speech(spec.kind):
        return Waveform(_speech(rng, n, spec.f0, buzz, spec.channel_tilt) + floor)
    return Waveform(floor)


# ----------------------------------------------------------------------------
# splicing


def equal_power_fades(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(fade_out, fade_in) raised-cosine pair with fade_out**2 + fade_in**2 == 1."""
    theta = 0.5 * np.pi * (np.arange(n) + 0.5) / n
    return np.cos(theta), np.sin(theta)


def splice_layout(segments: list[Waveform], crossfade_ms: float) -> tuple[Waveform, list[int], int]:
    """Overlap-add ``segments``; also return each segment's start sample and the
    crossfade length in samples."""
    if not segments:
        raise ValueError("splice needs at least one segment")
    rates = {w.sample_rate for w in segments}
    if len(rates) != 1:
        raise ValueError(f"segments have mixed sample rates {sorted(rates)}")
    if crossfade_ms < 0:
        raise ValueError("crossfade_ms must be non-negative")
    sr = rates.pop()
    xf = crossfade_samples(crossfade_ms, sr)
    if len(segments) > 1 and any(len(w) <= xf for w in segments):
        shortest = min(len(w) for w in segments)
        raise ValueError(f"crossfade of {xf} samples is not shorter than the {shortest}-sample segment")

    total = sum(len(w) for w in segments) - (len(segments) - 1) * xf
    out = np.zeros(total)
    fade_out, fade_in = equal_power_fades(xf)
    starts = []
    pos = 0
    for i, w in enumerate(segments):
        s = w.samples
        if i == 0 or xf == 0:
            out[pos : pos + len(s)] += s
        else:
            out[pos : pos + xf] *= fade_out
            out[pos : pos + xf] += s[:xf] * fade_in
            out[pos + xf : pos + len(s)] += s[xf:]
        starts.append(pos)
        pos += len(s) - xf
    return Waveform(out, sr), starts, xf


def splice(segments: list[Waveform], crossfade_ms: float) -> Waveform:
    return splice_layout(segments, crossfade_ms)[0]


# ----------------------------------------------------------------------------
# utterances


@dataclass
class SplicedUtterance:
    spec: UtteranceSpec
    waveform: Waveform
    # partition of [0, n) into per-segment sample intervals, split at crossfade midpoints
    segment_intervals: list[tuple[str, int, int]] = field(default_factory=list)
    # crossfades where the utterance switches between bona fide and spoofed material
    transitions: list[tuple[int, int]] = field(default_factory=list)


def render_utterance(spec: UtteranceSpec) -> SplicedUtterance:
    waves = [synth_segment(s, spec.mode) for s in spec.segments]
    wave, starts, xf = splice_layout(waves, spec.crossfade_ms)
    n = len(wave)
    bounds = [0] + [start + xf // 2 for start in starts[1:]] + [n]
    intervals = [(seg.label, bounds[i], bounds[i + 1]) for i, seg in enumerate(spec.segments)]
    transitions = []
    for i in range(1, len(spec.segments)):
        if is_spoofed(spec.segments[i - 1].kind) != is_spoofed(spec.segments[i].kind):
            transitions.append((starts[i], starts[i] + xf))
    return SplicedUtterance(spec, wave, intervals, transitions)


@dataclass(frozen=True)
class Source:
    """Recording conditions shared by every segment taken from one source."""

    f0: float
    noise_level: float
    channel_tilt: float


def draw_source(rng: np.random.Generator) -> Source:
    # log-uniform floor so two independent sources usually differ audibly
    return Source(
        f0=float(rng.uniform(90.0, 250.0)),
        noise_level=float(np.exp(rng.uniform(np.log(0.03), 0.0))),
        channel_tilt=float(rng.uniform(-0.7, 0.7)),
    )


_LABEL_KINDS = {v: k for k, v in KIND_LABELS.items()}
_DURATION_RANGES = {"BS": (0.5, 1.2), "BN": (0.15, 0.45)}


def _bonafide_layout(rng: np.random.Generator) -> list[list]:
    n_speech = int(rng.integers(2, 4))
    labels = ["BN"] + ["BS", "BN"] * n_speech
    return [[lab, rng.uniform(*_DURATION_RANGES[lab])] for lab in labels]


def _spoof_layout(rng: np.random.Generator, layout: list[list]) -> list[list]:
    """Replace the middle of one bona fide speech segment with spoofed material.

    The inserted stretch is spoofed speech, sometimes with a short spoofed
    pause inside, so speech/non-speech proportions match bona fide layouts.
    """
    speech = [i for i, (lab, _) in enumerate(layout) if lab == "BS"]
    target = speech[rng.integers(len(speech))]
    dur = layout[target][1]
    frac = rng.uniform(0.35, 0.6)
    lead = rng.uniform(0.3, 0.7) * (1 - frac)
    if rng.random() < 0.5:
        inserted = [["SS", dur * frac]]
    else:
        pause = rng.uniform(0.1, 0.2)
        inserted = [["SS", dur * frac / 2], ["SN", pause], ["SS", dur * frac / 2]]
    parts = [["BS", dur * lead]] + inserted + [["BS", dur * (1 - frac - lead)]]
    return layout[:target] + parts + layout[target + 1 :]


def random_utterance_spec(
    rng: np.random.Generator,
    spoofed: bool,
    utterance_id: str,
    mode: str = "artifact",
    crossfade_ms: float = 20.0,
    duration_range: tuple[float, float] = (2.0, 4.0),
    artifact_range: tuple[float, float] = (0.6, 1.0),
) -> UtteranceSpec:
    layout = _bonafide_layout(rng)
    if spoofed:
        layout = _spoof_layout(rng, layout)
    labels = [lab for lab, _ in layout]
    raw = np.array([d for _, d in layout])
    target = rng.uniform(*duration_range)
    overlap = (len(labels) - 1) * crossfade_ms / 1000.0
    durations = np.maximum(raw * (target + overlap) / raw.sum(), MIN_SEGMENT_S + crossfade_ms / 1000.0)

    # spoofed material imitates the recording it is inserted into
    src = draw_source(rng)
    segments = []
    for lab, dur in zip(labels, durations):
        kind = _LABEL_KINDS[lab]
        strength = float(rng.uniform(*artifact_range)) if kind == SPOOFED_SPEECH else 0.0
        segments.append(
            SegmentSpec(
                kind=kind,
                duration=round(float(dur) * SAMPLE_RATE) / SAMPLE_RATE,
                f0=src.f0,
                artifact_strength=strength,
                noise_level=src.noise_level,
                seed=int(rng.integers(2**31)),
                channel_tilt=src.channel_tilt,
            )
        )
    return UtteranceSpec(tuple(segments), crossfade_ms, utterance_id, mode)
