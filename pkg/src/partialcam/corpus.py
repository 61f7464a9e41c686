"""Corpus generation and on-disk formats (16-bit WAV + JSON sidecar)."""
from __future__ import annotations

import hashlib
import json
import wave
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .annotate import FrameAnnotation, label_utterance
from .features import FRAME_MS, extract_features
from .synth import (
    KIND_LABELS,
    MAX_CROSSFADE_MS,
    MODES,
    SAMPLE_RATE,
    UtteranceSpec,
    random_utterance_spec,
    render_utterance,
)

MANIFEST_NAME = "manifest.json"
_LABEL_TO_KIND = {v: k for k, v in KIND_LABELS.items()}


@dataclass(frozen=True)
class CorpusConfig:
    splits: dict[str, int] = field(default_factory=lambda: {"train": 400, "dev": 100, "eval": 100})
    mode: str = "artifact"
    crossfade_ms: float = 20.0
    seed: int = 0
    min_duration: float = 2.0
    max_duration: float = 4.0
    artifact_min: float = 0.6
    artifact_max: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.crossfade_ms <= MAX_CROSSFADE_MS:
            raise ValueError(f"crossfade_ms must lie in [0, {MAX_CROSSFADE_MS:g}], got {self.crossfade_ms}")
        if not self.splits:
            raise ValueError("at least one split is required")
        for name, count in self.splits.items():
            if not name or "/" in name or count < 0:
                raise ValueError(f"invalid split {name!r}: {count}")
        if not 0.5 <= self.min_duration <= self.max_duration:
            raise ValueError("need 0.5 <= min_duration <= max_duration")
        if not 0.0 <= self.artifact_min <= self.artifact_max <= 1.0:
            raise ValueError("need 0 <= artifact_min <= artifact_max <= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass
class Utterance:
    utterance_id: str
    spoofed: bool
    samples: np.ndarray
    annotation: FrameAnnotation
    sidecar: dict

    def features(self) -> np.ndarray:
        return extract_features(self.samples)


# ----------------------------------------------------------------------------
# WAV and sidecar


def write_wav(path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    pcm = np.round(np.clip(samples, -1.0, 1.0) * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(sample_rate)
        fh.writeframes(pcm.tobytes())


def read_wav(path) -> tuple[np.ndarray, int]:
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1 or fh.getsampwidth() != 2:
            raise ValueError(f"{path}: expected mono 16-bit PCM")
        rate = fh.getframerate()
        data = fh.readframes(fh.getnframes())
    return np.frombuffer(data, dtype="<i2").astype(np.float64) / 32767.0, rate


def sidecar_dict(utt, annotation: FrameAnnotation) -> dict:
    spec: UtteranceSpec = utt.spec
    sr = utt.waveform.sample_rate
    return {
        "utterance_id": spec.utterance_id,
        "label": "spoofed" if spec.is_spoofed else "bonafide",
        "mode": spec.mode,
        "sample_rate": sr,
        "crossfade_ms": spec.crossfade_ms,
        "num_samples": len(utt.waveform),
        "segments": [
            {"kind": seg.kind, "start_s": a / sr, "end_s": b / sr}
            for seg, (_, a, b) in zip(spec.segments, utt.segment_intervals)
        ],
        "transitions": [{"start_s": a / sr, "end_s": b / sr} for a, b in utt.transitions],
        "frame_ms": FRAME_MS,
        "frame_labels": list(annotation.labels),
    }


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


# ----------------------------------------------------------------------------
# generation


def utterance_rng(seed: int, utterance_id: str) -> np.random.Generator:
    """Independent stream per utterance so generation order never matters."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(utterance_id.encode())]))


def split_layout(name: str, count: int) -> list[tuple[str, bool]]:
    """(utterance_id, spoofed) pairs; bona fide and spoofed alternate."""
    n_bona = count // 2
    return [(f"{name}_{i:05d}", not (i % 2 == 0 and i // 2 < n_bona)) for i in range(count)]


def build_utterance(config: CorpusConfig, utterance_id: str, spoofed: bool):
    rng = utterance_rng(config.seed, utterance_id)
    spec = random_utterance_spec(
        rng,
        spoofed,
        utterance_id,
        mode=config.mode,
        crossfade_ms=config.crossfade_ms,
        duration_range=(config.min_duration, config.max_duration),
        artifact_range=(config.artifact_min, config.artifact_max),
    )
    utt = render_utterance(spec)
    return utt, label_utterance(utt)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def generate_corpus(config: CorpusConfig, out_dir, workers: int = 1) -> dict:
    """Write ``<out>/<split>/<id>.wav`` + ``.json`` and a manifest; return the manifest."""
    out = Path(out_dir)
    jobs = []
    for split, count in config.splits.items():
        (out / split).mkdir(parents=True, exist_ok=True)
        jobs.extend((split, uid, spoofed) for uid, spoofed in split_layout(split, count))

    def work(job):
        split, uid, spoofed = job
        utt, ann = build_utterance(config, uid, spoofed)
        wav_path = out / split / f"{uid}.wav"
        json_path = out / split / f"{uid}.json"
        write_wav(wav_path, utt.waveform.samples)
        json_path.write_text(_dump_json(sidecar_dict(utt, ann)))
        return split, uid, spoofed, wav_path, json_path

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            done = list(pool.map(work, jobs))
    else:
        done = [work(j) for j in jobs]

    files = []
    for split, uid, spoofed, wav_path, json_path in done:
        files.append(
            {
                "split": split,
                "utterance_id": uid,
                "label": "spoofed" if spoofed else "bonafide",
                "wav": f"{split}/{wav_path.name}",
                "wav_sha256": _sha256(wav_path),
                "sidecar": f"{split}/{json_path.name}",
                "sidecar_sha256": _sha256(json_path),
            }
        )
    manifest = {
        "tool": "partialcam",
        "tool_version": __version__,
        "config": config.to_dict(),
        "config_hash": config.digest(),
        "seed": config.seed,
        "files": files,
    }
    (out / MANIFEST_NAME).write_text(_dump_json(manifest))
    return manifest


# ----------------------------------------------------------------------------
# loading


def read_manifest(corpus_dir) -> dict:
    path = Path(corpus_dir) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; is {corpus_dir} a generated corpus?")
    return json.loads(path.read_text())


def load_utterance(wav_path, sidecar_path) -> Utterance:
    samples, rate = read_wav(wav_path)
    side = json.loads(Path(sidecar_path).read_text())
    for key in ("utterance_id", "sample_rate", "segments", "transitions", "frame_ms", "frame_labels"):
        if key not in side:
            raise ValueError(f"{sidecar_path}: sidecar is missing {key!r}")
    if rate != side["sample_rate"]:
        raise ValueError(f"{wav_path}: sample rate {rate} disagrees with sidecar {side['sample_rate']}")
    ann = FrameAnnotation(tuple(side["frame_labels"]), side["frame_ms"])
    if len(ann) != len(samples) // (rate * side["frame_ms"] // 1000):
        raise ValueError(f"{sidecar_path}: {len(ann)} frame labels for {len(samples)} samples")
    spoofed = side.get("label") == "spoofed" or any(
        s["kind"].startswith("spoofed") for s in side["segments"]
    )
    return Utterance(side["utterance_id"], spoofed, samples, ann, side)


def load_split(corpus_dir, split: str) -> list[Utterance]:
    manifest = read_manifest(corpus_dir)
    root = Path(corpus_dir)
    entries = [f for f in manifest["files"] if f["split"] == split]
    if not entries:
        raise ValueError(f"split {split!r} not found in {root / MANIFEST_NAME}")
    return [load_utterance(root / f["wav"], root / f["sidecar"]) for f in entries]
