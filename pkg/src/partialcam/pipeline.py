"""Explanation directories: writing them from a checkpoint, reading them back
for RCQ reports and rendering.

Layout of an explain directory::

    index.json             per-utterance metadata, EER and threshold
    scores.csv             utterance_id,p_spoof
    maps/<id>.csv          frame_index,time_s,label,score_bonafide_class,score_spoof_class
"""
from __future__ import annotations

import csv
import hashlib
import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .annotate import FrameAnnotation
from .corpus import Utterance
from .evaluation import ScoredTrial, classify, eer, write_scores
from .features import FRAME_MS
from .gradcam import gradcam_all
from .model import CLASS_NAMES, SERes1D, predict_scores
from .rcq import bin_analysis, rcq_report

INDEX_NAME = "index.json"
SCORES_NAME = "scores.csv"
MAP_COLUMNS = ("frame_index", "time_s", "label", "score_bonafide_class", "score_spoof_class")
REPORT_FILTERS = {"all": "all_spoofed", "correct": "correct_only", "incorrect": "incorrect_only"}


def substream_seed(seed: int, name: str) -> int:
    """Seed of the named sub-stream derived from one top-level seed."""
    ss = np.random.SeedSequence([seed, zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class Explanation:
    utterance_id: str
    spoofed: bool
    p_spoof: float
    labels: tuple[str, ...]
    scores: np.ndarray  # (2, T): row k is the map for target class k


def explain_utterance(model: SERes1D, utt: Utterance) -> Explanation:
    feats = utt.features()
    if feats.shape[0] != len(utt.annotation):
        raise ValueError(
            f"{utt.utterance_id}: {feats.shape[0]} feature frames but {len(utt.annotation)} labels"
        )
    p_spoof = predict_scores(model.logits(feats))[1]
    maps = gradcam_all(model, feats, utt.utterance_id)
    return Explanation(
        utt.utterance_id, utt.spoofed, p_spoof, utt.annotation.labels, np.stack([m.scores for m in maps])
    )


def explain_all(model: SERes1D, utterances: list[Utterance], workers: int = 1) -> list[Explanation]:
    """Order of the result follows ``utterances`` whatever ``workers`` is."""
    if not model.frozen:
        model = model.freeze()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda u: explain_utterance(model, u), utterances))
    return [explain_utterance(model, u) for u in utterances]


def _map_csv(ex: Explanation) -> str:
    lines = [",".join(MAP_COLUMNS)]
    for t, lab in enumerate(ex.labels):
        time_s = t * FRAME_MS / 1000
        lines.append(f"{t},{time_s!r},{lab},{float(ex.scores[0, t])!r},{float(ex.scores[1, t])!r}")
    return "\n".join(lines) + "\n"


def write_explain_dir(
    out_dir,
    explanations: list[Explanation],
    *,
    target_class: str,
    split: str,
    corpus_dir,
    checkpoint,
    wav_paths: dict[str, str],
) -> dict:
    out = Path(out_dir)
    (out / "maps").mkdir(parents=True, exist_ok=True)
    scores = np.array([e.p_spoof for e in explanations])
    spoofed = np.array([e.spoofed for e in explanations])
    eer_pct, threshold = eer(scores, spoofed)
    correct = classify(scores, spoofed, threshold)

    entries = []
    for ex, ok in zip(explanations, correct):
        rel = f"maps/{ex.utterance_id}.csv"
        (out / rel).write_text(_map_csv(ex))
        entries.append(
            {
                "utterance_id": ex.utterance_id,
                "label": "spoofed" if ex.spoofed else "bonafide",
                "p_spoof": ex.p_spoof,
                "correct": bool(ok),
                "num_frames": len(ex.labels),
                "map": rel,
                "wav": wav_paths[ex.utterance_id],
            }
        )
    write_scores(out / SCORES_NAME, [ScoredTrial(e.utterance_id, e.p_spoof, e.spoofed) for e in explanations])
    index = {
        "tool": "partialcam",
        "tool_version": __version__,
        "split": split,
        "target_class": target_class,
        "corpus": str(Path(corpus_dir).resolve()),
        "checkpoint": str(Path(checkpoint).resolve()),
        "checkpoint_sha256": sha256_file(checkpoint),
        "eer_percent": eer_pct,
        "eer_threshold": threshold,
        "utterances": entries,
    }
    (out / INDEX_NAME).write_text(json.dumps(index, indent=2) + "\n")
    return index


# ----------------------------------------------------------------------------
# reading back


def read_index(explain_dir) -> dict:
    path = Path(explain_dir) / INDEX_NAME
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `partialcam explain` first")
    index = json.loads(path.read_text())
    for key in ("utterances", "eer_threshold", "target_class"):
        if key not in index:
            raise ValueError(f"{path}: index is missing {key!r}")
    return index


def read_map_csv(path) -> tuple[FrameAnnotation, np.ndarray]:
    """(annotation, (2, T) score array) from a per-utterance map file."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != MAP_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(MAP_COLUMNS)}")
        labels, scores = [], []
        for i, row in enumerate(reader):
            if len(row) != len(MAP_COLUMNS) or int(row[0]) != i:
                raise ValueError(f"{path}: malformed row {i + 1}")
            labels.append(row[2])
            scores.append((float(row[3]), float(row[4])))
    return FrameAnnotation(tuple(labels)), np.asarray(scores, dtype=np.float64).T.reshape(2, -1)


def load_explanations(explain_dir) -> tuple[dict, list[dict], list[FrameAnnotation], list[np.ndarray]]:
    index = read_index(explain_dir)
    root = Path(explain_dir)
    anns, maps = [], []
    for e in index["utterances"]:
        ann, sc = read_map_csv(root / e["map"])
        if len(ann) != e["num_frames"]:
            raise ValueError(f"{e['map']}: {len(ann)} frames, index says {e['num_frames']}")
        anns.append(ann)
        maps.append(sc)
    return index, index["utterances"], anns, maps


def report_from_explain_dir(explain_dir, report_filter: str, target_class: int):
    """RcqReport (or BinAnalysis for ``bins``) over the spoofed utterances."""
    _, entries, anns, maps = load_explanations(explain_dir)
    spoof_idx = [i for i, e in enumerate(entries) if e["label"] == "spoofed"]
    if not spoof_idx:
        raise ValueError(f"{explain_dir}: no spoofed utterances to report on")
    if report_filter == "bins":
        return bin_analysis(
            [entries[i]["p_spoof"] for i in spoof_idx],
            [entries[i]["correct"] for i in spoof_idx],
            [maps[i][target_class] for i in spoof_idx],
            [anns[i] for i in spoof_idx],
            target_class,
        )
    if report_filter not in REPORT_FILTERS:
        raise ValueError(f"unknown filter {report_filter!r}")
    keep = {
        "all": lambda e: True,
        "correct": lambda e: e["correct"],
        "incorrect": lambda e: not e["correct"],
    }[report_filter]
    chosen = [i for i in spoof_idx if keep(entries[i])]
    return rcq_report(
        [maps[i][target_class] for i in chosen],
        [anns[i] for i in chosen],
        target_class,
        REPORT_FILTERS[report_filter],
    )


def class_index(name: str) -> int:
    if name not in CLASS_NAMES:
        raise ValueError(f"target class must be one of {CLASS_NAMES}, got {name!r}")
    return CLASS_NAMES.index(name)
