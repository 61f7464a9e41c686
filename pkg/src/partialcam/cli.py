"""partialcam command line: gen-corpus, train, explain, rcq-report, eer, render."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import CorpusConfig, generate_corpus, load_split, read_manifest, read_wav
from .evaluation import eer, read_scores
from .model import CLASS_NAMES, ModelConfig, SERes1D
from .pipeline import (
    class_index,
    explain_all,
    read_index,
    read_map_csv,
    report_from_explain_dir,
    sha256_file,
    substream_seed,
    write_explain_dir,
)
from .rcq import BinAnalysis
from .render import write_rendering
from .train import TrainConfig, train


class CliError(Exception):
    pass


def _write_run_manifest(path: Path, command: str, seed, inputs: dict, outputs: dict, extra=None) -> None:
    """Provenance record: what went in (with hashes), what came out."""
    def entry(p):
        p = Path(p)
        return {"path": str(p.resolve()), "sha256": sha256_file(p) if p.is_file() else None}

    payload = {
        "tool": "partialcam",
        "tool_version": __version__,
        "command": command,
        "seed": seed,
        "inputs": {k: entry(v) for k, v in inputs.items()},
        "outputs": {k: entry(v) for k, v in outputs.items()},
    }
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, indent=2) + "\n")


# ----------------------------------------------------------------------------
# commands


def cmd_gen_corpus(args) -> int:
    config = CorpusConfig(
        splits={"train": args.train, "dev": args.dev, "eval": args.eval},
        mode=args.mode,
        crossfade_ms=args.crossfade_ms,
        seed=args.seed,
        min_duration=args.min_duration,
        max_duration=args.max_duration,
    )
    manifest = generate_corpus(config, args.out, workers=args.workers)
    print(f"wrote {len(manifest['files'])} utterances to {args.out} (config {manifest['config_hash'][:12]})")
    return 0


def _features_and_labels(utterances):
    return [u.features() for u in utterances], np.array([int(u.spoofed) for u in utterances])


def cmd_train(args) -> int:
    manifest_path = Path(args.corpus) / "manifest.json"
    manifest = read_manifest(args.corpus)
    train_X, train_y = _features_and_labels(load_split(args.corpus, "train"))
    dev_X, dev_y = _features_and_labels(load_split(args.corpus, "dev"))
    config = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=substream_seed(args.seed, "train"),
    )
    result = train(train_X, train_y, dev_X, dev_y, config, ModelConfig())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log_path = Path(args.log) if args.log else out.with_suffix(".log.csv")
    result.model.save(
        out,
        extra={
            "best_epoch": result.best_epoch,
            "best_dev_eer": result.best_dev_eer,
            "corpus_config_hash": manifest["config_hash"],
            "seed": args.seed,
        },
    )
    log_path.write_text(result.log_csv())
    _write_run_manifest(
        out.with_suffix(".run.json"),
        "train",
        args.seed,
        {"corpus_manifest": manifest_path},
        {"checkpoint": out, "training_log": log_path},
        {"config_hash": manifest["config_hash"], "train_config": asdict(config)},
    )
    print(f"best epoch {result.best_epoch}, dev EER {result.best_dev_eer:.2f}%; checkpoint {out}")
    return 0


def cmd_explain(args) -> int:
    model, _ = SERes1D.load(args.ckpt)
    utterances = load_split(args.corpus, args.split)
    manifest = read_manifest(args.corpus)
    wavs = {
        f["utterance_id"]: str((Path(args.corpus) / f["wav"]).resolve())
        for f in manifest["files"]
        if f["split"] == args.split
    }
    explanations = explain_all(model, utterances, workers=args.workers)
    index = write_explain_dir(
        args.out,
        explanations,
        target_class=args.target_class,
        split=args.split,
        corpus_dir=args.corpus,
        checkpoint=args.ckpt,
        wav_paths=wavs,
    )
    out = Path(args.out)
    _write_run_manifest(
        out / "run.json",
        "explain",
        None,
        {"checkpoint": args.ckpt, "corpus_manifest": Path(args.corpus) / "manifest.json"},
        {"index": out / "index.json", "scores": out / "scores.csv"},
        {"config_hash": manifest["config_hash"]},
    )
    print(f"explained {len(explanations)} utterances; EER {index['eer_percent']:.2f}% -> {out}")
    return 0


def cmd_rcq_report(args) -> int:
    index = read_index(args.explain_dir)
    target = class_index(args.target_class or index["target_class"])
    result = report_from_explain_dir(args.explain_dir, args.filter, target)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(result, BinAnalysis):
        out.write_text(result.to_json() + "\n")
    elif out.suffix.lower() == ".json":
        out.write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    else:
        out.write_text(result.to_csv())
    if not isinstance(result, BinAnalysis):
        for c, s in result.categories.items():
            v = "n/a" if s.rcq_percent is None else f"{s.rcq_percent:+.2f}%"
            print(f"{c}\t{s.frames}\t{v}")
    print(f"wrote {out}")
    return 0


def _labels_for(scores_path: Path, corpus: str | None) -> dict[str, bool]:
    if corpus:
        return {f["utterance_id"]: f["label"] == "spoofed" for f in read_manifest(corpus)["files"]}
    index_path = scores_path.parent / "index.json"
    if not index_path.exists():
        raise CliError(f"no ground truth: pass --corpus or keep {index_path.name} next to the score file")
    return {e["utterance_id"]: e["label"] == "spoofed" for e in read_index(scores_path.parent)["utterances"]}


def cmd_eer(args) -> int:
    path = Path(args.scores)
    rows = read_scores(path)
    truth = _labels_for(path, args.corpus)
    missing = [uid for uid, _ in rows if uid not in truth]
    if missing:
        raise CliError(f"{len(missing)} utterances without ground truth, e.g. {missing[0]}")
    value, threshold = eer([s for _, s in rows], [truth[uid] for uid, _ in rows])
    print(f"{value:.2f}")
    if args.verbose:
        print(f"threshold {threshold!r}", file=sys.stderr)
    return 0


def cmd_render(args) -> int:
    index = read_index(args.explain_dir)
    entry = next((e for e in index["utterances"] if e["utterance_id"] == args.utterance), None)
    if entry is None:
        raise CliError(f"utterance {args.utterance!r} is not in {args.explain_dir}")
    ann, scores = read_map_csv(Path(args.explain_dir) / entry["map"])
    target = class_index(args.target_class or index["target_class"])
    samples, _ = read_wav(entry["wav"])
    title = f"{args.utterance} ({entry['label']}, p_spoof={entry['p_spoof']:.3f}) target={CLASS_NAMES[target]}"
    write_rendering(args.out, samples, scores[target], ann.labels, title)
    print(f"wrote {args.out}")
    return 0


# ----------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="partialcam", description=__doc__)
    p.add_argument("--version", action="version", version=f"partialcam {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-corpus", help="synthesize a spliced corpus with frame annotations")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--train", type=int, default=400)
    g.add_argument("--dev", type=int, default=100)
    g.add_argument("--eval", type=int, default=100)
    g.add_argument("--mode", choices=("artifact", "splice_only"), default="artifact")
    g.add_argument("--crossfade-ms", type=float, default=20.0)
    g.add_argument("--min-duration", type=float, default=2.0)
    g.add_argument("--max-duration", type=float, default=4.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--workers", type=int, default=1)
    g.set_defaults(func=cmd_gen_corpus)

    t = sub.add_parser("train", help="train the SE-Res1D countermeasure")
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True, help="checkpoint path (JSON)")
    t.add_argument("--log", help="training log CSV (default: <out>.log.csv)")
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--patience", type=int, default=20)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--batch-size", type=int, default=2)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("explain", help="Grad-CAM maps and scores for one split")
    e.add_argument("--corpus", required=True)
    e.add_argument("--ckpt", required=True)
    e.add_argument("--split", default="eval")
    e.add_argument(
        "--target-class",
        choices=CLASS_NAMES,
        default="spoof",
        help="default class for later reports; maps for both classes are always written",
    )
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_explain)

    r = sub.add_parser("rcq-report", help="RCQ report or 11-group bin analysis")
    r.add_argument("--explain-dir", required=True)
    r.add_argument("--filter", choices=("all", "correct", "incorrect", "bins"), default="all")
    r.add_argument("--target-class", choices=CLASS_NAMES, help="default: the class recorded by explain")
    r.add_argument("--out", required=True, help=".csv or .json; bins always writes JSON")
    r.set_defaults(func=cmd_rcq_report)

    s = sub.add_parser("eer", help="utterance EER of a score file")
    s.add_argument("--scores", required=True, help="CSV with columns utterance_id,p_spoof")
    s.add_argument("--corpus", help="corpus for ground truth (default: index.json beside the scores)")
    s.set_defaults(func=cmd_eer)

    v = sub.add_parser("render", help="SVG (or .pgm) of waveform, heat strip and annotation band")
    v.add_argument("--utterance", required=True)
    v.add_argument("--explain-dir", required=True)
    v.add_argument("--target-class", choices=CLASS_NAMES)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"partialcam {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
