import functools

import numpy as np

from partialcam.corpus import CorpusConfig, build_utterance, split_layout
from partialcam.features import extract_features


@functools.lru_cache(maxsize=None)
def _split(mode: str, split: str, count: int, seed: int):
    cfg = CorpusConfig(splits={split: count}, mode=mode, seed=seed)
    X, y, anns = [], [], []
    for uid, spoofed in split_layout(split, count):
        utt, ann = build_utterance(cfg, uid, spoofed)
        X.append(extract_features(utt.waveform.samples))
        y.append(int(spoofed))
        anns.append(ann)
    return X, np.array(y), anns


def toy_split(split: str, count: int, mode: str = "artifact", seed: int = 0):
    """(features, labels, annotations) generated in memory and cached per session."""
    X, y, anns = _split(mode, split, count, seed)
    return list(X), y.copy(), list(anns)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
