import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partialcam.annotate import CATEGORIES, FrameAnnotation, category_masks, label_frames, label_utterance
from partialcam.synth import BONAFIDE_SPEECH, SPOOFED_SPEECH, SegmentSpec, UtteranceSpec, render_utterance


def test_two_seconds_is_one_hundred_frames():
    ann = label_frames([("BS", 0, 32000)], [], 100)
    assert len(ann) == 100 and set(ann.labels) == {"BS"}


def test_aligned_crossfade_gives_one_tr_frame():
    # junction crossfade covers exactly frame 10
    ann = label_frames([("BS", 0, 3360), ("SS", 3360, 6400)], [(3200, 3520)], 20)
    assert ann.labels.count("TR") == 1 and ann.labels[10] == "TR"
    assert ann.labels[9] == "BS" and ann.labels[11] == "SS"


def test_mid_frame_crossfade_marks_both_straddled_frames():
    # starts 10 ms into frame 10 and ends 10 ms into frame 11
    ann = label_frames([("BS", 0, 3520), ("SS", 3520, 6400)], [(3360, 3680)], 20)
    assert [i for i, lab in enumerate(ann.labels) if lab == "TR"] == [10, 11]


def test_short_overlap_falls_back_to_midpoint_label():
    ann = label_frames([("BS", 0, 3300), ("SS", 3300, 6400)], [(3200, 3300)], 20)
    assert "TR" not in ann.labels
    assert ann.labels[10] == "SS"  # midpoint 3360 lies in the SS interval


def test_intervals_must_cover_the_frames():
    with pytest.raises(ValueError, match="cover"):
        label_frames([("BS", 0, 3000)], [], 20)
    with pytest.raises(ValueError, match="gap"):
        label_frames([("BS", 0, 3000), ("SS", 3100, 6400)], [], 20)


def test_unknown_label_rejected():
    with pytest.raises(ValueError):
        FrameAnnotation(("BS", "XX"))


def test_masks_examples():
    m = category_masks(["BS", "TR", "SS"])
    assert m["BS"].tolist() == [0] and m["TR"].tolist() == [1] and m["SS"].tolist() == [2]
    assert m["BN"].size == 0 and m["SN"].size == 0
    m = category_masks(FrameAnnotation(("BN",) * 7))
    assert m["BN"].tolist() == list(range(7))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(CATEGORIES), min_size=1, max_size=50))
def test_masks_partition_frames(labels):
    masks = category_masks(labels)
    joined = np.sort(np.concatenate(list(masks.values())))
    assert joined.tolist() == list(range(len(labels)))


@settings(max_examples=40, deadline=None)
@given(
    d1=st.floats(0.2, 1.0),
    d2=st.floats(0.2, 1.0),
    d3=st.floats(0.2, 1.0),
    xf=st.floats(0.0, 40.0),
)
def test_tr_precedence_on_rendered_utterances(d1, d2, d3, xf):
    spec = UtteranceSpec(
        [SegmentSpec(BONAFIDE_SPEECH, d1), SegmentSpec(SPOOFED_SPEECH, d2, seed=1), SegmentSpec(BONAFIDE_SPEECH, d3)],
        crossfade_ms=xf,
    )
    utt = render_utterance(spec)
    ann = label_utterance(utt)
    assert len(ann) == len(utt.waveform) // 320
    for f, lab in enumerate(ann.labels):
        lo, hi = f * 320, (f + 1) * 320
        overlap = max(min(hi, b) - max(lo, a) for a, b in utt.transitions)
        if 2 * overlap >= 320:
            assert lab == "TR"
        else:
            assert lab != "TR"
