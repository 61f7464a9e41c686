import json

import numpy as np
import pytest

from partialcam.annotate import CATEGORIES
from partialcam.rcq import (
    UndefinedRCQError,
    assign_bins,
    bin_analysis,
    category_means,
    rcq,
    rcq_report,
    weighted_rcq_sum,
)

from oracles import bins_enumerate, pooled_means


def random_set(rng, n_utts=5, zero_frac=0.0):
    maps, labels = [], []
    for _ in range(n_utts):
        T = int(rng.integers(3, 60))
        s = rng.exponential(1.0, T)
        s[rng.random(T) < zero_frac] = 0.0
        maps.append(s)
        labels.append(list(rng.choice(CATEGORIES, T)))
    return maps, labels


def test_two_frame_example():
    means, all_mean, counts = category_means([np.array([4.0, 2.0])], [["TR", "BS"]])
    assert means["TR"] == 4 and means["BS"] == 2 and all_mean == 3
    assert counts == {"TR": 1, "BS": 1, "BN": 0, "SS": 0, "SN": 0}
    assert means["SS"] is None


def test_constant_field():
    maps = [np.full(5, 7.0), np.full(11, 7.0)]
    labs = [["BS", "TR", "SS", "SS", "BN"], ["SN"] * 4 + ["BS"] * 7]
    means, all_mean, _ = category_means(maps, labs)
    assert all_mean == 7.0
    assert all(m == 7.0 for m in means.values() if m is not None)


def test_means_match_accumulation_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        maps, labs = random_set(rng)
        means, all_mean, counts = category_means(maps, labs)
        o_means, o_all, o_counts = pooled_means(maps, labs)
        assert counts == o_counts
        assert all_mean == pytest.approx(o_all, rel=1e-12)
        for c in CATEGORIES:
            if o_means[c] is None:
                assert means[c] is None
            else:
                assert means[c] == pytest.approx(o_means[c], rel=1e-12)
        weighted = sum(counts[c] * means[c] for c in CATEGORIES if counts[c]) / sum(counts.values())
        assert all_mean == pytest.approx(weighted, rel=1e-12)


def test_length_mismatch_rejected():
    with pytest.raises(ValueError, match="frame labels"):
        category_means([np.ones(3)], [["BS", "BS"]])


def test_rcq_worked_values():
    assert rcq(5.0, 5.0) == 0.0
    assert rcq(2 * 0.37, 0.37) == 100.0
    assert rcq(0.0, 3.0) == -100.0
    with pytest.raises(UndefinedRCQError):
        rcq(1.0, 0.0)


def test_zero_sum_and_scale_invariance():
    rng = np.random.default_rng(2)
    for _ in range(100):
        maps, labs = random_set(rng, int(rng.integers(1, 6)), zero_frac=0.3)
        rep = rcq_report(maps, labs, 1)
        scale = sum(s.frames * abs(s.rcq_percent) for s in rep.categories.values() if s.present)
        assert abs(weighted_rcq_sum(rep)) <= 1e-9 * max(scale, 1.0)
        alpha = float(rng.uniform(1e-3, 1e3))
        rep2 = rcq_report([m * alpha for m in maps], labs, 1)
        for c in rep.present():
            assert rep2.rcq(c) == pytest.approx(rep.rcq(c), rel=1e-9, abs=1e-9)
            assert rep.rcq(c) >= -100.0


def test_absent_categories_are_marked():
    rep = rcq_report([np.array([1.0, 3.0])], [["BS", "TR"]], 0, "correct_only")
    assert rep.categories["SS"].rcq_percent is None
    assert rep.all_frames == 2 and rep.present() == ["TR", "BS"]
    csv = rep.to_csv()
    assert "SS,0,n/a,n/a" in csv and "# target_class=bonafide" in csv
    d = rep.to_dict()
    assert d["filter"] == "correct_only" and len(d["categories"]) == 5


def test_all_zero_scores_give_no_rcq():
    rep = rcq_report([np.zeros(4)], [["BS", "TR", "SS", "SN"]], 1)
    assert all(s.rcq_percent is None for s in rep.categories.values())


def test_bins_examples():
    idx, _ = assign_bins([0.4, 0.4, 0.4])
    assert idx.tolist() == [0, 0, 0]
    idx, _ = assign_bins([0.1, 0.9])
    assert idx.tolist() == [0, 9]


def test_bins_match_enumeration_oracle():
    rng = np.random.default_rng(4)
    for _ in range(20):
        s = rng.random(30)
        s[:3] = np.round(s[:3], 1)
        assert assign_bins(s)[0].tolist() == bins_enumerate(s.tolist())


def test_bin_analysis_groups():
    rng = np.random.default_rng(6)
    n = 30
    scores = rng.random(n)
    correct = rng.random(n) < 0.8
    maps, labs = random_set(rng, n)
    ba = bin_analysis(scores, correct, maps, labs, 1)
    assert len(ba.groups) == 11
    sizes = [len(g.members) for g in ba.groups[:10]]
    assert sum(sizes) == correct.sum()
    assert sorted(ba.groups[10].members) == np.flatnonzero(~correct).tolist()
    want = bins_enumerate(scores[correct].tolist())
    for member_pos, i in enumerate(np.flatnonzero(correct)):
        assert i in ba.groups[want[member_pos]].members
    out = json.loads(ba.to_json())
    assert len(out) == 11 and out[10]["kind"] == "misclassified"


def test_bin_analysis_with_no_misclassified():
    maps, labs = random_set(np.random.default_rng(0), 2)
    ba = bin_analysis([0.1, 0.9], [True, True], maps, labs, 1)
    assert ba.groups[0].members == [0] and ba.groups[9].members == [1]
    assert ba.groups[10].members == [] and ba.groups[10].report is None


def test_bin_analysis_needs_a_correct_sample():
    maps, labs = random_set(np.random.default_rng(0), 2)
    with pytest.raises(ValueError, match="correctly"):
        bin_analysis([0.1, 0.9], [False, False], maps, labs, 1)
