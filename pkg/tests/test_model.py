import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partialcam import autodiff as ad
from partialcam.autodiff import Tensor, grad_check
from partialcam.model import ModelConfig, SERes1D, init_params, predict_scores, se_block
from partialcam.train import softmax_mse_loss


def small(in_channels=6, hidden=4, k=3, r=2, seed=0):
    return SERes1D.initialize(ModelConfig(in_channels, hidden, k, r), seed=seed)


def test_config_validation():
    with pytest.raises(ValueError, match="odd"):
        ModelConfig(kernel_size=4)
    with pytest.raises(ValueError, match="se_reduction"):
        ModelConfig(hidden_channels=2, se_reduction=4)


@settings(max_examples=20, deadline=None)
@given(T=st.integers(1, 40))
def test_target_layer_keeps_every_frame(T):
    m = small()
    out = m.forward(np.random.default_rng(T).standard_normal((T, 6)))
    assert out.target_activations.shape == (4, T)
    assert out.logits.shape == (2,)


def test_zero_network_gives_even_odds():
    m = SERes1D.from_arrays(ModelConfig(), {k: np.zeros(s) for k, s in ModelConfig().param_shapes().items()})
    logits = m.logits(np.random.default_rng(0).standard_normal((9, 64)))
    np.testing.assert_array_equal(logits, [0.0, 0.0])
    assert predict_scores(logits) == (0.5, 0.5)


def test_frame_duplication_invariance_with_pointwise_kernels():
    m = small(k=1, seed=3)
    x = np.random.default_rng(1).standard_normal((7, 6))
    np.testing.assert_allclose(m.logits(np.repeat(x, 2, axis=0)), m.logits(x), rtol=1e-12, atol=1e-12)


def test_se_block_examples():
    x = np.random.default_rng(0).standard_normal((4, 5))
    z = lambda *s: Tensor(np.zeros(s))
    out = se_block(Tensor(x), z(2, 4), z(2), z(4, 2), z(4))
    np.testing.assert_allclose(out.values, x / 2)
    const = np.repeat(np.arange(4.0)[:, None], 5, axis=1)
    np.testing.assert_array_equal(ad.mean_over_time(Tensor(const)).values, np.arange(4.0))
    assert grad_check(se_block, [(4, 5), (2, 4), (2,), (4, 2), (4,)], seed=1) < 1e-4


def test_predict_scores():
    p0, p1 = predict_scores(np.array([10.0, -10.0]))
    assert p0 > 0.9999 and abs(p0 + p1 - 1) <= 1e-12
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert abs(sum(predict_scores(rng.normal(0, 20, 2))) - 1) <= 1e-12
    with pytest.raises(ValueError):
        predict_scores(np.zeros(3))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_end_to_end_gradients(seed):
    cfg = ModelConfig(in_channels=6, hidden_channels=4, se_reduction=2)
    names = list(cfg.param_shapes())
    base = init_params(cfg, seed)
    feats = np.random.default_rng(seed).standard_normal((10, 6))
    it = iter(names)

    def sampler(rng, shape):
        name = next(it)
        # nonzero biases so that every parameter has a visible gradient
        return base[name] + (rng.normal(0, 0.1, shape) if len(shape) == 1 else 0.0)

    def loss(*ts):
        p = dict(zip(names, ts))
        return softmax_mse_loss(SERes1D(cfg, p).forward(feats, p).logits, seed % 2)

    assert grad_check(loss, [cfg.param_shapes()[n] for n in names], seed=seed, sampler=sampler) < 1e-3


def test_channel_mismatch():
    with pytest.raises(ValueError, match="channel"):
        small().forward(np.zeros((5, 7)))
    with pytest.raises(ValueError):
        small().forward(np.zeros((0, 6)))


def test_standardisation_is_applied_and_saved(tmp_path):
    m = small()
    feats = [np.random.default_rng(i).normal(3.0, 2.0, (20, 6)) for i in range(3)]
    m.set_standardisation(feats)
    frames = np.concatenate(feats)
    np.testing.assert_allclose(m.feature_mean, frames.mean(0))
    m.save(tmp_path / "m.json", extra={"note": 1})
    back, extra = SERes1D.load(tmp_path / "m.json")
    assert extra == {"note": 1} and back.frozen
    np.testing.assert_array_equal(back.logits(feats[0]), m.logits(feats[0]))
    np.testing.assert_array_equal(back.feature_std, m.feature_std)


def test_load_rejects_foreign_files(tmp_path):
    (tmp_path / "x.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError, match="checkpoint"):
        SERes1D.load(tmp_path / "x.json")


def test_freeze_copies():
    m = small()
    f = m.freeze()
    assert f.frozen and not m.frozen
    f.params["out.w"].values[:] = 0
    assert np.any(m.params["out.w"].values != 0)
