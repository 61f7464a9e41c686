import numpy as np
import pytest

from partialcam.autodiff import Tensor
from partialcam.gradcam import ModelNotFrozenError, cam_from_gradients, gradcam, gradcam_all, resolve_class
from partialcam.model import ModelConfig, SERes1D

from oracles import conv1d_loops

HAND_CFG = ModelConfig(in_channels=3, hidden_channels=2, kernel_size=3, se_reduction=2)


def hand_network() -> SERes1D:
    """2 target channels; the residual branch is switched off by zeroing its
    second conv, so h = relu(R) = R and l = W mean_t(R) + b."""
    shapes = HAND_CFG.param_shapes()
    p = {k: np.zeros(s) for k, s in shapes.items()}
    p["front.w"] = np.array(
        [
            [[0.5, -0.2, 0.1], [0.3, 0.8, -0.4], [-0.6, 0.2, 0.7]],
            [[-0.3, 0.4, 0.2], [0.9, -0.5, 0.1], [0.2, 0.3, -0.8]],
        ]
    )
    p["front.b"] = np.array([0.1, -0.05])
    p["res.conv1.w"] = np.full(shapes["res.conv1.w"], 0.3)
    p["se.w1"] = np.array([[0.4, -0.2]])
    p["se.w2"] = np.array([[1.0], [-1.0]])
    p["out.w"] = np.array([[1.2, -0.7], [-0.4, 0.9]])
    p["out.b"] = np.array([0.3, -0.1])
    return SERes1D.from_arrays(HAND_CFG, p, frozen=True)


HAND_X = np.array([[0.2, -1.0, 0.5], [1.1, 0.4, -0.3], [-0.7, 0.9, 0.8], [0.3, 0.6, -1.2]])  # T = 4


def hand_closed_form(k: int) -> np.ndarray:
    net = hand_network()
    R = np.maximum(conv1d_loops(HAND_X.T, net.params["front.w"].values, net.params["front.b"].values), 0.0)
    W = net.params["out.w"].values
    T = R.shape[1]
    return np.array([max(sum(R[c, t] * W[k, c] / T for c in range(2)), 0.0) for t in range(T)])


@pytest.mark.parametrize("k", [0, 1])
def test_hand_network_matches_closed_form(k):
    got = gradcam(hand_network(), HAND_X, k).scores
    assert got.shape == (4,)
    np.testing.assert_allclose(got, hand_closed_form(k), rtol=0, atol=1e-10)
    assert hand_closed_form(k).max() > 0


def test_worked_examples():
    R = np.array([[1, 2, 0], [1, 0, 1]], dtype=float)
    g = np.array([[1, -1, 1], [-2, 3, 0]], dtype=float)
    np.testing.assert_array_equal(cam_from_gradients(R, g), [0, 0, 0])
    np.testing.assert_array_equal(cam_from_gradients([[2.0, 3.0]], [[0.5, -1.0]]), [1, 0])
    np.testing.assert_array_equal(cam_from_gradients(R, np.zeros_like(R)), [0, 0, 0])


def random_model(rng, in_ch=5) -> SERes1D:
    cfg = ModelConfig(in_ch, int(rng.integers(2, 6)), int(rng.choice([1, 3, 5])), 1)
    return SERes1D.initialize(cfg, seed=int(rng.integers(1 << 30))).freeze()


def test_gradient_matches_finite_differences_of_the_head():
    rng = np.random.default_rng(0)
    for _ in range(5):
        m = random_model(rng)
        x = rng.standard_normal((int(rng.integers(2, 8)), 5))
        params = m.constant_params()
        R = m.front(x, params).values
        for k in (0, 1):
            eps = 1e-6
            g = np.zeros_like(R)
            for idx in np.ndindex(R.shape):
                up, dn = R.copy(), R.copy()
                up[idx] += eps
                dn[idx] -= eps
                g[idx] = (m.head(Tensor(up), params).values[k] - m.head(Tensor(dn), params).values[k]) / (2 * eps)
            want = np.maximum((R * g).sum(axis=0), 0)
            np.testing.assert_allclose(gradcam(m, x, k).scores, want, rtol=1e-6, atol=1e-8)


def test_fuzz_nonnegative_and_length():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        m = random_model(rng, in_ch=3)
        T = int(rng.integers(1, 12))
        maps = gradcam_all(m, rng.normal(0, 2, (T, 3)))
        for mp in maps:
            assert mp.scores.shape == (T,)
            assert np.all(np.isfinite(mp.scores)) and np.all(mp.scores >= 0)


def test_gradcam_all_agrees_with_single_class_calls():
    rng = np.random.default_rng(2)
    m = random_model(rng)
    x = rng.standard_normal((9, 5))
    both = gradcam_all(m, x, "u1")
    for k in (0, 1):
        np.testing.assert_array_equal(both[k].scores, gradcam(m, x, k).scores)
        assert both[k].utterance_id == "u1" and both[k].target_class == k


def test_positive_scaling_of_class_weights_scales_scores():
    rng = np.random.default_rng(3)
    m = random_model(rng)
    x = rng.standard_normal((10, 5))
    base = gradcam(m, x, 1).scores
    arrays = m.arrays()
    arrays["out.w"][1] *= 3.5
    scaled = SERes1D.from_arrays(m.config, arrays, frozen=True)
    np.testing.assert_allclose(gradcam(scaled, x, 1).scores, 3.5 * base, rtol=1e-12, atol=1e-15)


def test_model_is_not_mutated():
    rng = np.random.default_rng(4)
    m = random_model(rng)
    before = {k: v.copy() for k, v in m.arrays().items()}
    gradcam_all(m, rng.standard_normal((6, 5)))
    for k, t in m.params.items():
        np.testing.assert_array_equal(t.values, before[k])
        assert not np.any(t.grad)


def test_errors():
    m = SERes1D.initialize(ModelConfig(3, 2, 3, 1))
    with pytest.raises(ModelNotFrozenError):
        gradcam(m, np.zeros((4, 3)), 1)
    with pytest.raises(ValueError):
        resolve_class(2)
    with pytest.raises(ValueError):
        resolve_class("fake")
    assert resolve_class("spoof") == 1 and resolve_class("bonafide") == 0
