"""SE-Res1D countermeasure network.

input standardisation (per-channel mean/std fixed at fit time)
front conv (in -> hidden, relu)          <- Grad-CAM target layer, hidden x T
residual block:
    conv -> relu -> conv -> SE channel scale -> + skip -> relu
global average pool over time
dense (hidden -> 2)                      <- logits, index 0 bona fide, 1 spoof

Every conv is stride 1 with same padding, so the time axis keeps its T frames
until the pooling layer.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

BONAFIDE = 0
SPOOF = 1
CLASS_NAMES = ("bonafide", "spoof")

CHECKPOINT_FORMAT = "partialcam-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    in_channels: int = 64
    hidden_channels: int = 32
    kernel_size: int = 3
    se_reduction: int = 4
    classes: int = 2

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and positive, got {self.kernel_size}")
        if self.se_reduction < 1 or self.hidden_channels < self.se_reduction:
            raise ValueError(
                f"hidden_channels ({self.hidden_channels}) must be >= se_reduction ({self.se_reduction})"
            )
        if self.classes != 2:
            raise ValueError("only the two-class (bona fide / spoof) head is supported")

    @property
    def se_channels(self) -> int:
        return self.hidden_channels // self.se_reduction

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        c, k, r = self.hidden_channels, self.kernel_size, self.se_channels
        return {
            "front.w": (c, self.in_channels, k),
            "front.b": (c,),
            "res.conv1.w": (c, c, k),
            "res.conv1.b": (c,),
            "res.conv2.w": (c, c, k),
            "res.conv2.b": (c,),
            "se.w1": (r, c),
            "se.b1": (r,),
            "se.w2": (c, r),
            "se.b2": (c,),
            "out.w": (self.classes, c),
            "out.b": (self.classes,),
        }


@dataclass
class ForwardResult:
    logits: Tensor
    target_activations: Tensor


def init_params(config: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """He-normal conv weights, Glorot-uniform dense weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in config.param_shapes().items():
        if name.endswith(".b") or name.endswith(".b1") or name.endswith(".b2"):
            params[name] = np.zeros(shape)
        elif len(shape) == 3:
            fan_in = shape[1] * shape[2]
            params[name] = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, shape)
    return params


def se_block(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    """Squeeze-and-excitation on a (C, T) tensor: x * sigmoid(W2 relu(W1 mean_t(x)))."""
    squeeze = ad.mean_over_time(x)
    hidden = ad.relu(ad.add(ad.matmul(w1, squeeze), b1))
    scale = ad.sigmoid(ad.add(ad.matmul(w2, hidden), b2))
    return ad.channel_scale(x, scale)


@dataclass
class SERes1D:
    config: ModelConfig = field(default_factory=ModelConfig)
    params: dict[str, Tensor] = field(default_factory=dict)
    step: int = 0
    frozen: bool = False
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None

    def __post_init__(self):
        c = self.config.in_channels
        self.feature_mean = np.zeros(c) if self.feature_mean is None else np.asarray(self.feature_mean, float)
        self.feature_std = np.ones(c) if self.feature_std is None else np.asarray(self.feature_std, float)
        if self.feature_mean.shape != (c,) or self.feature_std.shape != (c,):
            raise ValueError(f"standardisation buffers must have shape ({c},)")
        if np.any(self.feature_std <= 0):
            raise ValueError("feature_std must be positive")

    def set_standardisation(self, features: list[np.ndarray]) -> None:
        """Fit per-channel mean/std over all frames of ``features``."""
        frames = np.concatenate([np.asarray(f, dtype=np.float64) for f in features])
        self.feature_mean = frames.mean(axis=0)
        self.feature_std = np.maximum(frames.std(axis=0), 1e-6)

    @classmethod
    def initialize(cls, config: ModelConfig | None = None, seed: int = 0) -> "SERes1D":
        config = config or ModelConfig()
        arrays = init_params(config, seed)
        return cls(config, {k: Tensor(v, requires_grad=True, name=k) for k, v in arrays.items()})

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: dict[str, np.ndarray], **kw) -> "SERes1D":
        shapes = config.param_shapes()
        if set(arrays) != set(shapes):
            raise ValueError(f"parameter names {sorted(arrays)} do not match {sorted(shapes)}")
        params = {}
        for name, shape in shapes.items():
            a = np.asarray(arrays[name], dtype=np.float64)
            if a.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name}: non-finite parameter values")
            params[name] = Tensor(a.copy(), requires_grad=True, name=name)
        return cls(config, params, **kw)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: t.values.copy() for k, t in self.params.items()}

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def freeze(self) -> "SERes1D":
        """Frozen copy for explanation and inference."""
        return SERes1D.from_arrays(
            self.config,
            self.arrays(),
            step=self.step,
            frozen=True,
            feature_mean=self.feature_mean.copy(),
            feature_std=self.feature_std.copy(),
        )

    # -- forward ------------------------------------------------------------

    def front(self, features: np.ndarray, params: dict[str, Tensor] | None = None) -> Tensor:
        p = params or self.params
        x = self._check_features(features)
        return ad.relu(ad.conv1d(x, p["front.w"], p["front.b"]))

    def head(self, r: Tensor, params: dict[str, Tensor] | None = None) -> Tensor:
        """Everything after the target layer: residual block, pooling, dense."""
        p = params or self.params
        y = ad.relu(ad.conv1d(r, p["res.conv1.w"], p["res.conv1.b"]))
        y = ad.conv1d(y, p["res.conv2.w"], p["res.conv2.b"])
        y = se_block(y, p["se.w1"], p["se.b1"], p["se.w2"], p["se.b2"])
        h = ad.relu(ad.add(r, y))
        pooled = ad.global_avg_pool_time(h)
        return ad.add(ad.matmul(p["out.w"], pooled), p["out.b"])

    def forward(self, features: np.ndarray, params: dict[str, Tensor] | None = None) -> ForwardResult:
        """features: (T, in_channels) frame-major matrix."""
        r = self.front(features, params)
        return ForwardResult(self.head(r, params), r)

    def constant_params(self) -> dict[str, Tensor]:
        """Read-only views of the parameters that do not record gradients."""
        return {k: Tensor(t.values) for k, t in self.params.items()}

    def logits(self, features: np.ndarray) -> np.ndarray:
        return self.forward(features, self.constant_params()).logits.values.copy()

    def _check_features(self, features) -> Tensor:
        f = np.asarray(features, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] < 1:
            raise ValueError(f"features must be a (T, F) matrix with T >= 1, got shape {f.shape}")
        if f.shape[1] != self.config.in_channels:
            raise ValueError(
                f"channel mismatch: features have {f.shape[1]} channels, model expects "
                f"{self.config.in_channels}"
            )
        return Tensor(np.ascontiguousarray(((f - self.feature_mean) / self.feature_std).T))

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "step": self.step,
            "standardisation": {
                "mean": self.feature_mean.tolist(),
                "std": self.feature_std.tolist(),
            },
            "params": {
                k: {"shape": list(t.shape), "values": t.values.ravel().tolist()}
                for k, t in self.params.items()
            },
            "extra": extra or {},
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> tuple["SERes1D", dict]:
        payload = json.loads(Path(path).read_text())
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
        config = ModelConfig(**payload["config"])
        arrays = {
            k: np.asarray(v["values"], dtype=np.float64).reshape(v["shape"])
            for k, v in payload["params"].items()
        }
        norm = payload["standardisation"]
        model = cls.from_arrays(
            config,
            arrays,
            step=payload["step"],
            frozen=True,
            feature_mean=np.asarray(norm["mean"], dtype=np.float64),
            feature_std=np.asarray(norm["std"], dtype=np.float64),
        )
        return model, payload.get("extra", {})


def predict_scores(logits) -> tuple[float, float]:
    """(p_bonafide, p_spoof) from a 2-vector of logits."""
    z = np.asarray(logits.values if isinstance(logits, Tensor) else logits, dtype=np.float64)
    if z.shape != (2,):
        raise ValueError(f"expected 2 logits, got shape {z.shape}")
    e = np.exp(z - z.max())
    p = e / e.sum()
    return float(p[BONAFIDE]), float(p[SPOOF])
