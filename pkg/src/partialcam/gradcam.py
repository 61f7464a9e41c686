"""Frame-level Grad-CAM at the front-block output.

S_t = relu(sum_c R[c, t] * dl_k/dR[c, t]) where l_k is the raw logit of the
target class.  Scores stay at the native 20 ms frame resolution: no smoothing,
no normalisation, no interpolation to waveform length.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .model import CLASS_NAMES, SERes1D


class ModelNotFrozenError(RuntimeError):
    pass


@dataclass
class GradCamMap:
    scores: np.ndarray
    target_class: int
    utterance_id: str = ""

    @property
    def target_name(self) -> str:
        return CLASS_NAMES[self.target_class]

    def __len__(self) -> int:
        return len(self.scores)


def resolve_class(target_class) -> int:
    if isinstance(target_class, str):
        name = {"bona_fide": "bonafide", "bona fide": "bonafide"}.get(target_class, target_class)
        if name not in CLASS_NAMES:
            raise ValueError(f"unknown target class {target_class!r}; expected one of {CLASS_NAMES}")
        return CLASS_NAMES.index(name)
    k = int(target_class)
    if k not in (0, 1):
        raise ValueError(f"target class index must be 0 or 1, got {target_class}")
    return k


def cam_from_gradients(activations: np.ndarray, gradients: np.ndarray) -> np.ndarray:
    """relu of the channel sum of activation * gradient for (C, T) arrays."""
    activations = np.asarray(activations, dtype=np.float64)
    gradients = np.asarray(gradients, dtype=np.float64)
    if activations.shape != gradients.shape or activations.ndim != 2:
        raise ValueError(
            f"activations {activations.shape} and gradients {gradients.shape} must be equal (C, T) shapes"
        )
    return np.maximum((activations * gradients).sum(axis=0), 0.0)


def gradcam_all(model: SERes1D, features: np.ndarray, utterance_id: str = "") -> list[GradCamMap]:
    """Maps for both target classes from one forward pass.

    The model parameters are wrapped as constants, so nothing in ``model`` is
    mutated and concurrent explanations can share it.
    """
    if not model.frozen:
        raise ModelNotFrozenError("Grad-CAM needs a frozen model; call model.freeze() first")
    params = model.constant_params()
    front = model.front(features, params)
    r = Tensor(front.values, requires_grad=True)
    logits = model.head(r, params)
    out = []
    for k in (0, 1):
        r.zero_grad()
        ad.backward(ad.select(logits, k))
        out.append(GradCamMap(cam_from_gradients(r.values, r.grad), k, utterance_id))
    return out


def gradcam(model: SERes1D, features: np.ndarray, target_class, utterance_id: str = "") -> GradCamMap:
    k = resolve_class(target_class)
    if not model.frozen:
        raise ModelNotFrozenError("Grad-CAM needs a frozen model; call model.freeze() first")
    params = model.constant_params()
    r = Tensor(model.front(features, params).values, requires_grad=True)
    logit = ad.select(model.head(r, params), k)
    ad.backward(logit)
    return GradCamMap(cam_from_gradients(r.values, r.grad), k, utterance_id)
