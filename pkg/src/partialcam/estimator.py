"""scikit-learn style wrappers around training, scoring and Grad-CAM."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.model_selection import train_test_split
from sklearn.utils.validation import check_is_fitted

from .evaluation import eer
from .gradcam import gradcam, resolve_class
from .model import ModelConfig
from .train import TrainConfig, train
from .validation import check_binary_labels, check_feature_list


class SpoofCountermeasure(ClassifierMixin, BaseEstimator):
    """Utterance-level bona fide (0) / spoof (1) classifier.

    ``X`` is a sequence of (T, 64) log-mel matrices.  When no development set
    is passed to :meth:`fit`, a stratified ``validation_fraction`` of the
    training data is held out for model selection.
    """

    def __init__(
        self,
        hidden_channels: int = 32,
        kernel_size: int = 3,
        se_reduction: int = 4,
        learning_rate: float = 1e-3,
        batch_size: int = 2,
        max_epochs: int = 100,
        patience: int = 20,
        validation_fraction: float = 0.2,
        random_state: int = 0,
    ):
        self.hidden_channels = hidden_channels
        self.kernel_size = kernel_size
        self.se_reduction = se_reduction
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def fit(self, X, y, X_dev=None, y_dev=None):
        X = check_feature_list(X)
        y = check_binary_labels(y, len(X))
        if (X_dev is None) != (y_dev is None):
            raise ValueError("pass both X_dev and y_dev, or neither")
        if X_dev is None:
            idx = np.arange(len(X))
            tr, dev = train_test_split(
                idx, test_size=self.validation_fraction, stratify=y, random_state=self.random_state
            )
            X, X_dev, y, y_dev = [X[i] for i in tr], [X[i] for i in dev], y[tr], y[dev]
        else:
            X_dev = check_feature_list(X_dev, X[0].shape[1])
            y_dev = check_binary_labels(y_dev, len(X_dev))

        model_config = ModelConfig(
            in_channels=X[0].shape[1],
            hidden_channels=self.hidden_channels,
            kernel_size=self.kernel_size,
            se_reduction=self.se_reduction,
        )
        config = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.random_state,
        )
        result = train(X, y, X_dev, y_dev, config, model_config)
        self.model_ = result.model
        self.training_log_ = result.log
        self.best_epoch_ = result.best_epoch
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = model_config.in_channels
        return self

    def _logits(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = check_feature_list(X, self.n_features_in_)
        return np.stack([self.model_.logits(x) for x in X])

    def decision_function(self, X) -> np.ndarray:
        """Logit margin l_spoof - l_bonafide; positive favours spoof."""
        z = self._logits(X)
        return z[:, 1] - z[:, 0]

    def predict_proba(self, X) -> np.ndarray:
        z = self._logits(X)
        e = np.exp(z - z.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def eer(self, X, y) -> tuple[float, float]:
        """(EER %, threshold) of p_spoof on a labelled set."""
        p = self.predict_proba(X)[:, 1]
        return eer(p, check_binary_labels(y, len(p)) == 1)


class GradCAM(TransformerMixin, BaseEstimator):
    """Maps each utterance to its per-frame Grad-CAM scores for one class.

    ``fit`` only checks that ``estimator`` is a fitted countermeasure; the
    output of ``transform`` is a list of length-T arrays.
    """

    def __init__(self, estimator: SpoofCountermeasure | None = None, target_class="spoof"):
        self.estimator = estimator
        self.target_class = target_class

    def fit(self, X=None, y=None):
        if self.estimator is None:
            raise ValueError("GradCAM needs a fitted SpoofCountermeasure")
        check_is_fitted(self.estimator, "model_")
        self.target_index_ = resolve_class(self.target_class)
        return self

    def transform(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "target_index_")
        est = self.estimator
        X = check_feature_list(X, est.n_features_in_)
        return [gradcam(est.model_, x, self.target_index_).scores for x in X]
