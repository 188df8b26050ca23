"""scikit-learn style wrapper around the trainable detector.

Works on precomputed feature segments shaped (n_segments, n_frames,
n_bands); the session-level pipeline (synthesis, segmentation, threshold
selection, postprocessing) lives in the CLI and training modules. The
estimator is convenient for toy experiments, grid searches and the
separable-data sanity checks.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .model import ModelConfig, STRFNetModel, parameter_count
from .training import (AdamState, SegmentDataset, TrainConfig, fit_model,
                       score_dataset)


class STRFNetClassifier(ClassifierMixin, BaseEstimator):
    """Binary segment classifier with a learnable-STRF first layer.

    Parameters mirror ModelConfig / TrainConfig at desk scale; labels
    are 0 (distractor) and 1 (live).
    """

    def __init__(self, first_layer="strf", n_strf_kernels=8, n_generic_kernels=0,
                 n_residual_blocks=1, residual_channels=8, fc_dim=16, gru_hidden=8,
                 gru_layers=2, attention_dim=16, mlp_hidden=16,
                 strf_time_support_s=0.5, strf_channel_support=15,
                 frame_rate_hz=100.22727272727273, channels_per_octave=8.663,
                 learning_rate=1e-3, batch_size=16, max_epochs=20, patience_epochs=5,
                 segments_per_epoch=128, freeze_strf=False, validation_fraction=0.25,
                 random_state=0):
        self.first_layer = first_layer
        self.n_strf_kernels = n_strf_kernels
        self.n_generic_kernels = n_generic_kernels
        self.n_residual_blocks = n_residual_blocks
        self.residual_channels = residual_channels
        self.fc_dim = fc_dim
        self.gru_hidden = gru_hidden
        self.gru_layers = gru_layers
        self.attention_dim = attention_dim
        self.mlp_hidden = mlp_hidden
        self.strf_time_support_s = strf_time_support_s
        self.strf_channel_support = strf_channel_support
        self.frame_rate_hz = frame_rate_hz
        self.channels_per_octave = channels_per_octave
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience_epochs = patience_epochs
        self.segments_per_epoch = segments_per_epoch
        self.freeze_strf = freeze_strf
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _check_features(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3:
            raise ValueError(f"expected (segments, frames, bands) features, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        return X

    def _as_dataset(self, X: np.ndarray, y: np.ndarray, tag: str) -> SegmentDataset:
        n = X.shape[0]
        starts = np.arange(n) * 5.0
        return SegmentDataset(features=X.astype(np.float32), labels=y.astype(np.int8),
                              start_s=starts, end_s=starts + 5.0,
                              session_ids=tuple(tag for _ in range(n)),
                              frame_rate_hz=self.frame_rate_hz,
                              band_centers_hz=np.zeros(X.shape[2]))

    def fit(self, X, y):
        X = self._check_features(X)
        y = np.asarray(y)
        if y.shape != (X.shape[0],):
            raise ValueError("y must be one label per segment")
        self.classes_ = np.unique(y)
        if not np.array_equal(self.classes_, np.array([0, 1])):
            raise ValueError("needs both classes, labeled 0 (distractor) and 1 (live)")
        rng = np.random.default_rng(self.random_state)
        # stratified shuffle split for the early-stopping dev set
        dev_mask = np.zeros(X.shape[0], dtype=bool)
        for cls in (0, 1):
            idx = np.flatnonzero(y == cls)
            idx = idx[rng.permutation(idx.shape[0])]
            n_dev = max(1, int(round(self.validation_fraction * idx.shape[0])))
            if n_dev >= idx.shape[0]:
                raise ValueError("validation_fraction leaves no training data")
            dev_mask[idx[:n_dev]] = True
        model_cfg = ModelConfig(
            first_layer=self.first_layer, n_strf_kernels=self.n_strf_kernels,
            n_generic_kernels=self.n_generic_kernels, n_input_bands=X.shape[2],
            frame_rate_hz=self.frame_rate_hz,
            strf_time_support_s=self.strf_time_support_s,
            strf_channel_support=self.strf_channel_support,
            channels_per_octave=self.channels_per_octave,
            n_residual_blocks=self.n_residual_blocks,
            residual_channels=self.residual_channels, fc_dim=self.fc_dim,
            gru_hidden=self.gru_hidden, gru_layers=self.gru_layers,
            attention_dim=self.attention_dim, mlp_hidden=self.mlp_hidden)
        train_cfg = TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            patience_epochs=self.patience_epochs, max_epochs=self.max_epochs,
            segments_per_epoch=max(self.segments_per_epoch, self.batch_size),
            seed=self.random_state, freeze_strf=self.freeze_strf,
            max_gap_segments=0, augment=False)
        result = fit_model(model_cfg,
                           self._as_dataset(X[~dev_mask], y[~dev_mask], "train"),
                           self._as_dataset(X[dev_mask], y[dev_mask], "dev"),
                           train_cfg)
        self.model_ = result.model
        self.params_ = result.params
        self.buffers_ = result.buffers
        self.dev_threshold_ = result.dev_threshold
        self.train_log_ = result.log_records
        self.n_parameters_ = parameter_count(result.params)
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    def predict_proba(self, X) -> np.ndarray:
        self._require_fitted()
        X = self._check_features(X)
        ds = self._as_dataset(X, np.zeros(X.shape[0]), "score")
        live = score_dataset(self.model_, self.params_, self.buffers_, ds,
                             self.batch_size)
        return np.column_stack([1.0 - live, live])

    def predict(self, X) -> np.ndarray:
        """Labels at the operating threshold selected on the dev split."""
        proba = self.predict_proba(X)
        return self.classes_[(proba[:, 1] >= self.dev_threshold_).astype(int)]

    def decision_function(self, X) -> np.ndarray:
        return self.predict_proba(X)[:, 1]

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise AttributeError("this STRFNetClassifier instance is not fitted yet")
