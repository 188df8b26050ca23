"""Optimization loop and evaluation protocol.

Training samples class-balanced batches of precomputed log-mel segments,
optionally augments them, and takes Adam steps; development DCF drives
early stopping and checkpoint selection. Evaluation scores segments with
the trained model, picks the lowest-DCF threshold on the development
split and applies it (with gap-filling postprocessing) to the held-out
split. Runs are pure functions of (seed, config, data) apart from the
wall-clock field in the log.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import append_jsonl
from .checkpoint import load_checkpoint, pack_state, save_checkpoint, unpack_state
from .frontend import (AugmentPolicy, FrontendConfig, Spectrogram, Waveform,
                       log_mel_spectrogram, mel_filterbank, normalize_segment,
                       spec_augment)
from .metrics import (LIVE, MetricsReport, ScoredSegments, best_threshold_by_dcf,
                      evaluate_at_threshold)
from .model import ModelConfig, STRFNetModel, parameter_count
from .simulate import (SessionTimeline, mix_at_snr, segment_samples,
                       segment_session, synth_distractor)

DISTRACTOR_NOISE_KINDS = ("traffic_noise", "music_proxy")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 64
    patience_epochs: int = 5
    max_epochs: int = 50
    segments_per_epoch: int = 2000
    snr_grid: tuple = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0)
    seed: int = 0
    freeze_strf: bool = False
    max_gap_segments: int = 1
    augment: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 2 or self.batch_size % 2:
            raise ValueError("learning_rate must be positive and batch_size even >= 2")
        if self.patience_epochs < 1 or self.max_epochs < 1:
            raise ValueError("patience_epochs and max_epochs must be >= 1")
        if self.segments_per_epoch < self.batch_size:
            raise ValueError("segments_per_epoch must cover at least one batch")


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: dict) -> AdamState:
    return AdamState(m={k: np.zeros_like(p) for k, p in params.items()},
                     v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              frozen_keys=frozenset()) -> dict:
    """One bias-corrected Adam update; returns the new parameter dict.

    Frozen keys are skipped entirely (no moment accumulation), which is
    how static-STRF training masks the kernel scalars. Non-finite
    gradients abort the step.
    """
    if set(grads) - set(params):
        raise ValueError(f"gradient keys not in params: {sorted(set(grads) - set(params))}")
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for {key!r}; step rejected")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    out = dict(params)
    for key, g in grads.items():
        if key in frozen_keys:
            continue
        state.m[key] = state.beta1 * state.m[key] + (1 - state.beta1) * g
        state.v[key] = state.beta2 * state.v[key] + (1 - state.beta2) * g ** 2
        m_hat = state.m[key] / bc1
        v_hat = state.v[key] / bc2
        out[key] = params[key] - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


@dataclass
class SegmentDataset:
    """Precomputed normalized log-mel segments with exact labels."""

    features: np.ndarray  # (n, frames, bands) float32
    labels: np.ndarray  # (n,) int8, 1 = live
    start_s: np.ndarray
    end_s: np.ndarray
    session_ids: tuple
    frame_rate_hz: float
    band_centers_hz: np.ndarray

    def __len__(self) -> int:
        return self.features.shape[0]

    def to_scored(self, scores: np.ndarray) -> ScoredSegments:
        return ScoredSegments(start_s=self.start_s, end_s=self.end_s, scores=scores,
                              labels=self.labels, session_ids=self.session_ids)

    def class_indices(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(len(self))
        return idx[self.labels == LIVE], idx[self.labels != LIVE]


def build_dataset(sessions, frontend_cfg: FrontendConfig, segment_s: float = 5.0,
                  live_overlap_threshold: float = 0.5, mix_snr_grid=None,
                  rng: np.random.Generator | None = None) -> SegmentDataset:
    """Segment sessions and extract features.

    ``sessions`` is an iterable of (name, Waveform, SessionTimeline).
    When ``mix_snr_grid`` is given, each segment is mixed once with
    freshly synthesized noise at a grid SNR drawn per segment (the
    noisy-training recipe); this needs ``rng``.
    """
    if mix_snr_grid is not None and rng is None:
        raise ValueError("mix_snr_grid requires an rng")
    feats, labels, starts, ends, sids = [], [], [], [], []
    frame_rate = None
    centers = None
    for name, wave, timeline in sessions:
        seg = segment_session(timeline, segment_s, live_overlap_threshold)
        for k in range(seg.labels.shape[0]):
            piece = segment_samples(wave, seg.start_s[k], seg.end_s[k])
            if mix_snr_grid is not None:
                kind = DISTRACTOR_NOISE_KINDS[int(rng.integers(len(DISTRACTOR_NOISE_KINDS)))]
                noise = synth_distractor(kind, piece.duration_s, rng, piece.sample_rate)
                noise = Waveform(samples=noise.samples[: piece.samples.shape[0]],
                                 sample_rate=piece.sample_rate)
                snr = float(mix_snr_grid[int(rng.integers(len(mix_snr_grid)))])
                piece = mix_at_snr(piece, noise, snr)
            spec = normalize_segment(log_mel_spectrogram(piece, frontend_cfg))
            frame_rate = spec.frame_rate_hz
            centers = spec.band_centers_hz
            feats.append(spec.values.astype(np.float32))
            labels.append(int(seg.labels[k]))
            starts.append(float(seg.start_s[k]))
            ends.append(float(seg.end_s[k]))
            sids.append(name)
    if not feats:
        raise ValueError("no segments produced from the given sessions")
    return SegmentDataset(features=np.stack(feats), labels=np.array(labels, dtype=np.int8),
                          start_s=np.array(starts), end_s=np.array(ends),
                          session_ids=tuple(sids), frame_rate_hz=frame_rate,
                          band_centers_hz=centers)


def score_dataset(model: STRFNetModel, params: dict, buffers: dict,
                  dataset: SegmentDataset, batch_size: int = 64) -> np.ndarray:
    """P(live) per segment, evaluation mode (running BN statistics)."""
    scores = np.empty(len(dataset))
    for lo in range(0, len(dataset), batch_size):
        batch = dataset.features[lo : lo + batch_size].astype(np.float64)
        probs = model.predict_proba(params, buffers, batch)
        scores[lo : lo + batch.shape[0]] = probs[:, LIVE]
    return scores


@dataclass
class TrainResult:
    params: dict
    buffers: dict
    adam: AdamState
    model: STRFNetModel
    log_records: list = field(default_factory=list)
    best_epoch: int = 0
    dev_threshold: float = 0.5
    dev_report: MetricsReport | None = None


def fit_model(model_cfg: ModelConfig, train_data: SegmentDataset,
              dev_data: SegmentDataset, train_cfg: TrainConfig,
              augment_policy: AugmentPolicy | None = None,
              log_path=None) -> TrainResult:
    """Train with class-balanced sampling and early stopping on dev DCF.

    Keeps the best-dev parameters; the log gains one record per epoch
    (epoch, train_loss, dev_dcf, dev_eer, lr, elapsed_s).
    """
    live_idx, dist_idx = train_data.class_indices()
    if live_idx.size == 0 or dist_idx.size == 0:
        raise ValueError("training data must contain both classes")
    rng = np.random.default_rng(train_cfg.seed)
    model = STRFNetModel(model_cfg)
    params, buffers = model.init_params(rng)
    adam = init_adam(params)
    frozen = frozenset({"strf.scalars"} if train_cfg.freeze_strf else set())
    policy = augment_policy if train_cfg.augment else None
    steps = train_cfg.segments_per_epoch // train_cfg.batch_size
    half = train_cfg.batch_size // 2
    result = TrainResult(params=params, buffers=buffers, adam=adam, model=model)
    best_dcf = np.inf
    stale = 0
    t0 = time.perf_counter()
    for epoch in range(1, train_cfg.max_epochs + 1):
        losses = []
        for _ in range(steps):
            idx = np.concatenate([rng.choice(live_idx, half, replace=True),
                                  rng.choice(dist_idx, half, replace=True)])
            idx = idx[rng.permutation(idx.shape[0])]
            batch = train_data.features[idx].astype(np.float64)
            if policy is not None:
                for b in range(batch.shape[0]):
                    spec = Spectrogram(values=batch[b],
                                       frame_rate_hz=train_data.frame_rate_hz,
                                       band_centers_hz=train_data.band_centers_hz)
                    batch[b] = spec_augment(spec, policy, rng).values
            loss, _, grads, buffers = model.loss_and_grads(
                params, buffers, batch, train_data.labels[idx].astype(int))
            params = adam_step(params, grads, adam, train_cfg.learning_rate, frozen)
            losses.append(loss)
        dev_scores = score_dataset(model, params, buffers, dev_data, train_cfg.batch_size)
        thr, report = best_threshold_by_dcf(dev_data.to_scored(dev_scores),
                                            train_cfg.max_gap_segments)
        record = {"epoch": epoch, "train_loss": float(np.mean(losses)),
                  "dev_dcf": report.dcf, "dev_eer": report.eer,
                  "lr": train_cfg.learning_rate,
                  "elapsed_s": time.perf_counter() - t0}
        result.log_records.append(record)
        if log_path is not None:
            append_jsonl(log_path, record)
        if report.dcf < best_dcf:
            best_dcf = report.dcf
            stale = 0
            result.params = {k: v.copy() for k, v in params.items()}
            result.buffers = {k: v.copy() for k, v in buffers.items()}
            result.best_epoch = epoch
            result.dev_threshold = thr
            result.dev_report = report
        else:
            stale += 1
            if stale >= train_cfg.patience_epochs:
                break
    result.adam = adam
    return result


def save_result(path, model_cfg: ModelConfig, train_cfg: TrainConfig,
                result: TrainResult):
    extra = {"seed": train_cfg.seed, "dev_threshold": result.dev_threshold,
             "best_epoch": result.best_epoch,
             "dev_dcf": result.dev_report.dcf if result.dev_report else None,
             "train_config": asdict(train_cfg),
             "parameter_count": parameter_count(result.params)}
    arrays = pack_state(result.params, result.buffers, result.adam.m, result.adam.v)
    save_checkpoint(path, model_cfg.to_dict(), arrays, extra)


def load_model(path) -> tuple[STRFNetModel, dict, dict, dict]:
    """Returns (model, params, buffers, extra) from a checkpoint."""
    config, arrays, extra = load_checkpoint(path)
    params, buffers, _, _ = unpack_state(arrays)
    model = STRFNetModel(ModelConfig.from_dict(config))
    ref_params, ref_buffers = model.init_params(np.random.default_rng(0))
    if set(ref_params) != set(params) or set(ref_buffers) != set(buffers) or any(
            ref_params[k].shape != params[k].shape for k in ref_params):
        raise ValueError("checkpoint arrays do not match the stored model config")
    return model, params, buffers, extra


def evaluate(checkpoint_path, dev_data: SegmentDataset, eval_data: SegmentDataset,
             max_gap_segments: int = 1, batch_size: int = 64
             ) -> tuple[MetricsReport, float]:
    """Dev-selected threshold applied to eval with postprocessing.

    Returns (eval report, dev threshold). The threshold is tuned only on
    the development split.
    """
    model, params, buffers, _ = load_model(checkpoint_path)
    if eval_data.features.shape[2] != model.config.n_input_bands:
        raise ValueError("feature band count does not match the checkpoint")
    dev_scores = score_dataset(model, params, buffers, dev_data, batch_size)
    thr, _ = best_threshold_by_dcf(dev_data.to_scored(dev_scores), max_gap_segments)
    eval_scores = score_dataset(model, params, buffers, eval_data, batch_size)
    report = evaluate_at_threshold(eval_data.to_scored(eval_scores), thr, max_gap_segments)
    return report, thr
