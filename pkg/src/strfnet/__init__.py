"""Voice-type discrimination with a learnable spectro-temporal
receptive-field front end: feature extraction, STRF kernel assembly with
analytic parameter gradients, a manually backpropagated network, session
simulation, duration-normalized detection metrics, and a training CLI.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import DataConfig, ExperimentConfig, load_config
from .estimator import STRFNetClassifier
from .frontend import (AugmentPolicy, FrontendConfig, Spectrogram, Waveform,
                       log_mel_spectrogram, mel_filterbank, normalize_segment,
                       spec_augment)
from .hilbert import HilbertFir, analytic_sequence, design_hilbert_fir
from .metrics import (MetricsReport, ScoredSegments, best_threshold_by_dcf, dcf,
                      duration_normalized_rates, eer_with_postprocessing,
                      postprocess, threshold_decisions)
from .model import ModelConfig, STRFNetModel, parameter_count, strf_conv_backward, strf_conv_forward
from .simulate import (SessionConfig, SessionTimeline, build_session, mix_at_snr,
                       segment_session, synth_distractor, synth_live)
from .strf import (KernelBank, StrfParams, assemble_strf, drift_quadrant_fraction,
                   init_bank, strf_jacobian)
from .training import (AdamState, SegmentDataset, TrainConfig, adam_step,
                       build_dataset, evaluate, fit_model, init_adam, load_model,
                       save_result, score_dataset)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AugmentPolicy", "DataConfig", "ExperimentConfig",
    "FrontendConfig", "HilbertFir", "KernelBank", "MetricsReport", "ModelConfig",
    "STRFNetClassifier", "STRFNetModel", "ScoredSegments", "SegmentDataset",
    "SessionConfig", "SessionTimeline", "Spectrogram", "StrfParams", "TrainConfig",
    "Waveform", "adam_step", "analytic_sequence", "assemble_strf",
    "best_threshold_by_dcf", "build_dataset", "build_session", "dcf",
    "design_hilbert_fir", "drift_quadrant_fraction", "duration_normalized_rates",
    "eer_with_postprocessing", "evaluate", "fit_model", "init_adam", "init_bank",
    "load_checkpoint", "load_config", "load_model", "log_mel_spectrogram",
    "mel_filterbank", "mix_at_snr", "normalize_segment", "parameter_count",
    "postprocess", "save_checkpoint", "save_result", "score_dataset",
    "segment_session", "spec_augment", "strf_conv_backward", "strf_conv_forward",
    "strf_jacobian", "synth_distractor", "synth_live", "threshold_decisions",
]
