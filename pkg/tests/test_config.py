"""Experiment config tree: defaults, overrides, file round trips."""

import numpy as np
import pytest

from strfnet.config import (
    DataConfig,
    ExperimentConfig,
    apply_overrides,
    load_config,
    write_config,
)
from strfnet.frontend import mel_filterbank
from strfnet.model import bands_per_octave


def test_data_config_defaults():
    d = DataConfig()
    assert (d.n_train_sessions, d.n_dev_sessions, d.n_eval_sessions) == (20, 8, 6)
    assert d.session_duration_s == 600.0
    assert d.live_fraction == 0.13
    assert d.segment_s == 5.0
    assert d.live_overlap_threshold == 0.5
    assert d.live_to_distractor_snr_db == (0.0, 20.0)
    assert d.premix_snr is False


def test_data_config_validation():
    with pytest.raises(ValueError):
        DataConfig(n_dev_sessions=0)
    with pytest.raises(ValueError):
        DataConfig(live_fraction=0.0)
    with pytest.raises(ValueError):
        DataConfig(live_fraction=1.0)
    with pytest.raises(ValueError):
        DataConfig(session_duration_s=4.0, segment_s=5.0)


def test_default_experiment_derives_model_from_frontend():
    cfg = ExperimentConfig()
    assert cfg.model is not None
    assert cfg.model.n_input_bands == cfg.frontend.n_mel_bands
    assert cfg.model.frame_rate_hz == cfg.frontend.frame_rate_hz(cfg.sample_rate)
    _, centers = mel_filterbank(cfg.sample_rate, cfg.frontend.dft_size,
                                cfg.frontend.n_mel_bands)
    assert cfg.model.channels_per_octave == bands_per_octave(centers, cfg.sample_rate)


def test_experiment_dict_round_trip():
    cfg = ExperimentConfig()
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg


def test_from_dict_restores_tuple_fields_from_json_lists():
    tree = ExperimentConfig().to_dict()
    tree["train"]["snr_grid"] = [5.0, 10.0]
    tree["data"]["live_to_distractor_snr_db"] = [3.0, 12.0]
    cfg = ExperimentConfig.from_dict(tree)
    assert cfg.train.snr_grid == (5.0, 10.0)
    assert cfg.data.live_to_distractor_snr_db == (3.0, 12.0)


def test_from_dict_rejects_unknown_sections_and_fields():
    tree = ExperimentConfig().to_dict()
    tree["decoder"] = {}
    with pytest.raises(ValueError, match="unknown config sections"):
        ExperimentConfig.from_dict(tree)
    tree = ExperimentConfig().to_dict()
    tree["train"]["momentum"] = 0.9
    with pytest.raises(ValueError, match="bad config field"):
        ExperimentConfig.from_dict(tree)


def test_from_dict_empty_tree_gives_defaults():
    assert ExperimentConfig.from_dict({}) == ExperimentConfig()


def test_apply_overrides_sets_nested_values():
    tree = {"train": {"seed": 0}}
    apply_overrides(tree, ["train.seed=7", "model.gru_hidden=64",
                           "data.premix_snr=true",
                           "train.snr_grid=[5,10]"])
    assert tree["train"]["seed"] == 7
    assert tree["model"]["gru_hidden"] == 64  # creates the missing section
    assert tree["data"]["premix_snr"] is True
    assert tree["train"]["snr_grid"] == [5, 10]


def test_apply_overrides_falls_back_to_strings():
    tree = {}
    apply_overrides(tree, ["model.first_layer=hybrid"])
    assert tree["model"]["first_layer"] == "hybrid"


def test_apply_overrides_rejects_malformed_items():
    with pytest.raises(ValueError, match="section.field=value"):
        apply_overrides({}, ["train.seed"])
    with pytest.raises(ValueError, match="crosses a scalar"):
        apply_overrides({"train": {"seed": 3}}, ["train.seed.deep=1"])


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "exp.json"
    cfg = ExperimentConfig()
    write_config(path, cfg)
    assert load_config(path) == cfg


def test_load_config_applies_overrides(tmp_path):
    path = tmp_path / "exp.json"
    write_config(path, ExperimentConfig())
    cfg = load_config(path, ["train.seed=9", "model.gru_hidden=16"])
    assert cfg.train.seed == 9
    assert cfg.model.gru_hidden == 16


def test_stored_model_geometry_is_resolved_not_rederived(tmp_path):
    # a written config pins the model section; changing the frontend later
    # needs a matching model override rather than silent re-derivation
    path = tmp_path / "exp.json"
    write_config(path, ExperimentConfig())
    cfg = load_config(path, ["frontend.n_mel_bands=30"])
    assert cfg.frontend.n_mel_bands == 30
    assert cfg.model.n_input_bands == 40
    cfg2 = load_config(path, ["frontend.n_mel_bands=30", "model.n_input_bands=30"])
    assert cfg2.model.n_input_bands == 30


def test_load_config_rejects_non_object_root(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(ValueError, match="JSON object"):
        load_config(path)
