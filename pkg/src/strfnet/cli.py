"""Command-line pipeline: synth-data, train, eval, score, dump-kernels.

Every run is reproducible from (config JSON, seed); outputs stay under
the --out directory. Usage errors exit 2; runtime failures exit 1 after
printing a one-line JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .audio_io import read_json, write_json, write_jsonl, write_kernel_csv
from .config import ExperimentConfig, load_config
from .metrics import (ScoredSegments, best_threshold_by_dcf, eer_with_postprocessing,
                      write_det_sweep_csv)
from .audio_io import read_jsonl
from .model import parameter_count
from .simulate import SessionConfig, build_session, read_session, write_session
from .strf import drift_quadrant_fraction
from .training import (build_dataset, evaluate, fit_model, load_model,
                       save_result, score_dataset)

SPLITS = ("train", "dev", "eval")


def _session_counts(cfg: ExperimentConfig) -> dict:
    return {"train": cfg.data.n_train_sessions, "dev": cfg.data.n_dev_sessions,
            "eval": cfg.data.n_eval_sessions}


def cmd_synth_data(args) -> int:
    cfg = load_config(args.config, args.override)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snr_range = cfg.data.live_to_distractor_snr_db
    if args.snr is not None:
        snr_range = (args.snr, args.snr)
    session_cfg = SessionConfig(sample_rate=cfg.sample_rate,
                                live_to_distractor_snr_db=snr_range)
    manifest = {"seed": args.seed, "splits": {}, "sample_rate": cfg.sample_rate,
                "session_duration_s": cfg.data.session_duration_s,
                "live_fraction": cfg.data.live_fraction}
    for split_id, split in enumerate(SPLITS):
        names = []
        for i in range(_session_counts(cfg)[split]):
            rng = np.random.default_rng((args.seed, split_id, i))
            wave, timeline = build_session(cfg.data.session_duration_s,
                                           cfg.data.live_fraction, rng, session_cfg)
            name = f"session_{i:03d}"
            write_session(out / split, name, wave, timeline)
            names.append(name)
        manifest["splits"][split] = names
    write_json(out / "manifest.json", manifest)
    print(f"wrote {sum(len(v) for v in manifest['splits'].values())} sessions under {out}")
    return 0


def _load_split(cfg: ExperimentConfig, data_dir: Path, split: str,
                premix_seed=None):
    manifest = read_json(data_dir / "manifest.json")
    sessions = [(name, *read_session(data_dir / split, name))
                for name in manifest["splits"][split]]
    mix_grid = cfg.train.snr_grid if cfg.data.premix_snr else None
    rng = np.random.default_rng(premix_seed) if mix_grid is not None else None
    return build_dataset(sessions, cfg.frontend, cfg.data.segment_s,
                         cfg.data.live_overlap_threshold, mix_grid, rng)


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.override)
    if args.seed is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data_dir = Path(args.data)
    train_data = _load_split(cfg, data_dir, "train", (cfg.train.seed, 101))
    dev_data = _load_split(cfg, data_dir, "dev", (cfg.train.seed, 102))
    log_path = out / "train_log.jsonl"
    log_path.unlink(missing_ok=True)
    result = fit_model(cfg.model, train_data, dev_data, cfg.train,
                       cfg.augment, log_path)
    ckpt = out / "checkpoint.strfnet"
    save_result(ckpt, cfg.model, cfg.train, result)
    summary = {"best_epoch": result.best_epoch,
               "dev_dcf": result.dev_report.dcf,
               "dev_eer": result.dev_report.eer,
               "dev_threshold": result.dev_threshold,
               "parameter_count": parameter_count(result.params),
               "epochs_run": len(result.log_records)}
    write_json(out / "train_summary.json", summary)
    print(json.dumps(summary))
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config, args.override)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data_dir = Path(args.data)
    dev_data = _load_split(cfg, data_dir, "dev", (cfg.train.seed, 102))
    eval_data = _load_split(cfg, data_dir, "eval", (cfg.train.seed, 103))
    report, dev_thr = evaluate(args.checkpoint, dev_data, eval_data,
                               args.max_gap, cfg.train.batch_size)
    model, params, buffers, _ = load_model(args.checkpoint)
    eval_scored = eval_data.to_scored(
        score_dataset(model, params, buffers, eval_data, cfg.train.batch_size))
    write_det_sweep_csv(out / "det_sweep.csv", eval_scored, args.max_gap)
    write_jsonl(out / "eval_scores.jsonl", eval_scored.to_records())
    payload = dict(report.to_dict(), dev_threshold=dev_thr)
    write_json(out / "metrics.json", payload)
    print(json.dumps(payload))
    return 0


def cmd_score(args) -> int:
    scored = ScoredSegments.from_records(read_jsonl(args.scores))
    eer, thr_eer = eer_with_postprocessing(scored, args.max_gap)
    best_thr, report = best_threshold_by_dcf(scored, args.max_gap)
    print(f"eer {eer:.10g} at threshold {thr_eer:.10g}")
    print(f"min_dcf {report.dcf:.10g} at threshold {best_thr:.10g} "
          f"(p_miss {report.p_miss:.10g}, p_fa {report.p_fa:.10g})")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "score_report.json", report.to_dict())
        write_det_sweep_csv(out / "det_sweep.csv", scored, args.max_gap)
    return 0


def cmd_dump_kernels(args) -> int:
    model, params, buffers, extra = load_model(args.checkpoint)
    if "strf.scalars" not in params:
        raise ValueError("checkpoint has no STRF kernel bank to dump")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bank = model.make_bank(params["strf.scalars"])
    kernels = bank.kernels()
    manifest = []
    for i, (p, kern) in enumerate(zip(bank.params, kernels)):
        np.savetxt(out / f"kernel_{i:03d}.csv", kern, delimiter=",")
        np.savetxt(out / f"kernel_{i:03d}_dft.csv",
                   np.abs(np.fft.fft2(kern)), delimiter=",")
        manifest.append({"index": i,
                         "spectral_mod_cyc_per_chan": p.spectral_mod,
                         "temporal_mod_hz": p.temporal_mod,
                         "spectral_phase_rad": p.spectral_phase,
                         "temporal_phase_rad": p.temporal_phase,
                         "direction": p.direction,
                         "quadrant_fraction": drift_quadrant_fraction(kern)})
    write_json(out / "manifest.json", manifest)
    write_kernel_csv(out / "kernel_params.csv", params["strf.scalars"],
                     [p.direction for p in bank.params])
    print(f"wrote {len(kernels)} kernels to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strfnet",
        description="Voice-type discrimination with learnable STRF kernels")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True, out=True, seed=False):
        if config:
            p.add_argument("--config", required=True, help="experiment config JSON")
            p.add_argument("--override", action="append", default=[],
                           metavar="PATH=VALUE",
                           help="dotted-path config override, repeatable")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="seed override")

    p = sub.add_parser("synth-data", help="generate labeled synthetic sessions")
    add_common(p, seed=True)
    p.set_defaults(func=cmd_synth_data, seed=0)
    p.add_argument("--snr", type=float, default=None,
                   help="fix the live-to-distractor SNR (dB) instead of the config range")

    p = sub.add_parser("train", help="train a model on synthesized sessions")
    add_common(p, seed=True)
    p.add_argument("--data", required=True, help="directory written by synth-data")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="dev-threshold selection + eval metrics")
    add_common(p)
    p.add_argument("--data", required=True, help="directory written by synth-data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--max-gap", type=int, default=1,
                   help="gap-filling length in segments (default 1)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("score", help="metrics for an existing scores JSONL")
    p.add_argument("--scores", required=True)
    p.add_argument("--max-gap", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("dump-kernels", help="export STRF kernels from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_kernels)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # argparse usage errors exit 2 before this
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
