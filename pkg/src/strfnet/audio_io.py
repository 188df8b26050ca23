"""File formats: 16-bit PCM WAV, JSON-lines records, CSV kernel dumps."""

from __future__ import annotations

import csv
import json
import wave
from pathlib import Path

import numpy as np

from .frontend import Waveform

PCM16_FULL_SCALE = 32767.0


def write_wav(path, wave_data: Waveform):
    """Write mono 16-bit PCM. Samples are clipped to [-1, 1] before scaling."""
    samples = np.clip(wave_data.samples, -1.0, 1.0)
    pcm = np.round(samples * PCM16_FULL_SCALE).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(wave_data.sample_rate)
        fh.writeframes(pcm.tobytes())


def read_wav(path) -> Waveform:
    """Read a mono 16-bit PCM WAV into float samples in [-1, 1]."""
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono, got {fh.getnchannels()} channels")
        if fh.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM, got {8 * fh.getsampwidth()}-bit")
        rate = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(samples=pcm.astype(float) / PCM16_FULL_SCALE, sample_rate=rate)


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path):
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def append_jsonl(path, record):
    with open(path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


KERNEL_CSV_HEADER = ["kernel_index", "spectral_mod_cyc_per_chan", "temporal_mod_hz",
                     "spectral_phase_rad", "temporal_phase_rad", "direction"]


def write_kernel_csv(path, scalars: np.ndarray, directions):
    """Dump per-kernel parameters, one row per kernel.

    ``scalars`` is (n, 4) ordered (spectral mod, temporal mod, spectral
    phase, temporal phase); ``directions`` is a matching sequence of
    "up"/"down" strings.
    """
    scalars = np.asarray(scalars, dtype=float)
    if scalars.ndim != 2 or scalars.shape[1] != 4:
        raise ValueError("scalars must be (n, 4)")
    if len(directions) != scalars.shape[0]:
        raise ValueError("directions length must match scalar rows")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(KERNEL_CSV_HEADER)
        for i, (row, direction) in enumerate(zip(scalars, directions)):
            writer.writerow([i, repr(float(row[0])), repr(float(row[1])),
                             repr(float(row[2])), repr(float(row[3])), direction])


def read_kernel_csv(path) -> tuple[np.ndarray, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != KERNEL_CSV_HEADER:
            raise ValueError(f"{path}: unexpected kernel CSV header {header}")
        rows, directions = [], []
        for rec in reader:
            rows.append([float(rec[1]), float(rec[2]), float(rec[3]), float(rec[4])])
            directions.append(rec[5])
    return np.asarray(rows, dtype=float), directions
