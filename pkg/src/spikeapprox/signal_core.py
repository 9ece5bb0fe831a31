"""Core waveform types, peak alignment and amplitude normalization."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

N_SAMPLES = 66
DURATION_S = 2e-3
SAMPLE_PERIOD_S = DURATION_S / N_SAMPLES
ALIGN_INDEX = 20


class DegenerateWaveformError(ValueError):
    pass


def peak_index_of(samples: np.ndarray, mode: str = "abs") -> int:
    """Index of the dominant sample; ``mode`` is ``"abs"`` or ``"positive"``."""
    if mode == "abs":
        return int(np.argmax(np.abs(samples)))
    if mode == "positive":
        return int(np.argmax(samples))
    raise ValueError(f"unknown peak mode {mode!r}")


@dataclass(frozen=True)
class SpikeWaveform:
    """A detected spike window of N samples.

    ``peak_index`` is derived from the samples (absolute maximum) when not
    given explicitly.
    """

    samples: np.ndarray
    sample_period: float = SAMPLE_PERIOD_S
    peak_index: int = field(default=-1)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if arr.size < 4:
            raise ValueError("waveform needs at least 4 samples")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if self.peak_index < 0:
            object.__setattr__(self, "peak_index", peak_index_of(arr))

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class ApproxSpike:
    """Retained sample positions and their (uninterpolated) values."""

    source_length: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64)
        vals = np.array(self.values, dtype=float)
        if idx.shape != vals.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-D and equal length")
        if idx.size and (idx[0] < 0 or idx[-1] >= self.source_length):
            raise ValueError("index out of range")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be strictly increasing")
        idx.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_source(cls, source: SpikeWaveform | np.ndarray, indices: Iterable[int]) -> "ApproxSpike":
        samples = source.samples if isinstance(source, SpikeWaveform) else np.asarray(source, dtype=float)
        idx = np.array(sorted(set(int(i) for i in indices)), dtype=np.int64)
        return cls(samples.size, idx, samples[idx])

    def __len__(self) -> int:
        return self.indices.size


def normalize_amplitude(w: SpikeWaveform) -> SpikeWaveform:
    """Scale so that max(|samples|) == 1."""
    peak = np.max(np.abs(w.samples))
    if not peak > 0:
        raise DegenerateWaveformError("degenerate waveform")
    return SpikeWaveform(w.samples / peak, w.sample_period)


def shift_samples(samples: np.ndarray, shift: int) -> np.ndarray:
    """Shift right by ``shift`` (left if negative), zero-filling the vacated end."""
    out = np.zeros_like(samples)
    n = samples.size
    if shift >= 0:
        out[shift:] = samples[: n - shift] if shift < n else []
    else:
        out[: n + shift] = samples[-shift:]
    return out


def align_peak(w: SpikeWaveform, target_index: int = ALIGN_INDEX, mode: str = "abs") -> SpikeWaveform:
    """Move the dominant sample to ``target_index``; samples pushed past the
    window edges are dropped."""
    n = len(w)
    if not 0 <= target_index < n:
        raise ValueError(f"target_index {target_index} outside [0, {n - 1}]")
    current = peak_index_of(w.samples, mode)
    shifted = shift_samples(w.samples, target_index - current)
    return SpikeWaveform(shifted, w.sample_period, peak_index=target_index)


# ---------------------------------------------------------------------------
# Serialization: ``n_samples=<N>,period_us=<float>`` header, one spike per line
# ---------------------------------------------------------------------------

def format_header(n_samples: int, period_s: float, **extra) -> str:
    parts = [f"n_samples={n_samples}", f"period_us={period_s * 1e6!r}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return ",".join(parts)


def parse_header(line: str) -> dict[str, str]:
    fields = {}
    for item in line.strip().split(","):
        if "=" not in item:
            raise ValueError(f"malformed header field {item!r}")
        key, value = item.split("=", 1)
        fields[key.strip()] = value.strip()
    if "n_samples" not in fields or "period_us" not in fields:
        raise ValueError("header must define n_samples and period_us")
    return fields


def format_samples(samples: Sequence[float], sep: str = ",") -> str:
    return sep.join(repr(float(x)) for x in samples)


def write_waveforms(path: str | Path, waveforms: Sequence[SpikeWaveform]) -> None:
    if not waveforms:
        raise ValueError("nothing to write")
    n = len(waveforms[0])
    lines = [format_header(n, waveforms[0].sample_period)]
    for w in waveforms:
        if len(w) != n:
            raise ValueError("all waveforms in one file must share n_samples")
        lines.append(format_samples(w.samples))
    Path(path).write_text("\n".join(lines) + "\n")


def read_waveforms(path: str | Path) -> list[SpikeWaveform]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = parse_header(lines[0])
    n = int(header["n_samples"])
    period = float(header["period_us"]) * 1e-6
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        samples = np.array([float(x) for x in line.split(",")])
        if samples.size != n:
            raise ValueError(f"{path}:{lineno}: expected {n} samples, got {samples.size}")
        out.append(SpikeWaveform(samples, period))
    return out
