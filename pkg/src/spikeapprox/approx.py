"""Derivative cascade and non-uniform sample selection.

The first three backward differences of a spike locate its slopes (FD),
curvatures (SD) and higher-order bends (TD).  The strongest local maxima of
each absolute difference trace decide which samples survive: three samples
around each of the top SD peaks, and one sample at each of the top FD and TD
peaks.  Under the default rule this keeps 4*3 + 7 + 3 = 22 samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .signal_core import ApproxSpike, SpikeWaveform, format_header, format_samples, parse_header

# Offset from derivative-array position to source-sample index: element j of
# the order-m difference belongs to sample j + m (the "current" sample).
ORDER_OFFSET = {"FD": 1, "SD": 2, "TD": 3}


class WaveformTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class DerivativeCascade:
    fd: np.ndarray
    sd: np.ndarray
    td: np.ndarray

    def trace(self, name: str) -> np.ndarray:
        return {"FD": self.fd, "SD": self.sd, "TD": self.td}[name]


@dataclass(frozen=True)
class RankedPeaks:
    indices: tuple[int, ...]
    source: str

    def to_source(self) -> tuple[int, ...]:
        """Peak positions in source-sample coordinates."""
        off = ORDER_OFFSET[self.source]
        return tuple(i + off for i in self.indices)


@dataclass(frozen=True)
class SelectionRule:
    sd_peaks: int = 4
    sd_window: int = 3
    fd_peaks: int = 7
    td_peaks: int = 3
    target_count: int = 22

    def __post_init__(self):
        if min(self.sd_peaks, self.fd_peaks, self.td_peaks) < 0:
            raise ValueError("peak counts must be non-negative")
        if self.sd_window < 1 or self.target_count < 1:
            raise ValueError("sd_window and target_count must be positive")

    @property
    def nominal_count(self) -> int:
        return self.sd_peaks * self.sd_window + self.fd_peaks + self.td_peaks


DEFAULT_RULE = SelectionRule()


def cascaded_derivatives(s: SpikeWaveform | np.ndarray) -> DerivativeCascade:
    x = s.samples if isinstance(s, SpikeWaveform) else np.asarray(s, dtype=float)
    if x.size < 4:
        raise WaveformTooShortError("waveform too short for third derivative")
    fd = x[1:] - x[:-1]
    sd = fd[1:] - fd[:-1]
    td = sd[1:] - sd[:-1]
    return DerivativeCascade(fd, sd, td)


def local_maxima(mag: np.ndarray) -> np.ndarray:
    """Interior indices i with mag[i] > mag[i-1] and mag[i] >= mag[i+1]."""
    if mag.size < 3:
        return np.empty(0, dtype=np.int64)
    mid = mag[1:-1]
    hits = (mid > mag[:-2]) & (mid >= mag[2:])
    return np.flatnonzero(hits) + 1


def rank_peaks(d: Sequence[float], max_count: int | None = None, source: str = "FD") -> RankedPeaks:
    """Local maxima of |d| ordered by magnitude, largest first.

    Ties go to the smaller index.  ``max_count=None`` returns every peak.
    """
    mag = np.abs(np.asarray(d, dtype=float))
    cand = local_maxima(mag)
    # lexsort: last key is primary
    order = cand[np.lexsort((cand, -mag[cand]))]
    if max_count is not None:
        order = order[:max_count]
    return RankedPeaks(tuple(int(i) for i in order), source)


def sd_window(p: int, width: int, n: int) -> list[int]:
    """``width`` samples centred on ``p`` (p, p-1, p+1, p-2, ...), clipped to the
    window and topped up from the nearest in-range neighbours."""
    picks = [p]
    step = 1
    while len(picks) < width and step < n:
        for q in (p - step, p + step):
            if 0 <= q < n and len(picks) < width:
                picks.append(q)
        step += 1
    return picks


def priority_sequence(x: np.ndarray, rule: SelectionRule) -> list[int]:
    """Every source index in the order the selection rule wants it.

    Primary contributions come first (SD windows, then FD, then TD, each in
    rank order), then the remaining ranked peaks in the same family order,
    then all samples by descending |x|.
    """
    n = x.size
    cascade = cascaded_derivatives(x)
    sd = rank_peaks(cascade.sd, source="SD").to_source()
    fd = rank_peaks(cascade.fd, source="FD").to_source()
    td = rank_peaks(cascade.td, source="TD").to_source()

    seq: list[int] = []
    for p in sd[: rule.sd_peaks]:
        seq.extend(sd_window(p, rule.sd_window, n))
    seq.extend(fd[: rule.fd_peaks])
    seq.extend(td[: rule.td_peaks])
    for p in sd[rule.sd_peaks:]:
        seq.extend(sd_window(p, rule.sd_window, n))
    seq.extend(fd[rule.fd_peaks:])
    seq.extend(td[rule.td_peaks:])
    by_magnitude = np.lexsort((np.arange(n), -np.abs(x)))
    seq.extend(int(i) for i in by_magnitude)
    return seq


def select_samples(s: SpikeWaveform | np.ndarray, rule: SelectionRule = DEFAULT_RULE) -> ApproxSpike:
    """Keep exactly ``min(N, rule.target_count)`` samples of ``s``."""
    x = s.samples if isinstance(s, SpikeWaveform) else np.asarray(s, dtype=float)
    if x.size < 4:
        raise WaveformTooShortError("waveform too short for third derivative")
    target = min(x.size, rule.target_count)
    if target == x.size:
        return ApproxSpike.from_source(x, range(x.size))

    chosen: list[int] = []
    seen: set[int] = set()
    for i in priority_sequence(x, rule):
        if i not in seen:
            seen.add(i)
            chosen.append(i)
            if len(chosen) == target:
                break
    return ApproxSpike.from_source(x, chosen)


def select_batch(spikes: np.ndarray, rule: SelectionRule = DEFAULT_RULE) -> tuple[np.ndarray, np.ndarray]:
    """Apply :func:`select_samples` row-wise; returns (indices, values) arrays."""
    spikes = np.atleast_2d(np.asarray(spikes, dtype=float))
    approx = [select_samples(row, rule) for row in spikes]
    return np.stack([a.indices for a in approx]), np.stack([a.values for a in approx])


def channel_index_set(spikes: np.ndarray, rule: SelectionRule = DEFAULT_RULE) -> np.ndarray:
    """Retained indices for a whole channel: the rule applied to the channel's
    mean spike.  Averaging suppresses the noise that the second and third
    differences amplify, and every spike of the channel then shares one
    sample layout."""
    spikes = np.atleast_2d(np.asarray(spikes, dtype=float))
    return select_samples(spikes.mean(axis=0), rule).indices


def approximation_cost(n: int) -> tuple[int, int]:
    """(adds, muls) for the three difference passes on an n-sample spike."""
    if n < 4:
        raise WaveformTooShortError("waveform too short for third derivative")
    return (n - 1) + (n - 2) + (n - 3), 0


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def format_approx(a: ApproxSpike) -> str:
    idx = ";".join(str(int(i)) for i in a.indices)
    return f"indices={idx},values={format_samples(a.values, sep=';')}"


def parse_approx(line: str, source_length: int) -> ApproxSpike:
    left, right = line.strip().split(",values=")
    if not left.startswith("indices="):
        raise ValueError(f"malformed approx line {line!r}")
    idx = [int(t) for t in left[len("indices="):].split(";") if t]
    vals = [float(t) for t in right.split(";") if t]
    return ApproxSpike(source_length, np.array(idx), np.array(vals))


def write_approx(path: str | Path, spikes: Sequence[ApproxSpike], period_s: float) -> None:
    if not spikes:
        raise ValueError("nothing to write")
    lines = [format_header(spikes[0].source_length, period_s)]
    lines += [format_approx(a) for a in spikes]
    Path(path).write_text("\n".join(lines) + "\n")


def read_approx(path: str | Path) -> list[ApproxSpike]:
    lines = Path(path).read_text().splitlines()
    header = parse_header(lines[0])
    n = int(header["n_samples"])
    return [parse_approx(line, n) for line in lines[1:] if line.strip()]
