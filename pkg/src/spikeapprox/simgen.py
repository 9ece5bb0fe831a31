"""Parametric neural-stream simulator.

Nine recording channels, three spike templates each.  Templates are sums of
Gaussian lobes (mono-, bi- and triphasic), normalized to unit peak and
aligned; spikes are templates plus white Gaussian noise, re-aligned after the
noise is added.  Every random draw comes from a numpy ``PCG64`` generator
seeded by ``SeedSequence([seed, channel_id])`` so channels are independent
substreams.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import signal_core as sc
from .signal_core import SpikeWaveform, align_peak, normalize_amplitude

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"
N_CHANNELS = 9
TEMPLATES_PER_CHANNEL = 3
MAX_TEMPLATE_CORR = 0.85
REALIGN_RADIUS = 1
# Substream key for template synthesis; channel noise uses keys 1..9.
_TEMPLATE_STREAM = 0


@dataclass(frozen=True)
class TemplateParams:
    amplitudes: tuple[float, ...]
    centers_ms: tuple[float, ...]
    widths_ms: tuple[float, ...]
    duration_ms: float = 2.0
    n_samples: int = sc.N_SAMPLES

    def __post_init__(self):
        k = len(self.amplitudes)
        if not 1 <= k <= 3:
            raise ValueError("a template has 1 to 3 lobes")
        if len(self.centers_ms) != k or len(self.widths_ms) != k:
            raise ValueError("amplitudes, centers and widths must have equal length")
        if any(w <= 0 for w in self.widths_ms):
            raise ValueError("lobe widths must be positive")
        if self.n_samples < 4 or self.duration_ms <= 0:
            raise ValueError("need n_samples >= 4 and positive duration")

    @property
    def kind(self) -> str:
        return {1: "monophasic", 2: "biphasic", 3: "triphasic"}[len(self.amplitudes)]


@dataclass(frozen=True)
class ChannelSpec:
    channel_id: int
    templates: tuple[TemplateParams, ...]
    spikes_per_template: int = 100

    def __post_init__(self):
        if len(self.templates) != TEMPLATES_PER_CHANNEL:
            raise ValueError(f"channel {self.channel_id}: need exactly {TEMPLATES_PER_CHANNEL} templates")
        if self.spikes_per_template < 1:
            raise ValueError("spikes_per_template must be positive")


@dataclass(frozen=True)
class StreamConfig:
    """Simulator description.  ``channels=None`` means the default nine
    channels built from ``seed``."""

    seed: int = 1
    sigma_n: float = 0.1
    spikes_per_template: int = 100
    align_index: int = sc.ALIGN_INDEX
    realign: bool = True
    realign_radius: int = REALIGN_RADIUS
    max_template_corr: float = MAX_TEMPLATE_CORR
    channels: tuple[ChannelSpec, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.sigma_n < 0:
            raise ValueError("sigma_n must be >= 0")
        if not 0 < self.max_template_corr <= 0.95:
            raise ValueError("max_template_corr must be in (0, 0.95]")
        if self.realign_radius < 0:
            raise ValueError("realign_radius must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def resolved_channels(self) -> tuple[ChannelSpec, ...]:
        if self.channels is not None:
            return self.channels
        return build_default_channels(self.seed, self.spikes_per_template, self.align_index,
                                      self.max_template_corr)

    def echo(self) -> dict[str, str]:
        """Flat key=value view written to stream headers and manifests."""
        return {
            "seed": str(self.seed),
            "sigma_n": repr(float(self.sigma_n)),
            "spikes_per_template": str(self.spikes_per_template),
            "align_index": str(self.align_index),
            "realign": str(int(self.realign)),
            "realign_radius": str(self.realign_radius),
            "max_template_corr": repr(float(self.max_template_corr)),
            "rng": RNG_ALGORITHM,
        }


@dataclass(frozen=True)
class LabeledSpike:
    channel_id: int
    template_id: int
    waveform: SpikeWaveform


def render_template(p: TemplateParams, align_index: int = sc.ALIGN_INDEX) -> SpikeWaveform:
    t = np.arange(p.n_samples) * (p.duration_ms / p.n_samples)
    x = np.zeros(p.n_samples)
    for a, c, w in zip(p.amplitudes, p.centers_ms, p.widths_ms):
        x += a * np.exp(-0.5 * ((t - c) / w) ** 2)
    period = p.duration_ms * 1e-3 / p.n_samples
    w = normalize_amplitude(SpikeWaveform(x, period))
    return align_peak(w, align_index)


def _draw_template(rng: np.random.Generator, kind: int) -> TemplateParams:
    """kind 0/1/2 -> mono/bi/triphasic.  The main lobe dominates every
    other lobe by at least 1/0.75 so the aligned peak is well defined."""
    sign = rng.choice((-1.0, 1.0))
    c0 = rng.uniform(0.55, 0.7)
    amps = [sign]
    centers = [c0]
    widths = [rng.uniform(0.05, 0.14)]
    if kind >= 1:
        amps.append(-sign * rng.uniform(0.2, 0.75))
        centers.append(c0 + rng.uniform(0.2, 0.55))
        widths.append(rng.uniform(0.08, 0.3))
    if kind == 2:
        amps.append(-sign * rng.uniform(0.15, 0.5))
        centers.append(c0 - rng.uniform(0.15, 0.3))
        widths.append(rng.uniform(0.04, 0.1))
    return TemplateParams(tuple(float(a) for a in amps), tuple(float(c) for c in centers),
                          tuple(float(w) for w in widths))


def template_correlation(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.corrcoef(a, b)[0, 1])


def build_default_channels(seed: int, spikes_per_template: int = 100,
                           align_index: int = sc.ALIGN_INDEX,
                           max_corr: float = MAX_TEMPLATE_CORR) -> tuple[ChannelSpec, ...]:
    """Nine channels of three templates, reproducible per seed.

    Channel c opens with template kind ``c % 3`` so all three shape families
    appear; the rest are drawn at random.  Candidates correlating above
    ``max_corr`` with an earlier template of the same channel are rejected.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _TEMPLATE_STREAM])))
    channels = []
    for cid in range(1, N_CHANNELS + 1):
        accepted: list[TemplateParams] = []
        rendered: list[np.ndarray] = []
        while len(accepted) < TEMPLATES_PER_CHANNEL:
            kind = cid % 3 if not accepted else int(rng.integers(3))
            cand = _draw_template(rng, kind)
            wave = render_template(cand, align_index).samples
            if all(template_correlation(wave, r) <= max_corr for r in rendered):
                accepted.append(cand)
                rendered.append(wave)
        channels.append(ChannelSpec(cid, tuple(accepted), spikes_per_template))
    return tuple(channels)


def channel_rng(seed: int, channel_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, channel_id])))


def realign_rows(x: np.ndarray, target: int, radius: int | None = None) -> np.ndarray:
    """Shift each row so its absolute peak sits at ``target``.

    With ``radius`` set, the peak is searched only within ``target +/- radius``,
    as a detector tracking an already-aligned spike would.
    """
    lo, hi = (0, x.shape[1]) if radius is None else (max(0, target - radius), target + radius + 1)
    peaks = np.argmax(np.abs(x[:, lo:hi]), axis=1) + lo
    out = x.copy()
    for r in np.flatnonzero(peaks != target):
        out[r] = sc.shift_samples(x[r], target - int(peaks[r]))
    return out


@dataclass
class ChannelBlock:
    """One channel's spikes as arrays: ``labels[i]`` is the template id of
    ``spikes[i]``; ``templates`` holds the noiseless rendered templates."""

    channel_id: int
    labels: np.ndarray
    spikes: np.ndarray
    templates: np.ndarray


def generate_channel(spec: ChannelSpec, cfg: StreamConfig) -> ChannelBlock:
    templates = np.stack([render_template(p, cfg.align_index).samples for p in spec.templates])
    rng = channel_rng(cfg.seed, spec.channel_id)
    labels = rng.permutation(np.repeat(np.arange(TEMPLATES_PER_CHANNEL), spec.spikes_per_template))
    noise = rng.standard_normal((labels.size, templates.shape[1]))
    spikes = templates[labels] + cfg.sigma_n * noise if cfg.sigma_n > 0 else templates[labels].copy()
    if cfg.realign and cfg.sigma_n > 0:
        spikes = realign_rows(spikes, cfg.align_index, cfg.realign_radius)
    return ChannelBlock(spec.channel_id, labels, spikes, templates)


def generate_blocks(cfg: StreamConfig) -> list[ChannelBlock]:
    return [generate_channel(spec, cfg) for spec in cfg.resolved_channels()]


def generate_stream(cfg: StreamConfig) -> list[LabeledSpike]:
    """Spikes in interleaved channel order, one block per channel."""
    period = sc.SAMPLE_PERIOD_S
    out = []
    for block in generate_blocks(cfg):
        for label, row in zip(block.labels, block.spikes):
            out.append(LabeledSpike(block.channel_id, int(label), SpikeWaveform(row, period)))
    return out


def blocks_from_stream(stream: Sequence[LabeledSpike]) -> list[ChannelBlock]:
    """Regroup a spike list into per-channel arrays (templates left empty)."""
    by_channel: dict[int, list[LabeledSpike]] = {}
    for s in stream:
        by_channel.setdefault(s.channel_id, []).append(s)
    blocks = []
    for cid in sorted(by_channel):
        spikes = by_channel[cid]
        blocks.append(ChannelBlock(cid, np.array([s.template_id for s in spikes]),
                                   np.stack([s.waveform.samples for s in spikes]),
                                   np.empty((0, len(spikes[0].waveform)))))
    return blocks


# ---------------------------------------------------------------------------
# Files: flat key=value config; stream = header + ``channel,template_id,<samples>``
# ---------------------------------------------------------------------------

class ConfigError(ValueError):
    pass


CONFIG_KEYS = {
    "seed": int,
    "sigma_n": float,
    "spikes_per_template": int,
    "align_index": int,
    "realign": lambda v: bool(int(v)),
    "realign_radius": int,
    "max_template_corr": float,
}


def config_from_mapping(values: dict[str, str], base: StreamConfig | None = None) -> StreamConfig:
    kwargs = {}
    for key, raw in values.items():
        if key in ("rng", "numpy", "n_samples", "period_us", "version"):
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kwargs[key] = CONFIG_KEYS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for config key {key!r}: {raw!r}") from exc
    try:
        return dataclasses.replace(base or StreamConfig(), **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def read_config(path: str | Path) -> StreamConfig:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return config_from_mapping(values)


def write_config(path: str | Path, cfg: StreamConfig) -> None:
    echo = cfg.echo()
    lines = [f"{k}={echo[k]}" for k in CONFIG_KEYS]
    Path(path).write_text("\n".join(lines) + "\n")


def format_stream(cfg: StreamConfig, stream: Sequence[LabeledSpike]) -> str:
    n = len(stream[0].waveform) if stream else sc.N_SAMPLES
    lines = [sc.format_header(n, sc.SAMPLE_PERIOD_S, **cfg.echo())]
    for s in stream:
        lines.append(f"{s.channel_id},{s.template_id},{sc.format_samples(s.waveform.samples)}")
    return "\n".join(lines) + "\n"


def write_stream(path: str | Path, cfg: StreamConfig, stream: Sequence[LabeledSpike]) -> None:
    Path(path).write_text(format_stream(cfg, stream))


def read_stream(path: str | Path) -> tuple[StreamConfig, list[LabeledSpike]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty stream file")
    header = sc.parse_header(lines[0])
    n = int(header["n_samples"])
    period = float(header["period_us"]) * 1e-6
    cfg = config_from_mapping(header)
    stream = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n + 2:
            raise ValueError(f"{path}:{lineno}: expected {n + 2} fields, got {len(parts)}")
        wave = SpikeWaveform(np.array([float(v) for v in parts[2:]]), period)
        stream.append(LabeledSpike(int(parts[0]), int(parts[1]), wave))
    return cfg, stream


def iter_templates(channels: Sequence[ChannelSpec], align_index: int = sc.ALIGN_INDEX) -> Iterator[tuple[int, int, SpikeWaveform]]:
    for spec in channels:
        for tid, p in enumerate(spec.templates):
            yield spec.channel_id, tid, render_template(p, align_index)
