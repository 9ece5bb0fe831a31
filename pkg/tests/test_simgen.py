import hashlib
import itertools

import numpy as np
import pytest

from conftest import DATA
from spikeapprox import simgen
from spikeapprox.signal_core import ALIGN_INDEX, shift_samples, write_waveforms
from spikeapprox.simgen import (
    ConfigError,
    StreamConfig,
    TemplateParams,
    build_default_channels,
    generate_blocks,
    generate_stream,
    read_config,
    read_stream,
    render_template,
    template_correlation,
    write_config,
    write_stream,
)


class TestRender:
    def test_monophasic(self):
        w = render_template(TemplateParams((1.0,), (0.6,), (0.1,)))
        assert np.argmax(w.samples) == ALIGN_INDEX and w.samples.max() == 1.0
        assert w.samples.min() >= 0

    def test_negation(self):
        p = TemplateParams((1.0, -0.5), (0.6, 0.9), (0.08, 0.2))
        q = TemplateParams((-1.0, 0.5), (0.6, 0.9), (0.08, 0.2))
        np.testing.assert_array_equal(render_template(q).samples, -render_template(p).samples)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            TemplateParams((1.0, 1.0, 1.0, 1.0), (0.1,) * 4, (0.1,) * 4)
        with pytest.raises(ValueError):
            TemplateParams((1.0,), (0.5,), (0.0,))

    def test_zero_render_is_degenerate(self):
        with pytest.raises(ValueError, match="degenerate"):
            render_template(TemplateParams((0.0,), (0.5,), (0.1,)))

    def test_reference_golden_file(self, reference_template, tmp_path):
        path = tmp_path / "ref.csv"
        write_waveforms(path, [reference_template])
        assert path.read_bytes() == (DATA / "reference_biphasic_seed1.csv").read_bytes()

    def test_spike_invariants(self, templates):
        for w in templates:
            assert abs(np.abs(w.samples).max() - 1) <= 1e-12
            assert w.peak_index == ALIGN_INDEX == int(np.argmax(np.abs(w.samples)))


class TestChannels:
    def test_deterministic(self):
        assert build_default_channels(7) == build_default_channels(7)
        assert build_default_channels(7) != build_default_channels(8)

    def test_nine_by_three(self, default_channels):
        assert len(default_channels) == 9
        assert sum(len(c.templates) for c in default_channels) == 27
        assert [c.channel_id for c in default_channels] == list(range(1, 10))

    def test_all_shape_families_present(self, default_channels):
        kinds = {p.kind for c in default_channels for p in c.templates}
        assert kinds == {"monophasic", "biphasic", "triphasic"}

    def test_correlation_constraint_seeds_1_to_100(self):
        worst = -1.0
        for seed in range(1, 101):
            for c in build_default_channels(seed):
                waves = [render_template(p).samples for p in c.templates]
                for a, b in itertools.combinations(waves, 2):
                    worst = max(worst, template_correlation(a, b))
        assert worst <= simgen.MAX_TEMPLATE_CORR <= 0.95


class TestStream:
    def test_noiseless_equals_templates(self):
        cfg = StreamConfig(seed=2, sigma_n=0.0, spikes_per_template=5)
        for block in generate_blocks(cfg):
            np.testing.assert_array_equal(block.spikes, block.templates[block.labels])

    def test_noise_statistics(self):
        cfg = StreamConfig(seed=3, sigma_n=0.1, spikes_per_template=400, realign=False)
        residual = np.concatenate([(b.spikes - b.templates[b.labels]).ravel() for b in generate_blocks(cfg)])
        spikes = residual[: 10_000 * 66]
        n = spikes.size
        assert abs(spikes.mean()) <= 3 * 0.1 / np.sqrt(n)
        assert spikes.std() == pytest.approx(0.1, rel=0.05)

    def test_noise_independence(self):
        cfg = StreamConfig(seed=4, sigma_n=0.2, spikes_per_template=50, realign=False)
        block = generate_blocks(cfg)[0]
        noise = (block.spikes - block.templates[block.labels])
        pool = noise.ravel()[:10_000]
        pool = pool - pool.mean()
        for lag in (1, 2, 5):
            r = np.dot(pool[:-lag], pool[lag:]) / np.dot(pool, pool)
            assert abs(r) < 0.05
        rows = noise[:, 1:].ravel(), noise[:, :-1].ravel()
        assert abs(np.corrcoef(*rows)[0, 1]) < 0.05

    def test_counts_labels_and_order(self):
        cfg = StreamConfig(seed=1, sigma_n=0.1, spikes_per_template=30)
        stream = generate_stream(cfg)
        assert len(stream) == 9 * 3 * 30
        channels = [s.channel_id for s in stream]
        assert channels == sorted(channels)
        for cid in range(1, 10):
            labels = [s.template_id for s in stream if s.channel_id == cid]
            assert sorted(set(labels)) == [0, 1, 2]
            assert all(labels.count(t) == 30 for t in range(3))

    def test_realignment_shift_bounded(self):
        base = dict(seed=1, sigma_n=0.3, spikes_per_template=50)
        raw = generate_blocks(StreamConfig(realign=False, **base))
        aligned = generate_blocks(StreamConfig(**base))
        moved = 0
        for r, a in zip(raw, aligned):
            for x, y in zip(r.spikes, a.spikes):
                shifts = [d for d in (-1, 0, 1) if np.array_equal(shift_samples(x, d), y)]
                assert shifts
                moved += shifts[0] != 0
        assert moved > 0

    def test_same_seed_same_bytes(self):
        cfg = StreamConfig(seed=11, sigma_n=0.2, spikes_per_template=10)
        a = simgen.format_stream(cfg, generate_stream(cfg))
        b = simgen.format_stream(cfg, generate_stream(cfg))
        assert a == b
        c = simgen.format_stream(StreamConfig(seed=12, sigma_n=0.2, spikes_per_template=10),
                                 generate_stream(StreamConfig(seed=12, sigma_n=0.2, spikes_per_template=10)))
        assert a != c

    def test_channels_are_independent_substreams(self):
        a = generate_blocks(StreamConfig(seed=1, sigma_n=0.1, spikes_per_template=10))
        b = generate_blocks(StreamConfig(seed=1, sigma_n=0.1, spikes_per_template=10))
        np.testing.assert_array_equal(a[4].spikes, b[4].spikes)
        assert not np.array_equal(a[3].spikes, a[4].spikes)

    def test_golden_default_stream_digest(self, tmp_path):
        cfg = StreamConfig(seed=1)
        path = tmp_path / "s.csv"
        write_stream(path, cfg, generate_stream(cfg))
        expected = (DATA / "golden_stream_seed1.sha256").read_text().strip()
        assert hashlib.sha256(path.read_bytes()).hexdigest() == expected


class TestFiles:
    def test_stream_round_trip(self, tmp_path):
        cfg = StreamConfig(seed=9, sigma_n=0.05, spikes_per_template=4)
        stream = generate_stream(cfg)
        path = tmp_path / "s.csv"
        write_stream(path, cfg, stream)
        header = path.read_text().splitlines()[0]
        assert header.startswith("n_samples=66,period_us=") and "seed=9" in header and "rng=" in header
        cfg2, back = read_stream(path)
        assert cfg2 == cfg
        for a, b in zip(stream, back):
            assert (a.channel_id, a.template_id) == (b.channel_id, b.template_id)
            np.testing.assert_array_equal(a.waveform.samples, b.waveform.samples)

    def test_config_round_trip(self, tmp_path):
        cfg = StreamConfig(seed=42, sigma_n=0.15, spikes_per_template=12)
        path = tmp_path / "cfg.txt"
        write_config(path, cfg)
        assert read_config(path) == cfg

    def test_bad_key_named(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("seed=1\nsigma=0.1\n")
        with pytest.raises(ConfigError, match="'sigma'"):
            read_config(path)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("sigma_n=-1\n")
        with pytest.raises(ConfigError):
            read_config(path)

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("# desk run\n\nseed = 5  # five\n")
        assert read_config(path).seed == 5
