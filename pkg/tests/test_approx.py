import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import conv_difference, select_samples_oracle
from spikeapprox import simgen
from spikeapprox.approx import (
    SelectionRule,
    WaveformTooShortError,
    approximation_cost,
    cascaded_derivatives,
    channel_index_set,
    rank_peaks,
    read_approx,
    select_samples,
    write_approx,
)
from spikeapprox.features import add_coefficients
from spikeapprox.signal_core import SpikeWaveform

# Frozen from tests/oracles.select_samples_oracle on the seed-1 reference template.
REFERENCE_INDICES = [10, 11, 12, 16, 17, 18, 20, 21, 22, 23, 24, 25, 26,
                     30, 31, 32, 36, 40, 41, 42, 63, 64]


class TestCascade:
    def test_constant(self):
        c = cascaded_derivatives(np.full(5, 5.0))
        assert not c.fd.any() and not c.sd.any() and not c.td.any()

    def test_ramp(self):
        c = cascaded_derivatives(np.arange(7.0))
        np.testing.assert_array_equal(c.fd, np.ones(6))
        assert not c.sd.any() and not c.td.any()

    def test_quadratic(self):
        c = cascaded_derivatives(np.array([0, 1, 4, 9, 16.0]))
        np.testing.assert_array_equal(c.fd, [1, 3, 5, 7])
        np.testing.assert_array_equal(c.sd, [2, 2, 2])
        np.testing.assert_array_equal(c.td, [0, 0])

    def test_too_short(self):
        with pytest.raises(WaveformTooShortError, match="too short"):
            cascaded_derivatives(np.ones(3))

    @given(arrays(np.int64, st.integers(4, 100), elements=st.integers(-10**6, 10**6)))
    def test_matches_binomial_convolution_bit_exact(self, s):
        c = cascaded_derivatives(s.astype(float))
        for order, d in ((1, c.fd), (2, c.sd), (3, c.td)):
            np.testing.assert_array_equal(d, conv_difference(s, order))

    def test_pointwise_formulas(self, rng):
        s = rng.integers(-50, 50, size=66).astype(float)
        c = cascaded_derivatives(s)
        n = np.arange(3, 66)
        np.testing.assert_array_equal(c.td, s[n] - 3 * s[n - 1] + 3 * s[n - 2] - s[n - 3])
        m = np.arange(2, 66)
        np.testing.assert_array_equal(c.sd, s[m] - 2 * s[m - 1] + s[m - 2])

    def test_fd_is_add_delta_one(self, reference_template):
        np.testing.assert_array_equal(cascaded_derivatives(reference_template).fd,
                                      add_coefficients(reference_template.samples, 1))


class TestRankPeaks:
    def test_magnitude_order(self):
        assert rank_peaks([0, 1, 0, 2, 0], 2).indices == (3, 1)

    def test_absolute_value(self):
        assert rank_peaks([0, -3, 0, 2, 0], 2).indices == (1, 3)

    def test_monotone_has_no_interior_peak(self):
        assert rank_peaks([1, 2, 3, 4], 5).indices == ()

    def test_plateau_credited_to_first_index(self):
        assert rank_peaks([0, 2, 2, 0], None).indices == (1,)

    def test_tie_goes_to_smaller_index(self):
        assert rank_peaks([0, 2, 0, -2, 0], None).indices == (1, 3)

    def test_short_result_when_few_peaks(self):
        assert len(rank_peaks([0, 1, 0, 1, 0], 10).indices) == 2

    def test_to_source_offsets(self):
        assert rank_peaks([0, 5, 0], None, source="SD").to_source() == (3,)


class TestSelectSamples:
    def test_reference_template_matches_frozen_oracle(self, reference_template):
        assert select_samples_oracle(reference_template.samples) == REFERENCE_INDICES
        assert list(select_samples(reference_template).indices) == REFERENCE_INDICES

    def test_every_template_keeps_22(self, templates):
        for w in templates:
            a = select_samples(w)
            assert len(a) == 22 and a.source_length == 66

    def test_identity_when_short(self, rng):
        x = rng.normal(size=22)
        a = select_samples(x)
        np.testing.assert_array_equal(a.indices, np.arange(22))
        np.testing.assert_array_equal(a.values, x)

    def test_fewer_than_target(self):
        assert len(select_samples(np.array([0, 1, 0, 2, 0.0]))) == 5

    def test_flat_spike_still_22(self):
        assert len(select_samples(np.zeros(66))) == 22
        assert len(select_samples(np.ones(66))) == 22

    def test_custom_rule_overflow_truncates(self, reference_template):
        rule = SelectionRule(sd_peaks=10, fd_peaks=10, td_peaks=10, target_count=22)
        assert len(select_samples(reference_template, rule)) == 22

    def test_default_rule_nominal_count(self):
        assert SelectionRule().nominal_count == 22

    def test_too_short(self):
        with pytest.raises(WaveformTooShortError):
            select_samples(np.ones(3))

    def test_matches_oracle_on_noisy_corpus(self):
        cfg = simgen.StreamConfig(seed=5, sigma_n=0.15, spikes_per_template=10)
        for block in simgen.generate_blocks(cfg):
            for s in block.spikes:
                assert list(select_samples(s).indices) == select_samples_oracle(s)

    @settings(max_examples=150, deadline=None)
    @given(arrays(float, st.integers(4, 120), elements=st.floats(-5, 5, allow_nan=False)))
    def test_cardinality_and_validity(self, x):
        a = select_samples(x)
        assert len(a) == min(x.size, 22)
        assert np.all(np.diff(a.indices) > 0)
        np.testing.assert_array_equal(a.values, x[a.indices])
        assert list(a.indices) == select_samples_oracle(x)


def _tie_free(x, gap=1e-6):
    c = cascaded_derivatives(x)
    for d in (c.fd, c.sd, c.td, x):
        m = np.sort(np.abs(d))
        if np.any(np.diff(m) < gap * max(m[-1], 1e-300)):
            return False
    return True


@pytest.mark.parametrize("alpha", [0.5, 2.0, 3.7, 0.013])
def test_positive_scale_invariance(alpha):
    cfg = simgen.StreamConfig(seed=3, sigma_n=0.1, spikes_per_template=20)
    checked = 0
    for block in simgen.generate_blocks(cfg):
        for s in block.spikes:
            if _tie_free(s):
                checked += 1
                np.testing.assert_array_equal(select_samples(s).indices, select_samples(alpha * s).indices)
    assert checked > 100


def test_channel_index_set_uses_mean_spike():
    cfg = simgen.StreamConfig(seed=1, sigma_n=0.1, spikes_per_template=20)
    block = simgen.generate_blocks(cfg)[0]
    idx = channel_index_set(block.spikes)
    np.testing.assert_array_equal(idx, select_samples(block.spikes.mean(axis=0)).indices)
    assert len(idx) == 22


@pytest.mark.parametrize("n, adds", [(66, 192), (4, 6), (22, 60)])
def test_approximation_cost(n, adds):
    assert approximation_cost(n) == (adds, 0)


def test_approx_file_round_trip(tmp_path, templates):
    spikes = [select_samples(w) for w in templates[:4]]
    path = tmp_path / "a.txt"
    write_approx(path, spikes, templates[0].sample_period)
    assert path.read_text().splitlines()[1].startswith("indices=")
    back = read_approx(path)
    for a, b in zip(spikes, back):
        np.testing.assert_array_equal(a.indices, b.indices)
        np.testing.assert_array_equal(a.values, b.values)
