import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import tone
from radar_aplanc.dsp import TimeSeries, psd
from radar_aplanc.errors import ArgumentError
from radar_aplanc.sampling import SampleSet, draw_offsets, random_temporal_sample, spectra_with_vjp

RATE = 120.0


def noise(seed, seconds=30.0):
    return TimeSeries(np.random.default_rng(seed).standard_normal(int(seconds * RATE)), RATE)


def test_single_full_length_sample_is_psd():
    x = noise(0, 12.0)
    s = random_temporal_sample(x, 1, 12.0, np.random.default_rng(0))
    ref = psd(x, df=0.05)
    assert len(s) == 1 and s.offsets.tolist() == [0]
    np.testing.assert_array_equal(s.spectra[0].power, ref.power)
    np.testing.assert_array_equal(s.freqs_hz, ref.freqs_hz)


def test_stationary_sinusoid_spectra_agree():
    x = TimeSeries(tone(1.3, seconds=40.0), RATE)
    s = random_temporal_sample(x, 8, 10.0, np.random.default_rng(1))
    m = s.matrix()
    dist = np.linalg.norm(m[:, None, :] - m[None, :, :], axis=-1)
    assert dist.max() < 0.05


def test_shape_and_shared_grid():
    s = random_temporal_sample(noise(1), 4, 10.0, np.random.default_rng(2), source_tag="negative")
    assert len(s) == 4 and s.matrix().shape[0] == 4
    assert all(s.spectra[0].same_grid(sp) for sp in s.spectra)
    assert s.source_tag == "negative"


def test_offsets_reproducible_and_in_range():
    x = noise(2)
    a = random_temporal_sample(x, 16, 10.0, np.random.default_rng(7))
    b = random_temporal_sample(x, 16, 10.0, np.random.default_rng(7))
    assert np.array_equal(a.offsets, b.offsets)
    assert np.all((a.offsets >= 0) & (a.offsets <= len(x) - 1200))


def test_offsets_reusable_across_sets():
    x, y = noise(3), noise(4)
    a = random_temporal_sample(x, 4, 10.0, np.random.default_rng(0))
    b = random_temporal_sample(y, 4, 10.0, offsets=a.offsets, source_tag="positive")
    assert np.array_equal(a.offsets, b.offsets)


def test_offsets_uniform():
    draws = draw_offsets(100, 10, 200_000, np.random.default_rng(0))
    counts = np.bincount(draws, minlength=91)
    assert counts.size == 91
    assert counts.min() > 0.9 * counts.mean() and counts.max() < 1.1 * counts.mean()


def test_too_short():
    with pytest.raises(ArgumentError):
        random_temporal_sample(noise(0, 5.0), 2, 10.0, np.random.default_rng(0))


def test_needs_rng_or_offsets():
    with pytest.raises(ArgumentError):
        random_temporal_sample(noise(0), 2, 10.0)


def test_sample_set_validation():
    a = psd(noise(0, 10.0), df=0.05)
    b = psd(noise(1, 10.0), df=0.01)
    with pytest.raises(ArgumentError):
        SampleSet([a, b], "positive", np.zeros(2))
    with pytest.raises(ArgumentError):
        SampleSet([a], "other", np.zeros(1))
    with pytest.raises(ArgumentError):
        SampleSet([], "positive", np.zeros(0))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), df=st.sampled_from([0.01, 0.05, 0.1]), normalize=st.booleans())
def test_differentiable_spectra_match_psd(seed, df, normalize):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(1500) + 3.0
    offsets = draw_offsets(len(x), 1200, 3, rng)
    u, freqs, _ = spectra_with_vjp(x, offsets, 1200, RATE, df=df, normalize=normalize)
    for row, o in zip(u, offsets):
        ref = psd(TimeSeries(x[o : o + 1200], RATE), df=df)
        np.testing.assert_array_equal(freqs, ref.freqs_hz)
        if normalize:
            np.testing.assert_allclose(row, ref.power, rtol=1e-9, atol=1e-12)
        else:
            np.testing.assert_allclose(row / np.linalg.norm(row), ref.power, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("normalize", [True, False])
def test_spectra_vjp_finite_differences(normalize):
    rng = np.random.default_rng(5)
    x = rng.standard_normal(300)
    offsets = np.array([0, 37, 37, 100])
    g = rng.standard_normal((4, spectra_with_vjp(x, offsets, 200, 60.0)[0].shape[1]))

    def f(v):
        return float(np.sum(g * spectra_with_vjp(v, offsets, 200, 60.0, normalize=normalize)[0]))

    _, _, vjp = spectra_with_vjp(x, offsets, 200, 60.0, normalize=normalize)
    analytic = vjp(g)
    eps = 1e-6
    for i in rng.choice(300, 40, replace=False):
        e = np.zeros_like(x)
        e[i] = eps
        fd = (f(x + e) - f(x - e)) / (2 * eps)
        assert fd == pytest.approx(analytic[i], rel=1e-5, abs=1e-9)
