import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from helpers import SR, clip, tone
from microvid import audioaffect as aa

C_MAJOR = [261.63, 329.63, 392.0]
A_MINOR = [220.0, 261.63, 329.63]


def click_track(rate, seconds=6.0, phase=0.25):
    x = np.zeros(int(seconds * SR))
    t = np.arange(phase, seconds, 1.0 / rate)
    x[(t * SR).astype(int)] = 1.0
    return x


class TestEnergy:
    def test_full_scale_sine(self):
        assert aa.total_energy(clip(tone(440, amp=1.0))) == pytest.approx(0.5, abs=1e-6)

    def test_short_time_stationary(self):
        c = clip(tone(440, amp=1.0))
        assert aa.short_time_energy(c) == pytest.approx(aa.total_energy(c), abs=1e-6)

    def test_half_silence(self):
        x = tone(440, amp=1.0)
        x[: 3 * SR] = 0.0
        # windows start at 0..4 s: energies 0, 0, 0.25, 0.5, 0.5
        assert aa.short_time_energy(clip(x)) == pytest.approx(0.25, abs=1e-6)

    def test_silence(self):
        z = clip(np.zeros(6 * SR))
        assert aa.total_energy(z) == 0.0 and aa.short_time_energy(z) == 0.0

    def test_empty(self):
        with pytest.raises(ValueError):
            aa.total_energy(clip(np.zeros(0)))


class TestZCR:
    def test_440(self):
        assert abs(aa.zero_crossing_rate(clip(tone(440, amp=1.0))) - 880) <= 1

    def test_silence(self):
        assert aa.zero_crossing_rate(clip(np.zeros(SR))) == 0.0


class TestMode:
    def test_c_major(self):
        m = aa.mode_estimate(clip(tone(C_MAJOR)))
        assert m > 0
        assert m == pytest.approx(0.0338, abs=1e-3)

    def test_a_minor(self):
        m = aa.mode_estimate(clip(tone(A_MINOR)))
        assert m < 0
        assert m == pytest.approx(-0.3059, abs=1e-3)

    def test_silence(self):
        assert aa.mode_estimate(clip(np.zeros(6 * SR))) == 0.0

    @pytest.mark.parametrize("chord,sign", [(C_MAJOR, 1), (A_MINOR, -1)])
    def test_octave_equivalence(self, chord, sign):
        assert np.sign(aa.mode_estimate(clip(tone([2 * f for f in chord])))) == sign

    def test_key_strengths_match_scipy(self):
        chroma = aa.chromagram(clip(tone(C_MAJOR)))
        major, minor = aa.key_strengths(chroma)
        for k in range(12):
            assert major[k] == pytest.approx(stats.pearsonr(np.roll(chroma, -k), aa.MAJOR_PROFILE)[0], abs=1e-12)
            assert minor[k] == pytest.approx(stats.pearsonr(np.roll(chroma, -k), aa.MINOR_PROFILE)[0], abs=1e-12)
        # C major is the best major key
        assert major.argmax() == 0


class TestRoughness:
    def test_pure_sine(self):
        assert aa.roughness(clip(tone(440))) == 0.0

    def test_semitone_rougher_than_octave(self):
        semitone = aa.roughness(clip(tone([440, 466.16])))
        octave = aa.roughness(clip(tone([440, 880])))
        assert semitone > 100 * octave

    def test_plomp_levelt_zero_at_unison(self):
        assert aa.plomp_levelt(440.0, 440.0, 1.0, 1.0) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(st.floats(50, 2000), st.floats(0, 500), st.floats(0, 1), st.floats(0, 1))
    def test_plomp_levelt_nonnegative(self, f, df, a1, a2):
        assert aa.plomp_levelt(f, f + df, a1, a2) >= 0.0


class TestOnsets:
    @pytest.mark.parametrize("phase", [0.1, 0.25, 0.37])
    def test_two_hz_clicks(self, phase):
        assert aa.onset_rate(clip(click_track(2.0, phase=phase))) == pytest.approx(2.0, abs=0.2)

    def test_sine(self):
        assert aa.onset_rate(clip(tone(440))) == 0.0

    def test_silence(self):
        assert aa.onset_rate(clip(np.zeros(6 * SR))) == 0.0

    def test_spectral_flux_rectified(self):
        mag = np.array([[1.0, 2.0], [0.0, 3.0], [2.0, 3.0]])
        assert np.array_equal(aa.spectral_flux(mag), [0.0, 1.0, 2.0])


def test_amplitude_scaling():
    x = tone(C_MAJOR) + 0.05 * np.random.default_rng(0).standard_normal(6 * SR)
    a, b = aa.audio_affect(clip(x)), aa.audio_affect(clip(0.5 * x))
    assert b[0] == pytest.approx(0.25 * a[0], rel=1e-12)
    assert b[2] == pytest.approx(a[2], abs=1e-9)
    assert b[5] == a[5]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_vector_invariants(seed):
    rng = np.random.default_rng(seed)
    v = aa.audio_affect(clip(rng.uniform(-1, 1, 2 * SR) * rng.random()))
    assert v.shape == (6,)
    assert np.all(np.isfinite(v))
    assert np.all(np.delete(v, 2) >= 0)
