"""Analysis/synthesis transform.

The Parseval-style check compares transform energy against a naive framing
reference built here, independent of the library's strided implementation.
"""

import numpy as np
import pytest

from tfamask import stft


def naive_frames(x: np.ndarray, num: int) -> np.ndarray:
    """Reference framing: zero-pad the tail, no lookahead trickery."""
    padded = np.zeros(num * stft.FRAME_SHIFT + stft.FRAME_LEN - stft.FRAME_SHIFT)
    padded[: len(x)] = x
    out = np.empty((num, stft.FRAME_LEN))
    for i in range(num):
        out[i] = padded[i * stft.FRAME_SHIFT: i * stft.FRAME_SHIFT + stft.FRAME_LEN]
    return out


class TestWindow:
    def test_cola_interior(self):
        w = stft.sqrt_hann_window()
        sq = w ** 2
        # overlapped squared windows sum to 1 away from the edges
        acc = np.zeros(stft.FRAME_SHIFT * 6 + stft.FRAME_LEN)
        for i in range(7):
            acc[i * stft.FRAME_SHIFT: i * stft.FRAME_SHIFT + stft.FRAME_LEN] += sq
        interior = acc[stft.FRAME_LEN: -stft.FRAME_LEN]
        np.testing.assert_allclose(interior, 1.0, rtol=0, atol=1e-10)

    def test_periodic_not_symmetric(self):
        w = stft.sqrt_hann_window()
        assert w[0] == 0.0
        assert w[-1] > 0.0  # periodic form never hits zero at the right edge


class TestForward:
    def test_frame_count(self):
        assert stft.num_frames(1) == 1
        assert stft.num_frames(256) == 1
        assert stft.num_frames(257) == 2
        assert stft.num_frames(8000) == 32
        assert stft.num_frames(8192) == 32

    def test_shape_and_zeros(self):
        spec = stft.stft(np.zeros(1024))
        assert spec.shape == (4, stft.NUM_BINS)
        np.testing.assert_array_equal(spec, 0.0)

    def test_linearity(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal(4000)
        b = rng.standard_normal(4000)
        lhs = stft.stft(2.0 * a - 3.0 * b)
        rhs = 2.0 * stft.stft(a) - 3.0 * stft.stft(b)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-9)

    def test_pure_tone_bin(self):
        # 1000 Hz at 16 kHz with a 512-point transform lands on bin 32
        t = np.arange(8192) / 16000.0
        spec = stft.stft(np.sin(2 * np.pi * 1000.0 * t))
        mags = np.abs(spec)
        for frame in range(4, 28):  # interior frames, full windows
            assert np.argmax(mags[frame]) == 32

    def test_matches_naive_framing_energy(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(5000)
        spec = stft.stft(x)
        frames = naive_frames(x, spec.shape[0]) * stft.sqrt_hann_window()
        # Parseval per frame: sum |X_k|^2 over the full 512-bin spectrum
        # equals 512 * sum of squared windowed samples
        full = np.fft.fft(frames, axis=1)
        lhs = np.sum(np.abs(full) ** 2, axis=1)
        rhs = frames.shape[1] * np.sum(frames ** 2, axis=1)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-6)
        # and the one-sided bins agree with the naive transform exactly
        np.testing.assert_allclose(spec, np.fft.rfft(frames, axis=1),
                                   rtol=0, atol=1e-9)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            stft.stft(np.zeros((2, 100)))
        with pytest.raises(ValueError):
            stft.stft(np.array([]))


class TestRoundtrip:
    def test_interior_reconstruction(self):
        rng = np.random.default_rng(11)
        for trial in range(100):
            x = rng.standard_normal(8192)
            y = stft.istft(stft.stft(x), len(x))
            err = np.abs(y - x)[stft.FRAME_LEN: 7680]
            assert np.max(err) < 1e-6, f"trial {trial}: {np.max(err)}"

    def test_tone_reconstruction(self):
        t = np.arange(8192) / 16000.0
        x = 0.3 * np.sin(2 * np.pi * 440.0 * t)
        y = stft.istft(stft.stft(x), len(x))
        np.testing.assert_allclose(y[512:7680], x[512:7680], rtol=0, atol=1e-6)

    def test_output_length_exact(self):
        for n in (300, 8000, 8191):
            x = np.sin(np.arange(n) * 0.01)
            assert len(stft.istft(stft.stft(x), n)) == n

    def test_istft_validates_shapes(self):
        spec = stft.stft(np.zeros(1024))
        with pytest.raises(ValueError):
            stft.istft(spec[:, :-1], 1024)  # wrong bin count
        with pytest.raises(ValueError):
            stft.istft(spec, 10 ** 6)  # longer than the frames can cover
        with pytest.raises(ValueError):
            stft.istft(np.zeros(stft.NUM_BINS, dtype=complex), 256)  # 1-D


class TestMagPhase:
    def test_hand_values(self):
        spec = np.array([[3.0 + 4.0j, 0.0 + 0.0j]])
        mag, phase = stft.mag_phase(spec)
        np.testing.assert_allclose(mag, [[5.0, 0.0]])
        np.testing.assert_allclose(phase[0, 0], np.arctan2(4.0, 3.0))
        assert phase[0, 1] == 0.0  # zero bin gets phase zero, not nan

    def test_polar_roundtrip(self):
        rng = np.random.default_rng(2)
        spec = rng.standard_normal((6, stft.NUM_BINS)) \
            + 1j * rng.standard_normal((6, stft.NUM_BINS))
        mag, phase = stft.mag_phase(spec)
        back = mag * np.exp(1j * phase)
        np.testing.assert_allclose(back, spec, rtol=0, atol=1e-12)
