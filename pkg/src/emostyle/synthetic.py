"""Synthetic two-domain material for smoke tests and demos.

The "low" domain concentrates energy in the lower half of the mel bands and
the "high" domain in the upper half, each with random temporal modulation.
"""

import numpy as np

from emostyle import dsp


def band_segments(n, band, n_mels=dsp.N_MELS, seg_frames=128, seed=0):
    """``n`` scaled segments in ``[-1, 1]`` with energy in ``band`` ("low" or "high")."""
    rng = np.random.default_rng(seed)
    half = n_mels // 2
    rows = slice(0, half) if band == "low" else slice(half, n_mels)
    segs = -0.9 + 0.05 * rng.standard_normal((n, n_mels, seg_frames))
    envelope = 0.6 + 0.3 * rng.random((n, 1, seg_frames))
    segs[:, rows, :] += 1.2 * envelope + 0.1 * rng.standard_normal((n, half, seg_frames))
    return np.clip(segs, -1.0, 1.0).astype(np.float32)


def band_noise(duration, f_lo, f_hi, sample_rate=dsp.SAMPLE_RATE, rng=None):
    """White noise band-passed to ``[f_lo, f_hi]`` Hz by FFT masking, peak 0.95."""
    rng = rng if rng is not None else np.random.default_rng(0)
    n = int(round(duration * sample_rate))
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    spec[(freqs < f_lo) | (freqs > f_hi)] = 0.0
    return dsp.AudioClip(dsp.peak_normalize(np.fft.irfft(spec, n)), sample_rate)


# six disjoint bands, one per emotion code, used for classifier sanity runs
CLASS_BANDS = [(100, 500), (600, 1200), (1400, 2200), (2500, 3500), (4000, 5500), (6000, 7800)]


def class_clips(per_class, duration=0.5, seed=0, bands=CLASS_BANDS):
    """``per_class`` band-limited noise clips for each band; returns (clips, labels)."""
    rng = np.random.default_rng(seed)
    clips, labels = [], []
    for label, (lo, hi) in enumerate(bands):
        for _ in range(per_class):
            clips.append(band_noise(duration, lo, hi, rng=rng))
            labels.append(label)
    return clips, np.array(labels)
