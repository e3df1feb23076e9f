"""
From waveform to mel spectrogram and back
=========================================

A short tour of the front end: STFT, mel filterbank, dB scaling, MFCCs, and
phase reconstruction with Griffin-Lim.
"""

import numpy as np

from emostyle import dsp, plot

# a one second chirp with a steady partial on top
t = np.arange(dsp.SAMPLE_RATE) / dsp.SAMPLE_RATE
x = np.sin(2 * np.pi * (200 * t + 1500 * t**2)) + 0.3 * np.sin(2 * np.pi * 3000 * t)
clip = dsp.AudioClip(dsp.peak_normalize(x))

# 25 ms windows, 10 ms hop, 512-point FFT
spec = dsp.stft(clip)
print("stft:", spec.shape, spec.dtype)

mel = dsp.mel_spectrogram(clip)
print("mel:", mel.data.shape, "range %.1f .. %.1f dB" % (mel.data.min(), mel.data.max()))
plot.save_spectrogram("chirp_mel.pgm", mel)

coeffs = dsp.mfcc(mel, 20)
print("first MFCCs of frame 10:", " ".join(f"{c:.1f}" for c in coeffs.data[:5, 10]))

# the magnitude alone is enough to get back a waveform, given some patience
_, errors = dsp.griffin_lim_trace(np.abs(spec), iterations=32)
print("projection error: %.3f -> %.3f" % (errors[0], errors[-1]))
assert np.all(np.diff(errors) <= 1e-7)

# and with the true phase the inverse is exact away from the edges
y = dsp.istft(spec, length=len(clip)).samples
inner = slice(dsp.WINDOW_LEN, len(clip) - dsp.WINDOW_LEN)
print("istft max error: %.2e" % np.abs(y[inner] - clip.samples[inner]).max())
