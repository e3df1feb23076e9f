"""
Gram-matrix style transfer on spectrograms
==========================================

The baseline: random 1-D convolution kernels over time, content matched on
features and style matched on their Gram matrix, optimised with Adam
directly on the dB values.
"""

import numpy as np

from emostyle import dsp, neural_style, plot, synthetic

rng = np.random.default_rng(0)
content = dsp.mel_spectrogram(synthetic.band_noise(1.0, 200, 900, rng=rng))
style = dsp.mel_spectrogram(synthetic.band_noise(1.0, 3000, 6000, rng=rng))

cfg = neural_style.StyleConfig(steps=100)
result, losses = neural_style.style_transfer_trace(content, style, cfg)
print("objective: %.4g -> %.4g" % (losses[0], losses[-1]))

for name, spec in (("content", content), ("result", result)):
    c, s = neural_style.style_loss_report(spec, content, style, cfg)
    print(f"{name:8s} content loss {c:.4g}  style loss {s:.4g}")

plot.save_spectrogram("style_result.pgm", result)
