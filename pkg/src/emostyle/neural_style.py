"""
Gram-matrix style transfer between two log-mel spectrograms.

A single frozen layer of random filters spanning all mel bands (plus ReLU)
turns a spectrogram into ``n_filters`` feature rows over time. Starting from
the content spectrogram, the dB values are optimised with Adam to minimise

    content_weight * ||phi(x) - phi(content)||^2
        + style_weight * ||gram(phi(x)) - gram(phi(style))||^2
"""

from dataclasses import dataclass

import numpy as np

from emostyle import dsp
from emostyle.autograd import Adam, Tensor, conv2d, relu
from emostyle.autograd import init
from emostyle.errors import BandMismatch, EmptyFeatures


@dataclass
class StyleConfig:
    n_filters: int = 64
    kernel_width: int = 11
    content_weight: float = 1.0
    style_weight: float = 1e-2
    steps: int = 500
    lr: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if self.n_filters < 1 or self.steps < 1:
            raise ValueError("n_filters and steps must be >= 1")
        if self.content_weight < 0 or self.style_weight < 0:
            raise ValueError("loss weights must be non-negative")


def gram_matrix(features):
    """``F @ F.T / positions`` for a ``[n_filters, positions]`` tensor or array."""
    f = features if isinstance(features, Tensor) else Tensor(np.asarray(features, dtype=np.float64))
    if f.ndim != 2 or f.shape[1] < 1:
        raise EmptyFeatures(f"need a [n_filters, positions >= 1] feature map, got {f.shape}")
    return (f @ f.T) * (1.0 / f.shape[1])


def style_kernels(n_mels, cfg):
    rng = np.random.default_rng(cfg.seed)
    k = init.he_uniform((cfg.n_filters, 1, n_mels, cfg.kernel_width), rng, dtype=np.float64)
    k.requires_grad = False
    return k


def features(x, kernels):
    """Random single-layer features ``[n_filters, n_frames]`` of a dB matrix."""
    x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    n_mels, n_frames = x.shape
    pad = kernels.shape[3] // 2
    out = relu(conv2d(x.reshape(1, 1, n_mels, n_frames), kernels, padding=(0, pad)))
    return out.reshape(kernels.shape[0], -1)


def _data(spec):
    return spec.data if isinstance(spec, dsp.MelSpectrogram) else np.asarray(spec, dtype=np.float64)


def _check_bands(*specs):
    bands = {_data(s).shape[0] for s in specs}
    if len(bands) != 1:
        raise BandMismatch(f"spectrograms have different mel band counts: {sorted(bands)}")


def _loss_terms(x, content_feats, style_gram, kernels):
    fx = features(x, kernels)
    d = fx - content_feats
    content_loss = (d * d).sum()
    g = gram_matrix(fx) - style_gram
    style_loss = (g * g).sum()
    return content_loss, style_loss


def style_loss_report(x, content, style, cfg=None):
    """Unweighted ``(content_loss, style_loss)`` of ``x`` without optimising."""
    cfg = cfg or StyleConfig()
    _check_bands(x, content, style)
    kernels = style_kernels(_data(content).shape[0], cfg)
    c_feats = features(_data(content), kernels)
    s_gram = gram_matrix(features(_data(style), kernels))
    c, s = _loss_terms(Tensor(_data(x).astype(np.float64)), c_feats, s_gram, kernels)
    return c.item(), s.item()


def style_transfer_trace(content, style, cfg=None):
    """Run the optimisation; returns ``(result, losses)`` with one total per step.

    ``losses[k]`` is the objective evaluated before update ``k + 1``, so
    ``losses[0]`` is the value at the content initialisation.
    """
    cfg = cfg or StyleConfig()
    _check_bands(content, style)
    kernels = style_kernels(_data(content).shape[0], cfg)
    c_feats = features(_data(content), kernels)
    s_gram = gram_matrix(features(_data(style), kernels))

    x = Tensor(_data(content).astype(np.float64).copy(), requires_grad=True)
    opt = Adam([x], lr=cfg.lr)
    losses = []
    for _ in range(cfg.steps):
        c, s = _loss_terms(x, c_feats, s_gram, kernels)
        total = cfg.content_weight * c + cfg.style_weight * s
        losses.append(total.item())
        opt.zero_grad()
        if total.requires_grad:
            total.backward()
        opt.step()

    out = np.clip(x.data, dsp.FLOOR_DB, 0.0)
    if isinstance(content, dsp.MelSpectrogram):
        result = dsp.MelSpectrogram(out, content.n_mels, content.params, content.sample_rate, content.f_min, content.f_max)
    else:
        result = dsp.MelSpectrogram(out, out.shape[0])
    return result, losses


def style_transfer(content, style, cfg=None):
    return style_transfer_trace(content, style, cfg)[0]
