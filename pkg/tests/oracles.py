"""Independent reference implementations and the float64 gradient suite."""

import numpy as np

from emostyle import melgan_vc, neural_style
from emostyle.autograd import (
    Tensor,
    concat,
    conv2d,
    conv2d_transpose,
    cross_entropy,
    dense,
    instance_norm,
    leaky_relu,
    log_softmax,
    mse,
    relu,
    sigmoid,
    softmax,
    sqrt,
    tanh,
)
from emostyle.classifier import ClassifierModel


def naive_conv2d(x, K, stride=1, padding=0):
    B, C, H, W = x.shape
    O, _, kh, kw = K.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (H + 2 * padding - kh) // stride + 1
    wo = (W + 2 * padding - kw) // stride + 1
    out = np.zeros((B, O, ho, wo))
    for b in range(B):
        for o in range(O):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[b, :, i * stride : i * stride + kh, j * stride : j * stride + kw]
                    out[b, o, i, j] = np.sum(patch * K[o])
    return out


def leaf(rng, *shape, scale=1.0, offset=0.0):
    return Tensor(offset + scale * rng.standard_normal(shape), requires_grad=True, dtype=np.float64)


def tiny_melgan_config(seed=0):
    return melgan_vc.MelganConfig(
        n_mels=8, seg_frames=8, gen_channels=2, disc_channels=2, siamese_channels=2, embed_dim=4, seed=seed
    )


def _projection(rng, out):
    return Tensor(rng.standard_normal(out.shape))


def _kink_clearance(siam, x):
    # smallest |pre-activation| in the siamese convs; finite differences need it well above h
    p, h, least = siam.params, x, np.inf
    for i in range(3):
        z = conv2d(h, p[f"conv{i}.w"], p[f"conv{i}.b"], stride=2, padding=1)
        least = min(least, float(np.abs(z.data).min()))
        h = leaky_relu(z, 0.2)
    return least


def gradient_cases(seed):
    """Yield ``(name, fn, inputs)``; every ``fn`` rebuilds a scalar float64 loss."""
    rng = np.random.default_rng(seed)

    x, W, b = leaf(rng, 2, 3), leaf(rng, 3, 4), leaf(rng, 4)
    R = Tensor(rng.standard_normal((2, 4)))
    yield "dense", lambda: (dense(x, W, b) * R).sum(), [x, W, b]

    xc, K, kb = leaf(rng, 2, 2, 5, 6), leaf(rng, 3, 2, 3, 3), leaf(rng, 3)
    Rc = Tensor(rng.standard_normal((2, 3, 3, 3)))
    yield "conv2d", lambda: (conv2d(xc, K, kb, stride=2, padding=1) * Rc).sum(), [xc, K, kb]

    xt, Kt, tb = leaf(rng, 2, 3, 3, 4), leaf(rng, 3, 2, 4, 4), leaf(rng, 2)
    Rt = Tensor(rng.standard_normal((2, 2, 6, 8)))
    yield "conv2d_transpose", lambda: (conv2d_transpose(xt, Kt, tb, stride=2, padding=1) * Rt).sum(), [xt, Kt, tb]

    # keep pointwise inputs away from kinks so central differences are smooth
    a = Tensor(rng.choice([-1, 1], (3, 4)) * rng.uniform(0.2, 1.5, (3, 4)), requires_grad=True, dtype=np.float64)
    Rp = Tensor(rng.standard_normal((3, 4)))
    yield "relu", lambda: (relu(a) * Rp).sum(), [a]
    yield "leaky_relu", lambda: (leaky_relu(a, 0.2) * Rp).sum(), [a]
    yield "tanh", lambda: (tanh(a) * Rp).sum(), [a]
    yield "sigmoid", lambda: (sigmoid(a) * Rp).sum(), [a]
    pos = leaf(rng, 3, 4, scale=0.3, offset=2.0)
    yield "sqrt", lambda: (sqrt(pos) * Rp).sum(), [pos]
    yield "softmax", lambda: (softmax(a, axis=1) * Rp).sum(), [a]
    yield "log_softmax", lambda: (log_softmax(a, axis=0) * Rp).sum(), [a]
    yield "mean", lambda: (a * Rp).mean(axis=1).sum() + (a * a).mean(), [a]
    yield "reshape_transpose", lambda: ((a.reshape(4, 3).T * Rp) ** 2).sum(), [a]
    yield "getitem", lambda: (a[1:, ::2] * a[1:, ::2]).sum() + a[[0, 0, 2], [1, 1, 3]].sum(), [a]
    den = leaf(rng, 3, 4, scale=0.2, offset=2.0)
    yield "div_pow", lambda: ((a / den) ** 3).sum() + (1.0 / den).sum(), [a, den]
    c1, c2 = leaf(rng, 2, 3), leaf(rng, 2, 2)
    Rcat = Tensor(rng.standard_normal((2, 5)))
    yield "concat", lambda: (concat([c1, c2], axis=1) * Rcat).sum(), [c1, c2]
    m1, m2 = leaf(rng, 3, 2), leaf(rng, 2, 4)
    yield "matmul", lambda: ((m1 @ m2) * Rp).sum(), [m1, m2]

    xi, g, bt = leaf(rng, 2, 3, 4, 4), leaf(rng, 3, offset=1.0), leaf(rng, 3)
    Ri = Tensor(rng.standard_normal((2, 3, 4, 4)))
    yield "instance_norm", lambda: (instance_norm(xi, g, bt) * Ri).sum(), [xi, g, bt]

    logits, labels = leaf(rng, 5, 6), rng.integers(0, 6, 5)
    yield "cross_entropy", lambda: cross_entropy(logits, labels), [logits]
    p, q = leaf(rng, 4, 3), leaf(rng, 4, 3)
    yield "mse", lambda: mse(p, q), [p, q]

    # full models
    clf = ClassifierModel(input_dim=6, hidden=(5, 4), seed=seed, dtype=np.float64)
    clf.fit_normalizer(rng.standard_normal((20, 6)))
    for name, t in clf.params.items():
        if name.endswith(".b"):  # zero biases put dead units exactly on the ReLU kink
            t.data[...] = rng.uniform(0.05, 0.2, t.shape)
    feats, ylab = rng.standard_normal((4, 6)), rng.integers(0, 6, 4)
    yield "classifier", lambda: cross_entropy(clf(feats), ylab), clf.parameters()

    cfg = tiny_melgan_config(seed)
    model = melgan_vc.MelganModel.initialize(cfg, dtype=np.float64)
    seg = Tensor(rng.uniform(-1, 1, (2, 1, 8, 8)), requires_grad=True, dtype=np.float64)
    Rg = Tensor(rng.standard_normal((2, 1, 8, 8)))
    gen = model.generator
    yield "generator", lambda: (gen(seg) * Rg).sum(), [seg, *gen.parameters()]
    disc = model.discriminator
    Rd = Tensor(rng.standard_normal(2))
    yield "discriminator", lambda: (disc(seg) * Rd).sum(), [seg, *disc.parameters()]
    siam = model.siamese
    Rs = Tensor(rng.standard_normal((2, 4)))
    yield "siamese", lambda: (siam(seg) * Rs).sum(), [seg, *siam.parameters()]
    while True:
        src = Tensor(rng.uniform(-1, 1, (3, 1, 8, 8)))
        out = Tensor(rng.uniform(-1, 1, (3, 1, 8, 8)), requires_grad=True, dtype=np.float64)
        if _kink_clearance(siam, src) > 0.02 and _kink_clearance(siam, out) > 0.02:
            break
    yield (
        "travel_margin",
        lambda: melgan_vc.travel_loss(siam, src, out) + melgan_vc.siamese_margin_loss(siam, out, 1.0),
        [out, *siam.parameters()],
    )

    scfg = neural_style.StyleConfig(n_filters=3, kernel_width=3, seed=seed)
    kernels = neural_style.style_kernels(6, scfg)
    content, style = rng.uniform(-80, 0, (6, 7)), rng.uniform(-80, 0, (6, 9))
    c_feats = neural_style.features(content, kernels)
    s_gram = neural_style.gram_matrix(neural_style.features(style, kernels))
    xs = Tensor(rng.uniform(-80, 0, (6, 7)), requires_grad=True, dtype=np.float64)

    def style_objective():
        c, s = neural_style._loss_terms(xs, c_feats, s_gram, kernels)
        return c + 1e-2 * s

    yield "style_layer", style_objective, [xs]


def naive_conv_transpose(x, K, stride=2, padding=1):
    B, C, H, W = x.shape
    _, O, kh, kw = K.shape
    full = np.zeros((B, O, (H - 1) * stride + kh, (W - 1) * stride + kw))
    for b in range(B):
        for c in range(C):
            for i in range(H):
                for j in range(W):
                    full[b, :, i * stride : i * stride + kh, j * stride : j * stride + kw] += x[b, c, i, j] * K[c]
    return full[:, :, padding : full.shape[2] - padding, padding : full.shape[3] - padding]


def naive_instance_norm(x, gamma, beta, eps=1e-5):
    out = np.empty_like(x)
    for b in range(x.shape[0]):
        for c in range(x.shape[1]):
            m = x[b, c]
            out[b, c] = gamma[c] * (m - m.mean()) / np.sqrt(m.var() + eps) + beta[c]
    return out


def naive_generator(p, x, depth, head="tanh"):
    """Loop-based forward pass of the U-net generator from its parameter arrays."""

    def leaky(v):
        return np.where(v > 0, v, 0.2 * v)

    skips, h = [x], x
    for i in range(depth):
        h = naive_conv2d(h, p[f"enc{i}.w"], 2, 1) + p[f"enc{i}.b"][None, :, None, None]
        if i > 0:
            h = naive_instance_norm(h, p[f"enc{i}.gamma"], p[f"enc{i}.beta"])
        h = leaky(h)
        skips.append(h)
    for i in reversed(range(depth)):
        if i < depth - 1:
            h = np.concatenate([h, skips[i + 1]], axis=1)
        h = naive_conv_transpose(h, p[f"dec{i}.w"]) + p[f"dec{i}.b"][None, :, None, None]
        h = np.maximum(naive_instance_norm(h, p[f"dec{i}.gamma"], p[f"dec{i}.beta"]), 0.0)
    h = np.concatenate([h, skips[0]], axis=1)
    h = naive_conv2d(h, p["out.w"], 1, 1) + p["out.b"][None, :, None, None]
    return np.tanh(h) if head == "tanh" else h
