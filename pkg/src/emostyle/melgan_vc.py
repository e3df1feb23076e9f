"""
Spectrogram-to-spectrogram emotion transfer with a U-net generator, a hinge
discriminator and a siamese network that keeps the content of each clip.

One model is trained per ordered (source, target) emotion pair. Spectrograms
are cut into fixed-width segments whose dB values are scaled from
``[floor_db, 0]`` to ``[-1, 1]``; the generator maps source segments to
target-style segments of the same shape.

The generator objective is

    loss_g_adv + travel_weight * loss_travel + margin_weight * loss_margin

where ``loss_travel`` asks the siamese embedding differences between any two
generated segments to match those between their sources, and
``loss_margin`` keeps source embeddings at least ``margin`` apart so the
siamese network cannot collapse.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from emostyle import dsp
from emostyle.autograd import (
    Adam,
    Tensor,
    concat,
    conv2d,
    conv2d_transpose,
    dense,
    instance_norm,
    leaky_relu,
    no_grad,
    relu,
    sqrt,
    tanh,
)
from emostyle.autograd import init
from emostyle.autograd.module import Network
from emostyle.errors import BatchTooSmall, EmptyManifest, EmptySpectrogram, NanLoss, NonFiniteError, ShapeMismatch

log = logging.getLogger(__name__)

SEG_FRAMES = 128
EMBED_DIM = 128


@dataclass
class MelganConfig:
    n_mels: int = dsp.N_MELS
    seg_frames: int = SEG_FRAMES
    depth: int = 2
    gen_channels: int = 16
    disc_channels: int = 16
    siamese_channels: int = 16
    embed_dim: int = EMBED_DIM
    head: str = "tanh"
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 16
    epochs: int = 20
    gen_updates_per_disc: int = 3
    travel_weight: float = 1.0
    margin_weight: float = 10.0
    margin: float = 1.0
    max_steps: int = None
    seed: int = 0

    def __post_init__(self):
        if self.head not in ("tanh", "linear"):
            raise ValueError(f"head must be 'tanh' or 'linear', got {self.head!r}")
        stride = 2**self.depth
        if self.n_mels % stride or self.seg_frames % stride:
            raise ValueError(
                f"n_mels ({self.n_mels}) and seg_frames ({self.seg_frames}) must be "
                f"divisible by 2**depth = {stride}"
            )
        if self.n_mels % 8 or self.seg_frames % 8:
            raise ValueError("discriminator and siamese downsample by 8; n_mels and seg_frames must be multiples of 8")


# segmentation --------------------------------------------------------------
def scale_db(db, floor_db=dsp.FLOOR_DB):
    return 2.0 * (np.asarray(db) - floor_db) / -floor_db - 1.0


def unscale_db(x, floor_db=dsp.FLOOR_DB):
    return (np.asarray(x, dtype=np.float64) + 1.0) * (-floor_db) / 2.0 + floor_db


def segment(spec, seg_frames=SEG_FRAMES, floor_db=dsp.FLOOR_DB):
    """Cut a spectrogram into ``[n_segments, n_mels, seg_frames]`` scaled segments.

    The last segment is right-padded with ``floor_db`` columns.
    """
    data = spec.data if isinstance(spec, dsp.MelSpectrogram) else np.asarray(spec)
    n_mels, n_frames = data.shape
    if n_frames < 1:
        raise EmptySpectrogram("spectrogram has no frames")
    n_seg = -(-n_frames // seg_frames)
    padded = np.full((n_mels, n_seg * seg_frames), float(floor_db))
    padded[:, :n_frames] = data
    segs = padded.reshape(n_mels, n_seg, seg_frames).transpose(1, 0, 2)
    return scale_db(segs, floor_db)


def unsegment(segments, n_frames, template=None, floor_db=dsp.FLOOR_DB):
    """Inverse of :func:`segment`; returns the first ``n_frames`` columns in dB."""
    segments = np.asarray(segments)
    n_mels = segments.shape[1]
    data = unscale_db(segments.transpose(1, 0, 2).reshape(n_mels, -1)[:, :n_frames], floor_db)
    data = np.clip(data, floor_db, 0.0)
    if template is None:
        return dsp.MelSpectrogram(data, n_mels)
    return dsp.MelSpectrogram(
        data, n_mels, template.params, template.sample_rate, template.f_min, template.f_max
    )


# networks ------------------------------------------------------------------
class Generator(Network):
    """U-net: stride-2 3x3 encoder convs, 4x4 transposed-conv decoder, skip concatenation."""

    def __init__(self, cfg, rng, dtype=np.float32):
        super().__init__()
        self.depth, self.head = cfg.depth, cfg.head
        base = cfg.gen_channels
        skip_ch = [1] + [base * 2**i for i in range(cfg.depth)]
        for i in range(cfg.depth):
            cin, cout = skip_ch[i], skip_ch[i + 1]
            self.params[f"enc{i}.w"] = init.he_uniform((cout, cin, 3, 3), rng, dtype=dtype)
            self.params[f"enc{i}.b"] = init.zeros(cout, dtype)
            if i > 0:
                self.params[f"enc{i}.gamma"] = init.ones(cout, dtype)
                self.params[f"enc{i}.beta"] = init.zeros(cout, dtype)
        for i in reversed(range(cfg.depth)):
            cin = skip_ch[-1] if i == cfg.depth - 1 else self._dec_out(i + 1, base) + skip_ch[i + 1]
            cout = self._dec_out(i, base)
            # transposed kernel is [input channels, output channels, kh, kw]
            self.params[f"dec{i}.w"] = init.he_uniform((cin, cout, 4, 4), rng, fan_in=cin * 16, dtype=dtype)
            self.params[f"dec{i}.b"] = init.zeros(cout, dtype)
            self.params[f"dec{i}.gamma"] = init.ones(cout, dtype)
            self.params[f"dec{i}.beta"] = init.zeros(cout, dtype)
        cin = self._dec_out(0, base) + 1
        self.params["out.w"] = init.glorot_uniform((1, cin, 3, 3), rng, dtype=dtype)
        self.params["out.b"] = init.zeros(1, dtype)

    @staticmethod
    def _dec_out(i, base):
        return base * 2 ** max(i - 1, 0)

    def forward(self, x):
        p = self.params
        skips, h = [x], x
        for i in range(self.depth):
            h = conv2d(h, p[f"enc{i}.w"], p[f"enc{i}.b"], stride=2, padding=1)
            if i > 0:
                h = instance_norm(h, p[f"enc{i}.gamma"], p[f"enc{i}.beta"])
            h = leaky_relu(h, 0.2)
            skips.append(h)
        for i in reversed(range(self.depth)):
            if i < self.depth - 1:
                h = concat([h, skips[i + 1]], axis=1)
            h = conv2d_transpose(h, p[f"dec{i}.w"], p[f"dec{i}.b"], stride=2, padding=1)
            h = relu(instance_norm(h, p[f"dec{i}.gamma"], p[f"dec{i}.beta"]))
        h = concat([h, skips[0]], axis=1)
        h = conv2d(h, p["out.w"], p["out.b"], stride=1, padding=1)
        return tanh(h) if self.head == "tanh" else h


class Discriminator(Network):
    """Three stride-2 conv blocks, global mean over positions, linear scalar head."""

    def __init__(self, cfg, rng, dtype=np.float32):
        super().__init__()
        chans = [1] + [cfg.disc_channels * 2**i for i in range(3)]
        for i in range(3):
            self.params[f"conv{i}.w"] = init.he_uniform((chans[i + 1], chans[i], 3, 3), rng, dtype=dtype)
            self.params[f"conv{i}.b"] = init.zeros(chans[i + 1], dtype)
        self.params["fc.w"] = init.glorot_uniform((chans[-1], 1), rng, dtype=dtype)
        self.params["fc.b"] = init.zeros(1, dtype)

    def forward(self, x):
        p = self.params
        h = x
        for i in range(3):
            h = leaky_relu(conv2d(h, p[f"conv{i}.w"], p[f"conv{i}.b"], stride=2, padding=1), 0.2)
        h = h.mean(axis=(2, 3))
        return dense(h, p["fc.w"], p["fc.b"]).reshape(-1)


class Siamese(Network):
    """Three stride-2 conv blocks then a dense projection to ``embed_dim``."""

    def __init__(self, cfg, rng, dtype=np.float32):
        super().__init__()
        chans = [1] + [cfg.siamese_channels * 2**i for i in range(3)]
        for i in range(3):
            self.params[f"conv{i}.w"] = init.he_uniform((chans[i + 1], chans[i], 3, 3), rng, dtype=dtype)
            self.params[f"conv{i}.b"] = init.zeros(chans[i + 1], dtype)
        flat = chans[-1] * (cfg.n_mels // 8) * (cfg.seg_frames // 8)
        self.params["fc.w"] = init.glorot_uniform((flat, cfg.embed_dim), rng, dtype=dtype)
        self.params["fc.b"] = init.zeros(cfg.embed_dim, dtype)

    def forward(self, x):
        p = self.params
        h = x
        for i in range(3):
            h = leaky_relu(conv2d(h, p[f"conv{i}.w"], p[f"conv{i}.b"], stride=2, padding=1), 0.2)
        return dense(h.reshape(h.shape[0], -1), p["fc.w"], p["fc.b"])


@dataclass
class MelganModel:
    config: MelganConfig
    source: str = "happy"
    target: str = "sad"
    generator: Generator = None
    discriminator: Discriminator = None
    siamese: Siamese = None

    @classmethod
    def initialize(cls, config=None, source="happy", target="sad", dtype=np.float32):
        config = config or MelganConfig()
        rng = np.random.default_rng(config.seed)
        return cls(
            config,
            source,
            target,
            Generator(config, rng, dtype),
            Discriminator(config, rng, dtype),
            Siamese(config, rng, dtype),
        )

    def networks(self):
        return {"generator": self.generator, "discriminator": self.discriminator, "siamese": self.siamese}

    def state_dict(self):
        return {
            f"{role}.{name}": arr
            for role, net in self.networks().items()
            for name, arr in net.state_dict().items()
        }

    def load_state_dict(self, state):
        for role, net in self.networks().items():
            net.load_state_dict(state, prefix=f"{role}.")
        return self

    def metadata(self):
        return {"source": self.source, "target": self.target, "melgan": asdict(self.config)}


def identity_generator(model):
    """Set the generator so that it returns its input unchanged (linear head)."""
    gen = model.generator
    for p in gen.params.values():
        p.data[...] = 0.0
    w = gen.params["out.w"].data
    w[0, -1, 1, 1] = 1.0  # last input channel of the output conv is the raw segment
    gen.head = model.config.head = "linear"
    return model


# losses --------------------------------------------------------------------
def _as_batch(segs, dtype=np.float32):
    if isinstance(segs, Tensor):
        return segs if segs.ndim == 4 else segs.reshape(segs.shape[0], 1, *segs.shape[1:])
    arr = np.asarray(segs, dtype=dtype)
    if arr.ndim == 3:
        arr = arr[:, None]
    return Tensor(arr, dtype=dtype)


def _pairs(n):
    i, j = np.nonzero(~np.eye(n, dtype=bool))
    return i, j


def _row_norm(t, eps=1e-16):
    return sqrt((t * t).sum(axis=1) + eps)


def travel_loss_from_embeddings(src_emb, gen_emb):
    """Mean over ordered pairs of ``||t - t'||^2 + (1 - cos(t, t'))``."""
    n = src_emb.shape[0]
    if n < 2:
        raise BatchTooSmall(f"travel loss needs at least 2 samples, got {n}")
    if gen_emb.shape != src_emb.shape:
        raise ShapeMismatch(f"embedding shapes differ: {src_emb.shape} vs {gen_emb.shape}")
    i, j = _pairs(n)
    t = src_emb[i] - src_emb[j]
    t_gen = gen_emb[i] - gen_emb[j]
    d = t - t_gen
    sq = (d * d).sum(axis=1)
    cos = (t * t_gen).sum(axis=1) / (_row_norm(t) * _row_norm(t_gen))
    return (sq + (1.0 - cos)).mean()


def margin_loss_from_embeddings(emb, margin=1.0):
    """Mean over ordered pairs of ``max(0, margin - ||e_i - e_j||)``."""
    n = emb.shape[0]
    if n < 2:
        raise BatchTooSmall(f"margin loss needs at least 2 samples, got {n}")
    i, j = _pairs(n)
    dist = _row_norm(emb[i] - emb[j])
    return relu(margin - dist).mean()


def travel_loss(siamese, src_batch, gen_batch):
    src, gen = _as_batch(src_batch), _as_batch(gen_batch)
    if src.shape[0] != gen.shape[0]:
        raise ShapeMismatch(f"batch sizes differ: {src.shape[0]} vs {gen.shape[0]}")
    if src.shape[0] < 2:
        raise BatchTooSmall(f"travel loss needs at least 2 samples, got {src.shape[0]}")
    return travel_loss_from_embeddings(siamese(src), siamese(gen))


def siamese_margin_loss(siamese, batch, margin=1.0):
    batch = _as_batch(batch)
    if batch.shape[0] < 2:
        raise BatchTooSmall(f"margin loss needs at least 2 samples, got {batch.shape[0]}")
    return margin_loss_from_embeddings(siamese(batch), margin)


def hinge_losses(d_real, d_gen):
    """Hinge GAN losses from raw discriminator outputs: ``(loss_d, loss_g_adv)``."""
    loss_d = relu(1.0 - d_real).mean() + relu(1.0 + d_gen).mean()
    loss_g = -d_gen.mean()
    return loss_d, loss_g


def adversarial_losses(disc, real_batch, gen_batch):
    real, gen = _as_batch(real_batch), _as_batch(gen_batch)
    if real.shape[0] == 0 or gen.shape[0] == 0:
        raise ShapeMismatch("adversarial losses need non-empty batches")
    return hinge_losses(disc(real), disc(gen))


# inference -----------------------------------------------------------------
def generate(model, seg):
    """Apply the generator to one segment ``[n_mels, T]`` or a batch ``[B, n_mels, T]``."""
    seg = np.asarray(seg)
    single = seg.ndim == 2
    batch = seg[None] if single else seg
    if batch.ndim != 3 or batch.shape[1] != model.config.n_mels:
        raise ShapeMismatch(f"expected segments with {model.config.n_mels} mel bins, got {seg.shape}")
    dtype = model.generator.params["out.w"].dtype
    with no_grad():
        out = model.generator(_as_batch(batch, dtype)).data[:, 0]
    return out[0] if single else out


def transfer_spectrogram(model, spec):
    segs = segment(spec, model.config.seg_frames)
    return unsegment(generate(model, segs), spec.n_frames, spec)


def transfer(model, clip, iterations=32, params=None):
    """Audio in, converted audio out, padded or trimmed to the input length."""
    spec = dsp.mel_spectrogram(clip, model.config.n_mels, params)
    converted = transfer_spectrogram(model, spec)
    out = dsp.griffin_lim(converted, iterations=iterations)
    samples = out.samples[: len(clip)]
    samples = np.pad(samples, (0, len(clip) - samples.size))
    return dsp.AudioClip(samples, out.sample_rate)


def segments_from_clips(clips, cfg, params=None):
    segs = [segment(dsp.mel_spectrogram(c, cfg.n_mels, params), cfg.seg_frames) for c in clips]
    return np.concatenate(segs, axis=0) if segs else np.zeros((0, cfg.n_mels, cfg.seg_frames))


# training ------------------------------------------------------------------
@dataclass
class StepLosses:
    step: int
    loss_d: float
    loss_g_adv: float
    loss_travel: float
    loss_margin: float

    def finite(self):
        return all(np.isfinite([self.loss_d, self.loss_g_adv, self.loss_travel, self.loss_margin]))


@dataclass
class TrainResult:
    model: MelganModel
    history: list = field(default_factory=list)
    gen_updates: int = 0
    disc_updates: int = 0


def _load_segments(items, cfg):
    if len(items) == 0:
        raise EmptyManifest("no training material")
    if isinstance(items, np.ndarray):
        return items.astype(np.float32)
    from emostyle.corpus import load_audio

    return segments_from_clips([load_audio(e) for e in items], cfg).astype(np.float32)


def train_pair(source, target, config=None, source_emotion="happy", target_emotion="sad", on_epoch=None):
    """Train one source->target model.

    ``source``/``target`` are segment arrays ``[N, n_mels, seg_frames]`` or
    sequences of manifest entries. Per batch the generator and siamese take
    one step; the discriminator takes one step on every
    ``gen_updates_per_disc``-th step (counted across epochs), before the
    generator. ``on_epoch(epoch,
    model)`` is called after each epoch (checkpointing).
    """
    cfg = config or MelganConfig()
    if len(source) == 0 or len(target) == 0:
        raise EmptyManifest("source and target must both be non-empty")
    src_all = _load_segments(source, cfg)
    tgt_all = _load_segments(target, cfg)
    model = MelganModel.initialize(cfg, source_emotion, target_emotion)
    result = TrainResult(model)
    if cfg.epochs == 0:
        return result

    gen, disc, siam = model.generator, model.discriminator, model.siamese
    opt_g = Adam(gen.parameters() + siam.parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    opt_d = Adam(disc.parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    rng = np.random.default_rng(cfg.seed + 1)
    bs = max(2, min(cfg.batch_size, len(src_all), len(tgt_all)))
    n_batches = max(len(src_all), len(tgt_all)) // bs

    step = 0
    last_d = float("nan")
    for epoch in range(cfg.epochs):
        src_order = _cycled_perm(rng, len(src_all), n_batches * bs)
        tgt_order = _cycled_perm(rng, len(tgt_all), n_batches * bs)
        for k in range(n_batches):
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
            src = Tensor(src_all[src_order[k * bs : (k + 1) * bs]][:, None])
            real = Tensor(tgt_all[tgt_order[k * bs : (k + 1) * bs]][:, None])
            try:
                if step % cfg.gen_updates_per_disc == 0:
                    last_d = _disc_step(gen, disc, opt_d, src, real)
                    result.disc_updates += 1
                losses = _gen_step(gen, disc, siam, opt_g, src, cfg, step, last_d)
            except NonFiniteError as exc:
                raise NanLoss(step, str(exc)) from None
            result.gen_updates += 1
            if not losses.finite():
                raise NanLoss(step, losses)
            result.history.append(losses)
            step += 1
        log.info("epoch %d: %s", epoch, result.history[-1] if result.history else None)
        if on_epoch is not None:
            on_epoch(epoch, model)
        if cfg.max_steps is not None and step >= cfg.max_steps:
            break
    return result


def _disc_step(gen, disc, opt_d, src, real):
    with no_grad():
        fake = gen(src)
    loss_d, _ = hinge_losses(disc(real), disc(fake))
    opt_d.zero_grad()
    loss_d.backward()
    opt_d.step()
    return loss_d.item()


def _gen_step(gen, disc, siam, opt_g, src, cfg, step, last_d):
    fake = gen(src)
    loss_g = -disc(fake).mean()
    emb_src = siam(src)
    loss_tr = travel_loss_from_embeddings(emb_src, siam(fake))
    loss_m = margin_loss_from_embeddings(emb_src, cfg.margin)
    total = loss_g + cfg.travel_weight * loss_tr + cfg.margin_weight * loss_m
    opt_g.zero_grad()
    disc.zero_grad()
    total.backward()
    opt_g.step()
    return StepLosses(step, last_d, loss_g.item(), loss_tr.item(), loss_m.item())


def _cycled_perm(rng, n, length):
    reps = -(-length // n)
    return np.concatenate([rng.permutation(n) for _ in range(reps)])[:length]


def write_history(history, path):
    """Loss history as tab-separated ``step loss_d loss_g_adv loss_travel loss_margin`` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for h in history:
            fh.write(f"{h.step}\t{h.loss_d!r}\t{h.loss_g_adv!r}\t{h.loss_travel!r}\t{h.loss_margin!r}\n")


def read_history(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            f = line.rstrip("\n").split("\t")
            out.append(StepLosses(int(f[0]), *map(float, f[1:])))
    return out
