import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emostyle import checkpoint, dsp, melgan_vc, synthetic
from emostyle.autograd import Tensor
from emostyle.errors import BatchTooSmall, EmptyManifest, EmptySpectrogram, NanLoss, ShapeMismatch
from oracles import naive_generator, tiny_melgan_config


def tiny_model(seed=0, **kw):
    cfg = tiny_melgan_config(seed)
    for k, v in kw.items():
        setattr(cfg, k, v)
    return melgan_vc.MelganModel.initialize(cfg, dtype=np.float64)


def emb(rows):
    return Tensor(np.asarray(rows, dtype=np.float64))


# segmentation ----------------------------------------------------------------
def test_segment_298_frames():
    data = np.random.default_rng(0).uniform(-80, 0, (40, 298))
    segs = melgan_vc.segment(data, 128)
    assert segs.shape == (3, 40, 128)
    assert np.all(segs[2][:, 298 - 256 :] == -1.0)
    assert 3 * 128 - 298 == 86


def test_segment_exact_length():
    data = np.random.default_rng(0).uniform(-80, 0, (40, 128))
    segs = melgan_vc.segment(data, 128)
    assert segs.shape == (1, 40, 128)
    assert segs.min() >= -1 and segs.max() <= 1


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 400), st.sampled_from([8, 32, 128]))
def test_unsegment_inverts_segment(n_frames, seg_frames):
    data = np.random.default_rng(n_frames).uniform(-80, 0, (40, n_frames))
    back = melgan_vc.unsegment(melgan_vc.segment(data, seg_frames), n_frames)
    assert np.max(np.abs(back.data - data)) < 1e-6


def test_empty_spectrogram():
    with pytest.raises(EmptySpectrogram):
        melgan_vc.segment(np.zeros((40, 0)))


def test_scaling_endpoints():
    assert melgan_vc.scale_db(np.array([-80.0, 0.0])).tolist() == [-1.0, 1.0]


# generator -------------------------------------------------------------------
def test_generator_matches_loop_oracle():
    model = tiny_model(3)
    rng = np.random.default_rng(3)
    for p in model.generator.params.values():  # move off the zero-bias / unit-gain init
        p.data += 0.1 * rng.standard_normal(p.shape)
    x = rng.uniform(-1, 1, (2, 1, 8, 8))
    params = {k: v.data for k, v in model.generator.params.items()}
    expected = naive_generator(params, x, depth=2)
    np.testing.assert_allclose(model.generator(Tensor(x)).data, expected, atol=1e-9)


def test_fresh_generator_on_zero_input():
    model = tiny_model(0)
    x = np.zeros((1, 1, 8, 8))
    out = model.generator(Tensor(x)).data
    params = {k: v.data for k, v in model.generator.params.items()}
    np.testing.assert_allclose(out, naive_generator(params, x, 2), atol=1e-12)
    assert np.all(np.isfinite(out)) and np.abs(out).max() <= 1.0


@pytest.mark.parametrize("depth,n_mels,frames", [(1, 8, 16), (2, 16, 8), (3, 40, 32)])
def test_generate_preserves_shape(depth, n_mels, frames):
    cfg = melgan_vc.MelganConfig(n_mels=n_mels, seg_frames=frames, depth=depth, gen_channels=2,
                                 disc_channels=2, siamese_channels=2, embed_dim=4)
    model = melgan_vc.MelganModel.initialize(cfg)
    seg = np.random.default_rng(0).uniform(-1, 1, (n_mels, frames)).astype(np.float32)
    out = melgan_vc.generate(model, seg)
    assert out.shape == seg.shape
    assert np.array_equal(out, melgan_vc.generate(model, seg))
    assert np.abs(out).max() <= 1.0


def test_generate_rejects_wrong_bands():
    with pytest.raises(ShapeMismatch):
        melgan_vc.generate(tiny_model(), np.zeros((5, 8)))


def test_config_validation():
    with pytest.raises(ValueError):
        melgan_vc.MelganConfig(seg_frames=100)
    with pytest.raises(ValueError):
        melgan_vc.MelganConfig(head="sigmoid")


# losses ----------------------------------------------------------------------
def test_travel_hand_example():
    src = emb([[1.0, 0.0], [0.0, 0.0]])
    gen = emb([[0.0, 1.0], [0.0, 0.0]])
    assert melgan_vc.travel_loss_from_embeddings(src, gen).item() == pytest.approx(3.0, abs=1e-6)


def test_travel_zero_on_identical_batches():
    model = tiny_model()
    batch = np.random.default_rng(0).uniform(-1, 1, (4, 8, 8))
    assert abs(melgan_vc.travel_loss(model.siamese, batch, batch).item()) < 1e-6


def test_travel_translation_invariance():
    rng = np.random.default_rng(0)
    src, gen = rng.standard_normal((5, 6)), rng.standard_normal((5, 6))
    a = melgan_vc.travel_loss_from_embeddings(emb(src), emb(gen)).item()
    b = melgan_vc.travel_loss_from_embeddings(emb(src), emb(gen + rng.standard_normal(6))).item()
    assert a == pytest.approx(b, abs=1e-6)
    assert a >= 0


def test_margin_values():
    assert melgan_vc.margin_loss_from_embeddings(emb(np.ones((4, 3))), 2.5).item() == pytest.approx(2.5, abs=1e-6)
    assert melgan_vc.margin_loss_from_embeddings(emb([[0.0, 0.0], [0.5, 0.0]]), 1.0).item() == pytest.approx(0.5)
    assert melgan_vc.margin_loss_from_embeddings(emb([[0.0], [3.0], [-3.0]]), 1.0).item() == 0.0


def test_margin_on_collapsed_siamese():
    model = tiny_model()
    for p in model.siamese.params.values():
        p.data[...] = 0.0
    batch = np.random.default_rng(0).uniform(-1, 1, (3, 8, 8))
    assert melgan_vc.siamese_margin_loss(model.siamese, batch, 1.0).item() == pytest.approx(1.0, abs=1e-6)


def test_batch_too_small():
    with pytest.raises(BatchTooSmall):
        melgan_vc.travel_loss_from_embeddings(emb([[1.0]]), emb([[1.0]]))
    with pytest.raises(BatchTooSmall):
        melgan_vc.siamese_margin_loss(tiny_model().siamese, np.zeros((1, 8, 8)))


def test_hinge_values():
    loss_d, _ = melgan_vc.hinge_losses(emb([1.0, 1.0]), emb([-1.0, -1.0]))
    assert loss_d.item() == 0.0
    loss_d, loss_g = melgan_vc.hinge_losses(emb([0.0, 0.0]), emb([0.0]))
    assert loss_d.item() == 2.0 and loss_g.item() == 0.0


def test_hinge_matches_scalar_oracle():
    model = tiny_model(5)
    rng = np.random.default_rng(5)
    real, fake = rng.uniform(-1, 1, (3, 8, 8)), rng.uniform(-1, 1, (4, 8, 8))
    loss_d, loss_g = melgan_vc.adversarial_losses(model.discriminator, real, fake)
    dr = model.discriminator(Tensor(real[:, None])).data
    df = model.discriminator(Tensor(fake[:, None])).data
    ref_d = np.mean([max(0.0, 1 - v) for v in dr]) + np.mean([max(0.0, 1 + v) for v in df])
    assert loss_d.item() == pytest.approx(ref_d, abs=1e-6)
    assert loss_g.item() == pytest.approx(-np.mean(df), abs=1e-6)


# training --------------------------------------------------------------------
def toy_data(n=8, frames=8, n_mels=8):
    return (
        synthetic.band_segments(n, "low", n_mels, frames, seed=1),
        synthetic.band_segments(n, "high", n_mels, frames, seed=2),
    )


def tiny_train_config(**kw):
    cfg = tiny_melgan_config()
    cfg.batch_size = 4
    for k, v in kw.items():
        setattr(cfg, k, v)
    return cfg


def test_zero_epochs_returns_initialized_model():
    lo, hi = toy_data()
    result = melgan_vc.train_pair(lo, hi, tiny_train_config(epochs=0))
    assert result.history == [] and result.gen_updates == 0
    fresh = melgan_vc.MelganModel.initialize(tiny_train_config(epochs=0), "happy", "sad")
    for k, v in fresh.state_dict().items():
        assert np.array_equal(v, result.model.state_dict()[k])


def test_empty_inputs():
    lo, _ = toy_data()
    with pytest.raises(EmptyManifest):
        melgan_vc.train_pair(lo, lo[:0], tiny_train_config(epochs=1))


def test_update_ratio_and_finite_losses():
    lo, hi = toy_data(n=20)
    result = melgan_vc.train_pair(lo, hi, tiny_train_config(epochs=3))
    assert result.gen_updates == 15
    assert abs(result.gen_updates - 3 * result.disc_updates) <= 2
    assert all(h.finite() for h in result.history)
    assert all(h.loss_d >= 0 and h.loss_travel >= 0 and h.loss_margin >= 0 for h in result.history)


def test_single_batch_epochs_keep_ratio():
    lo, hi = toy_data(n=4)
    result = melgan_vc.train_pair(lo, hi, tiny_train_config(epochs=9))
    assert result.gen_updates == 9 and result.disc_updates == 3


def test_training_is_deterministic():
    lo, hi = toy_data()
    a = melgan_vc.train_pair(lo, hi, tiny_train_config(epochs=2)).model.state_dict()
    b = melgan_vc.train_pair(lo, hi, tiny_train_config(epochs=2)).model.state_dict()
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_on_epoch_callback():
    lo, hi = toy_data()
    seen = []
    melgan_vc.train_pair(lo, hi, tiny_train_config(epochs=3), on_epoch=lambda e, m: seen.append(e))
    assert seen == [0, 1, 2]


def test_nan_loss_aborts():
    lo, hi = toy_data()
    with pytest.raises(NanLoss) as info:
        melgan_vc.train_pair(lo, hi, tiny_train_config(epochs=1, lr=float("nan")))
    assert info.value.step >= 0


def test_history_round_trip(tmp_path):
    lo, hi = toy_data()
    history = melgan_vc.train_pair(lo, hi, tiny_train_config(epochs=1)).history
    melgan_vc.write_history(history, tmp_path / "h.tsv")
    assert melgan_vc.read_history(tmp_path / "h.tsv") == history
    assert len((tmp_path / "h.tsv").read_text().splitlines()[0].split("\t")) == 5


def test_checkpoint_round_trip_generates_identically(tmp_path):
    lo, hi = toy_data()
    model = melgan_vc.train_pair(lo, hi, tiny_train_config(epochs=1)).model
    checkpoint.save(tmp_path / "m.ckpt", "melgan", model.metadata(), model.state_dict())
    kind, meta, tensors = checkpoint.load(tmp_path / "m.ckpt")
    cfg = melgan_vc.MelganConfig(**meta["melgan"])
    loaded = melgan_vc.MelganModel.initialize(cfg, meta["source"], meta["target"]).load_state_dict(tensors)
    assert np.array_equal(melgan_vc.generate(model, lo), melgan_vc.generate(loaded, lo))


# transfer --------------------------------------------------------------------
def speechy(seconds):
    t = np.arange(int(seconds * dsp.SAMPLE_RATE)) / dsp.SAMPLE_RATE
    return dsp.AudioClip(0.5 * np.sin(2 * np.pi * (150 * t + 400 * t**2)) * (1 + 0.5 * np.sin(9 * t)))


def identity_model():
    cfg = melgan_vc.MelganConfig(gen_channels=2, disc_channels=2, siamese_channels=2, embed_dim=4)
    return melgan_vc.identity_generator(melgan_vc.MelganModel.initialize(cfg))


def test_identity_generator_spectrogram():
    spec = dsp.mel_spectrogram(speechy(1.0))
    out = melgan_vc.transfer_spectrogram(identity_model(), spec)
    assert np.max(np.abs(out.data - spec.data)) < 1e-4


def test_transfer_length_and_determinism():
    model = identity_model()
    clip = speechy(2.0)
    a = melgan_vc.transfer(model, clip, iterations=4)
    b = melgan_vc.transfer(model, clip, iterations=4)
    assert abs(len(a) - 32000) <= 160
    assert np.array_equal(a.samples, b.samples)
