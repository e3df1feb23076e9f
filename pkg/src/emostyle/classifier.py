"""
MFCC emotion classifier and the accuracy / macro-F1 metrics used to judge
converted audio.

Each clip becomes an 80-dimensional vector: the per-coefficient mean and
standard deviation over time of 40 MFCCs. Features are standardised with
statistics from the training set (stored with the model), then fed to a
dense stack 80 -> 128 -> 256 -> 256 -> 6 with ReLU between layers.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from emostyle import dsp
from emostyle.autograd import Adam, Tensor, cross_entropy, dense, no_grad, relu, softmax
from emostyle.autograd import init
from emostyle.autograd.module import Network
from emostyle.errors import EmptyInput, EmptyManifest, SingleClass
from emostyle.labels import NAMES, N_CLASSES, Emotion

log = logging.getLogger(__name__)

N_COEFFS = 40
FEATURE_DIM = 2 * N_COEFFS
HIDDEN = (128, 256, 256)


def featurize_mel(spec, n_coeffs=N_COEFFS):
    """Time-pooled MFCC statistics of a mel spectrogram (or a raw dB matrix)."""
    coeffs = dsp.mfcc(spec, n_coeffs).data
    return np.concatenate([coeffs.mean(axis=1), coeffs.std(axis=1)])


def featurize(clip, n_mels=dsp.N_MELS, params=None, n_coeffs=N_COEFFS):
    return featurize_mel(dsp.mel_spectrogram(clip, n_mels, params), n_coeffs)


@dataclass
class ClassifierConfig:
    epochs: int = 10
    lr: float = 1e-4
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 0
    exclude_datasets: list = field(default_factory=lambda: ["tess"])


class ClassifierModel(Network):
    def __init__(self, input_dim=FEATURE_DIM, hidden=HIDDEN, n_classes=N_CLASSES, seed=0, dtype=np.float32):
        super().__init__()
        rng = np.random.default_rng(seed)
        dims = [input_dim, *hidden]
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            self.params[f"fc{i}.w"] = init.he_uniform((a, b), rng, dtype=dtype)
            self.params[f"fc{i}.b"] = init.zeros(b, dtype)
        self.params["head.w"] = init.glorot_uniform((dims[-1], n_classes), rng, dtype=dtype)
        self.params["head.b"] = init.zeros(n_classes, dtype)
        self.buffers["feature_mean"] = np.zeros(input_dim, dtype=dtype)
        self.buffers["feature_std"] = np.ones(input_dim, dtype=dtype)
        self.n_hidden = len(hidden)

    def forward(self, feats):
        """Logits for a batch of raw (unstandardised) feature vectors."""
        if not isinstance(feats, Tensor):
            dtype = self.params["head.w"].dtype
            feats = Tensor(np.atleast_2d(np.asarray(feats, dtype=dtype)))
        h = (feats - self.buffers["feature_mean"]) / self.buffers["feature_std"]
        for i in range(self.n_hidden):
            h = relu(dense(h, self.params[f"fc{i}.w"], self.params[f"fc{i}.b"]))
        return dense(h, self.params["head.w"], self.params["head.b"])

    def fit_normalizer(self, feats):
        std = feats.std(axis=0)
        self.buffers["feature_mean"] = feats.mean(axis=0).astype(self.buffers["feature_mean"].dtype)
        self.buffers["feature_std"] = np.where(std > 1e-8, std, 1.0).astype(self.buffers["feature_std"].dtype)

    def probabilities(self, feats):
        with no_grad():
            return softmax(self.forward(feats), axis=1).data.astype(np.float64)


def _features_and_labels(data):
    """Accept ``(features, labels)`` arrays or a sequence of manifest entries."""
    if isinstance(data, tuple) and len(data) == 2:
        feats, labels = data
        return np.asarray(feats, dtype=np.float64), np.asarray(labels, dtype=np.int64)
    from emostyle.corpus import load_audio

    entries = list(data)
    feats = np.array([featurize(load_audio(e)) for e in entries]).reshape(len(entries), -1)
    labels = np.array([int(e.emotion) for e in entries], dtype=np.int64)
    return feats, labels


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


def train_classifier(data, config=None):
    """Train on ``(features, labels)`` or manifest entries; returns ``(model, history)``."""
    cfg = config or ClassifierConfig()
    feats, labels = _features_and_labels(data)
    if labels.size == 0:
        raise EmptyManifest("no training examples")
    if np.unique(labels).size < 2:
        raise SingleClass(f"training data has a single class: {Emotion(int(labels[0]))}")

    model = ClassifierModel(feats.shape[1], seed=cfg.seed)
    model.fit_normalizer(feats)
    opt = Adam(model.parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    rng = np.random.default_rng(cfg.seed + 1)
    x_all = feats.astype(np.float32)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(labels.size)
        total, correct = 0.0, 0
        for start in range(0, labels.size, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            logits = model(Tensor(x_all[idx]))
            loss = cross_entropy(logits, labels[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * idx.size
            correct += int(np.sum(logits.data.argmax(axis=1) == labels[idx]))
        history.append(EpochStats(epoch, total / labels.size, correct / labels.size))
        log.debug("epoch %d loss %.4f acc %.3f", epoch, history[-1].loss, history[-1].accuracy)
    return model, history


def predict_features(model, feats):
    """Labels and probability rows for a batch of feature vectors.

    Ties resolve to the lowest class code (``argmax`` semantics).
    """
    probs = model.probabilities(feats)
    return probs.argmax(axis=1), probs


def predict(model, clip):
    labels, probs = predict_features(model, featurize(clip)[None])
    return Emotion(int(labels[0])), probs[0]


# metrics ---------------------------------------------------------------------
@dataclass
class EvalReport:
    accuracy: float
    macro_f1: float
    confusion: np.ndarray

    def row(self, name):
        return f"{name} | {100 * self.accuracy:.2f} | {100 * self.macro_f1:.2f}"


def confusion_matrix(true, pred, n_classes=N_CLASSES):
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(true, dtype=np.int64), np.asarray(pred, dtype=np.int64)), 1)
    return cm


def per_class_f1(confusion):
    cm = np.asarray(confusion, dtype=np.float64)
    tp = np.diag(cm)
    predicted, actual = cm.sum(axis=0), cm.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    denom = precision + recall
    return np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)


def report_from_confusion(confusion):
    """Accuracy and macro F1; classes without true positives contribute F1 = 0."""
    cm = np.asarray(confusion)
    total = cm.sum()
    accuracy = float(np.trace(cm) / total) if total else 0.0
    return EvalReport(accuracy, float(per_class_f1(cm).mean()), cm)


def report(true, pred, n_classes=N_CLASSES):
    return report_from_confusion(confusion_matrix(true, pred, n_classes))


def evaluate(model, data):
    feats, labels = _features_and_labels(data)
    if labels.size == 0:
        raise EmptyManifest("nothing to evaluate")
    pred, _ = predict_features(model, feats)
    return report(labels, pred)


def judge_features(model, feats, target):
    """Judge already-featurised generated material against one target emotion."""
    feats = np.asarray(feats)
    if feats.size == 0:
        raise EmptyInput("no generated material to judge")
    target = Emotion.parse(target)
    pred, _ = predict_features(model, feats)
    rep = report(np.full(pred.size, int(target)), pred)
    return rep.accuracy, rep


def judge_transfer(model, generated_clips, target):
    """Fraction of clips classified as ``target`` plus the full report."""
    clips = list(generated_clips)
    if not clips:
        raise EmptyInput("no generated clips to judge")
    return judge_features(model, np.array([featurize(c) for c in clips]), target)


def format_table(rows):
    """Plain-text table with ``Model | Accuracy | F1`` columns (percentages)."""
    lines = ["Model | Accuracy | F1"]
    lines += [rep.row(name) for name, rep in rows]
    return "\n".join(lines) + "\n"


def write_confusion_csv(confusion, path, names=NAMES):
    cm = np.asarray(confusion)
    names = list(names)[: cm.shape[0]]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("true\\pred," + ",".join(names) + "\n")
        for name, row in zip(names, cm):
            fh.write(name + "," + ",".join(str(int(v)) for v in row) + "\n")


def config_dict(config):
    return asdict(config)
