"""
Corpus ingestion for the CREMA-D, RAVDESS, SAVEE and TESS emotional speech
datasets: WAV decoding and resampling, filename parsing, manifests and
train/test splits.

Filename grammars (base names, ``.wav`` extension case-insensitive):

    cremad   <actor>_<sentence>_<EMO>_<level>     1001_DFA_ANG_XX.wav
    ravdess  seven dash-separated 2-digit fields  03-01-08-01-02-01-12.wav
    savee    <speaker>_<code><nn>                 DC_sa01.wav
    tess     <speaker>_<word>_<emotion>           OAF_back_angry.wav

Surprise-coded files (RAVDESS ``08``, SAVEE ``su``, TESS ``ps``) raise
:class:`Excluded`; RAVDESS "calm" (``02``) is folded into neutral.
"""

import hashlib
import logging
import os
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from math import gcd

import numpy as np
import scipy.io.wavfile
import scipy.signal

from emostyle import dsp
from emostyle.errors import CorruptFile, Excluded, NoFilesFound, Unparseable, UnsupportedCodec
from emostyle.labels import Emotion

log = logging.getLogger(__name__)

DATASETS = ("cremad", "ravdess", "savee", "tess")
PAPER_COUNTS = {"cremad": 7442, "ravdess": 1440, "savee": 480, "tess": 2800}

_CREMAD = {
    "ANG": Emotion.ANGER,
    "DIS": Emotion.DISGUST,
    "FEA": Emotion.FEAR,
    "HAP": Emotion.HAPPY,
    "NEU": Emotion.NEUTRAL,
    "SAD": Emotion.SAD,
}
_RAVDESS = {
    "01": Emotion.NEUTRAL,
    "02": Emotion.NEUTRAL,  # calm
    "03": Emotion.HAPPY,
    "04": Emotion.SAD,
    "05": Emotion.ANGER,
    "06": Emotion.FEAR,
    "07": Emotion.DISGUST,
}
_SAVEE = {
    "a": Emotion.ANGER,
    "d": Emotion.DISGUST,
    "f": Emotion.FEAR,
    "h": Emotion.HAPPY,
    "n": Emotion.NEUTRAL,
    "sa": Emotion.SAD,
}
_TESS = {
    "angry": Emotion.ANGER,
    "disgust": Emotion.DISGUST,
    "fear": Emotion.FEAR,
    "happy": Emotion.HAPPY,
    "neutral": Emotion.NEUTRAL,
    "sad": Emotion.SAD,
}
_TESS_SURPRISE = {"ps", "surprise", "surprised"}

_CREMAD_RE = re.compile(r"^(\d+)_([A-Za-z]+)_([A-Z]{3})_([A-Za-z]+)$")
_RAVDESS_RE = re.compile(r"^(\d{2})-(\d{2})-(\d{2})-(\d{2})-(\d{2})-(\d{2})-(\d{2})$")
_SAVEE_RE = re.compile(r"^([A-Za-z]+)_(sa|su|a|d|f|h|n)(\d{2})$")
_TESS_RE = re.compile(r"^([A-Za-z]+)_([A-Za-z']+)_([A-Za-z]+)$")


def _stem(name):
    if not isinstance(name, str):
        raise Unparseable(f"filename must be a string, got {type(name).__name__}")
    base = os.path.basename(name)
    if not base.lower().endswith(".wav"):
        raise Unparseable(f"{name!r}: not a .wav file")
    return base[:-4]


def parse_filename(dataset, name):
    """Return ``(speaker_id, emotion, utterance_code)`` for a base filename."""
    stem = _stem(name)
    if dataset == "cremad":
        m = _CREMAD_RE.match(stem)
        if not m or m.group(3) not in _CREMAD:
            raise Unparseable(f"{name!r}: not a CREMA-D name")
        return m.group(1), _CREMAD[m.group(3)], m.group(2)
    if dataset == "ravdess":
        m = _RAVDESS_RE.match(stem)
        if not m:
            raise Unparseable(f"{name!r}: not a RAVDESS name")
        code = m.group(3)
        if code == "08":
            raise Excluded(f"{name!r}: surprise")
        if code not in _RAVDESS:
            raise Unparseable(f"{name!r}: unknown RAVDESS emotion code {code}")
        return m.group(7), _RAVDESS[code], m.group(5)
    if dataset == "savee":
        m = _SAVEE_RE.match(stem)
        if not m:
            raise Unparseable(f"{name!r}: not a SAVEE name")
        if m.group(2) == "su":
            raise Excluded(f"{name!r}: surprise")
        return m.group(1), _SAVEE[m.group(2)], m.group(2) + m.group(3)
    if dataset == "tess":
        m = _TESS_RE.match(stem)
        if not m:
            raise Unparseable(f"{name!r}: not a TESS name")
        emotion = m.group(3).lower()
        if emotion in _TESS_SURPRISE:
            raise Excluded(f"{name!r}: pleasant surprise")
        if emotion not in _TESS:
            raise Unparseable(f"{name!r}: unknown TESS emotion {m.group(3)!r}")
        return m.group(1), _TESS[emotion], m.group(2)
    raise ValueError(f"unknown dataset {dataset!r}; expected one of {DATASETS}")


def detect_dataset(name):
    """Guess the dataset from the shape of a filename; ``None`` if none fits."""
    try:
        stem = _stem(name)
    except Unparseable:
        return None
    if _RAVDESS_RE.match(stem):
        return "ravdess"
    if _CREMAD_RE.match(stem):
        return "cremad"
    if _SAVEE_RE.match(stem):
        return "savee"
    if _TESS_RE.match(stem):
        return "tess"
    return None


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    dataset: str
    speaker_id: str
    emotion: Emotion
    utterance_code: str


@dataclass
class Manifest:
    entries: list = field(default_factory=list)
    splits: dict = field(default_factory=dict)  # path -> "train" | "test"
    seed: int = 0
    scanned: Counter = field(default_factory=Counter)  # dataset -> files seen, pre-exclusion
    excluded: Counter = field(default_factory=Counter)  # dataset -> surprise-coded files
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        if not isinstance(other, Manifest):
            return NotImplemented
        return self.entries == other.entries and self.split_of_all() == other.split_of_all()

    def split_of(self, entry):
        return self.splits.get(entry.path, "train")

    def split_of_all(self):
        return [self.split_of(e) for e in self.entries]

    def subset(self, split=None, emotion=None, datasets=None, exclude_datasets=()):
        out = []
        for e in self.entries:
            if split is not None and self.split_of(e) != split:
                continue
            if emotion is not None and e.emotion != Emotion.parse(emotion):
                continue
            if datasets and e.dataset not in datasets:
                continue
            if e.dataset in exclude_datasets:
                continue
            out.append(e)
        return out


def scan_wavs(roots):
    found = []
    for root in roots:
        for dirpath, _, files in os.walk(root):
            found.extend(os.path.join(dirpath, f) for f in files if f.lower().endswith(".wav"))
    return sorted(found)


def build_manifest(roots, seed=0):
    """Scan ``roots`` recursively and parse every ``.wav`` file."""
    roots = [str(r) for r in roots]
    paths = scan_wavs(roots)
    if not paths:
        raise NoFilesFound(f"no .wav files under {', '.join(roots) or '(no roots given)'}")
    manifest = Manifest(seed=seed)
    for path in paths:
        name = os.path.basename(path)
        dataset = detect_dataset(name)
        if dataset is None:
            manifest.warnings.append(f"unparseable filename: {path}")
            log.warning("unparseable filename: %s", path)
            continue
        manifest.scanned[dataset] += 1
        try:
            speaker, emotion, utterance = parse_filename(dataset, name)
        except Excluded:
            manifest.excluded[dataset] += 1
            continue
        except Unparseable as exc:
            manifest.warnings.append(str(exc))
            log.warning("%s", exc)
            continue
        manifest.entries.append(ManifestEntry(path, dataset, speaker, emotion, utterance))
    return manifest


def class_counts(manifest):
    counts = {e: 0 for e in Emotion}
    for entry in manifest.entries:
        counts[entry.emotion] += 1
    return counts


def dataset_counts(manifest):
    counts = {d: 0 for d in DATASETS}
    for entry in manifest.entries:
        counts[entry.dataset] += 1
    return counts


def _rank(seed, path):
    return hashlib.sha256(f"{seed}:{path}".encode()).hexdigest()


def split(manifest, test_per_class, seed=None):
    """Assign ``test_per_class`` entries of each emotion to the test split.

    Entries are ordered within a class by a seeded hash of their path, so an
    entry's rank depends only on ``(seed, path)``. A class with no more than
    ``test_per_class`` entries falls back to sending half of them to test.
    """
    seed = manifest.seed if seed is None else seed
    splits = {}
    by_class = {}
    for e in manifest.entries:
        by_class.setdefault(e.emotion, []).append(e)
    for emotion, entries in sorted(by_class.items()):
        n_test = test_per_class
        if test_per_class > 0 and len(entries) <= test_per_class:
            n_test = len(entries) // 2
            msg = f"{emotion}: only {len(entries)} entries for {test_per_class} test slots; using {n_test}"
            manifest.warnings.append(msg)
            log.warning(msg)
        ranked = sorted(entries, key=lambda e: _rank(seed, e.path))
        for i, e in enumerate(ranked):
            splits[e.path] = "test" if i < n_test else "train"
    manifest.splits = splits
    manifest.seed = seed
    return manifest


def write_manifest(manifest, path):
    """One tab-separated record per entry, sorted by path."""
    lines = []
    for e in sorted(manifest.entries, key=lambda e: e.path):
        fields = [e.path, e.dataset, e.speaker_id, str(e.emotion), e.utterance_code, manifest.split_of(e)]
        lines.append("\t".join(fields) + "\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)


def read_manifest(path, seed=0):
    manifest = Manifest(seed=seed)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 tab-separated fields, got {len(fields)}")
            p, dataset, speaker, emotion, utterance, which = fields
            entry = ManifestEntry(p, dataset, speaker, Emotion.parse(emotion), utterance)
            manifest.entries.append(entry)
            manifest.splits[p] = which
    return manifest


# audio -----------------------------------------------------------------------
def read_wav(path):
    """Decode 16-bit PCM or 32-bit float WAV into ``(samples, rate)``.

    Samples are float64 in ``[-1, 1]`` with shape ``[n]`` or ``[n, channels]``.
    """
    try:
        rate, data = scipy.io.wavfile.read(path)
    except ValueError as exc:
        msg = str(exc)
        if "Unknown wave file format" in msg or "Unsupported" in msg or "not supported" in msg:
            raise UnsupportedCodec(f"{path}: {msg}") from None
        raise CorruptFile(f"{path}: {msg}") from None
    except FileNotFoundError:
        raise
    except (OSError, EOFError, IndexError, TypeError, struct.error) as exc:
        raise CorruptFile(f"{path}: {exc}") from None
    if data.ndim == 2 and not 1 <= data.shape[1] <= 2:
        raise UnsupportedCodec(f"{path}: {data.shape[1]} channels; only mono or stereo is supported")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedCodec(f"{path}: sample format {data.dtype}; need 16-bit PCM or 32-bit float")
    if samples.size == 0:
        raise CorruptFile(f"{path}: no audio frames")
    return samples, int(rate)


def write_wav(path, clip):
    """Write a clip as 16-bit PCM mono."""
    pcm = np.round(np.clip(clip.samples, -1.0, 32767 / 32768) * 32768.0).astype(np.int16)
    scipy.io.wavfile.write(path, clip.sample_rate, pcm)


def kaiser_lowpass(up, down, taps_per_phase=64, beta=8.0):
    """Windowed-sinc anti-alias filter for rational resampling by ``up/down``."""
    rate = max(up, down)
    return scipy.signal.firwin(taps_per_phase * rate + 1, 1.0 / rate, window=("kaiser", beta))


def resample(samples, rate_in, rate_out=dsp.SAMPLE_RATE):
    if rate_in == rate_out:
        return np.asarray(samples, dtype=np.float64)
    g = gcd(int(rate_in), int(rate_out))
    up, down = rate_out // g, rate_in // g
    return scipy.signal.resample_poly(samples, up, down, window=kaiser_lowpass(up, down))


def load_audio(entry, sample_rate=dsp.SAMPLE_RATE):
    """Decode, downmix to mono, resample and peak-normalise to 0.95."""
    path = entry.path if isinstance(entry, ManifestEntry) else str(entry)
    samples, rate = read_wav(path)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    samples = resample(samples, rate, sample_rate)
    return dsp.AudioClip(dsp.peak_normalize(samples), sample_rate)

