"""
Run configuration: a JSON document with one object per section.

    {
      "seed": 0,
      "out_dir": "runs",
      "dsp":         {"sample_rate": 16000, "window_len": 400, "hop_len": 160,
                      "fft_len": 512, "n_mels": 40, "griffin_lim_iters": 32},
      "corpus":      {"roots": [], "test_per_class": 177},
      "classifier":  {"epochs": 10, "lr": 0.0001, "batch_size": 32, ...},
      "melgan":      {"lr": 0.0002, "batch_size": 16, "epochs": 20, ...},
      "melgan_data": {"datasets": ["cremad"], "max_clips": 1100, "toy": false, ...},
      "style":       {"n_filters": 64, "steps": 500, ...}
    }

Missing keys take the defaults below; unknown keys are an error. The top-level
``seed`` is the only seed: it is copied into every section that uses one.
"""

import dataclasses
import json
from dataclasses import dataclass, field

from emostyle import dsp
from emostyle.classifier import ClassifierConfig
from emostyle.melgan_vc import MelganConfig
from emostyle.neural_style import StyleConfig


class ConfigError(ValueError):
    pass


@dataclass
class DspSection:
    sample_rate: int = dsp.SAMPLE_RATE
    window_len: int = dsp.WINDOW_LEN
    hop_len: int = dsp.HOP_LEN
    fft_len: int = dsp.FFT_LEN
    n_mels: int = dsp.N_MELS
    griffin_lim_iters: int = 32

    def stft_params(self):
        return dsp.StftParams(self.window_len, self.hop_len, self.fft_len)


@dataclass
class CorpusSection:
    roots: list = field(default_factory=list)
    test_per_class: int = 177


@dataclass
class MelganDataSection:
    datasets: list = field(default_factory=lambda: ["cremad"])
    max_clips: int = 1100
    toy: bool = False
    toy_segments: int = 64


_SECTIONS = {
    "dsp": DspSection,
    "corpus": CorpusSection,
    "classifier": ClassifierConfig,
    "melgan": MelganConfig,
    "melgan_data": MelganDataSection,
    "style": StyleConfig,
}


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "runs"
    dsp: DspSection = field(default_factory=DspSection)
    corpus: CorpusSection = field(default_factory=CorpusSection)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    melgan: MelganConfig = field(default_factory=MelganConfig)
    melgan_data: MelganDataSection = field(default_factory=MelganDataSection)
    style: StyleConfig = field(default_factory=StyleConfig)

    def with_seed(self, seed):
        self.seed = int(seed)
        for name in _SECTIONS:
            section = getattr(self, name)
            if hasattr(section, "seed"):
                section.seed = self.seed
        return self

    def to_dict(self):
        out = {"seed": self.seed, "out_dir": self.out_dir}
        for name in _SECTIONS:
            d = dataclasses.asdict(getattr(self, name))
            d.pop("seed", None)
            out[name] = d
        return out


def _section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    allowed = {f.name for f in dataclasses.fields(cls)} - {"seed"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in section {name!r}: {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {name!r}: {exc}") from None


def from_dict(data):
    data = dict(data or {})
    unknown = sorted(set(data) - {"seed", "out_dir", *_SECTIONS})
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    cfg = RunConfig(
        seed=int(data.get("seed", 0)),
        out_dir=str(data.get("out_dir", "runs")),
        **{name: _section(cls, data.get(name, {}), name) for name, cls in _SECTIONS.items()},
    )
    return cfg.with_seed(cfg.seed)


def load(path=None):
    if path is None:
        return from_dict({})
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return from_dict(data)


def dump(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
