"""
Command-line front end.

Subcommands: manifest, features, train-classifier, train-melgan,
style-transfer, transfer, evaluate, spectrogram. Every subcommand accepts
``--config PATH``, ``--seed N`` and ``--out DIR`` and writes the effective
configuration next to its outputs.

Exit codes: 0 success, 1 usage, 2 input/data error, 3 numerical failure,
4 artifact mismatch.
"""

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from emostyle import checkpoint, classifier, config, corpus, dsp, melgan_vc, neural_style, plot, synthetic
from emostyle.errors import (
    CorruptCheckpoint,
    CorruptFile,
    EmostyleError,
    EmptyManifest,
    NanLoss,
    NoFilesFound,
    SingleClass,
    UnsupportedCodec,
    VersionMismatch,
)
from emostyle.labels import Emotion

log = logging.getLogger("emostyle")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_MISMATCH = 0, 1, 2, 3, 4
DATA_ENV = "EMOSTYLE_DATA"


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(f"{self.prog}: error: {message}", EXIT_USAGE)


# model persistence -------------------------------------------------------------
def save_melgan(model, path, dsp_section=None):
    meta = model.metadata()
    meta["dsp"] = dataclasses.asdict(dsp_section or config.DspSection())
    checkpoint.save(path, "melgan", meta, model.state_dict())


def save_classifier(model, path, cfg=None, dsp_section=None):
    meta = {
        "classifier": dataclasses.asdict(cfg or classifier.ClassifierConfig()),
        "input_dim": int(model.buffers["feature_mean"].size),
        "dsp": dataclasses.asdict(dsp_section or config.DspSection()),
    }
    checkpoint.save(path, "classifier", meta, model.state_dict())


def load_model(path, kind=None):
    """Load a checkpoint, returning ``(model, dsp_section)``; ``kind`` is enforced if given."""
    try:
        found, meta, tensors = checkpoint.load(path)
    except FileNotFoundError:
        raise CliError(f"checkpoint not found: {path}", EXIT_DATA) from None
    except (CorruptCheckpoint, VersionMismatch) as exc:
        raise CliError(str(exc), EXIT_MISMATCH) from None
    if kind is not None and found != kind:
        raise CliError(f"{path}: expected a {kind} checkpoint, found {found!r}", EXIT_MISMATCH)
    dsp_section = config.DspSection(**meta.get("dsp", {}))
    if found == "melgan":
        cfg = melgan_vc.MelganConfig(**meta["melgan"])
        model = melgan_vc.MelganModel.initialize(cfg, meta["source"], meta["target"])
        return model.load_state_dict(tensors), dsp_section
    if found == "classifier":
        cfg = meta["classifier"]
        model = classifier.ClassifierModel(meta["input_dim"], seed=cfg.get("seed", 0))
        return model.load_state_dict(tensors), dsp_section
    raise CliError(f"{path}: unknown checkpoint kind {found!r}", EXIT_MISMATCH)


# helpers -----------------------------------------------------------------------
def _out_dir(args, cfg):
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_clip(path, cfg):
    try:
        return corpus.load_audio(path, cfg.dsp.sample_rate)
    except (FileNotFoundError, IsADirectoryError):
        raise CliError(f"cannot read {path}: no such file", EXIT_DATA) from None
    except (CorruptFile, UnsupportedCodec) as exc:
        raise CliError(str(exc), EXIT_DATA) from None


def _read_manifest(path, cfg):
    if not path or not os.path.exists(path):
        raise CliError(f"manifest not found: {path}", EXIT_DATA)
    return corpus.read_manifest(path, cfg.seed)


def _emotion(value):
    try:
        return Emotion.parse(value)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None


def _mel(clip, cfg):
    return dsp.mel_spectrogram(clip, cfg.dsp.n_mels, cfg.dsp.stft_params())


# subcommands -------------------------------------------------------------------
def cmd_manifest(args, cfg):
    roots = args.roots or cfg.corpus.roots or ([os.environ[DATA_ENV]] if os.environ.get(DATA_ENV) else [])
    if not roots:
        raise CliError(f"no corpus roots given (pass paths or set {DATA_ENV})", EXIT_USAGE)
    try:
        manifest = corpus.build_manifest(roots, cfg.seed)
    except NoFilesFound as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    corpus.split(manifest, cfg.corpus.test_per_class, cfg.seed)
    out = _out_dir(args, cfg)
    corpus.write_manifest(manifest, out / "manifest.tsv")

    datasets = corpus.dataset_counts(manifest)
    print(f"scanned {sum(manifest.scanned.values())} files")
    for name in corpus.DATASETS:
        print(
            f"  {name}: {manifest.scanned[name]} files, {datasets[name]} kept, "
            f"{manifest.excluded[name]} excluded"
        )
    for emotion, n in corpus.class_counts(manifest).items():
        print(f"  {emotion}: {n}")
    if manifest.warnings:
        print(f"{len(manifest.warnings)} warning(s); first: {manifest.warnings[0]}")
    return EXIT_OK


def cmd_features(args, cfg):
    manifest = _read_manifest(args.manifest, cfg)
    out = _out_dir(args, cfg)
    with open(out / "features.tsv", "w", encoding="utf-8") as fh:
        for entry in manifest.entries:
            feats = classifier.featurize(_read_clip(entry.path, cfg), cfg.dsp.n_mels, cfg.dsp.stft_params())
            fh.write("\t".join([entry.path, str(entry.emotion), *(repr(float(v)) for v in feats)]) + "\n")
    print(f"wrote {len(manifest.entries)} feature vectors to {out / 'features.tsv'}")
    return EXIT_OK


def _features(entries, cfg):
    feats = [classifier.featurize(_read_clip(e.path, cfg), cfg.dsp.n_mels, cfg.dsp.stft_params()) for e in entries]
    labels = [int(e.emotion) for e in entries]
    return np.array(feats).reshape(len(entries), -1), np.array(labels, dtype=np.int64)


def cmd_train_classifier(args, cfg):
    manifest = _read_manifest(args.manifest, cfg)
    excluded = tuple(cfg.classifier.exclude_datasets)
    train = manifest.subset(split="train", exclude_datasets=excluded)
    test = manifest.subset(split="test", exclude_datasets=excluded)
    try:
        model, history = classifier.train_classifier(_features(train, cfg), cfg.classifier)
    except (EmptyManifest, SingleClass) as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    out = _out_dir(args, cfg)
    save_classifier(model, out / "classifier.ckpt", cfg.classifier, cfg.dsp)
    with open(out / "classifier_history.tsv", "w", encoding="utf-8") as fh:
        for h in history:
            fh.write(f"{h.epoch}\t{h.loss!r}\t{h.accuracy!r}\n")
    if history:
        print(f"train accuracy {100 * history[-1].accuracy:.1f}% after {len(history)} epochs")
    if test:
        rep = classifier.evaluate(model, _features(test, cfg))
        print(classifier.format_table([("All emotions (original audio) classifier", rep)]), end="")
        classifier.write_confusion_csv(rep.confusion, out / "classifier_confusion.csv")
    return EXIT_OK


def cmd_train_melgan(args, cfg):
    source, target = _emotion(args.source), _emotion(args.target)
    if source == target:
        raise CliError("source and target emotions must differ", EXIT_USAGE)
    mcfg, data = cfg.melgan, cfg.melgan_data
    if data.toy or args.toy:
        src = synthetic.band_segments(data.toy_segments, "low", mcfg.n_mels, mcfg.seg_frames, seed=cfg.seed + 11)
        tgt = synthetic.band_segments(data.toy_segments, "high", mcfg.n_mels, mcfg.seg_frames, seed=cfg.seed + 12)
    else:
        manifest = _read_manifest(args.manifest, cfg)
        src_entries = manifest.subset("train", source, data.datasets)[: data.max_clips]
        tgt_entries = manifest.subset("train", target, data.datasets)[: data.max_clips]
        if not src_entries or not tgt_entries:
            raise CliError(f"no training clips for {source} and/or {target}", EXIT_DATA)
        params = cfg.dsp.stft_params()
        src = melgan_vc.segments_from_clips([_read_clip(e.path, cfg) for e in src_entries], mcfg, params)
        tgt = melgan_vc.segments_from_clips([_read_clip(e.path, cfg) for e in tgt_entries], mcfg, params)

    out = _out_dir(args, cfg)
    stem = f"melgan_{source}_to_{target}"

    def on_epoch(epoch, model):
        save_melgan(model, out / f"{stem}_epoch{epoch + 1:03d}.ckpt", cfg.dsp)

    try:
        result = melgan_vc.train_pair(
            src.astype(np.float32), tgt.astype(np.float32), mcfg, str(source), str(target), on_epoch
        )
    except NanLoss as exc:
        raise CliError(f"training diverged at step {exc.step}: {exc.losses}", EXIT_NUMERIC) from None
    save_melgan(result.model, out / f"{stem}.ckpt", cfg.dsp)
    melgan_vc.write_history(result.history, out / f"{stem}_losses.tsv")
    print(
        f"{stem}: {result.gen_updates} generator / {result.disc_updates} discriminator updates; "
        f"checkpoint {out / (stem + '.ckpt')}"
    )
    return EXIT_OK


def cmd_style_transfer(args, cfg):
    content, style = _read_clip(args.content, cfg), _read_clip(args.style, cfg)
    result, losses = neural_style.style_transfer_trace(_mel(content, cfg), _mel(style, cfg), cfg.style)
    out = _out_dir(args, cfg)
    audio = dsp.griffin_lim(result, iterations=cfg.dsp.griffin_lim_iters)
    corpus.write_wav(out / "style_transfer.wav", audio)
    plot.save_spectrogram(out / "style_transfer.pgm", result)
    print(f"objective {losses[0]:.6g} -> {losses[-1]:.6g} over {len(losses)} steps")
    return EXIT_OK


def cmd_transfer(args, cfg):
    model, dsp_section = load_model(args.checkpoint, "melgan")
    cfg.dsp = dsp_section
    clip = _read_clip(args.input, cfg)
    params = dsp_section.stft_params()
    if len(clip) < params.window_len:
        raise CliError(f"{args.input}: clip shorter than one analysis window", EXIT_DATA)
    before = dsp.mel_spectrogram(clip, model.config.n_mels, params)
    after = melgan_vc.transfer_spectrogram(model, before)
    audio = dsp.griffin_lim(after, iterations=dsp_section.griffin_lim_iters)
    samples = audio.samples[: len(clip)]
    audio = dsp.AudioClip(np.pad(samples, (0, len(clip) - samples.size)), audio.sample_rate)

    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    corpus.write_wav(output, audio)
    plot.save_spectrogram(output.with_name(output.stem + "_before.pgm"), before)
    plot.save_spectrogram(output.with_name(output.stem + "_after.pgm"), after)
    print(f"wrote {output} ({len(audio)} samples)")
    return EXIT_OK


def cmd_evaluate(args, cfg):
    judge, _ = load_model(args.classifier, "classifier")
    model, dsp_section = load_model(args.melgan, "melgan")
    cfg.dsp = dsp_section
    manifest = _read_manifest(args.manifest, cfg)
    source = Emotion.parse(model.source)
    target = _emotion(args.target) if args.target else Emotion.parse(model.target)
    entries = manifest.subset(split="test", emotion=source)
    if args.limit:
        entries = entries[: args.limit]
    if not entries:
        raise CliError(f"test split has no {source} clips", EXIT_DATA)

    feats = []
    for entry in entries:
        clip = _read_clip(entry.path, cfg)
        converted = melgan_vc.transfer(model, clip, dsp_section.griffin_lim_iters, dsp_section.stft_params())
        feats.append(classifier.featurize(converted, dsp_section.n_mels, dsp_section.stft_params()))
    fraction, rep = classifier.judge_features(judge, np.array(feats), target)

    name = f"MelGAN {str(source).capitalize()} to {str(target).capitalize()}"
    table = classifier.format_table([(name, rep)])
    out = _out_dir(args, cfg)
    (out / "report.txt").write_text(table, encoding="utf-8")
    classifier.write_confusion_csv(rep.confusion, out / "confusion.csv")
    print(table, end="")
    print(f"{len(entries)} clips judged; {100 * fraction:.1f}% classified as {target}")
    return EXIT_OK


def cmd_spectrogram(args, cfg):
    spec = _mel(_read_clip(args.input, cfg), cfg)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    plot.save_spectrogram(output, spec)
    print(f"wrote {output} ({spec.n_mels} x {spec.n_frames})")
    return EXIT_OK


# parser ------------------------------------------------------------------------
def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="overrides the configured seed")
    common.add_argument("--out", help="output directory (default: config out_dir)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="emostyle", description="Emotional style transfer on mel spectrograms.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("manifest", parents=[common], help="scan corpora and write manifest.tsv")
    p.add_argument("roots", nargs="*", help=f"dataset roots (default: ${DATA_ENV})")
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("features", parents=[common], help="write pooled MFCC features for a manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train-classifier", parents=[common], help="train the emotion classifier")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("train-melgan", parents=[common], help="train one source->target model")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--manifest")
    p.add_argument("--toy", action="store_true", help="train on synthetic low/high-band segments")
    p.set_defaults(func=cmd_train_melgan)

    p = sub.add_parser("style-transfer", parents=[common], help="Gram-matrix style transfer baseline")
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.set_defaults(func=cmd_style_transfer)

    p = sub.add_parser("transfer", parents=[common], help="convert one clip with a trained model")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("evaluate", parents=[common], help="judge converted test clips with the classifier")
    p.add_argument("--classifier", required=True)
    p.add_argument("--melgan", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--target", help="defaults to the model's target emotion")
    p.add_argument("--limit", type=int, help="judge at most this many clips")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("spectrogram", parents=[common], help="render a mel spectrogram as PGM")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_spectrogram)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        try:
            cfg = config.load(args.config)
        except FileNotFoundError:
            raise CliError(f"config not found: {args.config}", EXIT_USAGE) from None
        except config.ConfigError as exc:
            raise CliError(str(exc), EXIT_USAGE) from None
        if args.seed is not None:
            cfg.with_seed(args.seed)
        code = args.func(args, cfg)
        if args.out or args.command in ("manifest", "features", "train-classifier", "train-melgan", "style-transfer", "evaluate"):
            config.dump(cfg, _out_dir(args, cfg) / "effective_config.json")
        return code
    except CliError as exc:
        print(exc, file=sys.stderr)
        return exc.code
    except EmostyleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
