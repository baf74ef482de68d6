"""Command-line interface for the drum separation toolkit.

Subcommands:
  synth                render a procedural dataset (patterns x kits) to disk
  train                train the five stem networks on a rendered dataset
  separate             split a mixture WAV into five stem WAVs
  factorize-templates  build the template dictionary for the NMF baselines
  evaluate             score separations with nSDR over a dataset split
  rtr                  measure the real-time ratio of separation
  augment-preview      render one augmented draw of a pattern to WAV files

Exit codes: 0 success, 2 usage/configuration, 3 I/O or file format,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import config as cfgmod
from .audio import AudioClip, read_wav, write_wav
from .augment import AugmentConfig, augment_pipeline, make_rng
from .dataset import (
    ClipEntry,
    DatasetManifest,
    FiveStemSet,
    group_to_five,
    load_clip_five,
    load_clip_mixture,
    render_stems,
    write_clip,
)
from .errors import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    DrumsepError,
    NumericError,
)
from .evaluate import measure_rtr, nsdr_aggregate
from .midi import NOTE_MAP, map_notes, parse_midi
from .nmf import NmfdConfig, TemplateDictionary, baseline_separate, build_templates
from .patterns import make_patterns
from .sampler import DrumKitSampler, default_kits
from .separate import (
    STEM_FILE_NAMES,
    SeparatorBundle,
    load_bundle,
    new_bundle,
    save_bundle,
    separate,
)
from .wiener import WienerConfig
from .train import PatternBank, append_loss_log, last_logged_step, train
from .unet import STEMS

LOSS_LOG_NAME = "loss_log.jsonl"

# velocity ladder used when rendering isolated template hits
TEMPLATE_VELOCITIES = tuple(int(round(v)) for v in np.linspace(30, 127, 10))


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--preset", choices=cfgmod.PRESETS, default="paper",
                   help="configuration preset (default: paper)")
    p.add_argument("--config", metavar="FILE", default=None,
                   help="YAML file overriding preset values")


def _resolved(args, overrides: Optional[dict] = None) -> dict:
    return cfgmod.resolve_config(args.preset, args.config, overrides)


def _train_overrides(args) -> dict:
    over: Dict[str, dict] = {}
    for key in ("lr", "batch", "iterations", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            over.setdefault("train", {})[key] = value
    return over


# -- subcommands --------------------------------------------------------------


def cmd_synth(args) -> int:
    if args.midi:
        scores = []
        for path in args.midi:
            with open(path, "rb") as fh:
                raw = parse_midi(fh.read())
            mapped, skipped = map_notes(raw, NOTE_MAP)
            if skipped:
                print(f"note: {path}: skipped pitches {dict(skipped)}", file=sys.stderr)
            name = os.path.splitext(os.path.basename(path))[0]
            scores.append((name, mapped))
    else:
        scores = make_patterns(args.num_patterns, seed=args.seed, bars=args.bars)

    kits = default_kits(args.kits, base_seed=args.kit_seed)
    os.makedirs(args.out, exist_ok=True)
    if os.path.isfile(os.path.join(args.out, "manifest.json")):
        manifest = DatasetManifest.load(args.out)  # extend an existing dataset
    else:
        manifest = DatasetManifest(args.out)
    for pattern_id, score in scores:
        for kit_id, sampler in kits.items():
            stem_set = render_stems(score, sampler)
            entry = write_clip(args.out, pattern_id, stem_set, split=args.split,
                               encoding="float32")
            manifest.clips.append(entry)
    manifest.save()
    print(f"wrote {len(manifest.clips)} clips "
          f"({len(scores)} patterns x {len(kits)} kits) to {args.out}")
    return 0


def _bank_from_dataset(root: str, split: str) -> PatternBank:
    manifest = DatasetManifest.load(root)
    sets = [(e.clip_id, load_clip_five(root, e))
            for e in manifest.clips if e.split == split]
    if not sets:
        raise ConfigError(f"dataset at {root} has no clips in split {split!r}")
    return PatternBank.from_sets(sets)


def cmd_train(args) -> int:
    cfg = _resolved(args, _train_overrides(args))
    bank = _bank_from_dataset(args.data, args.split)
    train_cfg = cfgmod.train_config(cfg)

    os.makedirs(args.out, exist_ok=True)
    bundle_path = os.path.join(args.out, "bundle.txt")
    log_path = os.path.join(args.out, LOSS_LOG_NAME)
    if args.resume and os.path.isfile(bundle_path):
        bundle = load_bundle(bundle_path)
        start_step = last_logged_step(log_path)
        print(f"resuming from step {start_step}")
    else:
        bundle = new_bundle(cfgmod.unet_config(cfg), cfgmod.stft_config(cfg),
                            cfgmod.wiener_config(cfg), seed=train_cfg.seed)
        start_step = 0

    def log_hook(stem, step, loss):
        append_loss_log(log_path, stem, step, loss)
        if stem == STEMS[-1] and (step % args.print_every == 0 or step == 1):
            print(f"step {step}/{train_cfg.iterations}  {stem} loss {loss:.4f}")

    train(bundle, bank, train_cfg, out_dir=args.out, start_step=start_step,
          log_hook=log_hook)
    print(f"model written to {bundle_path}")
    return 0


def _write_stems(stems: Dict[str, AudioClip], out_dir: str, base: str) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for stem in STEMS:
        path = os.path.join(out_dir, f"{base}_{STEM_FILE_NAMES[stem]}.wav")
        write_wav(path, stems[stem], encoding="float32")
        paths.append(path)
    return paths


def _wiener_with_flags(base: WienerConfig, args) -> WienerConfig:
    alpha = base.alpha if args.alpha is None else args.alpha
    enabled = base.enabled if args.wiener is None else args.wiener == "on"
    return WienerConfig(alpha=alpha, epsilon=base.epsilon, enabled=enabled)


def cmd_separate(args) -> int:
    if (args.model is None) == (args.templates is None):
        raise ConfigError("provide exactly one of --model or --templates")

    if args.model:
        bundle = load_bundle(args.model)
        bundle = SeparatorBundle(bundle.models, bundle.stft_config,
                                 _wiener_with_flags(bundle.wiener, args))
        separate_fn = lambda clip: separate(bundle, clip)
    else:
        cfg = _resolved(args)
        dictionary = TemplateDictionary.load(args.templates)
        nmf_cfg = cfgmod.nmf_config(cfg)
        stft_cfg = cfgmod.stft_config(cfg)
        wiener_cfg = _wiener_with_flags(cfgmod.wiener_config(cfg), args)
        separate_fn = lambda clip: baseline_separate(
            clip, dictionary, args.method, nmf_cfg, stft_cfg, wiener_cfg)

    for path_in in args.input:
        mixture = read_wav(path_in)
        stems = separate_fn(mixture)
        base = os.path.splitext(os.path.basename(path_in))[0]
        out_dir = args.out or os.path.dirname(os.path.abspath(path_in))
        for path in _write_stems(stems, out_dir, base):
            print(path)
    return 0


def cmd_factorize_templates(args) -> int:
    cfg = _resolved(args)
    nmf_cfg = cfgmod.nmf_config(cfg)
    stft_cfg = cfgmod.stft_config(cfg)
    sampler = DrumKitSampler(args.kit_id, seed=args.kit_seed)
    hits = {pitch: [(v, AudioClip(sampler.one_shot(pitch, v)))
                    for v in TEMPLATE_VELOCITIES]
            for pitch in sampler.params}
    dictionary = build_templates(hits, stft_cfg, nmf_cfg)
    dictionary.save(args.out)
    print(f"wrote {dictionary.num_components} templates to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolved(args)
    if (args.model is None) == (args.templates is None):
        raise ConfigError("provide exactly one of --model or --templates")

    if args.model:
        bundle = load_bundle(args.model)
        separate_fn = lambda clip: separate(bundle, clip)
    else:
        dictionary = TemplateDictionary.load(args.templates)
        nmf_cfg = cfgmod.nmf_config(cfg)
        stft_cfg = cfgmod.stft_config(cfg)
        wiener_cfg = cfgmod.wiener_config(cfg)
        separate_fn = lambda clip: baseline_separate(
            clip, dictionary, args.method, nmf_cfg, stft_cfg, wiener_cfg)

    manifest = DatasetManifest.load(args.data)
    entries = []
    for clip_entry in manifest.clips:
        if clip_entry.split != args.split:
            continue
        five = load_clip_five(args.data, clip_entry)
        estimates = separate_fn(five.mixture)
        entries.append({
            "clip_id": clip_entry.clip_id,
            "kit_id": clip_entry.kit_id,
            "references": five.stems,
            "estimates": estimates,
            "energy": five.energy,
        })
    if not entries:
        raise ConfigError(f"no clips in split {args.split!r}")
    report = nsdr_aggregate(entries, cfgmod.eval_config(cfg))
    print(report.render_text())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json())
        print(f"report written to {args.out}")
    return 0


def cmd_rtr(args) -> int:
    if (args.model is None) == (args.templates is None):
        raise ConfigError("provide exactly one of --model or --templates")
    if args.model:
        bundle = load_bundle(args.model)
        separate_fn = lambda clip: separate(bundle, clip)
    else:
        cfg = _resolved(args)
        dictionary = TemplateDictionary.load(args.templates)
        separate_fn = lambda clip: baseline_separate(
            clip, dictionary, args.method, cfgmod.nmf_config(cfg),
            cfgmod.stft_config(cfg), cfgmod.wiener_config(cfg))
    clips = [(os.path.basename(path), read_wav(path)) for path in args.input]
    report = measure_rtr(separate_fn, clips)
    print(report.render_text())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json())
    return 0


def cmd_augment_preview(args) -> int:
    manifest = DatasetManifest.load(args.data)
    chosen = [e for e in manifest.clips if e.clip_id == args.pattern]
    if not chosen:
        raise ConfigError(f"no clips with pattern id {args.pattern!r}")
    bank_sets = [(e.clip_id, load_clip_five(args.data, e)) for e in chosen]
    bank = PatternBank.from_sets(bank_sets).patterns[args.pattern]
    base_kit = args.kit or sorted(bank)[0]

    aug_cfg = AugmentConfig(seed=args.seed)
    rng = make_rng(args.seed)
    mixture, stems = augment_pipeline(bank, base_kit, aug_cfg, rng)
    for path in _write_stems(stems, args.out, args.pattern):
        print(path)
    mix_path = os.path.join(args.out, f"{args.pattern}_mixture.wav")
    write_wav(mix_path, mixture, encoding="float32")
    print(mix_path)
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drumsep", description="drum source separation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a dataset of drum clips")
    p.add_argument("--out", required=True, help="dataset output directory")
    p.add_argument("--midi", nargs="*", default=None, help="MIDI files to render")
    p.add_argument("--num-patterns", type=int, default=10)
    p.add_argument("--kits", type=int, default=10)
    p.add_argument("--bars", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kit-seed", type=int, default=1000)
    p.add_argument("--split", default="train", choices=("train", "validation", "test"))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the five stem networks")
    _add_config_args(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="model output directory")
    p.add_argument("--split", default="train")
    p.add_argument("--resume", action="store_true",
                   help="continue from the checkpoint in --out")
    p.add_argument("--print-every", type=int, default=100)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("separate", help="split a mixture into five stem WAVs")
    _add_config_args(p)
    p.add_argument("--model", default=None, help="path to bundle.txt")
    p.add_argument("--templates", default=None, help="template dictionary file")
    p.add_argument("--method", default="nmfd", choices=("nmfd", "sab-nmf"))
    p.add_argument("--input", nargs="+", required=True, help="mixture WAV file(s)")
    p.add_argument("--out", default=None, help="output directory (default: input's)")
    p.add_argument("--wiener", choices=("on", "off"), default=None,
                   help="override the filtering stage of the loaded model")
    p.add_argument("--alpha", type=float, default=None,
                   help="filtering exponent in (0, 2]")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("factorize-templates",
                       help="build the baseline template dictionary")
    _add_config_args(p)
    p.add_argument("--out", required=True, help="dictionary output file")
    p.add_argument("--kit-id", default="kit00")
    p.add_argument("--kit-seed", type=int, default=1000)
    p.set_defaults(func=cmd_factorize_templates)

    p = sub.add_parser("evaluate", help="score separations with nSDR")
    _add_config_args(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--model", default=None, help="path to bundle.txt")
    p.add_argument("--templates", default=None, help="template dictionary file")
    p.add_argument("--method", default="nmfd", choices=("nmfd", "sab-nmf"))
    p.add_argument("--split", default="test")
    p.add_argument("--out", default=None, help="JSON report path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rtr", help="measure the real-time ratio")
    _add_config_args(p)
    p.add_argument("--model", default=None, help="path to bundle.txt")
    p.add_argument("--templates", default=None, help="template dictionary file")
    p.add_argument("--method", default="nmfd", choices=("nmfd", "sab-nmf"))
    p.add_argument("--input", nargs="+", required=True, help="mixture WAV files")
    p.add_argument("--out", default=None, help="JSON report path")
    p.set_defaults(func=cmd_rtr)

    p = sub.add_parser("augment-preview", help="render one augmented draw")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--pattern", required=True, help="pattern (clip) id")
    p.add_argument("--kit", default=None, help="base kit id (default: first)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_augment_preview)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, DomainError, DegenerateInputError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except (DrumsepError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
