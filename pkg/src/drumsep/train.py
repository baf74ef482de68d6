"""Training: per-stem L1 masking loss, Adam, segment sampling, checkpoints.

The five stem networks are fully independent; each is trained on its own
(mixture patch, target patch) pairs. Batches are drawn deterministically:
the generator for step t of stem s is seeded with (seed, stem index, t), so
a resumed run reproduces the exact stream an uninterrupted run would see.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .audio import AudioClip
from .augment import AugmentConfig, augment_pipeline, make_rng
from .dataset import FiveStemSet
from .errors import ConfigError, NumericError
from .nn import AdamState, adam_step, l1_loss, load_tensors, save_tensors
from .separate import SeparatorBundle, save_bundle
from .stft import crop_and_chunk, stft
from .unet import STEMS, StemModel


@dataclass
class TrainConfig:
    lr: float = 0.0001
    batch: int = 24
    iterations: int = 100000
    segment_stride_seconds: float = 2.0
    seed: int = 0
    checkpoint_every: int = 1000
    augment: Optional[AugmentConfig] = None  # None disables augmentation

    def __post_init__(self):
        if self.batch < 1:
            raise ConfigError(f"batch must be >= 1, got {self.batch}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")


def train_step(model: StemModel, mixture_patch: np.ndarray, target_patch: np.ndarray,
               opt: AdamState) -> float:
    """One L1-loss Adam update; returns the (summed) loss value."""
    if mixture_patch.shape != target_patch.shape:
        raise ConfigError(
            f"mixture/target patch shapes differ: {mixture_patch.shape} vs {target_patch.shape}")
    x = mixture_patch.astype(model.dtype, copy=False)
    target = target_patch.astype(model.dtype, copy=False)

    model.zero_grads()
    mask = model.forward(x, train=True)
    estimate = mask * x
    loss = l1_loss(estimate, target)
    if not np.isfinite(loss):
        raise NumericError(
            f"non-finite loss for stem {model.stem}: mask range "
            f"[{mask.min()}, {mask.max()}], input max {np.abs(x).max()}")
    dmask = np.sign(estimate - target) * x
    model.backward(dmask)
    adam_step(model.named_params(), model.named_grads(), opt)
    return loss


class PatternBank:
    """Training source: one pattern rendered on several kits, as grouped stems.

    patterns[pattern_id][kit_id] -> {stem id -> AudioClip}, all clips of one
    pattern sharing a common length (pad when rendering).
    """

    def __init__(self, patterns: Dict[str, Dict[str, Dict[str, AudioClip]]]):
        if not patterns:
            raise ConfigError("pattern bank is empty")
        self.patterns = patterns
        self.pattern_ids = sorted(patterns)

    @classmethod
    def from_sets(cls, sets: List[Tuple[str, FiveStemSet]]) -> "PatternBank":
        """Build from (pattern_id, FiveStemSet) pairs, padding to a common
        length per pattern."""
        by_pattern: Dict[str, Dict[str, Dict[str, AudioClip]]] = {}
        lengths: Dict[str, int] = {}
        for pattern_id, five in sets:
            lengths[pattern_id] = max(lengths.get(pattern_id, 0), five.mixture.num_samples)
        for pattern_id, five in sets:
            target_len = lengths[pattern_id]
            stems = {}
            for stem, clip in five.stems.items():
                pad = target_len - clip.num_samples
                stems[stem] = AudioClip(np.pad(clip.samples, ((0, 0), (0, pad))))
            by_pattern.setdefault(pattern_id, {})[five.kit_id] = stems
        return cls(by_pattern)


def draw_batch(bank: PatternBank, stem: str, bundle: SeparatorBundle,
               cfg: TrainConfig, rng: np.random.Generator
               ) -> Tuple[np.ndarray, np.ndarray]:
    """Sample (mixture, target) patch batches of shape (B, 2, F, T)."""
    stft_cfg = bundle.stft_config
    seg = stft_cfg.segment_samples(bundle.frames)
    xs, ys = [], []
    for _ in range(cfg.batch):
        pattern_id = bank.pattern_ids[int(rng.integers(len(bank.pattern_ids)))]
        kits = sorted(bank.patterns[pattern_id])
        base_kit = kits[int(rng.integers(len(kits)))]
        if cfg.augment is not None:
            mixture, stems = augment_pipeline(bank.patterns[pattern_id], base_kit,
                                              cfg.augment, rng)
        else:
            stems = bank.patterns[pattern_id][base_kit]
            from .augment import sum_stems
            mixture = sum_stems(stems)

        length = mixture.num_samples
        if length <= seg:
            start = 0
            mix_seg = np.pad(mixture.samples, ((0, 0), (0, seg - length)))
            tgt_seg = np.pad(stems[stem].samples, ((0, 0), (0, seg - length)))
        else:
            start = int(rng.integers(length - seg + 1))
            mix_seg = mixture.samples[:, start:start + seg]
            tgt_seg = stems[stem].samples[:, start:start + seg]

        mix_patches, _ = crop_and_chunk(stft(AudioClip(mix_seg), stft_cfg),
                                        bundle.bands, bundle.frames)
        tgt_patches, _ = crop_and_chunk(stft(AudioClip(tgt_seg), stft_cfg),
                                        bundle.bands, bundle.frames)
        xs.append(mix_patches[0])
        ys.append(tgt_patches[0])
    return np.stack(xs), np.stack(ys)


def train(bundle: SeparatorBundle, bank: PatternBank, cfg: TrainConfig,
          out_dir: Optional[str] = None, start_step: int = 0,
          log_hook=None) -> Dict[str, List[float]]:
    """Train all five stem models; returns the per-stem loss logs.

    Checkpoints (bundle + optimizer state) are written to `out_dir` every
    `checkpoint_every` iterations and at the end.
    """
    opts = {stem: AdamState(lr=cfg.lr) for stem in STEMS}
    if out_dir and start_step > 0:
        _load_optimizers(opts, out_dir)

    logs: Dict[str, List[float]] = {stem: [] for stem in STEMS}
    for step in range(start_step + 1, cfg.iterations + 1):
        for si, stem in enumerate(STEMS):
            rng = make_rng(cfg.seed, (si, step))
            x, y = draw_batch(bank, stem, bundle, cfg, rng)
            loss = train_step(bundle.models[stem], x, y, opts[stem])
            logs[stem].append(loss)
            if log_hook:
                log_hook(stem, step, loss)
        if out_dir and cfg.checkpoint_every > 0 and step % cfg.checkpoint_every == 0:
            _write_checkpoint(bundle, opts, out_dir)
    if out_dir:
        _write_checkpoint(bundle, opts, out_dir)
    return logs


def _write_checkpoint(bundle: SeparatorBundle, opts: Dict[str, AdamState], out_dir):
    save_bundle(bundle, out_dir)
    for stem, opt in opts.items():
        tensors = {}
        for name, m in opt.m.items():
            tensors[f"m.{name}"] = m
        for name, v in opt.v.items():
            tensors[f"v.{name}"] = v
        meta = {"kind": "adam-state", "stem": stem, "step": opt.step,
                "lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps}
        save_tensors(os.path.join(out_dir, f"{stem.lower()}.opt"), tensors, meta)


def _load_optimizers(opts: Dict[str, AdamState], out_dir):
    for stem, opt in opts.items():
        path = os.path.join(out_dir, f"{stem.lower()}.opt")
        if not os.path.isfile(path):
            continue
        tensors, meta = load_tensors(path)
        opt.step = int(meta["step"])
        for name, arr in tensors.items():
            kind, pname = name.split(".", 1)
            (opt.m if kind == "m" else opt.v)[pname] = arr


# -- loss log file (JSON lines: {"stem": .., "step": .., "loss": ..}) --------


def append_loss_log(path, stem: str, step: int, loss: float):
    with open(path, "a") as fh:
        fh.write(json.dumps({"stem": stem, "step": step, "loss": loss}) + "\n")


def read_loss_log(path) -> List[dict]:
    if not os.path.isfile(path):
        return []
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def last_logged_step(path) -> int:
    entries = read_loss_log(path)
    return max((e["step"] for e in entries), default=0)
