"""Closed-loop driver: per image, build superpixels, features, and the
relationship matrix once, then alternate segmenter training, random-walk seed
expansion, and convex seed updates on a fixed schedule with a convergence
monitor."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptySeeds, InvalidParams, MissingFile
from .features import superpixel_features
from .metrics import confusion, scores
from .relgraph import build_relationship
from .seeds import (
    ConvergenceParams,
    GateParams,
    SeedState,
    convergence_check,
    custom_walk,
    labels_from_state,
    make_state,
    seed_update,
)
from .segmenter import LinearSegmenter, loss_and_grad, predict, train_epochs
from .superpixel import SegParams, SuperpixelMap, felzenszwalb, rag_merge
from .tensorio import IGNORE, LabelMap, RasterImage, load_label_pgm, load_ppm, save_label_pgm


@dataclass(frozen=True)
class LoopConfig:
    gates: GateParams = GateParams()
    conv: ConvergenceParams = ConvergenceParams()
    seg: SegParams = SegParams()
    w: float = 0.2
    walk_steps: int = 2
    total_epochs: int = 20
    update_start_epoch: int = 10
    update_every: int = 3
    epochs_per_phase: int = 3  # gradient steps per loop epoch
    topk: int = 10
    learning_rate: float = 0.5
    l2: float = 1e-3
    n_categories: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        if self.total_epochs < 1 or self.update_every < 1:
            raise InvalidParams("bad loop schedule")
        if not 0.0 <= self.w <= 1.0:
            raise InvalidParams("w must lie in [0, 1]")


# flat key -> (sub-config attribute or None, field name, parser)
_CONFIG_KEYS = {
    "alpha_fg": ("gates", "alpha_fg", float),
    "alpha_bg": ("gates", "alpha_bg", float),
    "beta_fg": ("gates", "beta_fg", float),
    "beta_bg": ("gates", "beta_bg", float),
    "delta": ("conv", "delta", float),
    "rho": ("conv", "rho", float),
    "k": ("seg", "k", float),
    "sigma": ("seg", "sigma", float),
    "min_size": ("seg", "min_size", int),
    "merge_thresh": ("seg", "merge_thresh", float),
    "w": (None, "w", float),
    "walk_steps": (None, "walk_steps", int),
    "total_epochs": (None, "total_epochs", int),
    "update_start_epoch": (None, "update_start_epoch", int),
    "update_every": (None, "update_every", int),
    "epochs_per_phase": (None, "epochs_per_phase", int),
    "topk": (None, "topk", int),
    "learning_rate": (None, "learning_rate", float),
    "l2": (None, "l2", float),
    "n_categories": (None, "n_categories", int),
    "rng_seed": (None, "rng_seed", int),
}


def parse_config(path) -> LoopConfig:
    """Parse a `key = value` config file; '#' starts a comment; unknown keys
    are errors."""
    top = {}
    nested = {"gates": {}, "conv": {}, "seg": {}}
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise MissingFile(str(e)) from e
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise InvalidParams(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise InvalidParams(f"{path}:{lineno}: unknown key {key!r}")
        sub, name, parser = _CONFIG_KEYS[key]
        try:
            parsed = parser(value)
        except ValueError as e:
            raise InvalidParams(f"{path}:{lineno}: bad value for {key}") from e
        if sub is None:
            top[name] = parsed
        else:
            nested[sub][name] = parsed
    cfg = LoopConfig(
        gates=GateParams(**nested["gates"]),
        conv=ConvergenceParams(**nested["conv"]),
        seg=SegParams(**nested["seg"]),
        **top,
    )
    return cfg


@dataclass
class LoopTrace:
    """Per-epoch records of the closed loop."""

    epochs: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    unchanged_fractions: list = field(default_factory=list)
    seed_mious: list = field(default_factory=list)  # None when gt missing
    stopped_at: int | None = None

    def lines(self):
        out = []
        for e, loss, uf, miou in zip(
            self.epochs, self.losses, self.unchanged_fractions, self.seed_mious
        ):
            miou_s = f"{miou:.4f}" if miou is not None else "-"
            out.append(f"epoch={e} loss={loss:.6f} unchanged={uf:.4f} seed_miou={miou_s}")
        if self.stopped_at is not None:
            out.append(f"stopped_at={self.stopped_at}")
        return out


def pixel_state_to_superpixels(
    labels: LabelMap, spmap: SuperpixelMap, n_categories: int
) -> SeedState:
    """Per region, category mass = fraction of the region's non-ignored
    pixels carrying that category; all-ignored regions get a zero column."""
    if (labels.height, labels.width) != (spmap.height, spmap.width):
        raise DimensionMismatch("label map and superpixel map dimensions differ")
    flat_lab = labels.labels.ravel()
    flat_reg = spmap.region_of.ravel()
    valid = flat_lab != IGNORE
    probs = np.zeros((n_categories, spmap.n_regions))
    denom = np.bincount(flat_reg[valid], minlength=spmap.n_regions).astype(np.float64)
    for c in range(n_categories):
        sel = valid & (flat_lab == c)
        num = np.bincount(flat_reg[sel], minlength=spmap.n_regions)
        probs[c, denom > 0] = num[denom > 0] / denom[denom > 0]
    return make_state(probs)


def probs_to_superpixels(probs_pix: np.ndarray, spmap: SuperpixelMap) -> SeedState:
    """Mean-pool a (C, H, W) per-pixel probability tensor over regions."""
    if probs_pix.shape[1:] != (spmap.height, spmap.width):
        raise DimensionMismatch("probability tensor and superpixel map differ")
    flat_reg = spmap.region_of.ravel()
    counts = np.bincount(flat_reg, minlength=spmap.n_regions).astype(np.float64)
    probs = np.stack(
        [
            np.bincount(flat_reg, weights=probs_pix[c].ravel(), minlength=spmap.n_regions)
            / counts
            for c in range(probs_pix.shape[0])
        ]
    )
    return make_state(np.clip(probs, 0.0, 1.0))


def build_superpixels(image: RasterImage, seg: SegParams) -> SuperpixelMap:
    return rag_merge(felzenszwalb(image, seg), image, seg.merge_thresh)


def run_closed_loop(
    image: RasterImage,
    initial_seeds: LabelMap,
    cfg: LoopConfig = LoopConfig(),
    gt: LabelMap | None = None,
):
    """Run the full closed loop on one image.

    Returns (final prediction LabelMap, final SeedState, LoopTrace).
    """
    if (initial_seeds.labels != IGNORE).sum() == 0:
        raise EmptySeeds("initial seeds label no pixel")
    spmap = build_superpixels(image, cfg.seg)
    feats = superpixel_features(image, spmap)
    rel = build_relationship(feats, spmap, m=cfg.topk)

    state = pixel_state_to_superpixels(initial_seeds, spmap, cfg.n_categories)
    model = LinearSegmenter(
        feats.dims, cfg.n_categories, learning_rate=cfg.learning_rate, l2=cfg.l2
    )
    trace = LoopTrace()
    last_unchanged = 0.0
    for epoch in range(1, cfg.total_epochs + 1):
        n_out = predict(model, feats)
        mixed = custom_walk(state, rel, n_out, cfg.gates, cfg.walk_steps)
        loss, _, _ = loss_and_grad(model, feats, mixed)
        train_epochs(model, feats, mixed, cfg.epochs_per_phase)

        stopped = False
        if (
            cfg.w > 0
            and epoch >= cfg.update_start_epoch
            and (epoch - cfg.update_start_epoch) % cfg.update_every == 0
        ):
            new_state = seed_update(state, n_out, cfg.w)
            stopped, last_unchanged = convergence_check(state, new_state, cfg.conv)
            state = new_state

        miou = None
        if gt is not None:
            seed_pred = labels_from_state(state, spmap)
            # score only pixels labeled by the seed rendering
            mask = seed_pred.labels != IGNORE
            if mask.any():
                masked_gt = LabelMap(
                    gt.width,
                    gt.height,
                    np.where(mask, gt.labels, np.uint8(IGNORE)).astype(np.uint8),
                )
                cm = confusion(seed_pred_masked(seed_pred, mask), masked_gt, cfg.n_categories)
                if cm.sum() > 0:
                    _, miou, _ = scores(cm)
        trace.epochs.append(epoch)
        trace.losses.append(loss)
        trace.unchanged_fractions.append(last_unchanged)
        trace.seed_mious.append(miou)
        if stopped:
            trace.stopped_at = epoch
            break

    final_pred = labels_from_state(predict(model, feats), spmap)
    return final_pred, state, trace


def seed_pred_masked(pred: LabelMap, mask: np.ndarray) -> LabelMap:
    """Replace out-of-mask pixels by background so scoring stays well-formed."""
    labels = np.where(mask, pred.labels, np.uint8(0)).astype(np.uint8)
    return LabelMap(pred.width, pred.height, labels)


def run_dataset(dir_in, cfg: LoopConfig, dir_out):
    """Run the loop over `<id>.ppm` / `<id>.seeds.pgm` / `<id>.gt.pgm` triples.

    Writes `<id>.pred.pgm` and `<id>.trace.txt` per image and returns
    (accu, mIoU, fIoU) of the confusion matrix summed across images.
    """
    ids = sorted(
        name[:-4] for name in os.listdir(dir_in) if name.endswith(".ppm")
    )
    if not ids:
        raise MissingFile(f"no .ppm images in {dir_in}")
    os.makedirs(dir_out, exist_ok=True)
    total_cm = np.zeros((cfg.n_categories, cfg.n_categories), dtype=np.int64)
    for scene_id in ids:
        img_path = os.path.join(dir_in, scene_id + ".ppm")
        seed_path = os.path.join(dir_in, scene_id + ".seeds.pgm")
        gt_path = os.path.join(dir_in, scene_id + ".gt.pgm")
        if not os.path.exists(seed_path):
            raise MissingFile(seed_path)
        image = load_ppm(img_path)
        seeds = load_label_pgm(seed_path)
        gt = load_label_pgm(gt_path) if os.path.exists(gt_path) else None
        pred, _, trace = run_closed_loop(image, seeds, cfg, gt)
        save_label_pgm(pred, os.path.join(dir_out, scene_id + ".pred.pgm"))
        with open(os.path.join(dir_out, scene_id + ".trace.txt"), "w") as f:
            f.write("\n".join(trace.lines()) + "\n")
        if gt is not None:
            total_cm += confusion(pred, gt, cfg.n_categories)
    if total_cm.sum() == 0:
        return None
    return scores(total_cm)
