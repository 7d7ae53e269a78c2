"""Command-line interface: `seedloop <subcommand>`."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .errors import MissingFile, SeedloopError, ShapeMismatch
from .features import FeatureMatrix, load_external_features, standardize, superpixel_features
from .metrics import confusion, scores
from .pipeline import LoopConfig, parse_config, run_closed_loop, run_dataset
from .relgraph import RelationshipMatrix, build_relationship
from .seeds import GateParams, custom_walk, make_state
from .superpixel import SegParams, SuperpixelMap, felzenszwalb, rag_merge
from .tensorio import (
    SynthParams,
    gen_synthetic,
    load_label_pgm,
    load_ppm,
    load_tensor,
    save_label_pgm,
    save_ppm,
    save_tensor,
)


def _spmap_from_tensor(arr: np.ndarray) -> SuperpixelMap:
    if arr.ndim != 2 or arr.dtype != np.uint16:
        raise ShapeMismatch("superpixel tensor must be u16 [H, W]")
    region_of = arr.astype(np.int32)
    return SuperpixelMap(arr.shape[1], arr.shape[0], region_of, int(arr.max()) + 1)


def _cmd_synth(args):
    os.makedirs(args.out_dir, exist_ok=True)
    scenes = gen_synthetic(args.seed, args.count, SynthParams(args.width, args.height))
    for i, (image, gt, seeds) in enumerate(scenes):
        stem = os.path.join(args.out_dir, f"{i:04d}")
        save_ppm(image, stem + ".ppm")
        save_label_pgm(gt, stem + ".gt.pgm")
        save_label_pgm(seeds, stem + ".seeds.pgm")
    print(f"wrote {len(scenes)} scenes to {args.out_dir}")


def _cmd_superpix(args):
    image = load_ppm(args.image)
    params = SegParams(args.k, args.sigma, args.min_size, args.merge_thresh)
    spmap = rag_merge(
        felzenszwalb(image, params), image, params.merge_thresh, args.max_regions
    )
    save_tensor(spmap.region_of.astype(np.uint16), args.out)
    print(f"{spmap.n_regions} regions -> {args.out}")


def _cmd_features(args):
    spmap = _spmap_from_tensor(load_tensor(args.sp))
    if args.external:
        feats = load_external_features(args.external, spmap.n_regions)
    else:
        image = load_ppm(args.image)
        feats = superpixel_features(image, spmap)
    save_tensor(feats.values.astype(np.float32), args.out)
    print(f"features [{feats.n_regions}, {feats.dims}] -> {args.out}")


def _cmd_relmat(args):
    spmap = _spmap_from_tensor(load_tensor(args.sp))
    arr = load_tensor(args.features)
    if arr.ndim != 2 or arr.shape[0] != spmap.n_regions:
        raise ShapeMismatch("feature tensor does not match superpixel count")
    feats = FeatureMatrix(arr.shape[0], arr.shape[1], standardize(arr.astype(np.float64)))
    rel = build_relationship(feats, spmap, m=args.topk, symmetrize_mode=args.symmetrize)
    save_tensor(np.stack([rel.m_siml, rel.m_adj, rel.m_rel]).astype(np.uint8), args.out)
    print(f"relationship [3, {spmap.n_regions}, {spmap.n_regions}] -> {args.out}")


def _cmd_walk(args):
    seeds = make_state(load_tensor(args.seeds).astype(np.float64))
    n_out = make_state(load_tensor(args.netout).astype(np.float64))
    stack = load_tensor(args.rel)
    if stack.ndim != 3 or stack.shape[0] != 3:
        raise ShapeMismatch("relationship tensor must be u8 [3, N, N]")
    rel = RelationshipMatrix(stack[0], stack[1], stack[2])
    gates = GateParams(args.alpha_fg, args.alpha_bg, args.beta_fg, args.beta_bg)
    mixed = custom_walk(seeds, rel, n_out, gates, args.steps, strict=args.strict_eq3)
    save_tensor(mixed.probs.astype(np.float32), args.out)
    print(f"mixed seed [{mixed.n_categories}, {mixed.n_regions}] -> {args.out}")


def _dataset_ids(pred_dir):
    ids = []
    for name in sorted(os.listdir(pred_dir)):
        if name.endswith(".pred.pgm"):
            ids.append(name[: -len(".pred.pgm")])
        elif name.endswith(".pgm"):
            ids.append(name[: -len(".pgm")])
    return ids


def _cmd_eval(args):
    total = np.zeros((args.classes, args.classes), dtype=np.int64)
    if args.pred and args.gt:
        total += confusion(load_label_pgm(args.pred), load_label_pgm(args.gt), args.classes)
    elif args.pred_dir and args.gt_dir:
        ids = _dataset_ids(args.pred_dir)
        if not ids:
            raise MissingFile(f"no predictions in {args.pred_dir}")
        for scene_id in ids:
            pred_path = os.path.join(args.pred_dir, scene_id + ".pred.pgm")
            if not os.path.exists(pred_path):
                pred_path = os.path.join(args.pred_dir, scene_id + ".pgm")
            gt_path = os.path.join(args.gt_dir, scene_id + ".gt.pgm")
            if not os.path.exists(gt_path):
                gt_path = os.path.join(args.gt_dir, scene_id + ".pgm")
            if not os.path.exists(gt_path):
                raise MissingFile(f"no ground truth for {scene_id}")
            total += confusion(load_label_pgm(pred_path), load_label_pgm(gt_path), args.classes)
    else:
        raise MissingFile("need --pred/--gt or --pred-dir/--gt-dir")
    accu, miou, fiou = scores(total)
    print(f"accu={accu:.4f} mIoU={miou:.4f} fIoU={fiou:.4f}")


def _cmd_loop(args):
    cfg = parse_config(args.config) if args.config else LoopConfig()
    image = load_ppm(args.image)
    seeds = load_label_pgm(args.seeds)
    gt = load_label_pgm(args.gt) if args.gt else None
    os.makedirs(args.out_dir, exist_ok=True)
    pred, _, trace = run_closed_loop(image, seeds, cfg, gt)
    stem = os.path.splitext(os.path.basename(args.image))[0]
    save_label_pgm(pred, os.path.join(args.out_dir, stem + ".pred.pgm"))
    with open(os.path.join(args.out_dir, stem + ".trace.txt"), "w") as f:
        f.write("\n".join(trace.lines()) + "\n")
    if gt is not None:
        accu, miou, fiou = scores(confusion(pred, gt, cfg.n_categories))
        print(f"accu={accu:.4f} mIoU={miou:.4f} fIoU={fiou:.4f}")


def _cmd_run(args):
    cfg = parse_config(args.config) if args.config else LoopConfig()
    result = run_dataset(args.data_dir, cfg, args.out_dir)
    if result is not None:
        accu, miou, fiou = result
        print(f"accu={accu:.4f} mIoU={miou:.4f} fIoU={fiou:.4f}")


def build_parser():
    parser = argparse.ArgumentParser(prog="seedloop")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic scenes")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("superpix", help="compute superpixels")
    p.add_argument("--image", required=True)
    p.add_argument("--k", type=float, default=100.0)
    p.add_argument("--sigma", type=float, default=0.8)
    p.add_argument("--min-size", type=int, default=20)
    p.add_argument("--merge-thresh", type=float, default=25.0)
    p.add_argument("--max-regions", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_superpix)

    p = sub.add_parser("features", help="compute per-superpixel descriptors")
    p.add_argument("--image")
    p.add_argument("--sp", required=True)
    p.add_argument("--external")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("relmat", help="build the relationship matrix")
    p.add_argument("--features", required=True)
    p.add_argument("--sp", required=True)
    p.add_argument("--topk", type=int, default=10)
    p.add_argument("--symmetrize", choices=["none", "or", "and"], default="none")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_relmat)

    p = sub.add_parser("walk", help="customized random walk producing mixed seeds")
    p.add_argument("--seeds", required=True)
    p.add_argument("--netout", required=True)
    p.add_argument("--rel", required=True)
    p.add_argument("--steps", type=int, default=2)
    p.add_argument("--alpha-fg", type=float, default=0.90)
    p.add_argument("--alpha-bg", type=float, default=0.90)
    p.add_argument("--beta-fg", type=float, default=0.75)
    p.add_argument("--beta-bg", type=float, default=0.90)
    p.add_argument("--strict-eq3", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_walk)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred")
    p.add_argument("--gt")
    p.add_argument("--pred-dir")
    p.add_argument("--gt-dir")
    p.add_argument("--classes", type=int, required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("loop", help="run the closed loop on one image")
    p.add_argument("--image", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--gt")
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_loop)

    p = sub.add_parser("run", help="run the closed loop over a dataset directory")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except SeedloopError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
