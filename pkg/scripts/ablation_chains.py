#!/usr/bin/env python3
"""Ablate the two feedback chains on the synthetic benchmark: disable the
seed-update chain with w=0 and the walk-expansion chain with beta gates=1."""

import argparse
import dataclasses
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from seedloop import GateParams, LoopConfig, confusion, gen_synthetic, run_closed_loop, scores


def aggregate(scenes, cfg):
    total = np.zeros((cfg.n_categories,) * 2, dtype=np.int64)
    for img, gt, seeds in scenes:
        pred, _, _ = run_closed_loop(img, seeds, cfg, gt)
        total += confusion(pred, gt, cfg.n_categories)
    return scores(total)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--count", type=int, default=20)
    args = ap.parse_args()

    scenes = gen_synthetic(args.seed, args.count)
    full = LoopConfig()
    inert_walk = GateParams(full.gates.alpha_fg, full.gates.alpha_bg, 1.0, 1.0)
    variants = {
        "baseline": dataclasses.replace(full, w=0.0, gates=inert_walk),
        "baseline+F1": dataclasses.replace(full, gates=inert_walk),
        "baseline+F2": dataclasses.replace(full, w=0.0),
        "baseline+F1+F2": full,
    }
    for name, cfg in variants.items():
        accu, miou, fiou = aggregate(scenes, cfg)
        print(f"{name:16s} accu={accu:.4f} mIoU={miou:.4f} fIoU={fiou:.4f}")


if __name__ == "__main__":
    main()
