#!/usr/bin/env python3
"""Sweep the seed-update rate w on the synthetic benchmark."""

import argparse
import dataclasses
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from seedloop import LoopConfig, confusion, gen_synthetic, run_closed_loop, scores


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--values", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.4])
    args = ap.parse_args()

    scenes = gen_synthetic(args.seed, args.count)
    for w in args.values:
        cfg = dataclasses.replace(LoopConfig(), w=w)
        total = np.zeros((cfg.n_categories,) * 2, dtype=np.int64)
        for img, gt, seeds in scenes:
            pred, _, _ = run_closed_loop(img, seeds, cfg, gt)
            total += confusion(pred, gt, cfg.n_categories)
        accu, miou, fiou = scores(total)
        print(f"w={w:.2f} accu={accu:.4f} mIoU={miou:.4f} fIoU={fiou:.4f}")


if __name__ == "__main__":
    main()
