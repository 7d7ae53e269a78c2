"""Superpixel generation: graph-based segmentation plus RAG refinement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, InvalidParams
from .tensorio import RasterImage

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class SuperpixelMap:
    """Per-pixel region ids, contiguous 0..n_regions-1, each region 4-connected."""

    width: int
    height: int
    region_of: np.ndarray  # (height, width) int32
    n_regions: int


@dataclass(frozen=True)
class SegParams:
    k: float = 100.0
    sigma: float = 0.8
    min_size: int = 20
    merge_thresh: float = 25.0

    def __post_init__(self):
        if self.k <= 0 or self.sigma < 0 or self.min_size < 1 or self.merge_thresh < 0:
            raise InvalidParams("bad segmentation parameters")


class _UnionFind:
    __slots__ = ("parent", "size", "internal")

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n
        self.internal = [0.0] * n  # largest merging weight inside the component

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b, weight):
        a, b = self.find(a), self.find(b)
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        self.internal[a] = weight
        return a


def _grid_edges(smoothed):
    """8-connected grid edges as (a, b, weight), in fixed generation order.

    Per pixel in row-major order the neighbor offsets are right, down,
    down-right, down-left; the generation index is the sort tie-break.
    """
    h, w, _ = smoothed.shape
    idx = np.arange(h * w).reshape(h, w)
    pieces = []
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        y0, y1 = max(0, -dy), h - max(0, dy)
        x0, x1 = max(0, -dx), w - max(0, dx)
        a = idx[y0:y1, x0:x1]
        b = idx[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
        diff = smoothed[y0:y1, x0:x1] - smoothed[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
        wgt = np.sqrt((diff * diff).sum(axis=2))
        order = np.full(a.shape, {(0, 1): 0, (1, 0): 1, (1, 1): 2, (1, -1): 3}[(dy, dx)])
        pieces.append((a.ravel(), b.ravel(), wgt.ravel(), (a.ravel() * 4 + order.ravel())))
    a = np.concatenate([p[0] for p in pieces])
    b = np.concatenate([p[1] for p in pieces])
    wgt = np.concatenate([p[2] for p in pieces])
    gen = np.concatenate([p[3] for p in pieces])
    # restore per-pixel generation order, then stable-sort by weight
    by_gen = np.argsort(gen, kind="stable")
    a, b, wgt = a[by_gen], b[by_gen], wgt[by_gen]
    by_weight = np.argsort(wgt, kind="stable")
    return a[by_weight], b[by_weight], wgt[by_weight]


def _relabel_scan_order(assignment, h, w):
    """Map arbitrary component ids to contiguous ids by first-pixel scan order."""
    flat = assignment.reshape(-1)
    remap = {}
    out = np.empty(h * w, dtype=np.int32)
    for i, comp in enumerate(flat):
        rid = remap.get(comp)
        if rid is None:
            rid = len(remap)
            remap[comp] = rid
        out[i] = rid
    return out.reshape(h, w), len(remap)


def _split_disconnected(region_of, h, w):
    """Split every label into its 4-connected components and relabel."""
    n = region_of.max() + 1
    out = np.full((h, w), -1, dtype=np.int64)
    offset = 0
    for rid in range(n):
        mask = region_of == rid
        comps, n_comps = ndimage.label(mask, structure=_FOUR_CONN)
        out[mask] = comps[mask] + offset - 1
        offset += n_comps
    return _relabel_scan_order(out, h, w)


def felzenszwalb(image: RasterImage, params: SegParams = SegParams()) -> SuperpixelMap:
    """Graph-based segmentation with union-find merging.

    Deterministic: edges sorted by (weight, generation index), merge predicate
    w <= min(Int(Ci) + k/|Ci|, Int(Cj) + k/|Cj|), then components smaller than
    min_size are absorbed along their lowest-weight edges. Output regions are
    split to 4-connected components and relabeled by scan order.
    """
    h, w = image.height, image.width
    img = image.data.astype(np.float64)
    if params.sigma > 0:
        img = np.stack(
            [ndimage.gaussian_filter(img[:, :, c], params.sigma) for c in range(3)],
            axis=2,
        )
    ea, eb, ew = _grid_edges(img)
    uf = _UnionFind(h * w)
    k = params.k
    for a, b, wgt in zip(ea.tolist(), eb.tolist(), ew.tolist()):
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            continue
        if wgt <= min(
            uf.internal[ra] + k / uf.size[ra], uf.internal[rb] + k / uf.size[rb]
        ):
            uf.union(ra, rb, wgt)
    # absorb small components; ascending edge order hits the lowest-weight
    # neighbor of each small component first
    for a, b, wgt in zip(ea.tolist(), eb.tolist(), ew.tolist()):
        ra, rb = uf.find(a), uf.find(b)
        if ra != rb and (uf.size[ra] < params.min_size or uf.size[rb] < params.min_size):
            uf.union(ra, rb, wgt)
    roots = np.fromiter((uf.find(i) for i in range(h * w)), dtype=np.int64, count=h * w)
    region_of, _ = _relabel_scan_order(roots, h, w)
    # 8-connected merging can produce diagonal-only links; enforce the
    # 4-connectivity invariant by splitting
    region_of, n_regions = _split_disconnected(region_of, h, w)
    return SuperpixelMap(w, h, region_of, n_regions)


def _region_adjacency(region_of):
    """Set of unordered region-id pairs sharing a 4-connected border."""
    pairs = set()
    for a, b in (
        (region_of[:, :-1], region_of[:, 1:]),
        (region_of[:-1, :], region_of[1:, :]),
    ):
        diff = a != b
        for i, j in zip(a[diff].tolist(), b[diff].tolist()):
            pairs.add((min(i, j), max(i, j)))
    return pairs


def rag_merge(
    spmap: SuperpixelMap,
    image: RasterImage,
    merge_thresh: float,
    max_regions: int | None = None,
) -> SuperpixelMap:
    """Greedily merge the closest adjacent region pair by mean RGB distance.

    Repeats while the smallest distance is below merge_thresh (or until
    max_regions is reached, when given); mean colors are pixel-count-weighted;
    ties go to the smaller (min id, max id) pair.
    """
    if (spmap.height, spmap.width) != (image.height, image.width):
        raise DimensionMismatch("superpixel map and image dimensions differ")
    n = spmap.n_regions
    region_of = spmap.region_of
    flat = region_of.ravel()
    counts = np.bincount(flat, minlength=n).astype(np.float64)
    sums = np.zeros((n, 3))
    pix = image.data.reshape(-1, 3).astype(np.float64)
    for c in range(3):
        sums[:, c] = np.bincount(flat, weights=pix[:, c], minlength=n)

    adj = {i: set() for i in range(n)}
    for i, j in _region_adjacency(region_of):
        adj[i].add(j)
        adj[j].add(i)

    alive = set(range(n))
    merged_into = np.arange(n)

    def mean(i):
        return sums[i] / counts[i]

    while len(alive) > 1:
        best = None
        for i in sorted(alive):
            mi = mean(i)
            for j in sorted(adj[i]):
                if j <= i:
                    continue
                d = float(np.linalg.norm(mi - mean(j)))
                if best is None or d < best[0] - 1e-12:
                    best = (d, i, j)
        if best is None:
            break
        d, i, j = best
        force = max_regions is not None and len(alive) > max_regions
        if d >= merge_thresh and not force:
            break
        # merge j into i (i < j)
        sums[i] += sums[j]
        counts[i] += counts[j]
        alive.discard(j)
        merged_into[j] = i
        for nb in adj[j]:
            if nb != i:
                adj[nb].discard(j)
                adj[nb].add(i)
                adj[i].add(nb)
        adj[i].discard(j)
        adj[i].discard(i)
        del adj[j]

    # resolve merge chains, then relabel contiguously by scan order
    final = np.arange(n)
    for r in range(n):
        root = r
        while merged_into[root] != root:
            root = merged_into[root]
        final[r] = root
    region_of2, n2 = _relabel_scan_order(final[region_of], spmap.height, spmap.width)
    return SuperpixelMap(spmap.width, spmap.height, region_of2, n2)
