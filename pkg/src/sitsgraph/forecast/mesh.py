"""Coarse mesh over the frame: superpixel regions as mesh nodes, region
adjacency as the processor graph, plus the pixel<->mesh transfer edges.

Every pixel sends exactly one encoder edge to its owning region and receives
decoder edges from its 3 nearest region centroids (fewer only when the
partition has fewer regions). Edge features are the relative displacement
(d_row, d_col) / max(H, W) from source to destination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from ..segmentation import slic


@dataclass
class MeshGraph:
    labels: np.ndarray          # (H, W) region id per pixel
    n_regions: int
    centroids: np.ndarray       # (M, 2) float (row, col)
    proc_src: np.ndarray        # directed adjacency (both orientations)
    proc_dst: np.ndarray
    proc_feat: np.ndarray       # (Ep, 2)
    g2m_src: np.ndarray         # flat pixel index
    g2m_dst: np.ndarray         # region id
    g2m_feat: np.ndarray
    m2g_src: np.ndarray         # region id
    m2g_dst: np.ndarray         # flat pixel index
    m2g_feat: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.labels.shape)


def build_mesh(
    last_image: np.ndarray,
    n_segments: int,
    compactness: float,
    iters: int = 10,
    labels: np.ndarray | None = None,
) -> MeshGraph:
    """Partition (C, H, W) ``last_image`` with the superpixel segmenter and
    assemble the transfer graphs. A precomputed partition can be passed via
    ``labels`` (used by the multi-date variant that segments the stacked
    window)."""
    img = np.asarray(last_image)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3:
        raise ShapeMismatch(f"image must be (C,H,W), got {img.shape}")
    _, h, w = img.shape
    if labels is None:
        labels = slic(img, n_segments=n_segments, compactness=compactness, iters=iters)
    labels = np.asarray(labels)
    if labels.shape != (h, w):
        raise ShapeMismatch(f"labels {labels.shape} do not match image {(h, w)}")

    m = int(labels.max()) + 1
    flat = labels.ravel().astype(np.int64)
    counts = np.bincount(flat, minlength=m).astype(np.float64)
    rsum = np.bincount(flat, weights=np.repeat(np.arange(h), w), minlength=m)
    csum = np.bincount(flat, weights=np.tile(np.arange(w), h), minlength=m)
    centroids = np.stack([rsum / counts, csum / counts], axis=1)

    scale = float(max(h, w))
    pix_pos = np.stack(
        [np.repeat(np.arange(h), w).astype(np.float64), np.tile(np.arange(w), h).astype(np.float64)],
        axis=1,
    )

    # region adjacency, both orientations
    pairs = set()
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = a != b
        for x, y in zip(a[diff].tolist(), b[diff].tolist()):
            pairs.add((min(x, y), max(x, y)))
    proc_src, proc_dst = [], []
    for a, b in sorted(pairs):
        proc_src += [a, b]
        proc_dst += [b, a]
    proc_src = np.array(proc_src, dtype=np.int64)
    proc_dst = np.array(proc_dst, dtype=np.int64)
    proc_feat = (centroids[proc_dst] - centroids[proc_src]) / scale if len(proc_src) else np.zeros((0, 2))

    # encoder: pixel -> owning region
    g2m_src = np.arange(h * w, dtype=np.int64)
    g2m_dst = flat
    g2m_feat = (centroids[g2m_dst] - pix_pos) / scale

    # decoder: 3 nearest centroids -> pixel (ties by lower region id)
    k = min(3, m)
    d2 = ((pix_pos[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    m2g_dst = np.repeat(np.arange(h * w, dtype=np.int64), k)
    m2g_src = order.ravel().astype(np.int64)
    m2g_feat = (pix_pos[m2g_dst] - centroids[m2g_src]) / scale

    return MeshGraph(
        labels=labels.astype(np.int32),
        n_regions=m,
        centroids=centroids,
        proc_src=proc_src,
        proc_dst=proc_dst,
        proc_feat=proc_feat,
        g2m_src=g2m_src,
        g2m_dst=g2m_dst,
        g2m_feat=g2m_feat,
        m2g_src=m2g_src,
        m2g_dst=m2g_dst,
        m2g_feat=m2g_feat,
    )
