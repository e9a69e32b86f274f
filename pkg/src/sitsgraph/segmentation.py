"""Per-date partitioning of a cube into objects.

Two segmenters are provided: a graph-based merge segmentation on the
8-connected pixel grid (threshold tau(comp) = scale/|comp| with a minimum
component size post-pass) and a superpixel k-means in joint (band, xy) space
with grid initialization and a 4-connectivity enforcement pass. Both are
deterministic: edge sorting breaks ties by (weight, src, dst) and cluster
assignment resolves equal distances to the lowest segment id.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datacube import SitsCube
from .errors import EmptyImage, InvalidSegmentCount, MissingFile, ShapeMismatch


@dataclass
class SegStack:
    """Per-date object id map with ids globally unique across dates."""

    labels: np.ndarray              # (T, H, W) int32, >= 0 everywhere
    counts: list[int]               # objects per date
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int32)
        if self.labels.ndim != 3:
            raise ShapeMismatch(f"labels must be (T,H,W), got {self.labels.shape}")
        if self.labels.min() < 0:
            raise ShapeMismatch("segmentation is not a total partition (negative ids)")

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.labels.shape)

    @property
    def n_objects(self) -> int:
        return int(sum(self.counts))

    def date_offset(self, t: int) -> int:
        return int(sum(self.counts[:t]))

    def date_of_object(self, obj: int) -> int:
        off = 0
        for t, c in enumerate(self.counts):
            if obj < off + c:
                return t
            off += c
        raise ShapeMismatch(f"object id {obj} out of range ({self.n_objects} objects)")

    def object_dates(self) -> np.ndarray:
        """Date index per object id, shape (n_objects,)."""
        return np.repeat(np.arange(len(self.counts)), self.counts).astype(np.int64)


# ---------------------------------------------------------------------------
# graph-based merge segmentation


class _UnionFind:
    __slots__ = ("parent", "size")

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)

    def find(self, a: int) -> int:
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, ra: int, rb: int) -> int:
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


def _grid_edges_8(image: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward 8-neighbor edges with Euclidean band-space weights."""
    c, h, w = image.shape
    flat = image.reshape(c, h * w).T.astype(np.float64)  # (HW, C)
    idx = np.arange(h * w).reshape(h, w)
    pairs = []
    if w > 1:
        pairs.append((idx[:, :-1].ravel(), idx[:, 1:].ravel()))
    if h > 1:
        pairs.append((idx[:-1, :].ravel(), idx[1:, :].ravel()))
    if h > 1 and w > 1:
        pairs.append((idx[:-1, :-1].ravel(), idx[1:, 1:].ravel()))
        pairs.append((idx[:-1, 1:].ravel(), idx[1:, :-1].ravel()))
    if not pairs:
        return (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64))
    src = np.concatenate([p[0] for p in pairs])
    dst = np.concatenate([p[1] for p in pairs])
    weight = np.sqrt(((flat[src] - flat[dst]) ** 2).sum(axis=1))
    return src, dst, weight


def felzenszwalb(image: np.ndarray, scale: float, min_size: int = 1) -> np.ndarray:
    """Segment one (C, H, W) image; returns a 0-based int32 (H, W) partition."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[None]
    if image.ndim != 3 or image.shape[0] < 1:
        raise ShapeMismatch(f"image must be (C,H,W), got {image.shape}")
    c, h, w = image.shape
    if h * w == 0:
        raise EmptyImage("cannot segment an empty image")
    if scale <= 0:
        raise ShapeMismatch(f"scale must be > 0, got {scale}")
    if min_size < 1:
        raise ShapeMismatch(f"min_size must be >= 1, got {min_size}")

    src, dst, weight = _grid_edges_8(image)
    order = np.lexsort((dst, src, weight))
    src, dst, weight = src[order], dst[order], weight[order]

    uf = _UnionFind(h * w)
    internal = np.zeros(h * w, dtype=np.float64)  # max MST edge weight per component root
    for a, b, wt in zip(src.tolist(), dst.tolist(), weight.tolist()):
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            continue
        if wt <= min(internal[ra] + scale / uf.size[ra], internal[rb] + scale / uf.size[rb]):
            internal[uf.union(ra, rb)] = wt

    if min_size > 1:
        # merge any still-too-small component into its most-similar neighbor,
        # i.e. across the lowest-weight boundary edge first
        for a, b in zip(src.tolist(), dst.tolist()):
            ra, rb = uf.find(a), uf.find(b)
            if ra != rb and (uf.size[ra] < min_size or uf.size[rb] < min_size):
                uf.union(ra, rb)

    roots = np.array([uf.find(i) for i in range(h * w)], dtype=np.int64)
    return _relabel_first_occurrence(roots.reshape(h, w))


def _relabel_first_occurrence(labels: np.ndarray) -> np.ndarray:
    flat = labels.ravel()
    _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first, kind="stable"), kind="stable")
    return rank[inverse].reshape(labels.shape).astype(np.int32)


# ---------------------------------------------------------------------------
# superpixel k-means


def _slic_grid(h: int, w: int, n_segments: int) -> tuple[int, int]:
    """Grid dimensions whose product best approximates n_segments.

    The product never exceeds 1.5 * n_segments, keeping the final segment
    count within [1, 2 * n_segments].
    """
    best = None
    for nrows in range(1, min(h, n_segments) + 1):
        ncols = min(w, max(1, round(n_segments / nrows)))
        score = (abs(nrows * ncols - n_segments), abs(h / nrows - w / ncols), nrows)
        if best is None or score < best[0]:
            best = (score, nrows, ncols)
    return best[1], best[2]


def _grid_positions(dim: int, n_axis: int) -> np.ndarray:
    # integer centers of n_axis equal bands: ((2k+1)*dim - n_axis) // (2*n_axis)
    k = np.arange(n_axis, dtype=np.int64)
    return ((2 * k + 1) * dim - n_axis) // (2 * n_axis)


def slic(
    image: np.ndarray,
    n_segments: int,
    compactness: float,
    iters: int = 10,
) -> np.ndarray:
    """Superpixel partition of one (C, H, W) image; 0-based int32 (H, W)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[None]
    if image.ndim != 3:
        raise ShapeMismatch(f"image must be (C,H,W), got {image.shape}")
    c, h, w = image.shape
    if h * w == 0:
        raise EmptyImage("cannot segment an empty image")
    if not (1 <= n_segments <= h * w):
        raise InvalidSegmentCount(f"n_segments must be in [1, {h * w}], got {n_segments}")
    if compactness <= 0:
        raise InvalidSegmentCount(f"compactness must be > 0, got {compactness}")

    step = float(np.sqrt(h * w / n_segments))
    nrows, ncols = _slic_grid(h, w, n_segments)
    rows = _grid_positions(h, nrows)
    cols = _grid_positions(w, ncols)
    centers_rc = np.array([(r, cc) for r in rows for cc in cols], dtype=np.float64)

    img = np.moveaxis(image, 0, -1)  # (H, W, C)
    centers_rc = _move_to_lowest_gradient(img, centers_rc)
    centers_color = img[centers_rc[:, 0].astype(int), centers_rc[:, 1].astype(int)].copy()

    n_centers = len(centers_rc)
    ratio2 = (compactness / step) ** 2
    half = int(np.ceil(step))
    offs = np.arange(-half, half + 2)  # covers floor..ceil of a fractional center
    dr = np.repeat(offs, len(offs))
    dc = np.tile(offs, len(offs))
    img_flat = img.reshape(h * w, c)
    center_ids = np.repeat(np.arange(n_centers), len(offs) ** 2)
    labels = np.full((h, w), -1, dtype=np.int64)

    for _ in range(max(1, iters)):
        # all candidate (center, pixel) pairs in one batch; border windows
        # clamp onto edge pixels, which only duplicates in-window entries
        rows = np.clip(np.floor(centers_rc[:, 0]).astype(np.int64)[:, None] + dr, 0, h - 1)
        cols = np.clip(np.floor(centers_rc[:, 1]).astype(np.int64)[:, None] + dc, 0, w - 1)
        pix = (rows * w + cols).ravel()
        dcol2 = ((img_flat[pix] - np.repeat(centers_color, len(offs) ** 2, axis=0)) ** 2).sum(-1)
        dxy2 = (rows - centers_rc[:, 0][:, None]) ** 2 + (cols - centers_rc[:, 1][:, None]) ** 2
        d2 = dcol2 + ratio2 * dxy2.ravel()
        # per pixel: smallest distance wins, ties to the lowest center id
        order = np.lexsort((center_ids, d2, pix))
        sorted_pix = pix[order]
        first = np.ones(len(sorted_pix), dtype=bool)
        first[1:] = sorted_pix[1:] != sorted_pix[:-1]
        labels_flat = labels.ravel()
        labels_flat.fill(-1)
        labels_flat[sorted_pix[first]] = center_ids[order][first]

        unassigned = labels_flat < 0
        if unassigned.any():
            up = np.nonzero(unassigned)[0]
            pts = img_flat[up]
            dcol2 = ((pts[:, None, :] - centers_color[None]) ** 2).sum(-1)
            d2u = dcol2 + ratio2 * (
                (up[:, None] // w - centers_rc[None, :, 0]) ** 2
                + (up[:, None] % w - centers_rc[None, :, 1]) ** 2
            )
            labels_flat[up] = np.argmin(d2u, axis=1)

        counts = np.bincount(labels_flat, minlength=n_centers).astype(np.float64)
        rsum = np.bincount(labels_flat, weights=np.repeat(np.arange(h), w), minlength=n_centers)
        csum = np.bincount(labels_flat, weights=np.tile(np.arange(w), h), minlength=n_centers)
        nonzero = counts > 0
        centers_rc[nonzero, 0] = rsum[nonzero] / counts[nonzero]
        centers_rc[nonzero, 1] = csum[nonzero] / counts[nonzero]
        for ch in range(c):
            s = np.bincount(labels_flat, weights=img_flat[:, ch], minlength=n_centers)
            centers_color[nonzero, ch] = s[nonzero] / counts[nonzero]

    labels = _enforce_connectivity(labels, centers_rc)
    return _relabel_first_occurrence(labels)


def _move_to_lowest_gradient(img: np.ndarray, centers_rc: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    grad = np.zeros((h, w))
    if h > 2:
        grad[1:-1, :] += ((img[2:, :] - img[:-2, :]) ** 2).sum(-1)
    if w > 2:
        grad[:, 1:-1] += ((img[:, 2:] - img[:, :-2]) ** 2).sum(-1)
    out = centers_rc.copy()
    for k, (cy, cx) in enumerate(centers_rc):
        cy, cx = int(cy), int(cx)
        best = (grad[cy, cx], cy, cx)
        for r in range(max(0, cy - 1), min(h, cy + 2)):
            for cc in range(max(0, cx - 1), min(w, cx + 2)):
                if grad[r, cc] < best[0]:  # strict: keep the original on ties
                    best = (grad[r, cc], r, cc)
        out[k] = (best[1], best[2])
    return out


def _connected_components(labels: np.ndarray) -> np.ndarray:
    """4-connected component index per pixel, numbered in scan order."""
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int64)
    n = 0
    for r0 in range(h):
        for c0 in range(w):
            if comp[r0, c0] >= 0:
                continue
            lab = labels[r0, c0]
            stack = [(r0, c0)]
            comp[r0, c0] = n
            while stack:
                r, cc = stack.pop()
                for rr, ccc in ((r - 1, cc), (r + 1, cc), (r, cc - 1), (r, cc + 1)):
                    if 0 <= rr < h and 0 <= ccc < w and comp[rr, ccc] < 0 and labels[rr, ccc] == lab:
                        comp[rr, ccc] = n
                        stack.append((rr, ccc))
            n += 1
    return comp


def _enforce_connectivity(labels: np.ndarray, centers_rc: np.ndarray) -> np.ndarray:
    h, w = labels.shape
    comp = _connected_components(labels)
    n_comp = int(comp.max()) + 1
    flatc = comp.ravel()
    comp_label = labels.ravel()[np.unique(flatc, return_index=True)[1]]
    comp_size = np.bincount(flatc, minlength=n_comp)

    adj: list[set[int]] = [set() for _ in range(n_comp)]
    for a, b in ((comp[:, :-1], comp[:, 1:]), (comp[:-1, :], comp[1:, :])):
        diff = a != b
        for x, y in zip(a[diff].tolist(), b[diff].tolist()):
            adj[x].add(y)
            adj[y].add(x)
    rsum = np.bincount(flatc, weights=np.repeat(np.arange(h), w), minlength=n_comp)
    csum = np.bincount(flatc, weights=np.tile(np.arange(w), h), minlength=n_comp)
    cent = np.stack([rsum / comp_size, csum / comp_size], axis=1)

    # keep the largest fragment per label (scan order wins ties)
    keep: dict[int, int] = {}
    for ci in range(n_comp):
        lab = int(comp_label[ci])
        if lab not in keep or comp_size[ci] > comp_size[keep[lab]]:
            keep[lab] = ci
    frag_label = np.full(n_comp, -1, dtype=np.int64)
    for lab, ci in keep.items():
        frag_label[ci] = lab

    pending = [ci for ci in range(n_comp) if frag_label[ci] < 0]
    while pending:
        deferred = []
        progressed = False
        for ci in pending:
            cand = {int(frag_label[cj]) for cj in adj[ci] if frag_label[cj] >= 0}
            if not cand:
                deferred.append(ci)
                continue
            frag_label[ci] = min(
                cand, key=lambda lab: (((centers_rc[lab] - cent[ci]) ** 2).sum(), lab)
            )
            progressed = True
        if not progressed and deferred:
            # pocket fully surrounded by other orphans: retain the first as-is
            frag_label[deferred[0]] = comp_label[deferred[0]]
            deferred = deferred[1:]
        pending = deferred
    return frag_label[comp]


def segment_cube(
    cube: SitsCube,
    algo: str,
    params: dict,
    band_subset: list[str] | None = None,
    threads: int = 1,
) -> SegStack:
    """Segment every date independently and offset ids to be globally unique."""
    t, c, h, w = cube.shape
    if band_subset:
        idx = [cube.band_index(b) for b in band_subset]
    else:
        idx = list(range(c))
    frames = [cube.values[k][idx] for k in range(t)]

    if algo == "felzenszwalb":
        def run(frame):
            return felzenszwalb(frame, scale=float(params["scale"]), min_size=int(params.get("min_size", 1)))
    elif algo == "slic":
        def run(frame):
            return slic(
                frame,
                n_segments=int(params["n_segments"]),
                compactness=float(params["compactness"]),
                iters=int(params.get("iters", 10)),
            )
    else:
        raise ShapeMismatch(f"unknown segmentation algorithm {algo!r}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_date = list(pool.map(run, frames))
    else:
        per_date = [run(f) for f in frames]

    labels = np.empty((t, h, w), dtype=np.int32)
    counts = []
    offset = 0
    for k, lab in enumerate(per_date):
        n = int(lab.max()) + 1
        labels[k] = lab + offset
        counts.append(n)
        offset += n
    return SegStack(
        labels=labels,
        counts=counts,
        provenance={"algorithm": algo, "params": dict(params), "bands": band_subset or list(cube.bands)},
    )


# ---------------------------------------------------------------------------
# serialization


def save_seg(seg: SegStack, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    t = seg.labels.shape[0]
    for k in range(t):
        (path / f"seg_t{k}.bin").write_bytes(
            np.ascontiguousarray(seg.labels[k], dtype="<i4").tobytes()
        )
    meta = {
        "T": t,
        "H": int(seg.labels.shape[1]),
        "W": int(seg.labels.shape[2]),
        "counts": [int(x) for x in seg.counts],
        "provenance": seg.provenance,
    }
    (path / "seg_meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_seg(path: str | Path) -> SegStack:
    path = Path(path)
    meta_path = path / "seg_meta.json"
    if not meta_path.is_file():
        raise MissingFile(f"missing {meta_path}")
    meta = json.loads(meta_path.read_text())
    t, h, w = int(meta["T"]), int(meta["H"]), int(meta["W"])
    labels = np.empty((t, h, w), dtype=np.int32)
    for k in range(t):
        f = path / f"seg_t{k}.bin"
        if not f.is_file():
            raise MissingFile(f"missing {f}")
        blob = f.read_bytes()
        if len(blob) != 4 * h * w:
            raise ShapeMismatch(f"{f} holds {len(blob)} bytes, expected {4 * h * w}")
        labels[k] = np.frombuffer(blob, dtype="<i4").reshape(h, w)
    return SegStack(labels=labels, counts=[int(x) for x in meta["counts"]], provenance=meta.get("provenance", {}))
