"""Independent brute-force oracles used to pin expected values.

Everything here recomputes results from first principles (exhaustive scans,
flood fill, path enumeration, finite differences) and stays independent of
the library code paths it checks.
"""

from __future__ import annotations

import numpy as np


def cc_equal_values(image: np.ndarray) -> np.ndarray:
    """8-connected components of exact value equality; 0-based labels in
    first-occurrence order. Oracle for threshold-free segmentation cases."""
    c, h, w = image.shape
    labels = np.full((h, w), -1, dtype=np.int64)
    nxt = 0
    for r0 in range(h):
        for c0 in range(w):
            if labels[r0, c0] >= 0:
                continue
            stack = [(r0, c0)]
            labels[r0, c0] = nxt
            while stack:
                r, cc = stack.pop()
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, ccc = r + dr, cc + dc
                        if (
                            0 <= rr < h
                            and 0 <= ccc < w
                            and labels[rr, ccc] < 0
                            and np.array_equal(image[:, rr, ccc], image[:, r, cc])
                        ):
                            labels[rr, ccc] = nxt
                            stack.append((rr, ccc))
            nxt += 1
    return labels


def brute_adjacency(labels: np.ndarray) -> dict[tuple[int, int], int]:
    """All 4-neighbor label pairs with their boundary pair counts."""
    h, w = labels.shape
    out: dict[tuple[int, int], int] = {}
    for r in range(h):
        for c in range(w):
            for rr, cc in ((r, c + 1), (r + 1, c)):
                if rr < h and cc < w and labels[r, c] != labels[rr, cc]:
                    key = (min(labels[r, c], labels[rr, cc]), max(labels[r, c], labels[rr, cc]))
                    out[key] = out.get(key, 0) + 1
    return {(int(a), int(b)): v for (a, b), v in out.items()}


def brute_eps_ball(centroids: dict[int, tuple[float, float]], eps: float) -> set[tuple[int, int]]:
    ids = sorted(centroids)
    out = set()
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            d = np.hypot(
                centroids[a][0] - centroids[b][0], centroids[a][1] - centroids[b][1]
            )
            if d <= eps:
                out.add((a, b))
    return out


def brute_knn(centroids: dict[int, tuple[float, float]], k: int) -> set[tuple[int, int]]:
    ids = sorted(centroids)
    out = set()
    for a in ids:
        cand = sorted(
            (
                (np.hypot(centroids[a][0] - centroids[b][0], centroids[a][1] - centroids[b][1]), b)
                for b in ids
                if b != a
            )
        )
        for _, b in cand[:k]:
            out.add((min(a, b), max(a, b)))
    return out


def brute_similarity(
    feats: np.ndarray, dates: np.ndarray, scope: str, k: int
) -> set[tuple[int, int]]:
    n = feats.shape[0]
    out = set()
    for i in range(n):
        cand = []
        for j in range(n):
            if j == i:
                continue
            same = dates[i] == dates[j]
            if (scope == "within-date") != same:
                continue
            cand.append((float(np.linalg.norm(feats[i] - feats[j])), j))
        cand.sort()
        for _, j in cand[:k]:
            if scope == "within-date":
                out.add((min(i, j), max(i, j)))
            else:
                out.add((i, j) if dates[i] < dates[j] else (j, i))
    return out


def brute_overlap(
    lab_a: np.ndarray, lab_b: np.ndarray, min_pixels: int
) -> dict[tuple[int, int], float]:
    out = {}
    for a in np.unique(lab_a):
        for b in np.unique(lab_b):
            inter = int(((lab_a == a) & (lab_b == b)).sum())
            if inter >= min_pixels:
                sa = int((lab_a == a).sum())
                sb = int((lab_b == b).sum())
                out[(int(a), int(b))] = inter / min(sa, sb)
    return out


def brute_events(node_dates: dict[int, int], st_edges: list[tuple[int, int]]) -> set[tuple[int, str]]:
    indeg = {v: 0 for v in node_dates}
    outdeg = {v: 0 for v in node_dates}
    for a, b in st_edges:
        outdeg[a] += 1
        indeg[b] += 1
    t_min = min(node_dates.values())
    t_max = max(node_dates.values())
    out = set()
    for v, t in node_dates.items():
        if indeg[v] == 0 and t > t_min:
            out.add((v, "appearance"))
        if outdeg[v] == 0 and t < t_max:
            out.add((v, "disappearance"))
        if outdeg[v] >= 2:
            out.add((v, "split"))
        if indeg[v] >= 2:
            out.add((v, "merge"))
        if indeg[v] == 1 and outdeg[v] == 1:
            out.add((v, "continuation"))
    return out


def enumerate_patterns(
    symbols: dict[int, int],
    st_edges: list[tuple[int, int]],
    minsup: int,
    maxlen: int,
) -> dict[tuple[int, ...], int]:
    """Exhaustive path enumeration; support = distinct start nodes."""
    succ: dict[int, list[int]] = {v: [] for v in symbols}
    for a, b in st_edges:
        succ[a].append(b)
    starts: dict[tuple[int, ...], set[int]] = {}

    def walk(start: int, node: int, pattern: tuple[int, ...]):
        starts.setdefault(pattern, set()).add(start)
        if len(pattern) >= maxlen:
            return
        for nxt in succ[node]:
            walk(start, nxt, pattern + (symbols[nxt],))

    for v in symbols:
        walk(v, v, (symbols[v],))
    return {p: len(s) for p, s in starts.items() if len(s) >= minsup}


def modal_label_accuracy(seg_labels: np.ndarray, truth: np.ndarray) -> float:
    """Accuracy of per-object modal labels, recomputed with plain loops."""
    correct = 0
    total = 0
    for obj in np.unique(seg_labels):
        vals = truth[seg_labels == obj]
        vals = vals[vals >= 0]
        if vals.size == 0:
            continue
        counts: dict[int, int] = {}
        for v in vals.tolist():
            counts[v] = counts.get(v, 0) + 1
        best = max(counts.values())
        correct += best
        total += vals.size
    return correct / total


def fd_gradient(f, arrays: list[np.ndarray], h: float = 1e-4) -> list[np.ndarray]:
    """Central finite differences of scalar f(arrays) wrt every entry."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a, dtype=np.float64)
        it = np.nditer(a, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            old = a[idx]
            a[idx] = old + h
            fp = f()
            a[idx] = old - h
            fm = f()
            a[idx] = old
            g[idx] = (fp - fm) / (2.0 * h)
            it.iternext()
        grads.append(g)
    return grads


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-8)
    return float(np.abs(analytic - numeric).max() / scale)
