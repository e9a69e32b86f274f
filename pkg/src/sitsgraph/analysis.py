"""Expert operators and frequent sequential pattern mining on the graph."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFeature, ShapeMismatch, UnknownNode
from .features import FeatureMatrix
from .stgraph import StGraph

EVENT_KINDS = ("appearance", "disappearance", "split", "merge", "continuation")


@dataclass(frozen=True)
class EventRecord:
    node: int
    event: str
    t: int


@dataclass(frozen=True)
class Pattern:
    symbols: tuple[int, ...]
    support: int
    example: tuple[int, ...]   # one witness node path


def detect_events(g: StGraph) -> list[EventRecord]:
    """Degree-based event detection over the temporal edge set.

    appearance: in-degree 0 at t > t_min; disappearance: out-degree 0 at
    t < t_max; split: out-degree >= 2; merge: in-degree >= 2; continuation:
    in = out = 1. A node can carry several events.
    """
    if not g.nodes:
        return []
    indeg, outdeg = g.st_degrees()
    t_min = min(n.t for n in g.nodes)
    t_max = max(n.t for n in g.nodes)
    out = []
    for n in g.nodes:
        if indeg[n.id] == 0 and n.t > t_min:
            out.append(EventRecord(n.id, "appearance", n.t))
        if outdeg[n.id] == 0 and n.t < t_max:
            out.append(EventRecord(n.id, "disappearance", n.t))
        if outdeg[n.id] >= 2:
            out.append(EventRecord(n.id, "split", n.t))
        if indeg[n.id] >= 2:
            out.append(EventRecord(n.id, "merge", n.t))
        if indeg[n.id] == 1 and outdeg[n.id] == 1:
            out.append(EventRecord(n.id, "continuation", n.t))
    return out


def temporal_profile(
    g: StGraph,
    seed_node: int,
    feature_index: int,
    direction: str = "out",
) -> list[tuple[int, float]]:
    """Walk temporal edges from a seed, always following the heaviest edge
    (ties -> lower id); returns (date, feature value) samples."""
    node = g.node(seed_node)
    if direction not in ("out", "in"):
        raise ShapeMismatch(f"direction must be 'out' or 'in', got {direction!r}")
    samples = [(node.t, float(g.feature_row(node.id)[feature_index]))]
    current = node.id
    visited = {current}
    while True:
        best = None
        for e in g.edges_st:
            if direction == "out" and e.src == current:
                cand = (-e.weight, e.dst)
            elif direction == "in" and e.dst == current:
                cand = (-e.weight, e.src)
            else:
                continue
            if best is None or cand < best:
                best = cand
        if best is None or best[1] in visited:
            break
        current = best[1]
        visited.add(current)
        samples.append((g.node(current).t, float(g.feature_row(current)[feature_index])))
    if direction == "in":
        samples.sort(key=lambda s: s[0])
    return samples


def coverage_indicator(g: StGraph, node_subset: dict[int, list[int]], frame_pixels: int) -> dict[int, float]:
    """Fraction of the frame covered by the given nodes at each date."""
    out = {}
    for t, ids in sorted(node_subset.items()):
        total = 0
        for nid in ids:
            n = g.node(nid)
            if n.t != t:
                raise UnknownNode(f"node {nid} is at date {n.t}, not {t}")
            total += n.pixel_count
        out[int(t)] = total / frame_pixels
    return out


def symbolize(fm: FeatureMatrix, feature_index: int, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-frequency binning of one feature into symbols 0..n_bins-1.

    Returns (symbols, bin_edges); values <= an edge fall in the lower bin.
    All-equal input degenerates to a single bin with a warning.
    """
    if n_bins < 2:
        raise ShapeMismatch(f"n_bins must be >= 2, got {n_bins}")
    values = fm.values[:, feature_index]
    if np.all(values == values[0]):
        warnings.warn("feature is constant; all nodes share symbol 0", DegenerateFeature, stacklevel=2)
        return np.zeros(len(values), dtype=np.int64), np.array([])
    qs = np.arange(1, n_bins) / n_bins
    edges = np.quantile(values, qs)
    symbols = np.searchsorted(edges, values, side="left")
    return symbols.astype(np.int64), edges


def mine_frequent(
    g: StGraph,
    symbols: np.ndarray,
    minsup: int,
    maxlen: int | None = None,
) -> list[Pattern]:
    """All symbol sequences realized by directed temporal paths.

    A pattern s1..sk occurs at node v iff some path v=v1->..->vk (over
    temporal edges) satisfies symbol(vi) = si. Support counts distinct start
    nodes, which keeps extension support <= prefix support, so depth-first
    enumeration prunes below minsup. Output sorted by (length, symbols).
    """
    if minsup < 1:
        raise ShapeMismatch(f"minsup must be >= 1, got {minsup}")
    n_dates = len(g.dates())
    if maxlen is None:
        maxlen = max(1, n_dates)
    if maxlen < 1:
        raise ShapeMismatch(f"maxlen must be >= 1, got {maxlen}")

    symbols = np.asarray(symbols)
    if symbols.shape[0] != g.n_nodes:
        raise ShapeMismatch(f"{symbols.shape[0]} symbols for {g.n_nodes} nodes")
    sym = {n.id: int(symbols[i]) for i, n in enumerate(g.nodes)}
    succ: dict[int, list[int]] = {n.id: [] for n in g.nodes}
    for e in g.edges_st:
        succ[e.src].append(e.dst)
    for v in succ:
        succ[v].sort()

    alphabet = sorted(set(sym.values()))
    results: list[Pattern] = []

    # occurrence state: start node -> set of path end nodes; witness path kept
    # for the lowest start node, following lowest-id successors
    def seed(symbol: int) -> dict[int, set[int]]:
        return {v: {v} for v in sorted(sym) if sym[v] == symbol}

    def extend(state: dict[int, set[int]], symbol: int) -> dict[int, set[int]]:
        out = {}
        for start, ends in state.items():
            new_ends = {w for e in ends for w in succ[e] if sym[w] == symbol}
            if new_ends:
                out[start] = new_ends
        return out

    def witness(pattern: tuple[int, ...]) -> tuple[int, ...]:
        # depth-first over lowest ids; pattern is known to occur somewhere
        for start in sorted(sym):
            if sym[start] != pattern[0]:
                continue
            path = _find_path(start, pattern, succ, sym)
            if path:
                return path
        return ()

    stack = [((s,), seed(s)) for s in reversed(alphabet)]
    stack = [(p, st) for p, st in stack if len(st) >= minsup]
    while stack:
        pattern, state = stack.pop()
        results.append(Pattern(symbols=pattern, support=len(state), example=witness(pattern)))
        if len(pattern) >= maxlen:
            continue
        for s in reversed(alphabet):
            nxt = extend(state, s)
            if len(nxt) >= minsup:
                stack.append((pattern + (s,), nxt))
    results.sort(key=lambda p: (len(p.symbols), p.symbols))
    return results


def _find_path(start, pattern, succ, sym) -> tuple[int, ...]:
    if sym[start] != pattern[0]:
        return ()
    if len(pattern) == 1:
        return (start,)
    for nxt in succ[start]:
        tail = _find_path(nxt, pattern[1:], succ, sym)
        if tail:
            return (start,) + tail
    return ()


def events_csv(records: list[EventRecord]) -> str:
    lines = ["node,event,t"]
    lines += [f"{r.node},{r.event},{r.t}" for r in records]
    return "\n".join(lines) + "\n"


def patterns_csv(patterns: list[Pattern]) -> str:
    lines = ["pattern,support"]
    lines += ["-".join(map(str, p.symbols)) + f",{p.support}" for p in patterns]
    return "\n".join(lines) + "\n"
