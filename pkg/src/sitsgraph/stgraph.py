"""Multi-relational spatio-temporal graph: assembly, queries, serialization.

Nodes are per-date objects. Edges split into two disjoint sets: spatial edges
(same date, undirected, stored once with src < dst) and spatio-temporal edges
(directed past -> future). The canonical serialization is JSON; GraphML and
DOT are lossy views for external viewers.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import DimMismatch, InvalidLag, ShapeMismatch, TooFewNodes, UnknownNode
from .features import FeatureMatrix, geom_features
from .segmentation import SegStack

SPATIAL = "S"
SPATIOTEMPORAL = "ST"


@dataclass(frozen=True)
class Node:
    id: int
    t: int
    pixel_count: int
    centroid: tuple[float, float]   # (row, col)
    label: int | None = None


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str                       # SPATIAL | SPATIOTEMPORAL
    weight: float


class StGraph:
    """Immutable-after-build attributed graph over segmentation objects."""

    def __init__(
        self,
        nodes: list[Node],
        edges_spatial: list[Edge],
        edges_st: list[Edge],
        features: FeatureMatrix | None = None,
        seg: SegStack | None = None,
        meta: dict | None = None,
    ):
        self.nodes = sorted(nodes, key=lambda n: n.id)
        self._by_id = {n.id: n for n in self.nodes}
        self.edges_spatial = _canonical_spatial(edges_spatial)
        self.edges_st = _canonical_st(edges_st, self._by_id)
        self.features = features
        self.seg = seg
        self.meta = dict(meta or {})
        self.validate()

    # -- invariants ---------------------------------------------------------

    def validate(self) -> None:
        seen = set()
        for e in self.edges_spatial:
            if e.src == e.dst:
                raise ShapeMismatch(f"self-loop on node {e.src}")
            if self._by_id[e.src].t != self._by_id[e.dst].t:
                raise ShapeMismatch(f"spatial edge {e.src}->{e.dst} crosses dates")
            if e.weight < 0:
                raise ShapeMismatch(f"negative weight on {e.src}->{e.dst}")
            seen.add((e.src, e.dst))
            seen.add((e.dst, e.src))
        for e in self.edges_st:
            if e.src == e.dst:
                raise ShapeMismatch(f"self-loop on node {e.src}")
            if self._by_id[e.src].t >= self._by_id[e.dst].t:
                raise ShapeMismatch(f"temporal edge {e.src}->{e.dst} not oriented past->future")
            if e.weight < 0:
                raise ShapeMismatch(f"negative weight on {e.src}->{e.dst}")
            if (e.src, e.dst) in seen:
                raise ShapeMismatch(f"edge ({e.src},{e.dst}) present in both relation sets")
        if self.features is not None:
            if self.features.values.shape[0] != len(self.nodes):
                raise DimMismatch(
                    f"{self.features.values.shape[0]} feature rows for {len(self.nodes)} nodes"
                )
            # feature row i belongs to node id i
            if any(n.id != i for i, n in enumerate(self.nodes)):
                raise DimMismatch("feature-carrying graphs need contiguous node ids 0..n-1")

    # -- queries ------------------------------------------------------------

    def node(self, node_id: int) -> Node:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise UnknownNode(f"no node with id {node_id}") from None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def dates(self) -> list[int]:
        return sorted({n.t for n in self.nodes})

    def nodes_at(self, t: int) -> list[Node]:
        return [n for n in self.nodes if n.t == t]

    def neighborhood(self, node_id: int, kind: str = SPATIAL, direction: str = "both") -> set[int]:
        """Neighbor ids. Spatial neighbors are symmetric; for temporal edges
        ``direction`` selects incoming ("in", from the past), outgoing ("out",
        to the future) or both."""
        self.node(node_id)
        out: set[int] = set()
        if kind == SPATIAL:
            for e in self.edges_spatial:
                if e.src == node_id:
                    out.add(e.dst)
                elif e.dst == node_id:
                    out.add(e.src)
            return out
        if kind != SPATIOTEMPORAL:
            raise ShapeMismatch(f"unknown edge kind {kind!r}")
        for e in self.edges_st:
            if direction in ("out", "both") and e.src == node_id:
                out.add(e.dst)
            if direction in ("in", "both") and e.dst == node_id:
                out.add(e.src)
        return out

    def st_degrees(self) -> tuple[dict[int, int], dict[int, int]]:
        indeg = {n.id: 0 for n in self.nodes}
        outdeg = {n.id: 0 for n in self.nodes}
        for e in self.edges_st:
            outdeg[e.src] += 1
            indeg[e.dst] += 1
        return indeg, outdeg

    def feature_row(self, node_id: int) -> np.ndarray:
        if self.features is None:
            raise DimMismatch("graph carries no feature matrix")
        self.node(node_id)
        return self.features.values[node_id]


def _canonical_spatial(edges: list[Edge]) -> list[Edge]:
    dedup: dict[tuple[int, int], Edge] = {}
    for e in edges:
        a, b = (e.src, e.dst) if e.src < e.dst else (e.dst, e.src)
        dedup[(a, b)] = Edge(a, b, SPATIAL, float(e.weight))
    return [dedup[k] for k in sorted(dedup)]


def _canonical_st(edges: list[Edge], by_id: dict[int, Node]) -> list[Edge]:
    dedup: dict[tuple[int, int], Edge] = {}
    for e in edges:
        a, b = e.src, e.dst
        if by_id[a].t > by_id[b].t:
            a, b = b, a
        dedup[(a, b)] = Edge(a, b, SPATIOTEMPORAL, float(e.weight))
    return [dedup[k] for k in sorted(dedup)]


# ---------------------------------------------------------------------------
# edge builders


def adjacency_edges(seg: SegStack, t: int) -> list[Edge]:
    """Region adjacency for one date; weight = shared 4-neighbor boundary
    length in pixel-pair units."""
    if not (0 <= t < seg.shape[0]):
        raise ShapeMismatch(f"date {t} out of range for {seg.shape[0]} dates")
    lab = seg.labels[t]
    pairs: dict[tuple[int, int], int] = {}
    for a, b in ((lab[:, :-1], lab[:, 1:]), (lab[:-1, :], lab[1:, :])):
        diff = a != b
        lo = np.minimum(a[diff], b[diff])
        hi = np.maximum(a[diff], b[diff])
        for key in zip(lo.tolist(), hi.tolist()):
            pairs[key] = pairs.get(key, 0) + 1
    return [Edge(a, b, SPATIAL, float(c)) for (a, b), c in sorted(pairs.items())]


def eps_ball_edges(nodes: list[Node], eps: float) -> list[Edge]:
    """Centroid distance <= eps (inclusive) between same-date nodes."""
    if eps <= 0:
        raise ShapeMismatch(f"eps must be > 0, got {eps}")
    out = []
    nodes = sorted(nodes, key=lambda n: n.id)
    for i, a in enumerate(nodes):
        for b in nodes[i + 1 :]:
            if a.t != b.t:
                continue
            d = float(np.hypot(a.centroid[0] - b.centroid[0], a.centroid[1] - b.centroid[1]))
            if d <= eps:
                out.append(Edge(a.id, b.id, SPATIAL, d))
    return out


def knn_edges(nodes: list[Node], k: int) -> list[Edge]:
    """Symmetrized k-nearest-neighbor relation over same-date centroids."""
    by_date: dict[int, list[Node]] = {}
    for n in nodes:
        by_date.setdefault(n.t, []).append(n)
    out: dict[tuple[int, int], float] = {}
    for t, group in sorted(by_date.items()):
        group = sorted(group, key=lambda n: n.id)
        if k < 1 or k >= len(group):
            raise TooFewNodes(f"k={k} needs at least k+1 nodes at date {t}, have {len(group)}")
        for a in group:
            cand = []
            for b in group:
                if b.id == a.id:
                    continue
                d = float(np.hypot(a.centroid[0] - b.centroid[0], a.centroid[1] - b.centroid[1]))
                cand.append((d, b.id))
            cand.sort()  # ties resolved by lower id
            for d, bid in cand[:k]:
                key = (min(a.id, bid), max(a.id, bid))
                out.setdefault(key, d)
    return [Edge(a, b, SPATIAL, d) for (a, b), d in sorted(out.items())]


def similarity_edges(
    fm: FeatureMatrix,
    node_dates: np.ndarray,
    scope: str,
    k: int,
) -> list[Edge]:
    """k most feature-similar nodes per node, within or across dates.

    Weight = exp(-d^2) with d the Euclidean feature distance. Cross-date edges
    are oriented past -> future and classified spatio-temporal.
    """
    if scope not in ("within-date", "cross-date"):
        raise ShapeMismatch(f"unknown scope {scope!r}")
    if k < 1:
        raise ShapeMismatch(f"k must be >= 1, got {k}")
    v = fm.values
    node_dates = np.asarray(node_dates)
    if node_dates.shape[0] != v.shape[0]:
        raise DimMismatch(f"{node_dates.shape[0]} dates for {v.shape[0]} feature rows")
    n = v.shape[0]
    edges: dict[tuple[int, int], float] = {}
    for i in range(n):
        if scope == "within-date":
            mask = (node_dates == node_dates[i])
        else:
            mask = node_dates != node_dates[i]
        mask = mask.copy()
        mask[i] = False
        cand_ids = np.nonzero(mask)[0]
        if cand_ids.size == 0:
            continue
        d = np.sqrt(((v[cand_ids] - v[i]) ** 2).sum(axis=1))
        order = np.lexsort((cand_ids, d))
        for j in order[:k]:
            other = int(cand_ids[j])
            w = float(np.exp(-float(d[j]) ** 2))
            if scope == "within-date":
                key = (min(i, other), max(i, other))
            else:
                key = (i, other) if node_dates[i] < node_dates[other] else (other, i)
            edges.setdefault(key, w)
    kind = SPATIAL if scope == "within-date" else SPATIOTEMPORAL
    return [Edge(a, b, kind, w) for (a, b), w in sorted(edges.items())]


def _overlap_pairs(lab_a: np.ndarray, lab_b: np.ndarray, min_pixels: int) -> dict[tuple[int, int], float]:
    inter: dict[tuple[int, int], int] = {}
    for key in zip(lab_a.ravel().tolist(), lab_b.ravel().tolist()):
        inter[key] = inter.get(key, 0) + 1
    size_a = dict(zip(*np.unique(lab_a, return_counts=True)))
    size_b = dict(zip(*np.unique(lab_b, return_counts=True)))
    out = {}
    for (a, b), c in inter.items():
        if c >= min_pixels:
            out[(int(a), int(b))] = c / min(int(size_a[a]), int(size_b[b]))
    return out


def overlap_edges(seg: SegStack, min_pixels: int = 1) -> list[Edge]:
    """Directed edges between footprint-overlapping objects at consecutive
    dates; weight = |A & B| / min(|A|, |B|)."""
    t = seg.shape[0]
    if t < 2:
        raise ShapeMismatch("overlap edges need at least two dates")
    if min_pixels < 1:
        raise ShapeMismatch(f"min_pixels must be >= 1, got {min_pixels}")
    out = []
    for date in range(t - 1):
        pairs = _overlap_pairs(seg.labels[date], seg.labels[date + 1], min_pixels)
        for (a, b), w in sorted(pairs.items()):
            out.append(Edge(a, b, SPATIOTEMPORAL, w))
    return out


def periodic_edges(seg: SegStack, lag: int, min_pixels: int = 1) -> list[Edge]:
    """Same overlap rule between dates t and t+lag (lag >= 2)."""
    if lag < 2:
        raise InvalidLag(f"lag must be >= 2, got {lag}")
    if min_pixels < 1:
        raise ShapeMismatch(f"min_pixels must be >= 1, got {min_pixels}")
    t = seg.shape[0]
    out = []
    for date in range(t - lag):
        pairs = _overlap_pairs(seg.labels[date], seg.labels[date + lag], min_pixels)
        for (a, b), w in sorted(pairs.items()):
            out.append(Edge(a, b, SPATIOTEMPORAL, w))
    return out


# ---------------------------------------------------------------------------
# assembly


def nodes_from_seg(seg: SegStack, label_maps: np.ndarray | None = None) -> list[Node]:
    """One node per object with pixel count, centroid and (optionally) the
    modal class label of its pixels (-1 labels ignored; pure -1 -> None)."""
    geom = geom_features(seg).values
    dates = seg.object_dates()
    labels: dict[int, int | None] = {}
    if label_maps is not None:
        label_maps = np.asarray(label_maps)
        if label_maps.shape != seg.shape:
            raise ShapeMismatch(f"label maps {label_maps.shape} do not match seg {seg.shape}")
        for date in range(seg.shape[0]):
            lab = seg.labels[date].ravel().astype(np.int64)
            cls = label_maps[date].ravel().astype(np.int64)
            ok = cls >= 0
            if not ok.any():
                continue
            n_cls = int(cls[ok].max()) + 1
            counts = np.zeros((seg.n_objects, n_cls), dtype=np.int64)
            np.add.at(counts, (lab[ok], cls[ok]), 1)
            for obj in np.unique(lab):
                row = counts[obj]
                if row.sum() > 0:
                    labels[int(obj)] = int(row.argmax())  # ties -> lower class id
    out = []
    for obj in range(seg.n_objects):
        out.append(
            Node(
                id=obj,
                t=int(dates[obj]),
                pixel_count=int(geom[obj, 0]),
                centroid=(float(geom[obj, 1]), float(geom[obj, 2])),
                label=labels.get(obj),
            )
        )
    return out


def build_graph(
    seg: SegStack,
    features: FeatureMatrix | None = None,
    label_maps: np.ndarray | None = None,
    spatial: list | None = None,
    st: list | None = None,
    meta: dict | None = None,
) -> StGraph:
    """Assemble a graph from builder specs.

    ``spatial`` entries: "adjacency" | ("eps", R) | ("knn", K) | ("sim", K).
    ``st`` entries: ("overlap", MIN) | ("sim", K) | ("periodic", LAG[, MIN]).
    """
    nodes = nodes_from_seg(seg, label_maps)
    dates = seg.object_dates()
    es: list[Edge] = []
    est: list[Edge] = []
    for item in spatial or []:
        kind, args = _split_spec(item)
        if kind == "adjacency":
            for t in range(seg.shape[0]):
                es.extend(adjacency_edges(seg, t))
        elif kind == "eps":
            es.extend(eps_ball_edges(nodes, float(args[0])))
        elif kind == "knn":
            es.extend(knn_edges(nodes, int(args[0])))
        elif kind == "sim":
            if features is None:
                raise DimMismatch("similarity edges need a feature matrix")
            es.extend(similarity_edges(features, dates, "within-date", int(args[0])))
        else:
            raise ShapeMismatch(f"unknown spatial builder {kind!r}")
    for item in st or []:
        kind, args = _split_spec(item)
        if kind == "overlap":
            est.extend(overlap_edges(seg, int(args[0]) if args else 1))
        elif kind == "sim":
            if features is None:
                raise DimMismatch("similarity edges need a feature matrix")
            est.extend(similarity_edges(features, dates, "cross-date", int(args[0])))
        elif kind == "periodic":
            lag = int(args[0])
            minpx = int(args[1]) if len(args) > 1 else 1
            est.extend(periodic_edges(seg, lag, minpx))
        else:
            raise ShapeMismatch(f"unknown spatio-temporal builder {kind!r}")
    return StGraph(nodes, es, est, features=features, seg=seg, meta=meta)


def _split_spec(item) -> tuple[str, tuple]:
    if isinstance(item, str):
        return item, ()
    return item[0], tuple(item[1:])


# ---------------------------------------------------------------------------
# stats


def graph_stats(
    g: StGraph,
    cube_shape: tuple[int, int, int, int],
    f_v: int,
    f_e: int = 0,
    map_stored: bool = True,
) -> dict:
    """Size report with the storage compression ratio.

    ratio = C*T*H*W / (f_v*|V| + |E| + f_e*|E| [+ T*H*W if the object-pixel
    map is stored]).
    """
    t, c, h, w = cube_shape
    n_edges = len(g.edges_spatial) + len(g.edges_st)
    denom = f_v * g.n_nodes + n_edges + f_e * n_edges
    if map_stored:
        denom += t * h * w
    ratio = (c * t * h * w) / denom if denom > 0 else float("inf")

    per_date = {int(d): len(g.nodes_at(d)) for d in g.dates()}
    sp_deg: dict[int, int] = {n.id: 0 for n in g.nodes}
    for e in g.edges_spatial:
        sp_deg[e.src] += 1
        sp_deg[e.dst] += 1
    indeg, outdeg = g.st_degrees()

    def hist(d: dict[int, int]) -> dict[int, int]:
        out: dict[int, int] = {}
        for v in d.values():
            out[v] = out.get(v, 0) + 1
        return dict(sorted(out.items()))

    return {
        "n_nodes": g.n_nodes,
        "n_edges_spatial": len(g.edges_spatial),
        "n_edges_st": len(g.edges_st),
        "nodes_per_date": per_date,
        "degree_hist_spatial": hist(sp_deg),
        "degree_hist_st_in": hist(indeg),
        "degree_hist_st_out": hist(outdeg),
        "f_v": f_v,
        "f_e": f_e,
        "map_stored": map_stored,
        "compression_ratio": ratio,
    }


# ---------------------------------------------------------------------------
# serialization


def export_graph(g: StGraph, fmt: str = "json") -> bytes:
    if fmt == "json":
        return _to_json(g).encode()
    if fmt == "graphml":
        return _to_graphml(g)
    if fmt == "dot":
        return _to_dot(g).encode()
    raise ShapeMismatch(f"unknown export format {fmt!r}")


def _to_json(g: StGraph) -> str:
    nodes = []
    for n in g.nodes:
        row = None
        if g.features is not None:
            row = [float(x) for x in g.features.values[n.id]]
        nodes.append(
            {
                "id": n.id,
                "t": n.t,
                "pixel_count": n.pixel_count,
                "centroid": [n.centroid[0], n.centroid[1]],
                "features": row,
                "label": n.label,
            }
        )
    edges = [
        {"src": e.src, "dst": e.dst, "kind": e.kind, "w": e.weight}
        for e in list(g.edges_spatial) + list(g.edges_st)
    ]
    meta = dict(g.meta)
    if g.features is not None:
        meta["feature_names"] = list(g.features.names)
    return json.dumps({"nodes": nodes, "edges": edges, "meta": meta}, indent=1)


def import_graph(blob: bytes | str) -> StGraph:
    doc = json.loads(blob)
    nodes = [
        Node(
            id=int(n["id"]),
            t=int(n["t"]),
            pixel_count=int(n["pixel_count"]),
            centroid=(float(n["centroid"][0]), float(n["centroid"][1])),
            label=None if n.get("label") is None else int(n["label"]),
        )
        for n in doc["nodes"]
    ]
    es, est = [], []
    for e in doc["edges"]:
        edge = Edge(int(e["src"]), int(e["dst"]), e["kind"], float(e["w"]))
        (es if e["kind"] == SPATIAL else est).append(edge)
    features = None
    rows = [n.get("features") for n in doc["nodes"]]
    if all(r is not None for r in rows) and rows:
        names = doc.get("meta", {}).get(
            "feature_names", [f"f{i}" for i in range(len(rows[0]))]
        )
        order = np.argsort([n["id"] for n in doc["nodes"]])
        features = FeatureMatrix(values=np.asarray(rows, dtype=np.float64)[order], names=list(names))
    meta = {k: v for k, v in doc.get("meta", {}).items() if k != "feature_names"}
    return StGraph(nodes, es, est, features=features, meta=meta)


def _to_graphml(g: StGraph) -> bytes:
    root = ET.Element("graphml", xmlns="http://graphml.graphdrawing.org/xmlns")
    for kid, name, target, typ in (
        ("d0", "t", "node", "int"),
        ("d1", "pixel_count", "node", "int"),
        ("d2", "label", "node", "int"),
        ("d3", "kind", "edge", "string"),
        ("d4", "weight", "edge", "double"),
    ):
        ET.SubElement(root, "key", id=kid, attrib={"for": target, "attr.name": name, "attr.type": typ})
    graph = ET.SubElement(root, "graph", id="G", edgedefault="directed")
    for n in g.nodes:
        el = ET.SubElement(graph, "node", id=f"n{n.id}")
        ET.SubElement(el, "data", key="d0").text = str(n.t)
        ET.SubElement(el, "data", key="d1").text = str(n.pixel_count)
        if n.label is not None:
            ET.SubElement(el, "data", key="d2").text = str(n.label)
    for e in list(g.edges_spatial) + list(g.edges_st):
        el = ET.SubElement(graph, "edge", source=f"n{e.src}", target=f"n{e.dst}")
        ET.SubElement(el, "data", key="d3").text = e.kind
        ET.SubElement(el, "data", key="d4").text = repr(e.weight)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def _to_dot(g: StGraph) -> str:
    # spatial edges solid, spatio-temporal dashed; node size tracks pixel count
    max_px = max((n.pixel_count for n in g.nodes), default=1)
    lines = ["digraph stgraph {"]
    for n in g.nodes:
        size = 0.2 + 0.8 * n.pixel_count / max_px
        label = f"{n.id} (t={n.t})"
        lines.append(
            f'  n{n.id} [label="{escape(label)}", width={size:.3f}, height={size:.3f}, fixedsize=true];'
        )
    for e in g.edges_spatial:
        lines.append(f'  n{e.src} -> n{e.dst} [dir=none, style=solid, weight_attr="{e.weight:g}"];')
    for e in g.edges_st:
        lines.append(f'  n{e.src} -> n{e.dst} [style=dashed, weight_attr="{e.weight:g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
