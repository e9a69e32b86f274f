"""Encode-process-decode forecaster for next-frame index prediction.

Per-pixel embeddings (series MLP + positional MLP -> mixing MLP) are pushed
onto the mesh by a grid-to-mesh graph-network block, the processor runs a
configurable number of blocks on the region adjacency graph, a mesh-to-grid
block brings latents back to pixels, and a linear head emits a residual over
the last input frame, clamped to the physical [-1, 1] range. With all
parameters zero the network is exactly the persistence baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..datacube import GeoBounds, day_of_year_fraction
from ..errors import ConfigMismatch, LengthMismatch, MeshMismatch, ShapeMismatch
from ..neural import autograd as ag
from ..neural.autograd import Tensor, no_grad
from ..neural.nn import MLP, Linear
from .mesh import MeshGraph

huber = ag.huber


@dataclass
class ForecastConfig:
    input_len: int = 6
    n_segments: int = 256
    compactness: float = 0.1
    slic_iters: int = 10
    hidden: int = 64
    processor_rounds: int = 4
    lr: float = 1e-4
    epochs: int = 50
    huber_delta: float = 1.0
    seed: int = 0
    mesh_from: str = "last"      # "last" | "stack"
    aggregation: str = "sum"     # "sum" | "mean"

    def __post_init__(self):
        if self.input_len < 1:
            raise ConfigMismatch(f"input_len must be >= 1, got {self.input_len}")
        if self.processor_rounds < 1:
            raise ConfigMismatch(f"processor_rounds must be >= 1, got {self.processor_rounds}")
        if self.hidden < 2 or self.hidden % 2:
            raise ConfigMismatch(f"hidden must be even and >= 2, got {self.hidden}")
        if self.mesh_from not in ("last", "stack"):
            raise ConfigMismatch(f"mesh_from must be 'last' or 'stack', got {self.mesh_from!r}")
        if self.aggregation not in ("sum", "mean"):
            raise ConfigMismatch(f"aggregation must be 'sum' or 'mean', got {self.aggregation!r}")


# ---------------------------------------------------------------------------
# functional pieces


def gn_block(
    x: Tensor,
    e: Tensor,
    src: np.ndarray,
    dst: np.ndarray,
    mlp_e: MLP,
    mlp_v: MLP,
    aggregation: str = "sum",
) -> tuple[Tensor, Tensor]:
    """Residual relational block: e' = e + MLP_e([e, x_src, x_dst]);
    x' = x + MLP_v([x, agg incoming e']). Edge-less nodes aggregate zero."""
    n = x.data.shape[0]
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if e.data.shape[0] != src.shape[0] or src.shape != dst.shape:
        raise ShapeMismatch(
            f"{e.data.shape[0]} edge features for {src.shape[0]} src / {dst.shape[0]} dst"
        )
    if len(src):
        e2 = ag.add(e, mlp_e(ag.concat_cols([e, ag.gather_rows(x, src), ag.gather_rows(x, dst)])))
        agg = ag.scatter_add_rows(e2, dst, n)
        if aggregation == "mean":
            deg = np.bincount(dst, minlength=n).astype(x.data.dtype)
            agg = ag.scale_rows(agg, 1.0 / np.maximum(deg, 1.0))
    else:
        e2 = e
        agg = Tensor(np.zeros((n, e.data.shape[1]), dtype=x.data.dtype))
    x2 = ag.add(x, mlp_v(ag.concat_cols([x, agg])))
    return x2, e2


def pixel_embedding(series: Tensor, pos: Tensor, mlp_ts: MLP, mlp_pos: MLP, mlp_mix: MLP) -> Tensor:
    """Embed each pixel from its value series and positional encoding."""
    a = mlp_ts(series)
    b = mlp_pos(pos)
    return mlp_mix(ag.concat_cols([a, b]))


def pixel_pos_encoding(geo: GeoBounds, h: int, w: int, timestamp: str) -> np.ndarray:
    """(H*W, 4) positional encoding: [sin lat, sin lon, cos lon, sin 2*pi*doy]."""
    lat = geo.lat0 + (np.arange(h) + 0.5) / h * (geo.lat1 - geo.lat0)
    lon = geo.lon0 + (np.arange(w) + 0.5) / w * (geo.lon1 - geo.lon0)
    lat_r = np.radians(np.repeat(lat, w))
    lon_r = np.radians(np.tile(lon, h))
    doy = day_of_year_fraction(timestamp)
    return np.stack(
        [
            np.sin(lat_r),
            np.sin(lon_r),
            np.cos(lon_r),
            np.full(h * w, math.sin(2.0 * math.pi * doy)),
        ],
        axis=1,
    )


def baseline_persistence(window: np.ndarray) -> np.ndarray:
    window = np.asarray(window)
    if window.ndim != 3 or window.shape[0] < 1:
        raise ShapeMismatch(f"window must be (N,H,W), got {window.shape}")
    return window[-1].copy()


def baseline_average(window: np.ndarray) -> np.ndarray:
    window = np.asarray(window)
    if window.ndim != 3 or window.shape[0] < 1:
        raise ShapeMismatch(f"window must be (N,H,W), got {window.shape}")
    return window.mean(axis=0)


# ---------------------------------------------------------------------------
# model


class _Block:
    def __init__(self, rng, hidden: int, dtype, zero: bool):
        # zero output layers: blocks start as identities, so an untrained
        # network stays at the persistence point instead of saturating the
        # output clamp
        self.mlp_e = MLP(rng, [3 * hidden, hidden, hidden], dtype=dtype, zero=zero, zero_last=True)
        self.mlp_v = MLP(rng, [2 * hidden, hidden, hidden], dtype=dtype, zero=zero, zero_last=True)

    def __call__(self, x, e, src, dst, aggregation):
        return gn_block(x, e, src, dst, self.mlp_e, self.mlp_v, aggregation)

    def parameters(self):
        return self.mlp_e.parameters() + self.mlp_v.parameters()


class Forecaster:
    def __init__(self, cfg: ForecastConfig, dtype=np.float32, zero: bool = False):
        self.cfg = cfg
        self.dtype = dtype
        rng = np.random.default_rng(cfg.seed)
        h = cfg.hidden
        half = h // 2
        self.mlp_ts = MLP(rng, [cfg.input_len, half, half], dtype=dtype, zero=zero)
        self.mlp_pos = MLP(rng, [4, half, half], dtype=dtype, zero=zero)
        self.mlp_mix = MLP(rng, [h, h, h], dtype=dtype, zero=zero)
        self.enc_g2m = Linear(rng, 2, h, dtype=dtype, zero=zero)
        self.enc_proc = Linear(rng, 2, h, dtype=dtype, zero=zero)
        self.enc_m2g = Linear(rng, 2, h, dtype=dtype, zero=zero)
        self.block_g2m = _Block(rng, h, dtype, zero)
        self.blocks_proc = [_Block(rng, h, dtype, zero) for _ in range(cfg.processor_rounds)]
        self.block_m2g = _Block(rng, h, dtype, zero)
        self.head = Linear(rng, h, 1, dtype=dtype, zero=True)  # residual head starts at zero

    def parameters(self):
        out = (
            self.mlp_ts.parameters()
            + self.mlp_pos.parameters()
            + self.mlp_mix.parameters()
            + self.enc_g2m.parameters()
            + self.enc_proc.parameters()
            + self.enc_m2g.parameters()
            + self.block_g2m.parameters()
        )
        for b in self.blocks_proc:
            out += b.parameters()
        out += self.block_m2g.parameters() + self.head.parameters()
        return out

    def zero_(self):
        for p in self.parameters():
            p.data[...] = 0

    def forward(self, window: np.ndarray, mesh: MeshGraph, pos: np.ndarray) -> Tensor:
        """Flat (H*W, 1) prediction tensor for one window."""
        window = np.asarray(window, dtype=self.dtype)
        if window.ndim != 3:
            raise ShapeMismatch(f"window must be (N,H,W), got {window.shape}")
        n, h, w = window.shape
        if n != self.cfg.input_len:
            raise LengthMismatch(f"window holds {n} frames, model expects {self.cfg.input_len}")
        if mesh.shape != (h, w):
            raise MeshMismatch(f"mesh over {mesh.shape} for frames of {(h, w)}")
        p = h * w
        m = mesh.n_regions
        agg = self.cfg.aggregation

        series = Tensor(window.reshape(n, p).T.astype(self.dtype))
        pos_t = Tensor(np.asarray(pos, dtype=self.dtype))
        px = pixel_embedding(series, pos_t, self.mlp_ts, self.mlp_pos, self.mlp_mix)

        # encoder: pixels push messages onto zero-initialized mesh nodes
        nodes = ag.concat_rows([px, Tensor(np.zeros((m, self.cfg.hidden), dtype=self.dtype))])
        e_g2m = self.enc_g2m(Tensor(mesh.g2m_feat.astype(self.dtype)))
        nodes, _ = self.block_g2m(nodes, e_g2m, mesh.g2m_src, mesh.g2m_dst + p, agg)
        px_latent = ag.slice_rows(nodes, 0, p)
        mesh_latent = ag.slice_rows(nodes, p, p + m)

        # processor on the region adjacency graph
        e_proc = self.enc_proc(Tensor(mesh.proc_feat.astype(self.dtype)))
        for block in self.blocks_proc:
            mesh_latent, e_proc = block(mesh_latent, e_proc, mesh.proc_src, mesh.proc_dst, agg)

        # decoder: 3 nearest mesh nodes per pixel
        nodes = ag.concat_rows([mesh_latent, px_latent])
        e_m2g = self.enc_m2g(Tensor(mesh.m2g_feat.astype(self.dtype)))
        nodes, _ = self.block_m2g(nodes, e_m2g, mesh.m2g_src, mesh.m2g_dst + m, agg)
        px_out = ag.slice_rows(nodes, m, m + p)

        delta = self.head(px_out)
        last = Tensor(window[-1].reshape(p, 1))
        return ag.clamp(ag.add(last, delta), -1.0, 1.0)

    def predict(self, window: np.ndarray, mesh: MeshGraph, pos: np.ndarray) -> np.ndarray:
        with no_grad():
            out = self.forward(window, mesh, pos)
        h, w = mesh.shape
        return out.data.reshape(h, w).astype(np.float32)
