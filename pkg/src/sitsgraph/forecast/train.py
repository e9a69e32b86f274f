"""Forecaster training with site-disjoint splits and a plateau schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datacube import GeoBounds
from ..errors import LengthMismatch, NoData, SiteLeakage
from ..neural.autograd import Tape
from ..neural.nn import Adam, PlateauScheduler
from . import model as fm
from .mesh import build_mesh
from .model import ForecastConfig, Forecaster


@dataclass(frozen=True)
class ForecastSample:
    window: np.ndarray      # (N, H, W)
    target: np.ndarray      # (H, W)
    site: str
    geo: GeoBounds
    timestamp: str          # date of the last input frame


def check_site_disjoint(**splits: list[ForecastSample]) -> None:
    names = list(splits)
    sites = {k: {s.site for s in v} for k, v in splits.items()}
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            shared = sites[a] & sites[b]
            if shared:
                raise SiteLeakage(f"sites {sorted(shared)} appear in both {a!r} and {b!r}")


def make_site_splits(
    samples: list[ForecastSample],
    seed: int,
    test_frac: float = 0.15,
    val_frac: float = 0.15,
) -> tuple[list[ForecastSample], list[ForecastSample], list[ForecastSample]]:
    """Split by site id (train/val/test all site-disjoint); the test share of
    sites comes off first, then the validation share of the remainder."""
    sites = sorted({s.site for s in samples})
    if len(sites) < 3:
        raise NoData(f"need at least 3 distinct sites to split, got {len(sites)}")
    rng = np.random.default_rng(seed)
    order = [sites[i] for i in rng.permutation(len(sites))]
    n_test = max(1, round(test_frac * len(sites)))
    n_val = max(1, round(val_frac * (len(sites) - n_test)))
    test_sites = set(order[:n_test])
    val_sites = set(order[n_test : n_test + n_val])
    train = [s for s in samples if s.site not in test_sites and s.site not in val_sites]
    val = [s for s in samples if s.site in val_sites]
    test = [s for s in samples if s.site in test_sites]
    check_site_disjoint(train=train, val=val, test=test)
    return train, val, test


def _prepare(samples: list[ForecastSample], cfg: ForecastConfig):
    out = []
    for s in samples:
        if s.window.shape[0] != cfg.input_len:
            raise LengthMismatch(
                f"sample window holds {s.window.shape[0]} frames, config says {cfg.input_len}"
            )
        if cfg.mesh_from == "stack":
            mesh = build_mesh(
                s.window, cfg.n_segments, cfg.compactness, cfg.slic_iters
            )
        else:
            mesh = build_mesh(
                s.window[-1][None], cfg.n_segments, cfg.compactness, cfg.slic_iters
            )
        h, w = s.target.shape
        pos = fm.pixel_pos_encoding(s.geo, h, w, s.timestamp)
        out.append((s, mesh, pos))
    return out


def _eval(model: Forecaster, prepared, delta: float) -> tuple[float, float]:
    """(mean huber loss, rmse over all pixels)."""
    losses = []
    sq = []
    for s, mesh, pos in prepared:
        pred = model.predict(s.window, mesh, pos)
        r = pred.astype(np.float64) - s.target
        absr = np.abs(r)
        quad = absr <= delta
        losses.append(np.where(quad, 0.5 * r * r, delta * (absr - 0.5 * delta)).mean())
        sq.append((r * r).mean())
    return float(np.mean(losses)), float(np.sqrt(np.mean(sq)))


def train_forecaster(
    train: list[ForecastSample],
    val: list[ForecastSample],
    cfg: ForecastConfig,
) -> tuple[dict, list[dict]]:
    """Adam + plateau schedule (lr x0.1 after 5 stale epochs); returns the
    checkpoint of the best-validation-RMSE epoch and the metric log."""
    if not train or not val:
        raise NoData("train and val splits must both be non-empty")
    check_site_disjoint(train=train, val=val)

    prepared_train = _prepare(train, cfg)
    prepared_val = _prepare(val, cfg)

    model = Forecaster(cfg)
    opt = Adam(model.parameters(), lr=cfg.lr)
    sched = PlateauScheduler(opt, factor=0.1, patience=5)
    rng = np.random.default_rng(cfg.seed)

    log: list[dict] = []
    best = (np.inf, 0, None)
    for epoch in range(cfg.epochs):
        for i in rng.permutation(len(prepared_train)):
            s, mesh, pos = prepared_train[i]
            with Tape() as tape:
                out = model.forward(s.window, mesh, pos)
                loss = fm.huber(out, s.target.reshape(-1, 1), delta=cfg.huber_delta)
                tape.backward(loss)
            opt.step()
            opt.zero_grad()
        val_loss, val_rmse = _eval(model, prepared_val, cfg.huber_delta)
        reduced = sched.step(val_loss)
        log.append(
            {"epoch": epoch, "val_loss": val_loss, "val_rmse": val_rmse, "lr": opt.lr, "lr_reduced": reduced}
        )
        if val_rmse < best[0]:
            best = (val_rmse, epoch, [p.data.copy() for p in model.parameters()])

    for p, a in zip(model.parameters(), best[2]):
        p.data = a
    checkpoint = {
        "kind": "forecaster",
        "config": {
            "input_len": cfg.input_len,
            "n_segments": cfg.n_segments,
            "compactness": cfg.compactness,
            "slic_iters": cfg.slic_iters,
            "hidden": cfg.hidden,
            "processor_rounds": cfg.processor_rounds,
            "lr": cfg.lr,
            "epochs": cfg.epochs,
            "huber_delta": cfg.huber_delta,
            "seed": cfg.seed,
            "mesh_from": cfg.mesh_from,
            "aggregation": cfg.aggregation,
        },
        "best_epoch": best[1],
        "best_val_rmse": float(best[0]),
        "state": best[2],
    }
    return checkpoint, log


def forecaster_from_checkpoint(checkpoint: dict) -> Forecaster:
    cfg = ForecastConfig(**checkpoint["config"])
    model = Forecaster(cfg)
    for p, a in zip(model.parameters(), checkpoint["state"]):
        p.data = np.asarray(a, dtype=p.data.dtype).reshape(p.data.shape)
    return model


def predict_next_frame(model: Forecaster, window: np.ndarray, geo: GeoBounds, timestamp: str) -> np.ndarray:
    cfg = model.cfg
    source = window if cfg.mesh_from == "stack" else window[-1][None]
    mesh = build_mesh(source, cfg.n_segments, cfg.compactness, cfg.slic_iters)
    h, w = window.shape[1:]
    pos = fm.pixel_pos_encoding(geo, h, w, timestamp)
    return model.predict(window, mesh, pos)
