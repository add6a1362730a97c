"""Forward pass of the ego-network exposure model.

All ego networks of a graph are processed at once. A *pair* ``(i, j)`` is a
peer ``j`` inside the ego network of ``i`` (one per directed edge); a
*message* ``(i, k -> j)`` flows along the peer edge ``(j, k)`` inside the
ego network of ``i`` (six per triangle of the parent graph). Aggregations
are segment sums, so every representation is invariant to peer ordering.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..graph import AttributedGraph, triangles
from .config import TrainConfig

Params = dict[str, Tensor]


@dataclass(frozen=True)
class EgoIndex:
    n: int
    pair_ego: np.ndarray
    pair_peer: np.ndarray
    pair_edge: np.ndarray
    msg_dst: np.ndarray
    msg_src: np.ndarray
    msg_edge: np.ndarray
    node_attrs: np.ndarray
    edge_attrs: np.ndarray

    @property
    def num_pairs(self) -> int:
        return len(self.pair_ego)

    @property
    def fx(self) -> int:
        return self.node_attrs.shape[1]

    @property
    def fz(self) -> int:
        return self.edge_attrs.shape[1]


def build_index(g: AttributedGraph) -> EgoIndex:
    n, e = g.n, g.edges
    eid = np.arange(len(e))
    ego = np.concatenate([e[:, 0], e[:, 1]])
    peer = np.concatenate([e[:, 1], e[:, 0]])
    edge = np.concatenate([eid, eid])
    order = np.lexsort((peer, ego))
    ego, peer, edge = ego[order], peer[order], edge[order]
    pair_keys = ego * n + peer
    edge_keys = e[:, 0] * n + e[:, 1]

    tri = triangles(g)
    dst, src, medge = [], [], []
    for a, b, c in ((0, 1, 2), (1, 0, 2), (2, 0, 1)):
        i, j, k = tri[:, a], tri[:, b], tri[:, c]
        jk = np.searchsorted(edge_keys, np.minimum(j, k) * n + np.maximum(j, k))
        pij = np.searchsorted(pair_keys, i * n + j)
        pik = np.searchsorted(pair_keys, i * n + k)
        dst += [pij, pik]
        src += [pik, pij]
        medge += [jk, jk]
    dst_a = np.concatenate(dst).astype(np.int64) if dst else np.zeros(0, np.int64)
    src_a = np.concatenate(src).astype(np.int64) if src else np.zeros(0, np.int64)
    medge_a = np.concatenate(medge).astype(np.int64) if medge else np.zeros(0, np.int64)
    morder = np.lexsort((src_a, dst_a))
    return EgoIndex(
        n=n,
        pair_ego=ego,
        pair_peer=peer,
        pair_edge=edge,
        msg_dst=dst_a[morder],
        msg_src=src_a[morder],
        msg_edge=medge_a[morder],
        node_attrs=np.asarray(g.node_attrs),
        edge_attrs=np.asarray(g.edge_attrs),
    )


# -- parameters ------------------------------------------------------------


def _mlp_shapes(prefix: str, d_in: int, d_hidden: int, d_out: int) -> dict[str, tuple[int, ...]]:
    return {
        f"{prefix}.w1": (d_in, d_hidden),
        f"{prefix}.b1": (d_hidden,),
        f"{prefix}.w2": (d_hidden, d_out),
        f"{prefix}.b2": (d_out,),
    }


def context_dim(cfg: TrainConfig) -> int:
    return 2 * cfg.feat_dim


def exposure_dim(cfg: TrainConfig) -> int:
    if cfg.exposure == "fraction":
        return 1
    if cfg.exposure == "motif":
        return 12
    return 2 * cfg.d_e


def agg_dim(cfg: TrainConfig, fz: int) -> int:
    cp = cfg.feat_dim if cfg.use_feat_encoder else 0
    msg = 1 + fz + cp + fz
    return fz + cp + msg


def param_shapes(cfg: TrainConfig, fx: int, fz: int) -> dict[str, tuple[int, ...]]:
    h, f = cfg.hidden, cfg.feat_dim
    shapes: dict[str, tuple[int, ...]] = {}
    shapes.update(_mlp_shapes("theta0", fx, h, f))
    shapes.update(_mlp_shapes("theta1", fx + fz, h, f))
    for layer in range(2, cfg.l_feat + 1):
        shapes.update(_mlp_shapes(f"theta{layer}", f, h, f))
    c = context_dim(cfg)
    if cfg.exposure == "egonet":
        if cfg.use_feat_encoder:
            shapes.update(_mlp_shapes("feat", 2 * c, h, f))
        a = agg_dim(cfg, fz)
        shapes["mask.w"] = (a, cfg.mask_dim)
        shapes["agg.w"] = (a, cfg.mask_dim)
        shapes["agg.b"] = (cfg.mask_dim,)
        shapes.update(_mlp_shapes("enc", cfg.mask_dim, h, h))
        shapes.update(_mlp_shapes("exp", h, h, cfg.d_e))
    r = exposure_dim(cfg)
    if cfg.head == "tarnet":
        shapes.update(_mlp_shapes("emb", c, h, cfg.emb_dim))
        e = cfg.emb_dim + r
    else:
        shapes.update(_mlp_shapes("emb", c + r, h, cfg.emb_dim))
        shapes.update(_mlp_shapes("dec", cfg.emb_dim, h, c + r))
        e = cfg.emb_dim
    shapes.update(_mlp_shapes("y0", e, h, 1))
    shapes.update(_mlp_shapes("y1", e, h, 1))
    return shapes


HEAD_PREFIXES = ("emb.", "dec.", "y0.", "y1.")


def is_head_param(name: str) -> bool:
    return name.startswith(HEAD_PREFIXES)


def init_params(cfg: TrainConfig, fx: int, fz: int, seed: int | None = None) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights; the mask logits start at 0."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed if seed is None else seed, 30]))
    shapes = param_shapes(cfg, fx, fz)
    out = {}
    for name, shape in shapes.items():
        if name == "mask.w":
            out[name] = np.zeros(shape)
            continue
        # a bias shares the fan-in of its weight matrix ("x.b1" <- "x.w1")
        weight = shape if len(shape) == 2 else shapes[name.replace(".b", ".w")]
        bound = np.sqrt(1.0 / max(weight[0], 1))
        out[name] = rng.uniform(-bound, bound, size=shape)
    return out


# -- building blocks -------------------------------------------------------


def tile_rows(v: Tensor, rows: int) -> Tensor:
    """Repeat a 1-d tensor ``rows`` times (explicit tiling via a ones matmul)."""
    return ad.matmul(ad.constant(np.ones((rows, 1))), ad.reshape(v, (1, v.shape[0])))


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ad.matmul(x, w) + tile_rows(b, x.shape[0])


def mlp(p: Params, prefix: str, x: Tensor) -> Tensor:
    h = ad.relu(linear(x, p[f"{prefix}.w1"], p[f"{prefix}.b1"]))
    return linear(h, p[f"{prefix}.w2"], p[f"{prefix}.b2"])


def feature_map(p: Params, idx: EgoIndex, cfg: TrainConfig) -> Tensor:
    """Context vectors ``c_i = theta0(X_i) || h_i^L``.

    Layer one aggregates edge-level messages ``theta1(X_j || Z_ij)``; later
    layers add ``sum_j theta_l(h_j)`` on top of the node state.
    """
    x = ad.constant(idx.node_attrs)
    own = mlp(p, "theta0", x)
    msg0 = ad.constant(np.concatenate([idx.node_attrs[idx.pair_peer], idx.edge_attrs[idx.pair_edge]], axis=1))
    h = ad.segment_sum(mlp(p, "theta1", msg0), idx.pair_ego, idx.n)
    for layer in range(2, cfg.l_feat + 1):
        h = h + ad.segment_sum(mlp(p, f"theta{layer}", ad.gather(h, idx.pair_peer)), idx.pair_ego, idx.n)
    return ad.concat([own, h])


def feature_encode(p: Params, c_i: Tensor, c_j: Tensor) -> Tensor:
    """``c_ij = theta_feat(c_j || (c_i - c_j)^2)`` row by row."""
    return mlp(p, "feat", ad.concat([c_j, ad.square(c_i - c_j)]))


def ego_aggregate(idx: EgoIndex, c_pair: Tensor | None, t: np.ndarray, layers: int = 1) -> Tensor:
    """Per-pair ``h_agg = Xbar_j || c_ij || h_j^L`` from peer-edge message passing."""
    t = np.asarray(t, dtype=np.float64)
    z = idx.edge_attrs
    src_pair = idx.msg_src
    parts = [ad.constant(t[idx.pair_peer[src_pair]][:, None]), ad.constant(z[idx.pair_edge[src_pair]])]
    if c_pair is not None:
        parts.append(ad.gather(c_pair, src_pair))
    parts.append(ad.constant(z[idx.msg_edge]))
    h = ad.segment_sum(ad.concat(parts), idx.msg_dst, idx.num_pairs)
    for _ in range(2, layers + 1):
        h = h + ad.segment_sum(ad.gather(h, idx.msg_src), idx.msg_dst, idx.num_pairs)
    head = [ad.constant(z[idx.pair_edge])]
    if c_pair is not None:
        head.append(c_pair)
    return ad.concat(head + [h])


def mask_layer(p: Params, h_agg: Tensor, use_mask: bool = True) -> Tensor:
    w = p["agg.w"]
    if use_mask:
        w = ad.sigmoid(p["mask.w"]) * w
    return ad.relu(linear(h_agg, w, p["agg.b"]))


def exposure_encode(p: Params, h_mask: Tensor) -> Tensor:
    inner = ad.log1p(ad.relu(mlp(p, "enc", h_mask)))
    return ad.relu(mlp(p, "exp", inner))


def readout(idx: EgoIndex, h_exp: Tensor, t: np.ndarray) -> Tensor:
    """``rho_i = [sum t_j h_j / sum h_j] || [1 - exp(-sum t_j h_j)]`` per coordinate.

    A ratio coordinate whose denominator is zero is defined as 0.
    """
    t = np.asarray(t, dtype=np.float64)
    d = h_exp.shape[1]
    treated = np.repeat(t[idx.pair_peer][:, None], d, axis=1)
    num = ad.segment_sum(h_exp * ad.constant(treated), idx.pair_ego, idx.n)
    den = ad.segment_sum(h_exp, idx.pair_ego, idx.n)
    empty = (den.data <= 0).astype(np.float64)
    ratio = num / (den + ad.constant(empty))
    return ad.concat([ratio, 1.0 - ad.exp(-num)])


@dataclass
class Embeddings:
    """Treatment-independent pieces of a forward pass, shared by both branches."""

    c: Tensor
    c_pair: Tensor | None


def embed(p: Params, idx: EgoIndex, cfg: TrainConfig) -> Embeddings:
    c = feature_map(p, idx, cfg)
    c_pair = None
    if cfg.exposure == "egonet" and cfg.use_feat_encoder:
        c_pair = feature_encode(p, ad.gather(c, idx.pair_ego), ad.gather(c, idx.pair_peer))
    return Embeddings(c, c_pair)


def exposure(p: Params, idx: EgoIndex, emb: Embeddings, t: np.ndarray, cfg: TrainConfig) -> Tensor:
    h_agg = ego_aggregate(idx, emb.c_pair, t, cfg.l_ego)
    h_exp = exposure_encode(p, mask_layer(p, h_agg, cfg.use_mask))
    return readout(idx, h_exp, t)


@dataclass
class HeadOutput:
    y0: Tensor
    y1: Tensor
    h_emb: Tensor
    h_out: Tensor | None
    recon_target: Tensor | None

    def factual(self, t: np.ndarray) -> Tensor:
        tt = ad.constant(np.asarray(t, dtype=np.float64)[:, None])
        return self.y1 * tt + self.y0 * (1.0 - tt)


def predict_outcomes(p: Params, c: Tensor, rho: Tensor, head: str) -> HeadOutput:
    if head == "tarnet":
        h_emb = ad.concat([mlp(p, "emb", c), rho])
        h_out = target = None
    else:
        target = ad.concat([c, rho])
        h_emb = mlp(p, "emb", target)
        h_out = mlp(p, "dec", h_emb)
    return HeadOutput(mlp(p, "y0", h_emb), mlp(p, "y1", h_emb), h_emb, h_out, target)
