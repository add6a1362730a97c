"""Finite-difference validation of every autodiff primitive and of the model's composite graphs.

Each case builds a scalar function of named float64 arrays. Its tape
gradient is compared with central differences (step 1e-5). Draws that put a
non-differentiable point (relu/abs at zero, tied max/min) within
``kink_margin`` of an input are redrawn, since finite differences straddling
a kink do not estimate the one-sided derivative the tape reports.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor, finite_difference, relative_error
from .errors import InputError, NumericError
from .graph import AttributedGraph
from .model.config import TrainConfig
from .model.losses import loss_total, sinkhorn_divergence
from .model.network import (
    build_index,
    ego_aggregate,
    embed,
    exposure_encode,
    feature_map,
    init_params,
    mask_layer,
    predict_outcomes,
    readout,
)
from .model.training import ModelInputs, forward, loss_parts

STEP = 1e-5
TOLERANCE = 1e-4

Builder = Callable[[dict[str, Tensor]], Tensor]


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    num_params: int
    seconds: float
    draws: int = 1

    def ok(self, tol: float = TOLERANCE) -> bool:
        return bool(np.isfinite(self.max_rel_error)) and self.max_rel_error < tol


def _near_tie(x: np.ndarray) -> float:
    """Gap between each column maximum and the nearest smaller distinct entry.

    Exactly equal entries are structural (e.g. several nodes with no treated
    peers all at 0) and move together, so they are not counted as ties.
    """
    dist = np.inf
    for col in x.T:
        top = col.max()
        below = col[col < top]
        if below.size:
            dist = min(dist, float(top - below.max()))
    return dist


def _kink_distance(tape: Tape) -> float:
    """Smallest distance from any recorded input to a kink of its primitive."""
    dist = np.inf
    for node in tape.nodes:
        x = node.inputs[0].data
        if node.op in ("relu", "abs") and x.size:
            dist = min(dist, float(np.abs(x).min()))
        elif node.op in ("max", "min") and x.ndim == 2 and x.shape[0] > 1:
            dist = min(dist, _near_tie(x if node.op == "max" else -x))
    return dist


def check_function(
    name: str,
    draw: Callable[[np.random.Generator], tuple[dict[str, np.ndarray], Builder]],
    seed: int = 0,
    kink_margin: float = 1e-4,
    max_draws: int = 50,
) -> CheckResult:
    """Compare tape and finite-difference gradients for ``draw``'s function."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    for attempt in range(1, max_draws + 1):
        params, build = draw(rng)
        tape = Tape()
        leaves = {k: tape.param(v.copy(), k) for k, v in params.items()}
        loss = build(leaves)
        if _kink_distance(tape) < kink_margin:
            continue
        grads = tape.backward(loss)

        def value(ps):
            return float(build({k: ad.constant(v) for k, v in ps.items()}).data)

        numeric = finite_difference(value, {k: v.copy() for k, v in params.items()}, STEP)
        err = max(relative_error(grads[leaves[k]], numeric[k]) for k in params)
        # relative error of the concatenated gradient as a whole
        a = np.concatenate([grads[leaves[k]].ravel() for k in params])
        n = np.concatenate([numeric[k].ravel() for k in params])
        err = max(err, relative_error(a, n))
        size = int(sum(v.size for v in params.values()))
        return CheckResult(name, err, size, time.perf_counter() - start, attempt)
    raise NumericError(f"{name}: every draw landed within {kink_margin} of a kink")


# -- primitive cases -------------------------------------------------------


def _project(out: Tensor, rng_weights: np.ndarray) -> Tensor:
    """Scalarize with fixed random weights so every output entry matters."""
    if out.shape == ():
        return out * float(rng_weights.ravel()[0])
    return ad.sum_(out * ad.constant(rng_weights.reshape(out.shape)))


def _unary(op, shape=(3, 4), low=-2.0, high=2.0):
    def draw(rng):
        x = rng.uniform(low, high, size=shape)
        w = rng.normal(size=64)
        return {"x": x}, lambda p: _project(op(p["x"]), np.resize(w, op(ad.constant(x)).shape or (1,)))

    return draw


def _binary(op, sa=(3, 4), sb=(3, 4), low=-2.0, high=2.0, b_low=None):
    def draw(rng):
        a = rng.uniform(low, high, size=sa)
        b = rng.uniform(b_low if b_low is not None else low, high, size=sb)
        w = rng.normal(size=64)
        shape = op(ad.constant(a), ad.constant(b)).shape
        return {"a": a, "b": b}, lambda p: _project(op(p["a"], p["b"]), np.resize(w, shape or (1,)))

    return draw


def _segment_case(rng):
    x = rng.normal(size=(7, 3))
    ids = rng.integers(0, 4, size=7)
    w = rng.normal(size=(4, 3))
    return {"x": x}, lambda p: _project(ad.segment_sum(p["x"], ids, 4), w)


def _gather_case(rng):
    x = rng.normal(size=(5, 3))
    idx = rng.integers(0, 5, size=9)
    w = rng.normal(size=(9, 3))
    return {"x": x}, lambda p: _project(ad.gather(p["x"], idx), w)


def _ot_case(rng):
    x = rng.normal(size=(5, 3))
    y = rng.normal(size=(4, 3)) + 0.5
    return {"x": x, "y": y}, lambda p: ad.entropic_ot(p["x"], p["y"], 1.0, 500)


def _sinkhorn_div_case(rng):
    x = rng.normal(size=(4, 2))
    y = rng.normal(size=(6, 2))
    return {"x": x, "y": y}, lambda p: sinkhorn_divergence(p["x"], p["y"], 1.0, 300)


PRIMITIVES: dict[str, Callable] = {
    "add": _binary(ad.add),
    "add_scalar": _binary(ad.add, sb=()),
    "sub": _binary(ad.sub),
    "sub_scalar": _binary(ad.sub, sa=()),
    "neg": _unary(ad.neg),
    "mul": _binary(ad.mul),
    "mul_scalar": _binary(ad.mul, sa=()),
    "div": _binary(ad.div, b_low=0.5),
    "div_scalar": _binary(ad.div, sb=(), b_low=0.5),
    "matmul": _binary(ad.matmul, sa=(3, 4), sb=(4, 2)),
    "transpose": _unary(ad.transpose),
    "reshape": _unary(lambda a: ad.reshape(a, (2, 6))),
    "concat": _binary(lambda a, b: ad.concat([a, b]), sa=(3, 2), sb=(3, 4)),
    "relu": _unary(ad.relu),
    "sigmoid": _unary(ad.sigmoid, low=-6, high=6),
    "exp": _unary(ad.exp),
    "log": _unary(ad.log, low=0.1, high=3.0),
    "log1p": _unary(ad.log1p, low=-0.5, high=3.0),
    "square": _unary(ad.square),
    "abs": _unary(ad.abs_),
    "clamp": _unary(lambda a: ad.clamp(a, -1.0, 1.0), low=-0.9, high=0.9),
    "sum": _unary(ad.sum_),
    "sum_axis0": _unary(lambda a: ad.sum_(a, axis=0)),
    "sum_axis1": _unary(lambda a: ad.sum_(a, axis=1)),
    "mean": _unary(ad.mean),
    "mean_axis0": _unary(lambda a: ad.mean(a, axis=0)),
    "max": _unary(lambda a: ad.max_(a, axis=0)),
    "min": _unary(lambda a: ad.min_(a, axis=1)),
    "segment_sum": _segment_case,
    "gather": _gather_case,
    "entropic_ot": _ot_case,
    "sinkhorn_divergence": _sinkhorn_div_case,
}


# -- composite cases -------------------------------------------------------


SMALL = TrainConfig(
    hidden=5,
    feat_dim=3,
    mask_dim=4,
    emb_dim=3,
    d_e=2,
    lambda_bal=0.5,
    sinkhorn_eps=1.0,
    sinkhorn_iters=60,
)


def random_graph(rng: np.random.Generator, n: int = 12, p: float = 0.35, fx: int = 3, fz: int = 1) -> AttributedGraph:
    """Erdos-Renyi graph with one forced isolated node and at least one triangle."""
    pairs = [(u, v) for u in range(n - 1) for v in range(u + 1, n - 1) if rng.random() < p]
    pairs = sorted(set(pairs) | {(0, 1), (0, 2), (1, 2)})
    return AttributedGraph(
        n,
        np.array(pairs),
        rng.normal(size=(n, fx)),
        rng.uniform(0.1, 1.0, size=(len(pairs), fz)),
    )


def _random_params(cfg: TrainConfig, g: AttributedGraph, rng) -> dict[str, np.ndarray]:
    params = init_params(cfg, g.fx, g.fz, seed=int(rng.integers(1 << 31)))
    params = {k: v + rng.normal(scale=0.1, size=v.shape) for k, v in params.items()}
    params["mask.w"] = rng.normal(size=params["mask.w"].shape)
    return params


def _feature_case(rng):
    g = random_graph(rng, n=7, p=0.5)
    cfg = replace(SMALL, l_feat=2)
    idx = build_index(g)
    params = _random_params(cfg, g, rng)
    keep = {k: v for k, v in params.items() if k.startswith(("theta", "feat"))}
    w = rng.normal(size=(idx.num_pairs, cfg.feat_dim))

    def build(p):
        emb = embed(p, idx, cfg)
        return _project(emb.c_pair, w) + ad.sum_(ad.square(emb.c)) * 0.1

    return keep, build


def _exposure_case(rng):
    g = random_graph(rng, n=7, p=0.5)
    cfg = replace(SMALL, l_ego=2)
    idx = build_index(g)
    t = rng.integers(0, 2, size=g.n)
    params = _random_params(cfg, g, rng)
    keep = {k: v for k, v in params.items() if k.startswith(("mask", "agg", "enc", "exp"))}
    c_pair = rng.normal(size=(idx.num_pairs, cfg.feat_dim))
    w = rng.normal(size=(g.n, 2 * cfg.d_e))

    def build(p):
        h = ego_aggregate(idx, ad.constant(c_pair), t, cfg.l_ego)
        rho = readout(idx, exposure_encode(p, mask_layer(p, h, True)), t)
        return _project(rho, w)

    return keep, build


def _head_case(head):
    def draw(rng):
        g = random_graph(rng, n=7, p=0.5)
        cfg = replace(SMALL, head=head)
        idx = build_index(g)
        t = rng.integers(0, 2, size=g.n)
        params = _random_params(cfg, g, rng)
        rho = rng.uniform(size=(g.n, 2 * cfg.d_e))
        keep = {k: v for k, v in params.items() if k.startswith(("theta", "emb", "dec", "y0", "y1"))}

        def build(p):
            out = predict_outcomes(p, feature_map(p, idx, cfg), ad.constant(rho), head)
            loss = ad.sum_(ad.square(out.factual(t)))
            if out.h_out is not None:
                loss = loss + ad.sum_(ad.square(out.h_out - out.recon_target))
            return loss

        return keep, build

    return draw


def _end_to_end(head: str):
    def draw(rng):
        g = random_graph(rng)
        cfg = replace(SMALL, head=head)
        t = rng.integers(0, 2, size=g.n)
        t[:2] = (0, 1)
        y = rng.normal(size=g.n)
        data = ModelInputs(g, build_index(g), t)
        rows = np.arange(g.n)
        params = _random_params(cfg, g, rng)

        def build(p):
            fwd = forward(p, data, cfg)
            return loss_total(loss_parts(p, fwd, y, t, rows, cfg), cfg)

        return params, build

    return draw


COMPOSITES: dict[str, Callable] = {
    "feature_map+feature_encoder": _feature_case,
    "ego_aggregate+mask+encoder+readout": _exposure_case,
    "tarnet_head": _head_case("tarnet"),
    "cfr_head": _head_case("cfr"),
    "total_loss_tarnet_12_nodes": _end_to_end("tarnet"),
    "total_loss_cfr_12_nodes": _end_to_end("cfr"),
}


def run_suite(seed: int = 0, names: list[str] | None = None) -> list[CheckResult]:
    cases = {**PRIMITIVES, **COMPOSITES}
    chosen = names if names is not None else list(cases)
    unknown = [n for n in chosen if n not in cases]
    if unknown:
        raise InputError(f"unknown gradient check case(s) {unknown}; choose from {sorted(cases)}")
    return [check_function(name, cases[name], seed=seed + i) for i, name in enumerate(chosen)]


def format_results(results: list[CheckResult], tol: float = TOLERANCE) -> str:
    width = max(len(r.name) for r in results)
    lines = [
        f"{r.name:<{width}}  max_rel_err={r.max_rel_error:.3e}  params={r.num_params:<5d} "
        f"{'ok' if r.ok(tol) else 'FAIL'}"
        for r in results
    ]
    worst = max(r.max_rel_error for r in results)
    lines.append(f"{'overall':<{width}}  max_rel_err={worst:.3e}  {'ok' if worst < tol else 'FAIL'}")
    return "\n".join(lines)
