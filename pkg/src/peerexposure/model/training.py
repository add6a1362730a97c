"""Full-batch training with held-out checkpoint selection, and peer-effect inference."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..autodiff import AdamState, Tape, Tensor, adam_step
from ..baselines import baseline_exposure
from ..errors import InputError, TrainingError
from ..graph import AttributedGraph
from ..netgen import rng_for
from .config import TrainConfig
from .losses import LossParts, l1_norm, loss_balance, loss_coverage, loss_factual, loss_mask, loss_total
from .network import EgoIndex, HeadOutput, build_index, embed, exposure, init_params, is_head_param, predict_outcomes

log = logging.getLogger(__name__)

_STREAM_SPLIT = 40
_STREAM_IPM = 41


@dataclass
class ModelState:
    params: dict[str, np.ndarray]
    config: TrainConfig
    epoch: int = 0
    heldout_loss: float = float("nan")
    opt_gnn: AdamState = field(default_factory=AdamState)
    opt_head: AdamState = field(default_factory=AdamState)
    history: list[dict] = field(default_factory=list)
    split: str = "transductive"


@dataclass
class ModelInputs:
    """Graph-derived arrays reused across epochs."""

    graph: AttributedGraph
    index: EgoIndex
    t: np.ndarray
    exposure: np.ndarray | None = None
    exposure_cf: np.ndarray | None = None


def prepare_inputs(g: AttributedGraph, t, cfg: TrainConfig, counterfactual: bool = False) -> ModelInputs:
    t = np.asarray(t, dtype=np.int64)
    if t.shape != (g.n,):
        raise InputError(f"treatment vector has shape {t.shape}, expected ({g.n},)")
    inputs = ModelInputs(g, build_index(g), t)
    if cfg.exposure != "egonet":
        inputs.exposure = baseline_exposure(g, t, cfg.exposure, cfg.motif_normalize)
        if counterfactual:
            inputs.exposure_cf = baseline_exposure(g, 1 - t, cfg.exposure, cfg.motif_normalize)
    return inputs


def holdout_split(n: int, frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = rng_for(seed, _STREAM_SPLIT).permutation(n)
    k = min(max(int(round(frac * n)), 1), n - 1) if n > 1 else 0
    return np.sort(perm[k:]), np.sort(perm[:k])


@dataclass
class Forward:
    rho: Tensor
    heads: HeadOutput
    y_hat: Tensor


def forward(p: dict[str, Tensor], data: ModelInputs, cfg: TrainConfig) -> Forward:
    emb = embed(p, data.index, cfg)
    if cfg.exposure == "egonet":
        rho = exposure(p, data.index, emb, data.t, cfg)
    else:
        rho = ad.constant(data.exposure)
    heads = predict_outcomes(p, emb.c, rho, cfg.head)
    return Forward(rho, heads, heads.factual(data.t))


def loss_parts(
    p: dict[str, Tensor],
    fwd: Forward,
    y: np.ndarray,
    t: np.ndarray,
    rows: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
) -> LossParts:
    parts = LossParts(factual=loss_factual(y[rows], ad.gather(fwd.y_hat, rows)))
    h = fwd.heads
    parts.balance = loss_balance(
        ad.gather(h.h_emb, rows),
        ad.gather(h.h_out, rows) if h.h_out is not None else None,
        ad.gather(h.recon_target, rows) if h.recon_target is not None else None,
        t[rows],
        cfg.lambda_bal,
        eps=cfg.sinkhorn_eps,
        iters=cfg.sinkhorn_iters,
        max_samples=cfg.ipm_max_samples,
        rng=rng,
    )
    if cfg.exposure == "egonet":
        if cfg.lambda_cov > 0:
            parts.coverage = loss_coverage(ad.gather(fwd.rho, rows))
        if cfg.use_mask:
            parts.entropy, parts.sparsity = loss_mask(p["mask.w"])
    if cfg.lambda_l1 > 0:
        gnn = {k: v for k, v in p.items() if not is_head_param(k) and k != "mask.w"}
        parts.l1 = l1_norm(gnn, cfg.l1_reduction)
    return parts


def fit(g: AttributedGraph, sim, cfg: TrainConfig | None = None) -> ModelState:
    """Train on factual ``(sim.t, sim.y)``; return the checkpoint with the lowest held-out factual loss.

    Checkpoints are evaluated at epochs ``0, k, 2k, ...`` (``k =
    checkpoint_every``) and after the final update; epoch ``e`` means the
    parameters after ``e`` Adam steps.
    """
    cfg = cfg if cfg is not None else TrainConfig()
    t = np.asarray(sim.t, dtype=np.int64)
    y = np.asarray(sim.y, dtype=np.float64)
    data = prepare_inputs(g, t, cfg)
    train_rows, hold_rows = holdout_split(g.n, cfg.holdout_frac, cfg.seed)
    params = init_params(cfg, g.fx, g.fz)
    opt_gnn, opt_head = AdamState(), AdamState()
    best: ModelState | None = None
    history = []

    for epoch in range(cfg.epochs + 1):
        tape = Tape()
        p = {k: tape.param(v, k) for k, v in params.items()}
        fwd = forward(p, data, cfg)
        parts = loss_parts(p, fwd, y, t, train_rows, cfg, rng_for(cfg.seed, _STREAM_IPM, epoch))
        for name, value in parts.items():
            if not np.all(np.isfinite(value.data)):
                raise TrainingError(f"non-finite {name} loss at epoch {epoch}")
        total = loss_total(parts, cfg)
        record = {"epoch": epoch, "train_loss": float(total.data), "factual": float(parts.factual.data)}

        if epoch % cfg.checkpoint_every == 0 or epoch == cfg.epochs:
            held = float(loss_factual(y[hold_rows], ad.gather(fwd.y_hat, hold_rows)).data)
            record["heldout_loss"] = held
            if best is None or held < best.heldout_loss:
                best = ModelState(
                    {k: v.copy() for k, v in params.items()},
                    cfg,
                    epoch,
                    held,
                    opt_gnn.copy(),
                    opt_head.copy(),
                )
        history.append(record)
        if epoch == cfg.epochs:
            break

        grads = tape.backward(total)
        decay = 0.5 if epoch >= cfg.lr_decay_epoch else 1.0
        named = {k: grads[p[k]] for k in params}
        gnn_names = [k for k in params if not is_head_param(k)]
        head_names = [k for k in params if is_head_param(k)]
        new_gnn, opt_gnn = adam_step(
            {k: params[k] for k in gnn_names}, named, opt_gnn, cfg.lr_gnn * decay, cfg.weight_decay
        )
        new_head, opt_head = adam_step(
            {k: params[k] for k in head_names}, named, opt_head, cfg.lr_head * decay, cfg.weight_decay
        )
        params = {k: (new_gnn[k] if k in new_gnn else new_head[k]) for k in params}

    assert best is not None
    best.history = history
    log.debug("selected epoch %d (held-out loss %.4f)", best.epoch, best.heldout_loss)
    return best


def fit_tuned(g: AttributedGraph, sim, cfg: TrainConfig | None = None) -> ModelState:
    """:func:`fit` once per entry of ``cfg.lr_gnn_grid``; keep the lowest held-out factual loss.

    Falls back to a single fit at ``cfg.lr_gnn`` when the grid is empty. Ties
    go to the earlier grid entry.
    """
    cfg = cfg if cfg is not None else TrainConfig()
    if not cfg.lr_gnn_grid:
        return fit(g, sim, cfg)
    best = None
    for lr in cfg.lr_gnn_grid:
        state = fit(g, sim, replace(cfg, lr_gnn=lr, lr_gnn_grid=()))
        log.debug("lr_gnn=%g: held-out loss %.4f", lr, state.heldout_loss)
        if best is None or state.heldout_loss < best.heldout_loss:
            best = state
    return best


@dataclass
class Inference:
    rho: np.ndarray
    rho_cf: np.ndarray
    y_hat: np.ndarray
    y_hat_cf: np.ndarray

    @property
    def hpe(self) -> np.ndarray:
        return self.y_hat - self.y_hat_cf


def infer(model: ModelState, g: AttributedGraph, t) -> Inference:
    """Factual and peer-flipped predictions; the feature map is computed once for both."""
    cfg = model.config
    data = prepare_inputs(g, t, cfg, counterfactual=True)
    p = {k: ad.constant(v) for k, v in model.params.items()}
    emb = embed(p, data.index, cfg)
    flipped = 1 - data.t
    if cfg.exposure == "egonet":
        rho = exposure(p, data.index, emb, data.t, cfg)
        rho_cf = exposure(p, data.index, emb, flipped, cfg)
    else:
        rho, rho_cf = ad.constant(data.exposure), ad.constant(data.exposure_cf)
    fact = predict_outcomes(p, emb.c, rho, cfg.head).factual(data.t)
    # own treatment stays fixed in the counterfactual branch
    cf = predict_outcomes(p, emb.c, rho_cf, cfg.head).factual(data.t)
    return Inference(rho.data, rho_cf.data, fact.data[:, 0], cf.data[:, 0])


def infer_hpe(model: ModelState, g: AttributedGraph, t) -> np.ndarray:
    return infer(model, g, t).hpe


# -- checkpoints -----------------------------------------------------------


def save_checkpoint(state: ModelState, path: str | Path) -> None:
    arrays = {f"param/{k}": v for k, v in state.params.items()}
    for tag, opt in (("opt_gnn", state.opt_gnn), ("opt_head", state.opt_head)):
        arrays.update({f"{tag}/m/{k}": v for k, v in opt.m.items()})
        arrays.update({f"{tag}/v/{k}": v for k, v in opt.v.items()})
    meta = {
        "format": "peerexposure-checkpoint/1",
        "config": state.config.to_dict(),
        "epoch": state.epoch,
        "heldout_loss": state.heldout_loss,
        "split": state.split,
        "opt_steps": {"opt_gnn": state.opt_gnn.step, "opt_head": state.opt_head.step},
        "shapes": {k: list(v.shape) for k, v in state.params.items()},
        "history": state.history,
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path) -> ModelState:
    with np.load(path) as z:
        if "meta" not in z:
            raise InputError(f"{path}: not a model checkpoint")
        meta = json.loads(bytes(z["meta"]).decode())
        params = {k[len("param/"):]: z[k].copy() for k in z.files if k.startswith("param/")}
        opts = {}
        for tag in ("opt_gnn", "opt_head"):
            m = {k.split("/", 2)[2]: z[k].copy() for k in z.files if k.startswith(f"{tag}/m/")}
            v = {k.split("/", 2)[2]: z[k].copy() for k in z.files if k.startswith(f"{tag}/v/")}
            opts[tag] = AdamState(meta["opt_steps"][tag], m, v)
    for k, shape in meta["shapes"].items():
        if list(params[k].shape) != shape:
            raise InputError(f"{path}: parameter {k} has shape {params[k].shape}, expected {shape}")
    return ModelState(
        params,
        TrainConfig.from_dict(meta["config"]),
        meta["epoch"],
        meta["heldout_loss"],
        opts["opt_gnn"],
        opts["opt_head"],
        meta.get("history", []),
        meta.get("split", "transductive"),
    )
