"""Ego-network exposure model: forward pass, objectives and training."""
from .config import EXPOSURES, HEADS, TrainConfig
from .losses import (
    LossParts,
    ipm,
    l1_norm,
    loss_balance,
    loss_coverage,
    loss_factual,
    loss_mask,
    loss_total,
    sinkhorn_divergence,
)
from .network import EgoIndex, build_index, embed, exposure, init_params, param_shapes, predict_outcomes
from .training import (
    Inference,
    ModelState,
    fit,
    fit_tuned,
    forward,
    holdout_split,
    infer,
    infer_hpe,
    load_checkpoint,
    loss_parts,
    prepare_inputs,
    save_checkpoint,
)

__all__ = [
    "EXPOSURES",
    "HEADS",
    "EgoIndex",
    "Inference",
    "LossParts",
    "ModelState",
    "TrainConfig",
    "build_index",
    "embed",
    "exposure",
    "fit",
    "fit_tuned",
    "forward",
    "holdout_split",
    "infer",
    "infer_hpe",
    "init_params",
    "ipm",
    "l1_norm",
    "load_checkpoint",
    "loss_balance",
    "loss_coverage",
    "loss_factual",
    "loss_mask",
    "loss_parts",
    "loss_total",
    "param_shapes",
    "predict_outcomes",
    "prepare_inputs",
    "save_checkpoint",
    "sinkhorn_divergence",
]
