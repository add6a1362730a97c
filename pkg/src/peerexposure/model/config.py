from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import InputError

HEADS = ("tarnet", "cfr")
EXPOSURES = ("egonet", "fraction", "motif")


@dataclass(frozen=True)
class TrainConfig:
    """Architecture, loss weights and optimisation schedule.

    ``lambda_l1`` multiplies the L1 norm of the feature- and exposure-mapping
    weights; with ``l1_reduction="mean"`` the norm is divided by the number of
    penalised entries so the penalty does not scale with model width.
    A nonempty ``lr_gnn_grid`` makes :func:`fit_tuned` train once per GNN
    learning rate and keep the run with the lowest held-out factual loss.
    """

    head: str = "tarnet"
    exposure: str = "egonet"
    lr_gnn: float = 0.02
    lr_gnn_grid: tuple[float, ...] = ()
    lr_head: float = 0.01
    weight_decay: float = 1e-5
    lambda_bal: float = 0.01
    lambda_cov: float = 1.0
    lambda_ent: float = 0.1
    lambda_sp: float = 0.1
    lambda_l1: float = 1.0
    l1_reduction: str = "mean"
    epochs: int = 100
    lr_decay_epoch: int = 50
    holdout_frac: float = 0.2
    checkpoint_every: int = 2
    d_e: int = 3
    l_feat: int = 1
    l_ego: int = 1
    hidden: int = 32
    feat_dim: int = 16
    mask_dim: int = 32
    emb_dim: int = 32
    use_mask: bool = True
    use_feat_encoder: bool = True
    motif_normalize: bool = True
    sinkhorn_eps: float = 0.1
    sinkhorn_iters: int = 50
    ipm_max_samples: int = 256
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lr_gnn_grid", tuple(float(v) for v in self.lr_gnn_grid))
        if self.head not in HEADS:
            raise InputError(f"head must be one of {HEADS}, got {self.head!r}")
        if self.exposure not in EXPOSURES:
            raise InputError(f"exposure must be one of {EXPOSURES}, got {self.exposure!r}")
        for name in ("lambda_bal", "lambda_cov", "lambda_ent", "lambda_sp", "lambda_l1"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be >= 0")
        if not 0.0 < self.holdout_frac < 1.0:
            raise InputError("holdout_frac must lie in (0, 1)")
        if self.d_e < 1 or self.l_feat < 1 or self.l_ego < 1:
            raise InputError("d_e, l_feat and l_ego must be >= 1")
        if self.checkpoint_every < 1 or self.epochs < 0:
            raise InputError("checkpoint_every must be >= 1 and epochs >= 0")
        if self.l1_reduction not in ("mean", "sum"):
            raise InputError("l1_reduction must be 'mean' or 'sum'")
        if any(v < 0 for v in self.lr_gnn_grid) or self.lr_gnn < 0 or self.lr_head < 0:
            raise InputError("learning rates must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})
