"""Training objectives: factual, balance (reconstruction + IPM), coverage, mask priors, L1."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import LOG_EPS, Tensor
from .network import tile_rows

log = logging.getLogger(__name__)


def loss_factual(y, y_hat: Tensor) -> Tensor:
    """Mean squared error over units; ``y`` is (n,) and ``y_hat`` (n, 1) or (n,)."""
    y = np.asarray(y, dtype=np.float64)
    pred = y_hat if y_hat.ndim == 1 else ad.reshape(y_hat, (y_hat.shape[0],))
    return ad.mean(ad.square(pred - ad.constant(y)))


def sinkhorn_divergence(x: Tensor, y: Tensor, eps: float, iters: int) -> Tensor:
    """Debiased entropic OT: ``OT(x, y) - OT(x, x)/2 - OT(y, y)/2``.

    Zero for identical point sets and equal to the squared distance for two
    single points, whatever ``eps``.
    """
    return (
        ad.entropic_ot(x, y, eps, iters)
        - 0.5 * ad.entropic_ot(x, x, eps, iters)
        - 0.5 * ad.entropic_ot(y, y, eps, iters)
    )


def ipm(
    h_emb: Tensor,
    t,
    eps: float = 0.1,
    iters: int = 50,
    max_samples: int | None = 256,
    rng: np.random.Generator | None = None,
) -> Tensor:
    t = np.asarray(t)
    treated = np.flatnonzero(t == 1)
    control = np.flatnonzero(t == 0)
    if len(treated) == 0 or len(control) == 0:
        log.warning("IPM skipped: treated or control group is empty")
        return ad.constant(0.0)
    if max_samples is not None:
        rng = rng if rng is not None else np.random.default_rng(0)
        if len(treated) > max_samples:
            treated = np.sort(rng.choice(treated, max_samples, replace=False))
        if len(control) > max_samples:
            control = np.sort(rng.choice(control, max_samples, replace=False))
    return sinkhorn_divergence(ad.gather(h_emb, treated), ad.gather(h_emb, control), eps, iters)


def loss_balance(
    h_emb: Tensor,
    h_out: Tensor | None,
    inputs: Tensor | None,
    t,
    lambda_bal: float,
    *,
    eps: float = 0.1,
    iters: int = 50,
    max_samples: int | None = 256,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """``1[lambda>0] * reconstruction + lambda * IPM(treated, control)``.

    Reconstruction (mean squared norm of ``h_out - inputs`` per unit) only
    exists for the CFR head; pass ``h_out=None`` for TARNet.
    """
    if lambda_bal <= 0:
        return ad.constant(0.0)
    total = lambda_bal * ipm(h_emb, t, eps, iters, max_samples, rng)
    if h_out is not None and inputs is not None:
        total = total + ad.mean(ad.sum_(ad.square(h_out - inputs), axis=1))
    return total


def loss_coverage(rho: Tensor) -> Tensor:
    """Distance of each coordinate's mean/variance/range from those of Uniform(0, 1).

    Population variance; averaged over coordinates. Zero (with a warning)
    for batches of fewer than two units.
    """
    n = rho.shape[0]
    if n < 2:
        log.warning("coverage loss needs at least two units; returning 0")
        return ad.constant(0.0)
    mu = ad.mean(rho, axis=0)
    var = ad.mean(ad.square(rho - tile_rows(mu, n)), axis=0)
    rng_ = ad.max_(rho, axis=0) - ad.min_(rho, axis=0)
    per_coord = ad.square(mu - 0.5) + ad.square(var - 1.0 / 12.0) + ad.square(rng_ - 1.0)
    return ad.mean(per_coord)


def loss_mask(w_mask: Tensor) -> tuple[Tensor, Tensor]:
    """(entropy, sparsity) of the mask probabilities ``sigmoid(w_mask)``."""
    p = ad.clamp(ad.sigmoid(w_mask), LOG_EPS, 1.0 - LOG_EPS)
    q = 1.0 - p
    entropy = ad.mean(-(p * ad.log(p)) - q * ad.log(q))
    return entropy, ad.mean(p)


def l1_norm(params: dict[str, Tensor], reduction: str = "sum") -> Tensor:
    total = None
    count = 0
    for name in sorted(params):
        term = ad.sum_(ad.abs_(params[name]))
        total = term if total is None else total + term
        count += params[name].data.size
    if total is None:
        return ad.constant(0.0)
    return total * (1.0 / count) if reduction == "mean" else total


@dataclass
class LossParts:
    factual: Tensor
    balance: Tensor = field(default_factory=lambda: ad.constant(0.0))
    coverage: Tensor = field(default_factory=lambda: ad.constant(0.0))
    entropy: Tensor = field(default_factory=lambda: ad.constant(0.0))
    sparsity: Tensor = field(default_factory=lambda: ad.constant(0.0))
    l1: Tensor = field(default_factory=lambda: ad.constant(0.0))

    def items(self):
        return [
            ("factual", self.factual),
            ("balance", self.balance),
            ("coverage", self.coverage),
            ("entropy", self.entropy),
            ("sparsity", self.sparsity),
            ("l1", self.l1),
        ]


def loss_total(parts: LossParts, cfg) -> Tensor:
    """``L_y + L_bal + l_cov L_cov + l_ent L_ent + l_sp L_sp + l_L1 ||theta_gnn||_1``."""
    return (
        parts.factual
        + parts.balance
        + cfg.lambda_cov * parts.coverage
        + cfg.lambda_ent * parts.entropy
        + cfg.lambda_sp * parts.sparsity
        + cfg.lambda_l1 * parts.l1
    )
