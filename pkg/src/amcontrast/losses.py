"""Temperature-scaled contrastive objectives over segment views.

The joint objective is a sum of three NT-Xent style terms computed over the
4B segment views of a batch: augmentation consistency, segment consistency,
and joint consistency. Every anchor's denominator runs over all other 4B - 1
views (the positive included, only the anchor itself excluded). Each term
averages -log(exp(sim(anchor, positive)) / denominator) over its relation
set; the three means are summed without weights.

All heavy paths are computed with a log-sum-exp so small temperatures do not
overflow; an independent brute-force implementation lives in ``reference``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .pairing import PositiveRelation, enumerate_positives, flat_index

EPS_NORM = 1e-12


class NonFiniteLossError(FloatingPointError):
    """A loss evaluated to NaN or Inf; inputs are corrupt or training diverged."""


class SingletonBatchError(ValueError):
    """A denominator over an empty candidate set was requested."""


@dataclass(frozen=True)
class LossBreakdown:
    """Scalar values of the three components and their sum."""

    l_ac: float
    l_sc: float
    l_jc: float
    l_total: float


def l2_normalize(h: torch.Tensor, eps: float = EPS_NORM) -> torch.Tensor:
    """Project embeddings onto the unit sphere with an epsilon floor."""
    norms = torch.linalg.vector_norm(h, dim=-1, keepdim=True)
    return h / torch.clamp(norms, min=eps)


def similarity(u, v, tau: float):
    """Dot-product similarity scaled by a strictly positive temperature."""
    if tau <= 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    if isinstance(u, torch.Tensor):
        return (u * v).sum(-1) / tau
    return float(np.dot(np.asarray(u), np.asarray(v)) / tau)


def _as_view_tensor(h: torch.Tensor) -> torch.Tensor:
    if h.ndim != 4 or h.shape[1] != 2 or h.shape[2] != 2:
        raise ValueError(f"expected embeddings shaped (B, 2, 2, d), got {tuple(h.shape)}")
    return h.reshape(-1, h.shape[-1])


def denominator(anchor, h: torch.Tensor, tau: float):
    """Sum of exp(similarity) from one anchor to every other candidate.

    h is either the (B, 2, 2, d) view tensor with anchor an (n, v, s) triple,
    or a generic (N, d) candidate set with anchor a row index.
    """
    flat = h if h.ndim == 2 else _as_view_tensor(h)
    idx = int(anchor) if h.ndim == 2 else flat_index(*anchor)
    if flat.shape[0] < 2:
        raise SingletonBatchError("denominator needs at least one non-anchor view")
    sims = similarity(flat[idx].unsqueeze(0), flat, tau)
    keep = torch.ones(flat.shape[0], dtype=torch.bool)
    keep[idx] = False
    return torch.exp(sims[keep]).sum()


def _masked_log_denominators(flat: torch.Tensor, tau: float) -> tuple[torch.Tensor, torch.Tensor]:
    sims = flat @ flat.T / tau
    mask = torch.eye(flat.shape[0], dtype=torch.bool, device=flat.device)
    log_den = torch.logsumexp(sims.masked_fill(mask, float("-inf")), dim=1)
    return sims, log_den


def consistency_losses(h: torch.Tensor, tau: float,
                       relations: list[PositiveRelation] | None = None,
                       symmetric: bool = False) -> dict[str, torch.Tensor]:
    """Compute the three contrastive components and their unweighted sum.

    Args:
        h: Unit-normalized embeddings shaped (B, 2, 2, d).
        tau: Temperature, > 0.
        relations: Positive assignments to honor; defaults to the canonical
            enumeration. Corruption diagnostics pass redirected relations.
        symmetric: Mirror every relation (only used when relations is None).

    Returns:
        {"ac", "sc", "jc", "total"} mapping to scalar tensors that carry
        gradients back to h.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    flat = _as_view_tensor(h)
    if relations is None:
        relations = enumerate_positives(h.shape[0], symmetric=symmetric)
    sims, log_den = _masked_log_denominators(flat, tau)
    out: dict[str, torch.Tensor] = {}
    for tier in ("ac", "sc", "jc"):
        anchors = [flat_index(*r.anchor) for r in relations if r.tier == tier]
        positives = [flat_index(*r.positive) for r in relations if r.tier == tier]
        if not anchors:
            raise ValueError(f"relations list has no {tier!r} entries")
        a = torch.as_tensor(anchors, device=flat.device)
        p = torch.as_tensor(positives, device=flat.device)
        out[tier] = (log_den[a] - sims[a, p]).mean()
    out["total"] = out["ac"] + out["sc"] + out["jc"]
    if not torch.isfinite(out["total"]):
        raise NonFiniteLossError(
            f"non-finite loss: ac={out['ac']}, sc={out['sc']}, jc={out['jc']}")
    return out


def instance_nt_xent(h: torch.Tensor, tau: float) -> torch.Tensor:
    """Symmetric NT-Xent over 2B full-length views, two per instance.

    h is shaped (B, 2, d), unit-normalized; each view's positive is its
    sibling view and the denominator runs over the other 2B - 1 views.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    if h.ndim != 3 or h.shape[1] != 2:
        raise ValueError(f"expected embeddings shaped (B, 2, d), got {tuple(h.shape)}")
    flat = h.reshape(-1, h.shape[-1])
    n = flat.shape[0]
    if n < 2:
        raise SingletonBatchError("instance loss needs at least one full pair")
    sims = flat @ flat.T / tau
    mask = torch.eye(n, dtype=torch.bool, device=flat.device)
    log_den = torch.logsumexp(sims.masked_fill(mask, float("-inf")), dim=1)
    partner = torch.arange(n, device=flat.device) ^ 1
    loss = (log_den - sims[torch.arange(n), partner]).mean()
    if not torch.isfinite(loss):
        raise NonFiniteLossError(f"non-finite instance loss: {loss}")
    return loss


def breakdown(losses: dict[str, torch.Tensor]) -> LossBreakdown:
    """Detach a consistency_losses result into plain floats for logging."""
    return LossBreakdown(l_ac=float(losses["ac"]), l_sc=float(losses["sc"]),
                         l_jc=float(losses["jc"]), l_total=float(losses["total"]))
