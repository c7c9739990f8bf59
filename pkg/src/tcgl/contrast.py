"""Graph contrastive objective between two views of a temporal graph.

The relation between two node embeddings is the cosine of their images
under a shared two-layer projection head. For a positive pair (u_i, v_i)
the loss is the negative log of the softmax probability of the positive
relation against all cross-view relations plus the same-view relations
with k != i, at temperature tau. Per-graph losses average both directions
over all nodes; the combined graph loss weights intra and inter terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore as dc

NEG_MASK = -1e30  # additive mask removing a term from a logsumexp exactly


@dataclass
class ProjectionParams:
    w1: dc.Tensor  # (F_in, F_proj)
    b1: dc.Tensor  # (F_proj,)
    w2: dc.Tensor  # (F_proj, F_proj)
    b2: dc.Tensor  # (F_proj,)


@dataclass
class ContrastConfig:
    tau: float = 0.5
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")


INIT_GAIN = 4.0  # matches the trainer-wide init calibration


def init_projection(rng, in_dim, proj_dim=None):
    proj_dim = in_dim if proj_dim is None else proj_dim
    b1 = INIT_GAIN / np.sqrt(in_dim)
    b2 = INIT_GAIN / np.sqrt(proj_dim)
    return ProjectionParams(
        w1=dc.Tensor(rng.uniform(-b1, b1, size=(in_dim, proj_dim)), requires_grad=True),
        b1=dc.Tensor(rng.uniform(-b1, b1, size=proj_dim), requires_grad=True),
        w2=dc.Tensor(rng.uniform(-b2, b2, size=(proj_dim, proj_dim)), requires_grad=True),
        b2=dc.Tensor(rng.uniform(-b2, b2, size=proj_dim), requires_grad=True),
    )


def project(x, proj: ProjectionParams):
    """Two-layer perceptron with ReLU hidden activation; works on (F,) or (N, F)."""
    h = dc.relu(dc.add(dc.matmul(x, proj.w1), proj.b1))
    return dc.add(dc.matmul(h, proj.w2), proj.b2)


def relation(u, v, proj: ProjectionParams):
    """Cosine similarity of the projected embeddings, in [-1, 1]."""
    pu = dc.l2_normalize(project(u, proj))
    pv = dc.l2_normalize(project(v, proj))
    return dc.dot(pu, pv)


def pairwise_loss(u_rows, v_rows, i, tau, proj: ProjectionParams):
    """-log softmax probability of the positive pair (u_i, v_i).

    Negatives are every cross-view pair (u_i, v_k) with k != i and every
    same-view pair (u_i, u_k) with k != i. Computed through a logsumexp
    with max-subtraction so extreme relation/tau ratios stay finite.
    """
    n = u_rows.data.shape[0]
    if n == 0:
        raise ValueError("empty embedding matrix")
    if u_rows.data.shape != v_rows.data.shape:
        raise ValueError(
            f"view shapes differ: {u_rows.data.shape} vs {v_rows.data.shape}"
        )
    if not 0 <= i < n:
        raise ValueError(f"node index {i} out of range for {n} nodes")
    terms = []
    for k in range(n):
        terms.append(relation(u_rows[i], v_rows[k], proj) / tau)
    for k in range(n):
        if k != i:
            terms.append(relation(u_rows[i], u_rows[k], proj) / tau)
    logits = dc.stack(terms)  # (2n-1,) vector of scalar relations / tau
    shift = float(logits.data.max())
    lse = dc.log(dc.tsum(dc.exp(logits - shift))) + shift
    return lse - terms[i]


def _similarity_matrices(u_rows, v_rows, tau, proj):
    pu = dc.l2_normalize(project(u_rows, proj), axis=-1)
    pv = dc.l2_normalize(project(v_rows, proj), axis=-1)
    s_uv = dc.matmul(pu, dc.transpose(pv)) / tau
    s_vu = dc.matmul(pv, dc.transpose(pu)) / tau
    s_uu = dc.matmul(pu, dc.transpose(pu)) / tau
    s_vv = dc.matmul(pv, dc.transpose(pv)) / tau
    return s_uv, s_vu, s_uu, s_vv


def _directional_losses(s_cross, s_same):
    """Vector of -log softmax losses, one per node, for one direction."""
    n = s_cross.data.shape[0]
    diag_mask = dc.Tensor(np.eye(n) * NEG_MASK)
    logits = dc.concat([s_cross, dc.add(s_same, diag_mask)], axis=1)
    lse = dc.logsumexp_rows(logits)
    positives = dc.tsum(dc.mul(s_cross, dc.Tensor(np.eye(n))), axis=1)
    return lse - positives


def graph_loss(u_rows, v_rows, tau, proj: ProjectionParams):
    """Symmetric average of both directional losses over all nodes."""
    if u_rows.data.shape != v_rows.data.shape:
        raise ValueError(
            f"view shapes differ: {u_rows.data.shape} vs {v_rows.data.shape}"
        )
    s_uv, s_vu, s_uu, s_vv = _similarity_matrices(u_rows, v_rows, tau, proj)
    l_u = _directional_losses(s_uv, s_uu)
    l_v = _directional_losses(s_vu, s_vv)
    return dc.mean(dc.concat([l_u, l_v]))


def total_graph_loss(intra_losses, inter_loss, alpha, beta):
    """Weighted sum: alpha * sum(intra) + beta * inter."""
    total = dc.mul(inter_loss, beta)
    for loss in intra_losses:
        total = dc.add(total, dc.mul(loss, alpha))
    return total
