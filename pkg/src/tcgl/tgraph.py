"""Chronological-prior temporal graphs, stochastic views, and the GCN layer.

Graphs are undirected chains over chronologically ordered nodes (snippets
for the inter graph, frame-sets for intra graphs). A view keeps each edge
with probability 1 - p_r (one coin per undirected edge) and zeroes a
Bernoulli-drawn subset of feature dimensions across all nodes at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore as dc


@dataclass
class TemporalGraph:
    features: dc.Tensor   # (N, F) node features, chronological order
    adjacency: np.ndarray  # (N, N) binary, symmetric, zero diagonal
    kind: str = "inter"    # "inter" or "intra"

    @property
    def num_nodes(self):
        return self.adjacency.shape[0]


@dataclass
class GraphView:
    features: dc.Tensor    # (N, F) masked features
    adjacency: np.ndarray  # (N, N) reduced adjacency
    origin: TemporalGraph = None
    view_index: int = 1


@dataclass
class GcnParams:
    weight: dc.Tensor  # (F, F_out)
    bias: dc.Tensor = None  # (F_out,), optional


# Fan-in init scaled up so the lr=0.001 schedule makes progress at desk
# scale; calibrated on the synthetic benchmark.
INIT_GAIN = 4.0


def init_gcn(rng, in_dim, out_dim, bias=False):
    bound = INIT_GAIN / np.sqrt(in_dim)
    weight = dc.Tensor(rng.uniform(-bound, bound, size=(in_dim, out_dim)),
                       requires_grad=True)
    b = None
    if bias:
        b = dc.Tensor(np.zeros(out_dim), requires_grad=True)
    return GcnParams(weight=weight, bias=b)


def chain_adjacency(n):
    a = np.zeros((n, n), dtype=np.int64)
    idx = np.arange(n - 1)
    a[idx, idx + 1] = 1
    a[idx + 1, idx] = 1
    return a


def build_chain_graph(features, kind="inter"):
    """Undirected chain graph over chronologically ordered node features."""
    if not isinstance(features, dc.Tensor):
        features = dc.Tensor(features)
    if features.data.ndim != 2 or features.data.shape[0] < 1:
        raise ValueError(f"features must be a non-empty (N, F) matrix, got shape {features.data.shape}")
    return TemporalGraph(features=features, adjacency=chain_adjacency(features.data.shape[0]), kind=kind)


def generate_view(g: TemporalGraph, p_r, p_m, rng, view_index=1):
    """Corrupted copy: edges removed with prob p_r, feature dims masked with p_m."""
    if not (0.0 <= p_r <= 1.0 and 0.0 <= p_m <= 1.0):
        raise ValueError(f"probabilities must lie in [0, 1], got p_r={p_r}, p_m={p_m}")
    if p_r == 0.0 and p_m == 0.0:
        return GraphView(features=g.features, adjacency=g.adjacency.copy(),
                         origin=g, view_index=view_index)
    n = g.num_nodes
    adj = g.adjacency.copy()
    iu, ju = np.where(np.triu(g.adjacency) == 1)
    keep = rng.random(iu.size) >= p_r
    adj[iu, ju] = keep
    adj[ju, iu] = keep
    f = g.features.data.shape[1]
    mask = (rng.random(f) >= p_m).astype(g.features.data.dtype)
    features = dc.mul(g.features, dc.Tensor(mask))
    return GraphView(features=features, adjacency=adj, origin=g, view_index=view_index)


def _propagation_matrix(adjacency):
    a_hat = adjacency.astype(np.float64) + np.eye(adjacency.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def gcn_forward(view: GraphView, params: GcnParams):
    """relu(D^-1/2 (A + I) D^-1/2 X W), symmetric normalization with self-loops."""
    if view.features.data.shape[1] != params.weight.shape[0]:
        raise ValueError(
            f"feature dim {view.features.data.shape[1]} does not match GCN weight "
            f"input dim {params.weight.shape[0]}"
        )
    s = dc.Tensor(_propagation_matrix(view.adjacency))
    h = dc.matmul(dc.matmul(s, view.features), params.weight)
    if params.bias is not None:
        h = dc.add(h, params.bias)
    return dc.relu(h)
