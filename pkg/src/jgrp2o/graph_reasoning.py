"""Joint graph reasoning over backbone features.

One stage of reasoning: pixel-to-joint voting condenses the feature map
into per-joint feature vectors, one round of graph convolution propagates
them over a joint-connection graph, and joint-to-pixel mapping spreads the
evolved features back over the map, which is fused with the original
features. The voting weights produced here are reused verbatim by the
offset-aggregation head, so they are exposed as part of the stage output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .layers import BatchNorm2d, Conv2d, Linear
from .numerics import Tensor, constant, ops


@dataclass(frozen=True)
class GraphAdjacency:
    """An NxN joint-connection matrix under one construction policy."""

    matrix: np.ndarray
    policy: str
    edges: tuple = ()


def build_skeleton_adjacency(edges, n_joints):
    """Symmetrically normalized adjacency of the physical bone graph.

    With A the 0/1 bone adjacency, self-loops added, and D the diagonal
    degree matrix of A + I, the result is D^{-1/2} (A + I) D^{-1/2}.
    """
    a = np.zeros((n_joints, n_joints))
    seen = set()
    for i, j in edges:
        if not (0 <= i < n_joints and 0 <= j < n_joints):
            raise ValidationError(
                f"edge ({i}, {j}) out of range for {n_joints} joints"
            )
        if i == j:
            raise ValidationError(f"self-loop ({i}, {j}) not allowed in edge list")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValidationError(f"duplicate edge ({i}, {j})")
        seen.add(key)
        a[i, j] = a[j, i] = 1.0
    a_tilde = a + np.eye(n_joints)
    degree = a_tilde.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degree)
    matrix = a_tilde * np.outer(inv_sqrt, inv_sqrt)
    return GraphAdjacency(matrix=matrix, policy="skeleton", edges=tuple(edges))


def compute_voting_weights(x, vote_conv):
    """Spatial-softmax voting weights, one channel per joint."""
    return ops.spatial_softmax(vote_conv(x))


def pixel_to_joint_vote(x, weights, pixel_conv):
    """Per-joint features as the vote-weighted average of transformed pixels."""
    return ops.einsum2("bhwn,bhwc->bnc", weights, pixel_conv(x))


def build_similarity_adjacency(feats, query, key):
    """Data-dependent graph: row-softmax of bilinear feature similarities."""
    scores = ops.einsum2("bic,bjc->bij", query(feats), key(feats))
    return ops.softmax_last(scores)


def graph_reason(feats, adjacency, reason_weight):
    """One graph-convolution step: ReLU(A F W)."""
    adj = adjacency if isinstance(adjacency, Tensor) else constant(
        adjacency.matrix, dtype=feats.dtype
    )
    return ops.relu(ops.matmul(adj, ops.matmul(feats, reason_weight)))


def joint_to_pixel_map(evolved, weights, context_block, training):
    """Spread evolved joint features back over pixels (mean over joints)."""
    n_joints = evolved.shape[1]
    ctx = ops.scale(
        ops.einsum2("bhwn,bnc->bhwc", weights, evolved), 1.0 / n_joints
    )
    return context_block(ctx, training)


def enhance_features(x, context, fuse_conv, fuse_bn, training):
    """Fuse joint context with the original features: [context; original]."""
    fused = fuse_conv(ops.concat_channels(context, x))
    return ops.relu(fuse_bn(fused, training))


class JointGraphReasoning:
    """One stage's reasoning module with its trainable transforms."""

    def __init__(self, store, name, channels, n_joints, graph, topology_edges, rng):
        if graph not in ("skeleton", "similarity", "parameterized"):
            raise ValidationError(f"unknown graph policy {graph!r}")
        self.graph = graph
        self.n_joints = n_joints
        # no bias on the voting transform: spatial softmax is invariant to a
        # per-channel constant, so a bias there is a dead parameter
        self.vote_conv = Conv2d(
            store, f"{name}/vote", 1, 1, channels, n_joints, rng, bias=False
        )
        self.pixel_conv = Conv2d(store, f"{name}/pixel", 1, 1, channels, channels, rng)
        limit = np.sqrt(6.0 / (2 * channels))
        self.reason_weight = store.create(
            f"{name}/reason/weight", rng.uniform(-limit, limit, (channels, channels))
        )
        self.context_conv = Conv2d(
            store, f"{name}/context/conv", 1, 1, channels, channels, rng, bias=False
        )
        self.context_bn = BatchNorm2d(store, f"{name}/context/bn", channels)
        self.fuse_conv = Conv2d(
            store, f"{name}/fuse/conv", 1, 1, 2 * channels, channels, rng, bias=False
        )
        self.fuse_bn = BatchNorm2d(store, f"{name}/fuse/bn", channels)

        self.skeleton = build_skeleton_adjacency(topology_edges, n_joints)
        self.query = self.key = self.adjacency_param = None
        if graph == "similarity":
            self.query = Linear(store, f"{name}/sim_query", channels, channels, rng)
            self.key = Linear(store, f"{name}/sim_key", channels, channels, rng)
        elif graph == "parameterized":
            init = self.skeleton.matrix + rng.uniform(
                -0.01, 0.01, self.skeleton.matrix.shape
            )
            self.adjacency_param = store.create(f"{name}/adjacency", init)

    def _context_block(self, ctx, training):
        return ops.relu(self.context_bn(self.context_conv(ctx), training))

    def adjacency_for(self, feats):
        if self.graph == "skeleton":
            return constant(self.skeleton.matrix, dtype=feats.dtype)
        if self.graph == "parameterized":
            return self.adjacency_param
        return build_similarity_adjacency(feats, self.query, self.key)

    def __call__(self, x, training):
        """Returns (voting weights, joint features, evolved features, fused map)."""
        weights = compute_voting_weights(x, self.vote_conv)
        feats = pixel_to_joint_vote(x, weights, self.pixel_conv)
        adj = self.adjacency_for(feats)
        evolved = graph_reason(feats, adj, self.reason_weight)
        context = joint_to_pixel_map(evolved, weights, self._context_block, training)
        fused = enhance_features(x, context, self.fuse_conv, self.fuse_bn, training)
        return weights, feats, evolved, fused
