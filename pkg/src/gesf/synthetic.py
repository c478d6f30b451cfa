"""Seeded synthetic graphs used by the tests, checks and examples."""

from __future__ import annotations

import numpy as np

from .graph import Graph


def _bernoulli_edges(rng, prob):
    """Upper-triangular Bernoulli draw from a symmetric probability matrix."""
    n = prob.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < prob[iu, ju]
    return np.stack([iu[keep], ju[keep]], axis=1)


def block_model(sizes, p_in: float, p_out: float, seed: int = 0, mode: str = "multiclass") -> Graph:
    """Stochastic block model; every node is labeled with its block index."""
    rng = np.random.default_rng(seed)
    block = np.repeat(np.arange(len(sizes)), sizes)
    prob = np.where(block[:, None] == block[None, :], p_in, p_out)
    edges = _bernoulli_edges(rng, prob)
    if mode == "multiclass":
        labels = {v: int(c) for v, c in enumerate(block)}
    else:
        labels = {v: {int(c)} for v, c in enumerate(block)}
    return Graph(n=block.size, node_type=np.zeros(block.size, dtype=int), edges=edges,
                 labels=labels, mode=mode)


def two_community(seed: int = 0) -> Graph:
    """20 nodes in two blocks of 10, intra-block edge probability 0.8, inter 0.05."""
    return block_model([10, 10], 0.8, 0.05, seed=seed)


def hub_graph(n_items: int = 60, n_communities: int = 3, n_hubs: int = 20, seed: int = 0,
              p_hub: float = 0.5, p_hub_noise: float = 0.02, p_item: float = 0.05,
              mode: str = "multiclass") -> Graph:
    """Two node types: labeled items (type 0) in communities, unlabeled hubs (type 1).

    Hub ``h`` belongs to community ``h % n_communities`` and links to each item
    of that community with probability ``p_hub`` and to other items with
    ``p_hub_noise``. Items also link among themselves within their
    community with probability ``p_item``.
    """
    rng = np.random.default_rng(seed)
    item_comm = np.repeat(np.arange(n_communities), -(-n_items // n_communities))[:n_items]
    hub_comm = np.arange(n_hubs) % n_communities
    n = n_items + n_hubs
    comm = np.concatenate([item_comm, hub_comm])
    is_hub = np.arange(n) >= n_items
    same = comm[:, None] == comm[None, :]
    prob = np.zeros((n, n))
    item_item = ~is_hub[:, None] & ~is_hub[None, :]
    item_hub = is_hub[:, None] ^ is_hub[None, :]
    prob[item_item & same] = p_item
    prob[item_hub & same] = p_hub
    prob[item_hub & ~same] = p_hub_noise
    edges = _bernoulli_edges(rng, prob)
    if mode == "multiclass":
        labels = {v: int(item_comm[v]) for v in range(n_items)}
    else:
        labels = {v: {int(item_comm[v])} for v in range(n_items)}
    return Graph(n=n, node_type=is_hub.astype(int), edges=edges, labels=labels, mode=mode)
