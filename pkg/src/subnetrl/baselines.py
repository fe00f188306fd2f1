"""Non-learning channel allocators and the exhaustive small-instance oracle.

The centralized graph-coloring benchmark builds a mutual coupling graph from
pairwise AP-to-AP interference powers (each vertex connected to its K-1
strongest interferers) and colors it with K channels so that the total weight
of monochromatic edges is low: greedy assignment in weighted-degree order
followed by single-vertex local search to a local optimum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import radio
from .env import EnvSnapshot


@dataclass
class InterferenceGraph:
    adjacency: np.ndarray  # (N, N) bool, symmetric, zero diagonal
    weights: np.ndarray  # (N, N) float, symmetric

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def monochromatic_weight(self, coloring) -> float:
        c = np.asarray(coloring)
        same = c[:, None] == c[None, :]
        return float(np.sum(self.weights * self.adjacency * same) / 2.0)


def build_graph(pairwise_power: np.ndarray, k: int) -> InterferenceGraph:
    """Connect each subnetwork to its k-1 strongest interferers.

    Measured coupling is direction-dependent (independent fading per
    direction), so the matrix is symmetrized by the elementwise max first.
    """
    p = np.asarray(pairwise_power, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("pairwise power must be a square matrix")
    if np.any(p < 0):
        raise ValueError("interference powers must be non-negative")
    n = p.shape[0]
    w = np.maximum(p, p.T)
    np.fill_diagonal(w, 0.0)
    adj = np.zeros((n, n), dtype=bool)
    per_vertex = min(max(k - 1, 0), n - 1)
    if per_vertex > 0:
        for i in range(n):
            order = np.argsort(-w[i])  # strongest first, self has weight 0
            neighbors = [j for j in order if j != i][:per_vertex]
            adj[i, neighbors] = True
        adj |= adj.T
    return InterferenceGraph(adj, w * 1.0)


def cgc_allocate(graph: InterferenceGraph, k: int, max_sweeps: int = 100) -> np.ndarray:
    """K-coloring with low total monochromatic weight; channels are 1..k."""
    if k < 1:
        raise ValueError("need at least one channel")
    n = graph.n
    adj, w = graph.adjacency, graph.weights
    colors = np.zeros(n, dtype=int)  # 0 = uncolored
    usage = np.zeros(k, dtype=int)
    order = np.argsort(-(w * adj).sum(axis=1), kind="stable")
    for v in order:
        cost = np.zeros(k)
        for u in np.nonzero(adj[v])[0]:
            if colors[u] > 0:
                cost[colors[u] - 1] += w[v, u]
        # ties go to the least-used color (then lowest index), spreading load
        best = min(range(k), key=lambda c: (cost[c], usage[c], c))
        colors[v] = best + 1
        usage[best] += 1

    # single-vertex moves, strict descent until a full sweep has no move
    for _ in range(max_sweeps):
        improved = False
        for v in range(n):
            neigh = np.nonzero(adj[v])[0]
            if neigh.size == 0:
                continue
            cost = np.zeros(k)
            for u in neigh:
                cost[colors[u] - 1] += w[v, u]
            best = int(np.argmin(cost)) + 1
            if cost[best - 1] < cost[colors[v] - 1] - 1e-15:
                colors[v] = best
                improved = True
        if not improved:
            break
    return colors


def match_color_labels(colors: np.ndarray, reference: np.ndarray, k: int) -> np.ndarray:
    """Relabel a coloring to agree with a reference allocation where possible.

    Colorings are only unique up to a label permutation; when a fresh
    coloring is rolled out through switch gating, picking the permutation
    with maximum agreement avoids churning subnetworks whose partition slot
    did not actually change.
    """
    colors = np.asarray(colors, dtype=int)
    reference = np.asarray(reference, dtype=int)
    best, best_score = colors, -1
    for perm in itertools.permutations(range(1, k + 1)):
        mapped = np.array([perm[c - 1] for c in colors])
        score = int(np.sum(mapped == reference))
        if score > best_score:
            best, best_score = mapped, score
    return best


def greedy_select(prev_sinr_per_channel) -> int:
    """Channel with the highest previous-step measurement; ties to lowest index."""
    vec = np.asarray(prev_sinr_per_channel, dtype=float)
    return int(np.argmax(vec)) + 1


def measured_sinr_cube(snapshot: EnvSnapshot, allocation) -> np.ndarray:
    """Per-channel SINR (N, K) each subnetwork would measure (worst device)."""
    rx = snapshot.rx_mw
    n, _, _ = rx.shape
    k = snapshot.radio.num_channels
    alloc = np.asarray(allocation, dtype=int)
    cube = np.empty((n, k))
    for v in range(n):
        g = rx[v, v, :]  # (M,)
        for c in range(1, k + 1):
            co = (alloc == c) & (np.arange(n) != v)
            interference = rx[co, v, :].sum(axis=0)
            cube[v, c - 1] = np.min(g / (interference + snapshot.noise_mw))
    return cube


def greedy_one_shot(
    snapshot: EnvSnapshot, prev_allocation, k: int, react_mask=None
) -> np.ndarray:
    """One gated greedy step on a frozen snapshot.

    Each reacting subnetwork picks the channel with the highest SINR measured
    under prev_allocation (the previous-step measurement); non-reacting
    subnetworks keep their channel, mirroring one timestep of the live system
    where only agents at their switching instant may move. react_mask=None
    lets everyone react at once.
    """
    alloc = np.asarray(prev_allocation, dtype=int).copy()
    cube = measured_sinr_cube(snapshot, alloc)
    choices = np.argmax(cube, axis=1) + 1
    if react_mask is None:
        return choices
    mask = np.asarray(react_mask, dtype=bool)
    alloc[mask] = choices[mask]
    return alloc


def greedy_sweep(snapshot: EnvSnapshot, initial_allocation, k: int) -> np.ndarray:
    """Sequential greedy re-selection: each subnetwork reacts in id order,
    measuring under the committed choices of its predecessors."""
    rx = snapshot.rx_mw
    n, _, _ = rx.shape
    alloc = np.asarray(initial_allocation, dtype=int).copy()
    for v in range(n):
        g = rx[v, v, :]
        per_channel = np.empty(k)
        for c in range(1, k + 1):
            co = (alloc == c) & (np.arange(n) != v)
            interference = rx[co, v, :].sum(axis=0)
            per_channel[c - 1] = np.min(g / (interference + snapshot.noise_mw))
        alloc[v] = greedy_select(per_channel)
    return alloc


def random_allocate(n: int, k: int, seed: int) -> np.ndarray:
    """Uniform i.i.d. channels, drawn once and held for the episode."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    rng = np.random.default_rng(seed)
    return rng.integers(1, k + 1, size=n)


def sum_rate_bps(snapshot: EnvSnapshot, allocation) -> float:
    """Network objective: total finite-blocklength rate over all devices."""
    rx = snapshot.rx_mw
    n, _, m = rx.shape
    alloc = np.asarray(allocation, dtype=int)
    if alloc.shape != (n,):
        raise ValueError("allocation length must match the snapshot")
    g = rx[np.arange(n), np.arange(n), :]  # (N, M)
    co = (alloc[:, None] == alloc[None, :]) & ~np.eye(n, dtype=bool)  # co[i, n]
    interference = np.einsum("in,inm->nm", co.astype(float), rx)
    gamma = g / (interference + snapshot.noise_mw)
    return float(radio.achievable_rate(gamma, snapshot.radio).sum())


def brute_force_optimal(snapshot: EnvSnapshot, k: int, limit: int = 10**6):
    """Exhaustive maximizer of the sum rate over all K^N allocations."""
    n = snapshot.rx_mw.shape[0]
    if k**n > limit:
        raise ValueError(f"instance too large for brute force: {k}^{n} > {limit}")
    best_alloc, best_rate = None, -np.inf
    for combo in itertools.product(range(1, k + 1), repeat=n):
        alloc = np.array(combo)
        r = sum_rate_bps(snapshot, alloc)
        if r > best_rate:
            best_alloc, best_rate = alloc, r
    return best_alloc, best_rate
