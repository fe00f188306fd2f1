"""Allocator baselines and the exhaustive oracle."""

import itertools

import numpy as np
import pytest

from subnetrl import baselines
from subnetrl.env import EnvConfig, SubnetworkEnv
from subnetrl.radio import RadioConfig


def snapshot_env(n=4, k=2, seed=0, m=1):
    env = SubnetworkEnv(
        radio_config=RadioConfig(num_channels=k),
        env_config=EnvConfig(n_subnetworks=n, devices_per_subnetwork=m,
                             steps_per_episode=10),
        seed=seed,
    )
    env.reset()
    return env


class TestBuildGraph:
    def test_two_vertices_single_edge(self):
        p = np.array([[0.0, 2.0], [1.0, 0.0]])
        g = baselines.build_graph(p, k=4)
        assert g.adjacency[0, 1] and g.adjacency[1, 0]
        assert g.weights[0, 1] == 2.0  # symmetrized by max

    def test_zero_matrix_edges_with_zero_weight(self):
        g = baselines.build_graph(np.zeros((3, 3)), k=4)
        assert g.adjacency.sum() > 0
        assert np.all(g.weights == 0.0)

    def test_neighbor_sets_match_sort_oracle(self):
        rng = np.random.default_rng(0)
        p = rng.random((4, 4))
        k = 3
        g = baselines.build_graph(p, k)
        w = np.maximum(p, p.T)
        np.fill_diagonal(w, 0.0)
        for i in range(4):
            chosen = {j for j in range(4) if j != i}
            top = sorted(chosen, key=lambda j: -w[i, j])[: k - 1]
            for j in top:
                assert g.adjacency[i, j]

    def test_k_below_two_gives_no_edges(self):
        g = baselines.build_graph(np.ones((4, 4)), k=1)
        assert g.adjacency.sum() == 0

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            baselines.build_graph(np.ones((2, 3)), 2)
        with pytest.raises(ValueError):
            baselines.build_graph(-np.ones((2, 2)), 2)


class TestCgc:
    def test_k_at_least_n_all_distinct(self):
        rng = np.random.default_rng(1)
        g = baselines.build_graph(rng.random((4, 4)), k=4)
        colors = baselines.cgc_allocate(g, 4)
        assert len(set(colors.tolist())) == 4
        assert g.monochromatic_weight(colors) == 0.0

    def test_equal_triangle_two_colors(self):
        w = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=float)
        g = baselines.build_graph(w, k=3)  # K-1=2 neighbors -> full triangle
        colors = baselines.cgc_allocate(g, 2)
        # exactly one monochromatic edge is optimal by pigeonhole
        assert g.monochromatic_weight(colors) == pytest.approx(1.0)

    def test_local_search_descends(self):
        rng = np.random.default_rng(2)
        p = rng.random((8, 8)) * 5
        g = baselines.build_graph(p, k=3)
        greedy_only = baselines.cgc_allocate(g, 3, max_sweeps=0)
        refined = baselines.cgc_allocate(g, 3)
        assert g.monochromatic_weight(refined) <= g.monochromatic_weight(greedy_only) + 1e-12

    def test_near_optimal_on_random_graphs(self):
        hits = 0
        for s in range(30):
            rng = np.random.default_rng(s)
            g = baselines.build_graph(rng.random((8, 8)) * 10, k=3)
            got = g.monochromatic_weight(baselines.cgc_allocate(g, 3))
            best = min(
                g.monochromatic_weight(np.array(c))
                for c in itertools.product(range(1, 4), repeat=8)
            )
            hits += got <= best * 1.10 + 1e-12
        assert hits >= 27  # 90%

    def test_channels_in_range(self):
        rng = np.random.default_rng(3)
        g = baselines.build_graph(rng.random((6, 6)), k=4)
        colors = baselines.cgc_allocate(g, 4)
        assert np.all((colors >= 1) & (colors <= 4))


class TestGreedySelect:
    def test_argmax(self):
        assert baselines.greedy_select([3.0, 7.0, 5.0, 1.0]) == 2

    def test_tie_to_lowest(self):
        assert baselines.greedy_select([4.0, 4.0, 4.0]) == 1

    def test_permutation_equivariance(self):
        v = np.array([3.0, 7.0, 5.0, 1.0])
        perm = [2, 0, 3, 1]
        permuted = v[perm]
        assert perm[baselines.greedy_select(permuted) - 1] == baselines.greedy_select(v) - 1

    def test_db_shift_invariance(self):
        v_db = np.array([3.0, 7.0, 5.0])
        assert baselines.greedy_select(v_db) == baselines.greedy_select(v_db + 12.5)


class TestRandomAllocate:
    def test_single_channel(self):
        assert np.all(baselines.random_allocate(7, 1, seed=0) == 1)

    def test_deterministic(self):
        assert np.array_equal(
            baselines.random_allocate(10, 4, seed=3), baselines.random_allocate(10, 4, seed=3)
        )

    def test_uniform_frequencies(self):
        draws = np.concatenate(
            [baselines.random_allocate(100, 4, seed=s) for s in range(1000)]
        )
        freqs = np.bincount(draws, minlength=5)[1:] / draws.size
        assert np.all(np.abs(freqs - 0.25) < 0.03)

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            baselines.random_allocate(0, 4, seed=0)


class TestBruteForce:
    def test_distinct_when_channels_suffice(self):
        env = snapshot_env(n=3, k=3, seed=4)
        alloc, _ = baselines.brute_force_optimal(env.snapshot(), 3)
        assert len(set(alloc.tolist())) == 3

    def test_single_feasible_allocation(self):
        env = snapshot_env(n=2, k=1, seed=5)
        alloc, rate = baselines.brute_force_optimal(env.snapshot(), 1)
        assert np.array_equal(alloc, [1, 1])
        assert rate == pytest.approx(baselines.sum_rate_bps(env.snapshot(), [1, 1]))

    def test_refuses_large_instances(self):
        env = snapshot_env(n=4, k=2, seed=6)
        with pytest.raises(ValueError):
            baselines.brute_force_optimal(env.snapshot(), 2, limit=8)

    def test_dominates_other_allocators(self):
        for seed in range(10):
            env = snapshot_env(n=5, k=2, seed=seed)
            snap = env.snapshot()
            _, best = baselines.brute_force_optimal(snap, 2)
            graph = baselines.build_graph(snap.ap_rx_mw, 2)
            for alloc in (
                baselines.cgc_allocate(graph, 2),
                baselines.random_allocate(5, 2, seed),
                baselines.greedy_sweep(snap, env.allocation, 2),
            ):
                assert best >= baselines.sum_rate_bps(snap, alloc) - 1e-9


class TestGreedyOnSnapshots:
    def test_one_shot_respects_gates(self):
        env = snapshot_env(n=5, k=2, seed=7)
        snap = env.snapshot()
        prev = np.array([1, 1, 2, 2, 1])
        gates = np.array([True, False, True, False, False])
        out = baselines.greedy_one_shot(snap, prev, 2, gates)
        assert np.array_equal(out[~gates], prev[~gates])

    def test_full_reaction_uses_stale_measurement(self):
        env = snapshot_env(n=3, k=2, seed=8)
        snap = env.snapshot()
        prev = np.array([1, 1, 1])
        out = baselines.greedy_one_shot(snap, prev, 2)
        cube = baselines.measured_sinr_cube(snap, prev)
        assert np.array_equal(out, np.argmax(cube, axis=1) + 1)

    def test_sweep_improves_over_start_on_average(self):
        gains = []
        for seed in range(20):
            env = snapshot_env(n=6, k=2, seed=seed)
            snap = env.snapshot()
            start = baselines.random_allocate(6, 2, seed + 100)
            swept = baselines.greedy_sweep(snap, start, 2)
            gains.append(
                baselines.sum_rate_bps(snap, swept) - baselines.sum_rate_bps(snap, start)
            )
        assert np.mean(gains) > 0


class TestColorLabelMatching:
    def test_exact_match_recovered(self):
        ref = np.array([1, 2, 3, 1, 2])
        shuffled = np.array([3, 1, 2, 3, 1])  # ref under permutation 1->3,2->1,3->2
        out = baselines.match_color_labels(shuffled, ref, 3)
        assert np.array_equal(out, ref)

    def test_preserves_partition(self):
        rng = np.random.default_rng(4)
        colors = rng.integers(1, 4, size=10)
        ref = rng.integers(1, 4, size=10)
        out = baselines.match_color_labels(colors, ref, 3)
        for c in range(1, 4):
            group = colors == c
            assert len(set(out[group].tolist())) == 1
