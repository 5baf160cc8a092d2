"""Randomized pipeline tests: one-shot, hierarchy, dense step, bidding,
partitioning, recursion, and the top-level drivers."""

import math
from fractions import Fraction

import numpy as np
import pytest

from ccclique.config import Config
from ccclique.coloring import Palettes, UNCOLORED, is_proper
from ccclique.errors import ParameterViolation, PlanRejected
from ccclique.graphs import Graph, gen_random_graph
from ccclique.harness import run_algorithm
from ccclique.randcolor import (PartitionPlan, color_bidding,
                                compute_hierarchy, dense_coloring_step,
                                eps_ladder, friend_threshold,
                                one_shot_coloring, partition_step,
                                recursive_coloring, strata_of)
from ccclique.runlog import RunLog
from ccclique.sim import Simulator


def setup_ctx(n, **kw):
    cfg = Config(**kw)
    return Simulator(n, cfg), cfg, RunLog()


class StubRng:
    """Deterministic stand-in: fixed participation and choice stream."""

    def __init__(self, rand_vals=(), int_vals=()):
        self._rand = list(rand_vals)
        self._ints = list(int_vals)

    def random(self, size=None):
        if size is None:
            return self._rand.pop(0)
        out = np.array([self._rand.pop(0) for _ in range(size)])
        return out

    def integers(self, lo, hi=None, size=None):
        if size is None:
            return self._ints.pop(0)
        return np.array([self._ints.pop(0) for _ in range(size)])


# ----------------------------- one-shot ------------------------------- #

def test_one_shot_p_zero_noop():
    g = Graph.from_edges(3, [(0, 1)])
    sim, cfg, log = setup_ctx(3)
    pal = Palettes.uniform_range(3, 1, 2)
    coloring = np.zeros(3, dtype=np.int64)
    got = one_shot_coloring(sim, g, pal, coloring, 0.0, 2,
                            np.random.default_rng(0), log)
    assert got == 0 and (coloring == 0).all()
    assert sim.ledger.rounds_total == 2  # rounds still tick


def test_one_shot_rejects_large_p():
    g = Graph.from_edges(2, [(0, 1)])
    sim, cfg, log = setup_ctx(2)
    pal = Palettes.uniform_range(2, 1, 2)
    with pytest.raises(ParameterViolation):
        one_shot_coloring(sim, g, pal, np.zeros(2, dtype=np.int64), 0.3, 1,
                          np.random.default_rng(0), log)


def test_one_shot_isolated_vertex_frequency():
    # lone vertex participates w.p. 1/8; over 10^4 seeded trials the
    # colored frequency lands within +-0.02
    g = Graph.from_edges(1, [])
    pal = Palettes.uniform_range(1, 1, 1)
    rng = np.random.default_rng(123)
    hits = 0
    trials = 10_000
    for _ in range(trials):
        sim = Simulator(1, Config())
        coloring = np.zeros(1, dtype=np.int64)
        one_shot_coloring(sim, g, pal, coloring, 0.125, 1, rng, RunLog())
        hits += int(coloring[0] != 0)
    assert abs(hits / trials - 0.125) < 0.02


def test_one_shot_lower_id_wins_on_conflict():
    # both endpoints participate and draw the same color: the lower id
    # keeps it, the higher id does not
    g = Graph.from_edges(2, [(0, 1)])
    sim, cfg, log = setup_ctx(2)
    pal = Palettes.from_lists(2, {0: [1], 1: [1]})
    coloring = np.zeros(2, dtype=np.int64)
    stub = StubRng(rand_vals=[0.0, 0.0], int_vals=[0, 0])
    one_shot_coloring(sim, g, pal, coloring, 0.125, 1, stub, log)
    assert coloring[0] == 1 and coloring[1] == 0


# ----------------------------- hierarchy ------------------------------ #

def test_friend_threshold_formula():
    assert friend_threshold(1024, 64, 1.0 / 16) == (15 / 16) * 960 == 900.0


def test_eps_ladder_shapes():
    # desk scale: first value already above 1/K -> single level
    seq = eps_ladder(128, 100)
    assert len(seq) == 1 and abs(seq[0] - 128 ** -0.1) < 1e-12
    # synthetic deep ladder rises by square roots and caps at 1/K
    seq2 = eps_ladder(2 ** 40, 10)
    assert seq2[0] == pytest.approx(2 ** -4)
    assert all(b > a for a, b in zip(seq2, seq2[1:]))
    assert seq2[-1] == pytest.approx(0.1)


def test_strata_grouping():
    # thresholds: xi_1 = eps_1, xi_2 = 1/log2(1/xi_1)
    assert strata_of([0.0625, 0.1]) == [[1], [2]]
    assert strata_of([0.5]) == [[1]]
    deep = eps_ladder(2 ** 40, 10)
    strata = strata_of(deep)
    flat = [i for grp in strata for i in grp]
    assert flat == list(range(1, len(deep) + 1))


def test_hierarchy_complete_graph_single_clique():
    # K_{Delta+1}: every adjacent pair shares Delta-1 common neighbors
    delta = 32
    g = Graph.complete(delta + 1)
    n = g.n
    sim, cfg, log = setup_ctx(max(n, delta * delta + 1))
    # embed K in a larger clique-model simulator via its own graph
    sim = Simulator(2048, cfg)  # Delta^2 = 1024 <= 2048
    g2, _ = Graph.complete(delta + 1).induced(np.arange(delta + 1))
    hier = compute_hierarchy(sim, g2, cfg, log, np.arange(g2.n))
    assert len(hier.layers[0]) == g2.n  # everyone dense at level 1
    labels = set(hier.clique_of[0].values())
    assert len(labels) == 1
    assert len(hier.v_sp) == 0


def test_hierarchy_empty_graph_all_sparse():
    g = Graph.from_edges(6, [])
    sim, cfg, log = setup_ctx(64)
    hier = compute_hierarchy(sim, g, cfg, log, np.arange(6))
    assert all(len(layer) == 0 for layer in hier.layers)
    assert len(hier.v_sp) == 6


def test_friend_pairs_imply_two_eps_friends():
    # with q = Delta^(3/5) and eps in the ladder window, every
    # (eps,q)-friend pair has at least (1-2 eps) Delta common neighbors
    g = gen_random_graph(2048, 0.55, 4)
    delta = g.max_degree
    assert delta >= 2 ** 10
    q = delta ** 0.6
    e1 = delta ** -0.1
    for eps in (e1, min(2 * e1, 0.5)):
        assert (1 - eps) * q <= eps * delta  # the algebraic step
        edges = g.edge_array()[:3000]
        common = g.common_neighbors(edges[:, 0], edges[:, 1])
        friends = common >= friend_threshold(delta, q, eps)
        assert (common[friends] >= (1 - 2 * eps) * delta).all()


# ----------------------------- dense step ----------------------------- #

def test_dense_step_triangle_all_colored():
    g = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    sim, cfg, log = setup_ctx(64)
    pal = Palettes.uniform_range(3, 1, 4)
    coloring = np.zeros(3, dtype=np.int64)
    got = dense_coloring_step(sim, g, pal, coloring, [np.arange(3)],
                              np.random.default_rng(0), log)
    assert got == 3
    assert is_proper(g, coloring, pal) is True


def test_dense_step_single_vertex():
    g = Graph.from_edges(1, [])
    sim, cfg, log = setup_ctx(16)
    pal = Palettes.uniform_range(1, 1, 1)
    coloring = np.zeros(1, dtype=np.int64)
    assert dense_coloring_step(sim, g, pal, coloring, [np.array([0])],
                               np.random.default_rng(0), log) == 1
    assert coloring[0] == 1


def test_dense_step_cross_block_conflict_probability():
    # two singleton blocks joined by an edge, palettes {1,2}: enumerate
    # the 2x2 choice space; conflicts (both drop) in exactly half of it
    g = Graph.from_edges(2, [(0, 1)])
    pal = Palettes.uniform_range(2, 1, 2)
    outcomes = []
    for c0 in (0, 1):
        for c1 in (0, 1):
            sim, cfg, log = setup_ctx(8)
            coloring = np.zeros(2, dtype=np.int64)
            stub = StubRng(int_vals=[c0, c1])
            dense_coloring_step(sim, g, pal, coloring,
                                [np.array([0]), np.array([1])], stub, log)
            outcomes.append(tuple(coloring))
    conflicts = sum(1 for o in outcomes if o == (0, 0))
    assert conflicts == 2  # c0 == c1 cases; brute-force probability 1/2
    for o in outcomes:
        if o != (0, 0):
            assert o[0] != o[1] and 0 not in o


# ----------------------------- bidding -------------------------------- #

def test_bidding_out_degree_zero_colored():
    g = Graph.from_edges(1, [])
    sim, cfg, log = setup_ctx(16)
    pal = Palettes.uniform_range(1, 1, 5)
    coloring = np.zeros(1, dtype=np.int64)
    color_bidding(sim, g, pal, coloring, np.array([0]), {0: (1, 0)}, cfg,
                  np.random.default_rng(0), log, iterations=50)
    assert coloring[0] != 0


def test_bidding_disjoint_palettes_both_colored():
    g = Graph.from_edges(2, [(0, 1)])
    sim, cfg, log = setup_ctx(16)
    pal = Palettes.from_lists(2, {0: [1, 2, 3], 1: [4, 5, 6]})
    coloring = np.zeros(2, dtype=np.int64)
    rank = {0: (1, 0), 1: (1, 1)}
    color_bidding(sim, g, pal, coloring, np.arange(2), rank, cfg,
                  np.random.default_rng(1), log, iterations=60)
    assert (coloring != 0).all()
    assert is_proper(g, coloring, pal) is True


def exact_path4_success_probs():
    """First-iteration coloring probabilities on the 4-path with shared
    5-color palettes and C=1, by exact enumeration (sample sets are
    independent across vertices)."""
    # out-neighbor chain: 1->0, 2->1, 3->2; p = [5, 4, 4, 4]
    probs = [Fraction(1, 10), Fraction(1, 8), Fraction(1, 8), Fraction(1, 8)]

    def subset_prob(mask, p):
        pr = Fraction(1)
        for c in range(5):
            pr *= p if (mask >> c) & 1 else (1 - p)
        return pr

    out = []
    # v0: colored iff its own sample set is non-empty
    out.append(1 - (1 - probs[0]) ** 5)
    # v1 given S0; v2 given S1; v3 given S2 (each pair independent)
    for v, parent in ((1, 0), (2, 1), (3, 2)):
        total = Fraction(0)
        for s_par in range(32):
            w_par = subset_prob(s_par, probs[parent])
            # v succeeds iff it samples a color outside s_par
            miss = Fraction(1)
            for c in range(5):
                if not (s_par >> c) & 1:
                    miss *= 1 - probs[v]
            total += w_par * (1 - miss)
        out.append(total)
    return out


def test_bidding_path4_matches_bruteforce():
    exact = exact_path4_success_probs()
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    pal = Palettes.uniform_range(4, 1, 5)
    rank = {v: (1, v) for v in range(4)}
    rng = np.random.default_rng(7)
    trials = 4000
    hits = np.zeros(4)
    for _ in range(trials):
        sim, cfg, log = setup_ctx(16)
        coloring = np.zeros(4, dtype=np.int64)
        color_bidding(sim, g, pal, coloring, np.arange(4), rank, cfg, rng,
                      log, C=1.0, iterations=1)
        hits += coloring != 0
    for v in range(4):
        assert abs(hits[v] / trials - float(exact[v])) < 0.03


# ----------------------------- partitioning --------------------------- #

def test_partition_plan_formula_example():
    plan = PartitionPlan.make(10 ** 6, 2, 2 ** 20)
    assert plan.q == 100
    assert plan.delta_small == pytest.approx(20.0)
    assert plan.p_j == pytest.approx(0.008)
    assert plan.p_star == pytest.approx(0.2)
    assert plan.q * plan.p_j + plan.p_star == pytest.approx(1.0)


def test_partition_plan_rejected_at_desk_scale():
    with pytest.raises(PlanRejected):
        PartitionPlan.make(4096, 2, 2 ** 20)  # p* = 20/16 > 1
    with pytest.raises(PlanRejected):
        PartitionPlan.make(100, 1, 2 ** 20)  # x below 2


def test_partition_step_allocates_disjoint_ranges():
    g = gen_random_graph(16384, 0.5, 21)
    sim, cfg, log = setup_ctx(g.n)
    scope = np.arange(g.n)
    plan, parts, ranges = partition_step(sim, g, scope, 1,
                                         g.max_degree + 1, 2,
                                         np.random.default_rng(3), cfg, log)
    assert len(parts) == plan.q + 1
    assert sum(len(p) for p in parts) == g.n
    last_hi = 0
    for lo, hi in ranges:
        assert lo > last_hi
        last_hi = hi
    assert last_hi <= g.max_degree + 1
    assert all(e["ok"] for e in log.entries
               if e.get("check") == "partition-ranges-disjoint")


def test_recursive_base_case_no_partition_rounds():
    # Delta <= sqrt(n): straight to list coloring, no partition stage
    g = gen_random_graph(4096, 0.008, 5)
    assert g.max_degree ** 2 <= g.n
    sim, cfg, log = setup_ctx(g.n)
    coloring = np.zeros(g.n, dtype=np.int64)
    recursive_coloring(sim, g, np.arange(g.n), 1, g.max_degree + 1, cfg,
                       np.random.default_rng(1), log, coloring=coloring)
    assert is_proper(g, coloring,
                     Palettes.uniform_range(g.n, 1, g.max_degree + 1)) is True
    assert not any(k.startswith("partition") for k in
                   sim.ledger.stage_rounds)


def test_parallel_instance_isolation():
    # coloring two disjoint blocks via run_parallel equals sequential runs
    # with the same per-instance seeds
    blocks = []
    edges = []
    for b in range(2):
        gb = gen_random_graph(40, 0.2, b)
        off = b * 40
        blocks.append(np.arange(off, off + 40))
        edges.extend((int(u) + off, int(v) + off)
                     for u, v in gb.edges_iter())
    g = Graph.from_edges(80, edges)
    delta = g.max_degree

    def run(parallel):
        sim, cfg, log = setup_ctx(g.n)
        coloring = np.zeros(g.n, dtype=np.int64)
        jobs = [
            (lambda b=b: recursive_coloring(
                sim, g, blocks[b], 1, delta + 1, cfg,
                np.random.default_rng(100 + b), log, coloring=coloring))
            for b in range(2)]
        if parallel:
            sim.run_parallel(jobs)
        else:
            for j in jobs:
                j()
        return coloring

    assert np.array_equal(run(True), run(False))


# ----------------------------- drivers -------------------------------- #

def test_fast_on_clique_uses_all_colors():
    n = 64
    g = Graph.complete(n)
    _, rep = run_algorithm("fast", g, Config(rng_seed=5))
    assert rep["proper"] and rep["within_budget"]
    assert rep["colors_used"] == n  # clique forces Delta+1 = n colors


def test_fast_branch_predicate():
    # Delta <= n/(10 log2 n): the recursion branch is taken
    g = gen_random_graph(4096, 0.002, 9)
    assert g.max_degree <= 4096 / (10 * math.log2(4096))
    sim = Simulator(g.n, Config(rng_seed=9))
    from ccclique.randcolor import fast_coloring
    log = RunLog()
    coloring = fast_coloring(sim, g, Config(rng_seed=9),
                             np.random.default_rng(9), log)
    assert "fast:recursive" in sim.ledger.stage_rounds
    assert "fast:parts" not in sim.ledger.stage_rounds
    assert is_proper(g, coloring,
                     Palettes.uniform_range(g.n, 1, g.max_degree + 1)) is True


def test_manycolors_budget_and_degenerate_k():
    g = gen_random_graph(512, 0.3, 2)
    delta = g.max_degree
    eps = 0.25
    _, rep = run_algorithm("manycolors", g, Config(rng_seed=2), eps=eps)
    assert rep["proper"]
    assert rep["max_color"] <= delta + int(delta ** (0.5 + eps))
    # k = floor(Delta^eps): at Delta=2^16, eps=1/4 the split has 16 parts
    assert int((2 ** 16) ** 0.25) == 16
    # eps small enough that k = 1 degenerates to plain recursion
    tiny_eps = 1e-9
    _, rep2 = run_algorithm("manycolors", g, Config(rng_seed=2),
                            eps=tiny_eps)
    assert rep2["proper"] and rep2["within_budget"]


def test_clp_window_preconditions():
    from ccclique.randcolor import clp_list_coloring
    g = gen_random_graph(256, 0.3, 3)
    delta = g.max_degree
    sim, cfg, log = setup_ctx(g.n)
    bad = Palettes.from_lists(
        g.n, {v: np.arange(1, 3) for v in range(g.n)})  # r_v = 2 too few
    with pytest.raises(ParameterViolation):
        clp_list_coloring(sim, g, bad, cfg, np.random.default_rng(0), log)


def test_free_color_floor_invariant_during_pipeline():
    # after any prefix: free colors >= uncolored-degree + 1 (structural)
    g = gen_random_graph(300, 0.1, 13)
    delta = g.max_degree
    pal = Palettes.uniform_range(g.n, 1, delta + 1)
    sim, cfg, log = setup_ctx(g.n)
    rng = np.random.default_rng(13)
    coloring = np.zeros(g.n, dtype=np.int64)
    one_shot_coloring(sim, g, pal, coloring, 0.125, 3, rng, log)
    from ccclique.coloring import free_colors
    unc = np.nonzero(coloring == UNCOLORED)[0]
    for v in unc[:50]:
        nbr = g.neighbors(int(v))
        unc_deg = int((coloring[nbr] == UNCOLORED).sum())
        assert len(free_colors(int(v), pal, coloring, g)) >= unc_deg + 1
