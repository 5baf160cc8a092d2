"""Exhaustive tiny-scale oracles runnable without a test framework.

These back the `selftest` CLI subcommand and the acceptance suite: hash
family joint-uniformity by full enumeration, conditional-expectation
dominance against exhaustive means, offline/distributed seed agreement,
and brute-force one-round coloring probabilities.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations, product

import numpy as np

from .config import Config
from .coloring import Palettes
from .derand import (HashFamily, TableObjective, cond_exp_search,
                     distributed_seed_agreement)
from .detcolor import simple_rand_color_round
from .graphs import Graph
from .sim import Simulator


def check_hash_independence(gammas=(2, 3), ds=(2, 3)) -> list[dict]:
    """Exact d-wise joint uniformity over all seeds, for gamma = beta."""
    results = []
    for gb in gammas:
        for d in ds:
            fam = HashFamily(gb, gb, d)
            n_seeds = 1 << fam.seed_len
            table = np.zeros((1 << gb, n_seeds), dtype=np.int64)
            for s in range(n_seeds):
                for x in range(1 << gb):
                    table[x, s] = fam.eval(s, x)
            ok = True
            for xs in combinations(range(1 << gb), d):
                joint = {}
                for s in range(n_seeds):
                    key = tuple(int(table[x, s]) for x in xs)
                    joint[key] = joint.get(key, 0) + 1
                want = n_seeds // (1 << (gb * d))
                if len(joint) != 1 << (gb * d) or \
                        set(joint.values()) != {want}:
                    ok = False
                    break
            results.append({"name": f"hash-uniform g=b={gb} d={d}",
                            "ok": ok})
    return results


def make_corpus(n_cases: int = 50, rng_seed: int = 12345):
    """Random per-node table objectives with seed_len <= 16."""
    rng = np.random.default_rng(rng_seed)
    corpus = []
    for _ in range(n_cases):
        length = int(rng.integers(2, 17))
        n_nodes = int(rng.integers(1, 5))
        tables = {v: rng.integers(0, 64, size=1 << length).astype(np.int64)
                  for v in range(n_nodes)}
        z = int(rng.integers(1, 5))
        corpus.append((tables, length, z))
    return corpus


def check_cond_exp_dominance(corpus=None) -> list[dict]:
    """Search result >= exhaustive mean, exactly, over the whole corpus."""
    corpus = corpus or make_corpus()
    out = []
    for i, (tables, length, z) in enumerate(corpus):
        obj = TableObjective(tables, length)
        seed = cond_exp_search(obj, length, z)
        got = obj.value_of(seed.bits)
        num, den = obj.exhaustive_mean_num_denom()
        ok = Fraction(got) >= Fraction(num, den)
        out.append({"name": f"cond-exp-dominance case {i}", "ok": ok,
                    "value": got, "mean": float(num / den)})
    return out


def check_distributed_agreement(corpus=None) -> list[dict]:
    """Distributed protocol returns bit-identical seeds to the offline
    search on every corpus case."""
    corpus = corpus or make_corpus()
    out = []
    for i, (tables, length, z) in enumerate(corpus):
        off = TableObjective(tables, length)
        offline = cond_exp_search(off, length, z)
        dist_obj = TableObjective(tables, length)
        sim = Simulator(max(16, 1 << z), Config())
        dist = distributed_seed_agreement(sim, dist_obj, length, z)
        out.append({"name": f"agreement case {i}",
                    "ok": offline.bits == dist.bits})
    return out


def exhaustive_round_probability(graph: Graph, palettes: Palettes,
                                 target) -> Fraction:
    """Probability of `target(coloring)` after one ideal abstain-or-pick
    round, by enumerating the product choice space exactly."""
    n = graph.n
    spaces = []
    for v in range(n):
        opts = palettes.colors(v)
        # choice 0 = abstain (prob 1/2); each color (1/2)/F
        spaces.append([(0, Fraction(1, 2))] +
                      [(int(c), Fraction(1, 2 * len(opts))) for c in opts])
    total = Fraction(0)
    for combo in product(*spaces):
        prob = Fraction(1)
        for _, p in combo:
            prob *= p
        chosen = np.array([c for c, _ in combo], dtype=np.int64)
        keep = chosen.copy()
        for u, v in graph.edges_iter():
            if chosen[u] != 0 and chosen[u] == chosen[v]:
                keep[u] = keep[v] = 0
        if target(keep):
            total += prob
    return total


def check_round_probabilities() -> list[dict]:
    """Frozen brute-force oracles for the basic one-round colorer."""
    out = []
    # isolated vertex, pairwise family, exhaustive seeds: colored in
    # exactly half the seeds
    g1 = Graph.from_edges(4, [])
    pal1 = Palettes.uniform_range(4, 1, 1)
    fam = HashFamily(2, 2, 2)
    colored = 0
    for s in range(1 << fam.seed_len):
        coloring = np.zeros(4, dtype=np.int64)
        coloring[1:] = 1  # only vertex 0 active
        simple_rand_color_round(g1, pal1, coloring, (fam, s),
                                vertices=np.array([0]))
        colored += int(coloring[0] != 0)
    ok1 = 2 * colored == (1 << fam.seed_len)
    out.append({"name": "isolated-vertex seed probability 1/2", "ok": ok1})
    # K2 with palettes {1,2}: both colored in one ideal round w.p. 1/8
    g2 = Graph.from_edges(2, [(0, 1)])
    pal2 = Palettes.uniform_range(2, 1, 2)
    p_both = exhaustive_round_probability(
        g2, pal2, lambda c: c[0] != 0 and c[1] != 0)
    out.append({"name": "K2 both-colored probability", "ok":
                p_both == Fraction(1, 8), "value": str(p_both)})
    # and the K2 seed-map matches the ideal product probability exactly
    fam2 = HashFamily(2, 2, 2)
    both = 0
    for s in range(1 << fam2.seed_len):
        coloring = np.zeros(2, dtype=np.int64)
        simple_rand_color_round(g2, pal2, coloring, (fam2, s))
        both += int((coloring != 0).all())
    out.append({"name": "K2 both-colored over exhaustive seeds",
                "ok": Fraction(both, 1 << fam2.seed_len) == Fraction(1, 8),
                "value": f"{both}/{1 << fam2.seed_len}"})
    return out


def run_selftests() -> list[dict]:
    results = []
    results += check_hash_independence()
    results += check_cond_exp_dominance()
    results += check_distributed_agreement()
    results += check_round_probabilities()
    return results
