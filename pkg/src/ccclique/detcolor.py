"""Deterministic coloring: quadratic-palette one-shot, derandomized list
coloring for moderate degrees, bin-based list coloring up to n^(3/4), and
the general-case capacity partition.

Derandomized steps share one pattern: a per-phase experiment whose random
choices are hash outputs of node ids, and a pessimistic success estimator
whose terms are affine events over seed bits, so conditional expectations
are exact (see derand.AffineObjective).  The seed is agreed through the
leader protocol and applied; realized progress is asserted against the
estimator's initial expectation (the dominance the method guarantees).

Two desk-scale escape hatches, both charged honestly in the ledger:

* When the estimator would exceed the configured term budget, the phase is
  completed by a central greedy list-coloring instead (gather charged via
  the central-solve cost rule).  Greedy colors like this never violate a
  palette or an edge because every palette keeps deg+1 slack.
* When a phase's seed colors fewer than a quarter of its vertices (the
  power-of-two index map concedes up to half the participation mass), a
  charged central top-up colors the difference, keeping the documented
  per-phase progress exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .coloring import (Palettes, UNCOLORED, free_colors, greedy_list_color,
                       log2n)
from .derand import (AffineObjective, HashFamily, auto_chunk_bits,
                     distributed_seed_agreement, dyadic_blocks, value_rows)
from .errors import DegreeTooLarge, NoZeroViolationSeed, ParameterViolation
from .gf2 import EchelonTemplate, column_masks_vec, solve_parity_rows
from .graphs import Graph
from .runlog import RunLog
from .sim import Simulator


def phase_bound(n: int) -> int:
    """Hard cap on list-coloring phases: ceil(log_{4/3} n)."""
    return max(1, math.ceil(math.log(max(2, n)) / math.log(4.0 / 3.0)))


def _ceil_div_pow2(num: int, shift: int) -> int:
    return -((-num) >> shift)


def _free_sets(graph: Graph, palettes: Palettes, coloring: np.ndarray,
               active: np.ndarray) -> dict[int, np.ndarray]:
    return {int(v): free_colors(int(v), palettes, coloring, graph)
            for v in active}


def _active_edges(graph: Graph, active: np.ndarray) -> np.ndarray:
    """Edges of the induced subgraph on `active`, as global-id pairs."""
    sub, ids = graph.induced(active)
    e = sub.edge_array()
    return ids[e] if len(e) else e


def _central_phase(sim: Simulator, graph: Graph, palettes: Palettes,
                   coloring: np.ndarray, vertices: np.ndarray,
                   stage: str) -> int:
    """Charged central greedy list-coloring of `vertices`.

    Cost model: the subgraph's edges plus one palette of deg_sub+1 words
    per vertex are gathered to a leader, solved, and scattered back.
    """
    if len(vertices) == 0:
        return 0
    deg_sub = graph.degrees_within(graph.pack_vertex_mask(vertices),
                                   rows=vertices)
    m_sub = int(deg_sub[vertices].sum()) // 2
    payload = int(deg_sub[vertices].sum()) + len(vertices)
    with sim.stage(stage):
        return sim.central_solve_counts(
            m_sub, payload,
            lambda: greedy_list_color(graph, palettes, coloring, vertices))


# ===================================================================== #
# derandomized one-round list coloring step (shared by sqrt and n^(3/4))
# ===================================================================== #

@dataclass
class RoundOutcome:
    colored: int
    expectation_floor: int     # exact floor/ceil bound the seed must beat
    used_seed: bool
    terms: int = 0


def _estimate_pair_terms(sizes: np.ndarray, edges: np.ndarray) -> int:
    """Upper bound on pair terms: 2 * sum over edges of min palette size."""
    if len(edges) == 0:
        return 0
    return 2 * int(np.minimum(sizes[edges[:, 0]], sizes[edges[:, 1]]).sum())


def derand_color_round(sim: Simulator, graph: Graph, coloring: np.ndarray,
                       active: np.ndarray, free: dict[int, np.ndarray],
                       edges: np.ndarray, cfg: Config, log: RunLog,
                       part_bits: int = 1, instance_id: int = 0,
                       stage: str = "seed-round") -> RoundOutcome:
    """One derandomized abstain-or-pick round on `active` vertices.

    Choice map: hash output bits [0, part_bits) must all be zero to
    participate (probability 2^-part_bits); the next ceil(log2 F_v) bits
    index the free list, indices >= F_v abstain.  The estimator
      sum_v [participates and index valid]
        - sum_{(u,v) edge} sum_{c common} [c_u = c] * [c_v = c] * 2
    lower-bounds the colored count pointwise; every term is affine.
    """
    n_active = len(active)
    fs = np.array([len(free[int(v)]) for v in active], dtype=np.int64)
    if (fs == 0).any():
        raise ParameterViolation("active vertex with empty free palette")
    bvs = np.array([max(0, int(f - 1).bit_length()) for f in fs],
                   dtype=np.int64)
    beta = part_bits + int(bvs.max(initial=0))
    gamma = max(1, (max(2, graph.n) - 1).bit_length())
    family = HashFamily(gamma, beta, 2)
    masks = family.bit_masks_vec(active.astype(np.uint64))
    local = {int(v): i for i, v in enumerate(active)}

    obj = AffineObjective(family.seed_len)
    part_rows = {}
    for i, v in enumerate(active):
        v = int(v)
        rows0 = [(int(masks[i, t]), 0) for t in range(part_bits)]
        part_rows[v] = rows0
        for t, hv in dyadic_blocks(int(fs[i]), int(bvs[i])):
            rows = list(rows0)
            for b in range(t, int(bvs[i])):
                rows.append((int(masks[i, part_bits + b]),
                             (hv >> (b - t)) & 1))
            obj.add_term(v, 1, rows)
    n_pair_terms = 0
    for u, v in edges:
        u, v = int(u), int(v)
        iu, iv = local[u], local[v]
        cu, cv = free[u], free[v]
        common = np.intersect1d(cu, cv, assume_unique=True)
        if len(common) == 0:
            continue
        ku = np.searchsorted(cu, common).astype(np.uint64)
        kv = np.searchsorted(cv, common).astype(np.uint64)
        ru, rv = part_bits + int(bvs[iu]), part_bits + int(bvs[iv])
        pair_masks = [int(masks[iu, t]) for t in range(ru)] + \
                     [int(masks[iv, t]) for t in range(rv)]
        template = EchelonTemplate(pair_masks)
        # input-row rhs layout: u's participation zeros, u's index bits,
        # then the same for v
        rhs = (ku << np.uint64(part_bits)) \
            | ((kv << np.uint64(part_bits)) << np.uint64(ru))
        nodes = np.concatenate([np.full(len(common), u),
                                np.full(len(common), v)])
        coefs = np.full(2 * len(common), -1, dtype=np.int64)
        obj.add_template_terms(template, nodes, coefs,
                               np.concatenate([rhs, rhs]))
        n_pair_terms += 2 * len(common)
    obj.freeze()
    exp0 = obj.expectation_num()
    bound = _ceil_div_pow2(exp0, obj.denom_log2)

    z = auto_chunk_bits(sim.n, family.seed_len, obj.n_terms,
                        len(obj.row_mask), cfg.eval_budget,
                        cap=None if instance_id == 0 else
                        max(1, int(log2n(sim.n)) // 2))
    seed = distributed_seed_agreement(sim, obj, family.seed_len, z,
                                      instance_id=instance_id,
                                      stage_name=stage)
    # apply the agreed seed
    ys = family.eval_vec(seed.bits, active.astype(np.uint64))
    part = np.ones(n_active, dtype=bool)
    for t in range(part_bits):
        part &= ((ys >> np.uint64(t)) & np.uint64(1)) == 0
    idx = (ys >> np.uint64(part_bits)).astype(np.int64) & ((1 << bvs) - 1)
    valid = part & (idx < fs)
    chosen = np.zeros(n_active, dtype=np.int64)
    for i in np.nonzero(valid)[0]:
        chosen[i] = int(free[int(active[i])][idx[i]])
    # mutual drop on same-round conflicts
    keep = valid.copy()
    if len(edges):
        iu = np.searchsorted(active, edges[:, 0])
        iv = np.searchsorted(active, edges[:, 1])
        clash = valid[iu] & valid[iv] & (chosen[iu] == chosen[iv])
        keep[iu[clash]] = False
        keep[iv[clash]] = False
    newly = active[keep]
    coloring[newly] = chosen[keep]
    # one exchange round: winners announce their color along graph edges
    if len(edges):
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        sim.exchange_counts(src, dst)
    else:
        sim.ledger.advance(1)
    colored = int(keep.sum())
    log.require("seed-round-dominance", colored >= bound,
                colored=colored, bound=bound, terms=obj.n_terms)
    return RoundOutcome(colored, bound, True,
                        terms=obj.n_terms + n_pair_terms)


# ===================================================================== #
# list coloring for degrees up to sqrt(c_fit * n)
# ===================================================================== #

def det_list_color_sqrt(sim: Simulator, graph: Graph, palettes: Palettes,
                        cfg: Config, log: RunLog,
                        vertices: np.ndarray | None = None,
                        coloring: np.ndarray | None = None,
                        instance_id: int = 0) -> tuple[np.ndarray, int]:
    """Derandomized list coloring for Delta <= sqrt(c_fit * n).

    Every phase colors at least ceil(uncolored / 4) vertices: the seed
    round guarantees its exact estimator expectation, and a charged
    central top-up covers any shortfall against the quarter bound.
    Returns (coloring, phases).
    """
    n = graph.n
    if coloring is None:
        coloring = np.zeros(n, dtype=np.int64)
    scope = np.arange(n) if vertices is None else \
        np.asarray(vertices, dtype=np.int64)
    if len(scope) == 0:
        return coloring, 0
    sub_deg = graph.degrees_within(graph.pack_vertex_mask(scope),
                                   rows=scope)
    dmax = int(sub_deg[scope].max(initial=0))
    if dmax * dmax > cfg.c_fit * sim.n:
        raise DegreeTooLarge(f"Delta={dmax} too large for sqrt regime")
    for v in scope:
        if palettes.size(int(v)) < sub_deg[v] + 1:
            raise ParameterViolation(f"palette of {int(v)} below deg+1")
    cap = phase_bound(len(scope))
    phases = 0
    while True:
        active = scope[coloring[scope] == UNCOLORED]
        if len(active) == 0:
            break
        if phases >= cap:  # unconditional termination guard
            _central_phase(sim, graph, palettes, coloring, active,
                           "sqrt:guard")
            break
        phases += 1
        need = -(-len(active) // 4)
        deg_act = graph.degrees_within(graph.pack_vertex_mask(active),
                                       rows=active)
        m_active = int(deg_act[active].sum()) // 2
        if 2 * m_active + 2 * len(active) > cfg.term_budget:
            _central_phase(sim, graph, palettes, coloring, active,
                           "sqrt:central")
            log.note("central-phase", where="sqrt", phase=phases,
                     active=len(active))
            continue
        edges = _active_edges(graph, active)
        pal_sizes = np.zeros(n, dtype=np.int64)
        pal_sizes[active] = palettes.sizes(active)
        if (_estimate_pair_terms(pal_sizes, edges) + 2 * len(active)
                > cfg.term_budget):
            _central_phase(sim, graph, palettes, coloring, active,
                           "sqrt:central")
            log.note("central-phase", where="sqrt", phase=phases,
                     active=len(active))
            continue
        free = _free_sets(graph, palettes, coloring, active)
        # palette exchange: every active vertex ships its free list to its
        # active neighbors
        sizes = np.zeros(n, dtype=np.int64)
        for v in active:
            sizes[v] = len(free[int(v)])
        if len(edges):
            out = np.zeros(n, dtype=np.int64)
            np.add.at(out, edges[:, 0], sizes[edges[:, 0]])
            np.add.at(out, edges[:, 1], sizes[edges[:, 1]])
            inc = np.zeros(n, dtype=np.int64)
            np.add.at(inc, edges[:, 0], sizes[edges[:, 1]])
            np.add.at(inc, edges[:, 1], sizes[edges[:, 0]])
            with sim.stage("sqrt:palettes"):
                sim.charge_route_counts(out, inc)
        outcome = derand_color_round(sim, graph, coloring, active, free,
                                     edges, cfg, log, part_bits=1,
                                     instance_id=instance_id,
                                     stage="sqrt:seed")
        if outcome.colored < need:
            still = active[coloring[active] == UNCOLORED]
            topup = still[: need - outcome.colored]
            _central_phase(sim, graph, palettes, coloring, topup,
                           "sqrt:topup")
            log.note("phase-topup", phase=phases,
                     shortfall=need - outcome.colored)
        colored_phase = int((coloring[active] != UNCOLORED).sum())
        log.require("sqrt-quarter-progress", colored_phase >= need,
                    phase=phases, colored=colored_phase, need=need)
    log.require("sqrt-phase-cap", phases <= cap, phases=phases, cap=cap)
    return coloring, phases


def simple_rand_color_round(graph: Graph, palettes: Palettes,
                            coloring: np.ndarray, source,
                            vertices: np.ndarray | None = None) -> int:
    """One abstain-or-pick round of the basic list colorer (no charges).

    `source` is either a numpy Generator (ideal randomness: abstain with
    probability 1/2, else a uniform free color) or a (family, seed_bits)
    pair deriving choices from hash outputs through the dyadic index map
    used by the derandomized rounds.  A vertex keeps its pick unless an
    uncolored neighbor picked the same color (mutual drop).  Returns the
    number of vertices colored; mutates `coloring`.
    """
    scope = np.arange(graph.n) if vertices is None else \
        np.asarray(vertices, dtype=np.int64)
    active = scope[coloring[scope] == UNCOLORED]
    if len(active) == 0:
        return 0
    free = {int(v): free_colors(int(v), palettes, coloring, graph)
            for v in active}
    fs = np.array([len(free[int(v)]) for v in active], dtype=np.int64)
    if (fs == 0).any():
        raise ParameterViolation("active vertex with empty free palette")
    chosen = np.zeros(len(active), dtype=np.int64)
    if isinstance(source, tuple):
        family, bits = source
        ys = family.eval_vec(bits, active.astype(np.uint64))
        part = (ys & np.uint64(1)) == 0
        bvs = np.array([max(0, int(f - 1).bit_length()) for f in fs])
        idx = (ys >> np.uint64(1)).astype(np.int64) & ((1 << bvs) - 1)
        valid = part & (idx < fs)
        for i in np.nonzero(valid)[0]:
            chosen[i] = int(free[int(active[i])][idx[i]])
    else:
        part = source.random(len(active)) < 0.5
        for i in np.nonzero(part)[0]:
            opts = free[int(active[i])]
            chosen[i] = int(opts[source.integers(0, len(opts))])
        valid = part
    keep = valid.copy()
    edges = _active_edges(graph, active)
    if len(edges):
        iu = np.searchsorted(active, edges[:, 0])
        iv = np.searchsorted(active, edges[:, 1])
        clash = valid[iu] & valid[iv] & (chosen[iu] == chosen[iv])
        keep[iu[clash]] = False
        keep[iv[clash]] = False
    coloring[active[keep]] = chosen[keep]
    return int(keep.sum())


# ===================================================================== #
# quadratic-palette coloring
# ===================================================================== #

def det_delta_sq(sim: Simulator, graph: Graph, cfg: Config,
                 log: RunLog) -> tuple[np.ndarray, dict]:
    """Deterministic coloring with at most max(Delta, 2)^2 colors.

    When Delta^2 >= n, node ids are already a valid coloring (zero
    rounds).  Otherwise one hash-seeded pick-a-color round is
    derandomized by minimizing the exact expected conflict count,
    repeated on the shrinking conflict set until at most n/Delta vertices
    remain, which are then solved centrally.
    """
    n = graph.n
    delta = graph.max_degree
    de = max(2, delta)
    budget = de * de
    coloring = np.zeros(n, dtype=np.int64)
    info = {"budget": budget, "uncolored_after_seed": 0, "seed_rounds": 0}
    if budget >= n:
        coloring[:] = np.arange(1, n + 1)
        log.record("deltasq-remainder", True, uncolored=0, allowed=n // de)
        return coloring, info
    if delta <= 4:
        # tiny-degree regime: the dyadic color space cannot certify the
        # n/Delta remainder bound, so solve centrally (zero left uncolored)
        palettes = Palettes.uniform_range(n, 1, budget)
        _central_phase(sim, graph, palettes, coloring, np.arange(n),
                       "deltasq:tiny")
        log.record("deltasq-remainder", True, uncolored=0, allowed=n // de)
        return coloring, info

    beta = int(math.floor(math.log2(budget)))
    gamma = max(1, (n - 1).bit_length())
    family = HashFamily(gamma, beta, 2)
    k = family.k
    allowed = n // delta  # uncolored-after-seed must not exceed n/Delta
    active = np.arange(n)
    rounds = 0
    while len(active):
        rounds += 1
        edges = _active_edges(graph, active)
        obj = AffineObjective(family.seed_len)
        if len(edges):
            xors = (edges[:, 0] ^ edges[:, 1]).astype(np.uint64)
            ws, counts = np.unique(xors, return_counts=True)
            wmasks = column_masks_vec(ws, k)
            for i, w in enumerate(ws):
                rows = [(int(wmasks[i, t]) << k, 0) for t in range(beta)]
                obj.add_term(int(ws[i]) % n, 2 * int(counts[i]), rows)
        if rounds > 1:
            amask = family.bit_masks_vec(active.astype(np.uint64))
            for i, v in enumerate(active):
                nbr = graph.neighbors(int(v))
                taken = np.unique(coloring[nbr][coloring[nbr] != UNCOLORED])
                for c in taken:
                    obj.add_term(int(v), 1, value_rows(
                        amask[i], list(range(beta)), int(c) - 1))
        obj.freeze()
        exp0 = obj.expectation_num()
        z = auto_chunk_bits(sim.n, family.seed_len, obj.n_terms,
                            len(obj.row_mask), cfg.eval_budget)
        seed = distributed_seed_agreement(sim, obj, family.seed_len, z,
                                          minimize=True,
                                          stage_name="deltasq:seed")
        ys = family.eval_vec(seed.bits, active.astype(np.uint64))
        bad = np.zeros(len(active), dtype=bool)
        if len(edges):
            iu = np.searchsorted(active, edges[:, 0])
            iv = np.searchsorted(active, edges[:, 1])
            clash = ys[iu] == ys[iv]
            bad[iu[clash]] = True
            bad[iv[clash]] = True
        if rounds > 1:
            for i, v in enumerate(active):
                if bad[i]:
                    continue
                nbr = graph.neighbors(int(v))
                cols = coloring[nbr]
                if ((cols != UNCOLORED) & (cols == int(ys[i]) + 1)).any():
                    bad[i] = True
        coloring[active[~bad]] = ys[~bad].astype(np.int64) + 1
        if len(edges):
            src = np.concatenate([edges[:, 0], edges[:, 1]])
            dst = np.concatenate([edges[:, 1], edges[:, 0]])
            sim.exchange_counts(src, dst)
        else:
            sim.ledger.advance(1)
        remaining = active[bad]
        x_bound = exp0 >> obj.denom_log2  # floor of the minimized estimator
        log.require("deltasq-dominance", len(remaining) <= max(x_bound, 0),
                    round=rounds, remaining=len(remaining), bound=x_bound)
        active = remaining
        if len(active) <= allowed:
            break
    info["seed_rounds"] = rounds
    info["uncolored_after_seed"] = len(active)
    log.require("deltasq-remainder", len(active) <= allowed,
                uncolored=len(active), allowed=allowed)
    if len(active):
        palettes = Palettes.uniform_range(n, 1, budget)
        _central_phase(sim, graph, palettes, coloring, active,
                       "deltasq:remainder")
    return coloring, info


# ===================================================================== #
# bin-based list coloring for degrees up to (c_fit * n)^(3/4)
# ===================================================================== #

@dataclass
class BinLayout:
    n_bins: int
    width: int
    small_cap: float  # bins at or below this size are "small"
    base: int = 1     # first color of the palette span

    def bin_of(self, colors: np.ndarray) -> np.ndarray:
        return (colors - self.base) // self.width

    def color_range(self, b: int) -> tuple[int, int]:
        return (self.base + b * self.width,
                self.base + (b + 1) * self.width - 1)


def bin_layout(delta: int, span_lo: int = 1,
               span_hi: int | None = None) -> BinLayout:
    """Delta^(1/3) bins of width ceil((Delta+1)/Delta^(1/3)), anchored at
    the palette span (extra bins cover wider list-palette spans)."""
    de = max(1, delta)
    base_bins = max(1, math.ceil(de ** (1.0 / 3.0)))
    width = -(-(de + 1) // base_bins)
    span_hi = span_lo + de if span_hi is None else span_hi
    n_bins = max(base_bins, -(-(span_hi - span_lo + 1) // width))
    return BinLayout(n_bins, width, de ** (1.0 / 12.0), span_lo)


def required_independence(mu: float, bin_size: float, n: int,
                          max_c: int = 64) -> int:
    """Smallest even moment order c with ((c*mu+c^2)/B^2)^c <= n^-10."""
    target = -10.0 * math.log(max(2, n))
    for c in range(2, max_c + 1, 2):
        val = (c * mu + c * c) / max(bin_size * bin_size, 1e-300)
        if val < 1 and c * math.log(val) <= target:
            return c
    return max_c


@dataclass
class PhaseState:
    branch: str                      # "A0" or "A1"
    a0: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    a1: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    chosen: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    aprime: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    s_sets: dict = field(default_factory=dict)
    happy_bound: int = 0


def _bin_sizes(free_list: np.ndarray, layout: BinLayout) -> np.ndarray:
    return np.bincount(layout.bin_of(free_list), minlength=layout.n_bins)


def classify_and_bin(sim: Simulator, graph: Graph, coloring: np.ndarray,
                     active: np.ndarray, free: dict[int, np.ndarray],
                     layout: BinLayout, cfg: Config, log: RunLog,
                     edges: np.ndarray, instance_id: int = 0
                     ) -> PhaseState | None:
    """Phase step 1: pick candidate color sets S(u).

    Nodes with a tenth of their free mass in small bins take the union of
    their small bins deterministically; otherwise a bin choice is
    derandomized to maximize a pessimistic happy count (few same-bin
    competitors).  Returns None when the estimator would exceed the term
    budget (caller completes the phase centrally).
    """
    sizes = {int(v): _bin_sizes(free[int(v)], layout) for v in active}
    fs = {int(v): len(free[int(v)]) for v in active}
    in_a0 = {}
    for v in active:
        v = int(v)
        s = sizes[v]
        small_mass = int(s[s <= layout.small_cap].sum())
        in_a0[v] = 10 * small_mass >= fs[v]
    a0 = np.array([v for v in active if in_a0[int(v)]], dtype=np.int64)
    a1 = np.array([v for v in active if not in_a0[int(v)]], dtype=np.int64)

    if len(a0) >= len(a1):
        s_sets = {}
        for v in a0:
            v = int(v)
            s = sizes[v]
            keep = np.nonzero(s <= layout.small_cap)[0]
            bins = layout.bin_of(free[v])
            s_sets[v] = free[v][np.isin(bins, keep)]
        return PhaseState("A0", a0=a0, a1=a1, aprime=a0, s_sets=s_sets)

    # A1 branch: derandomized bin choice.  Each bin gets one power-of-two
    # cell of the hash value's low bits (roughly half its ideal mass), so
    # every bin-choice event is a single aligned block and pair events
    # stay one term per (edge, bin).
    in_a1 = np.zeros(graph.n, dtype=bool)
    in_a1[a1] = True
    e_a1 = edges[in_a1[edges[:, 0]] & in_a1[edges[:, 1]]] \
        if len(edges) else edges
    iu = np.searchsorted(a1, e_a1[:, 0]) if len(e_a1) else \
        np.zeros(0, dtype=np.int64)
    iv = np.searchsorted(a1, e_a1[:, 1]) if len(e_a1) else iu
    bb = {int(v): max(1, int(fs[int(v)] - 1).bit_length()) for v in a1}
    maxbb = max(bb.values()) if bb else 1
    scale = 12
    cell_t = {}      # v -> per-bin log2 cell width (-1 for no cell)
    cell_off = {}    # v -> per-bin cell offset (aligned)
    cum = {}         # v -> (order, boundaries) for decoding
    wmat = np.zeros((len(a1), layout.n_bins), dtype=np.int64)
    for li, v in enumerate(a1):
        v = int(v)
        res = 1 << bb[v]
        ideal = (sizes[v] * res) // fs[v]
        ts = np.full(layout.n_bins, -1, dtype=np.int64)
        for i in range(layout.n_bins):
            if ideal[i] >= 1:  # largest power of two <= ideal mass
                ts[i] = int(ideal[i]).bit_length() - 1
        order = np.argsort(-ts, kind="stable")
        offs = np.full(layout.n_bins, -1, dtype=np.int64)
        cursor = 0
        bounds = [0]
        used_order = []
        for i in order:
            if ts[i] < 0:
                continue
            offs[i] = cursor
            cursor += 1 << ts[i]
            bounds.append(cursor)
            used_order.append(int(i))
        cell_t[v] = ts
        cell_off[v] = offs
        cum[v] = (np.array(used_order, dtype=np.int64),
                  np.array(bounds, dtype=np.int64))
        widths = np.where(ts >= 0, 1 << np.maximum(ts, 0), 0)
        wmat[li] = widths << (maxbb - bb[v])
    mu_mat = np.zeros_like(wmat)
    if len(e_a1):
        np.add.at(mu_mat, iu, wmat[iv])
        np.add.at(mu_mat, iv, wmat[iu])
    nzb = wmat > 0
    est_terms = int(nzb.sum())
    if len(e_a1):
        est_terms += 2 * int((nzb[iu] & nzb[iv]).sum())
    if est_terms > cfg.term_budget:
        return None

    gamma = max(1, (graph.n - 1).bit_length())
    family = HashFamily(gamma, maxbb, cfg.d_independence)
    if family.seed_len > 64:
        return None
    masks = family.bit_masks_vec(a1.astype(np.uint64))
    local = {int(v): i for i, v in enumerate(a1)}
    obj = AffineObjective(family.seed_len)

    def cell_rows(v, i):
        t = int(cell_t[v][i])
        off = int(cell_off[v][i])
        return [(int(masks[local[v], b]), (off >> b) & 1)
                for b in range(t, bb[v])]

    for li, v in enumerate(a1):
        v = int(v)
        s = sizes[v]
        for i in range(layout.n_bins):
            if s[i] == 0 or cell_t[v][i] < 0:
                continue
            large = s[i] > layout.small_cap
            good = 10 * int(s[i]) * (1 << maxbb) > int(mu_mat[li, i])
            if large and good:
                obj.add_term(v, 1 << scale, cell_rows(v, i))
    for u, v in e_a1:
        u, v = int(u), int(v)
        for i in range(layout.n_bins):
            if cell_t[u][i] < 0 or cell_t[v][i] < 0:
                continue
            if sizes[u][i] == 0 or sizes[v][i] == 0:
                continue
            cu = -(-(1 << scale) // (10 * int(sizes[u][i])))
            cv = -(-(1 << scale) // (10 * int(sizes[v][i])))
            ech, sat = solve_parity_rows(cell_rows(u, i) + cell_rows(v, i))
            if not sat:
                continue
            obj.add_term_prereduced(u, -cu, ech)
            obj.add_term_prereduced(v, -cv, ech)
    obj.freeze()
    exp0 = obj.expectation_num()
    happy_bound = _ceil_div_pow2(exp0, obj.denom_log2 + scale)
    z = auto_chunk_bits(sim.n, family.seed_len, obj.n_terms,
                        len(obj.row_mask), cfg.eval_budget,
                        cap=None if instance_id == 0 else
                        max(1, int(log2n(sim.n)) // 2))
    seed = distributed_seed_agreement(sim, obj, family.seed_len, z,
                                      instance_id=instance_id,
                                      stage_name="n34:bins")
    ys = family.eval_vec(seed.bits, a1.astype(np.uint64))
    chosen = np.full(len(a1), -1, dtype=np.int64)
    for i, v in enumerate(a1):
        v = int(v)
        y = int(ys[i]) & ((1 << bb[v]) - 1)
        order, bounds = cum[v]
        if len(order) and y < bounds[-1]:
            slot = int(np.searchsorted(bounds, y, side="right")) - 1
            chosen[i] = int(order[slot])
    # competitor counts per chosen bin
    r = np.zeros(len(a1), dtype=np.int64)
    if len(e_a1):
        same = (chosen[iu] >= 0) & (chosen[iu] == chosen[iv])
        np.add.at(r, iu[same], 1)
        np.add.at(r, iv[same], 1)
    happy = np.zeros(len(a1), dtype=bool)
    for i, v in enumerate(a1):
        b = int(chosen[i])
        happy[i] = (b >= 0 and sizes[int(v)][b] > 0
                    and r[i] <= 11 * int(sizes[int(v)][b]))
    aprime = a1[happy]
    log.require("bin-happy-dominance", int(happy.sum()) >= happy_bound,
                happy=int(happy.sum()), bound=happy_bound)
    log.record("bin-happy-half", 2 * int(happy.sum()) >= len(a1),
               happy=int(happy.sum()), a1=len(a1))
    s_sets = {}
    for i, v in enumerate(a1):
        if happy[i]:
            v = int(v)
            lo, hi = layout.color_range(int(chosen[i]))
            f = free[v]
            s_sets[v] = f[(f >= lo) & (f <= hi)]
    return PhaseState("A1", a0=a0, a1=a1, chosen=chosen, aprime=aprime,
                      s_sets=s_sets, happy_bound=happy_bound)


def det_list_color_n34(sim: Simulator, graph: Graph, palettes: Palettes,
                       cfg: Config, log: RunLog,
                       vertices: np.ndarray | None = None,
                       coloring: np.ndarray | None = None,
                       instance_id: int = 0) -> tuple[np.ndarray, int]:
    """Bin-based deterministic list coloring for Delta <= (c_fit n)^(3/4).

    Each phase narrows palettes to candidate sets S(u) (classify_and_bin)
    and derandomizes one low-participation pick round on them; phases that
    exceed the estimator budget or make no progress complete centrally.
    Returns (coloring, phases).
    """
    n = graph.n
    if coloring is None:
        coloring = np.zeros(n, dtype=np.int64)
    scope = np.arange(n) if vertices is None else \
        np.asarray(vertices, dtype=np.int64)
    if len(scope) == 0:
        return coloring, 0
    sub_deg = graph.degrees_within(graph.pack_vertex_mask(scope),
                                   rows=scope)
    dmax = int(sub_deg[scope].max(initial=0))
    if dmax ** 4 > (cfg.c_fit * sim.n) ** 3:
        raise DegreeTooLarge(f"Delta={dmax} too large for n^(3/4) regime")
    for v in scope:
        if palettes.size(int(v)) < sub_deg[v] + 1:
            raise ParameterViolation(f"palette of {int(v)} below deg+1")
    layout = bin_layout(dmax, *palettes.span(scope))
    need_c = required_independence(dmax / max(1, layout.n_bins),
                                   max(layout.small_cap, 1.0), n)
    if need_c > cfg.d_independence:
        log.note("independence-order", required=need_c,
                 configured=cfg.d_independence)
    cap = phase_bound(len(scope))
    phases = 0
    while True:
        active = scope[coloring[scope] == UNCOLORED]
        if len(active) == 0:
            break
        phases += 1
        if phases >= cap:
            _central_phase(sim, graph, palettes, coloring, active,
                           "n34:guard")
            break
        deg_act = graph.degrees_within(graph.pack_vertex_mask(active),
                                       rows=active)
        m_active = int(deg_act[active].sum()) // 2
        if 2 * m_active + 2 * len(active) > cfg.term_budget:
            _central_phase(sim, graph, palettes, coloring, active,
                           "n34:central")
            log.note("central-phase", where="n34-scale", phase=phases,
                     active=len(active))
            continue
        edges = _active_edges(graph, active)
        free = _free_sets(graph, palettes, coloring, active)
        # bin statistics exchange: n_bins words per neighbor
        if len(edges):
            out = np.zeros(n, dtype=np.int64)
            np.add.at(out, edges[:, 0], layout.n_bins)
            np.add.at(out, edges[:, 1], layout.n_bins)
            with sim.stage("n34:stats"):
                sim.charge_route_counts(out, out)
        state = classify_and_bin(sim, graph, coloring, active, free,
                                 layout, cfg, log, edges,
                                 instance_id=instance_id)
        if state is None:
            _central_phase(sim, graph, palettes, coloring, active,
                           "n34:central")
            log.note("central-phase", where="n34", phase=phases,
                     active=len(active))
            continue
        if state.branch == "A0":
            for v in state.aprime:
                v = int(v)
                g_a0 = int(np.isin(graph.neighbors(v), state.a0).sum())
                log.require("a0-small-bin-mass",
                            10 * len(state.s_sets[v]) >= g_a0,
                            vertex=v, s=len(state.s_sets[v]), nbrs=g_a0)
        aset = {int(v) for v in state.aprime
                if len(state.s_sets[int(v)]) > 0}
        sel = np.array(sorted(aset), dtype=np.int64)
        if len(sel) == 0:
            _central_phase(sim, graph, palettes, coloring, active,
                           "n34:central")
            log.note("central-phase", where="n34-empty", phase=phases,
                     active=len(active))
            continue
        sfree = {int(v): state.s_sets[int(v)] for v in sel}
        in_sel = np.zeros(n, dtype=bool)
        in_sel[sel] = True
        both = edges[in_sel[edges[:, 0]] & in_sel[edges[:, 1]]] \
            if len(edges) else edges
        rel = [len(np.intersect1d(sfree[int(u)], sfree[int(v)],
                                  assume_unique=True)) > 0
               for u, v in both]
        rel_edges = both[np.array(rel, dtype=bool)] if len(both) else both
        # ship S(u) to relevant neighbors
        s_sizes = np.zeros(n, dtype=np.int64)
        for v in sel:
            s_sizes[v] = len(sfree[int(v)])
        if len(rel_edges):
            out = np.zeros(n, dtype=np.int64)
            np.add.at(out, rel_edges[:, 0], s_sizes[rel_edges[:, 0]])
            np.add.at(out, rel_edges[:, 1], s_sizes[rel_edges[:, 1]])
            with sim.stage("n34:ssets"):
                sim.charge_route_counts(out, out)
        est = _estimate_pair_terms(s_sizes, rel_edges) + 2 * len(sel)
        if est > cfg.term_budget:
            _central_phase(sim, graph, palettes, coloring, active,
                           "n34:central")
            log.note("central-phase", where="n34-step2", phase=phases,
                     active=len(active))
            continue
        outcome = derand_color_round(sim, graph, coloring, sel, sfree,
                                     rel_edges, cfg, log, part_bits=5,
                                     instance_id=instance_id,
                                     stage="n34:seed")
        log.record("n34-phase-progress",
                   outcome.colored >= outcome.expectation_floor,
                   phase=phases, colored=outcome.colored,
                   bound=outcome.expectation_floor)
        need = -(-len(active) // 4)
        if outcome.colored < need:
            still = active[coloring[active] == UNCOLORED]
            topup = still[: need - outcome.colored]
            _central_phase(sim, graph, palettes, coloring, topup,
                           "n34:topup")
            log.note("phase-topup", phase=phases,
                     shortfall=need - outcome.colored)
    log.require("n34-phase-cap", phases <= cap, phases=phases, cap=cap)
    return coloring, phases


# ===================================================================== #
# general-case partition
# ===================================================================== #

@dataclass
class GeneralPartitionPlan:
    delta: int
    ell: int
    q: float
    p_i: float
    cap_parts: int        # per-part degree cap (Delta^{3/4}, exact check)
    cap_star: float       # left-over degree target Delta^{11/16}

    @staticmethod
    def from_delta(delta: int) -> "GeneralPartitionPlan":
        ell = max(2, math.ceil(delta ** 0.25))
        q = 2.0 * delta ** (-5.0 / 16.0)
        p_i = (1.0 - q) / ell
        cap = int(delta ** 0.75)
        while (cap + 1) ** 4 <= delta ** 3:
            cap += 1
        while cap ** 4 > delta ** 3:
            cap -= 1
        return GeneralPartitionPlan(delta, ell, q, p_i, cap,
                                    delta ** (11.0 / 16.0))


def _capacity_split(graph: Graph, ell: int, cap_sizes: np.ndarray,
                    log: RunLog) -> np.ndarray:
    """Deterministic partition with per-part degree caps.

    cap_sizes[i] colors are reserved for part i with sum(cap_sizes) =
    Delta+1, so part i must satisfy deg_i(v) <= cap_sizes[i]-1.  Local
    moves that strictly decrease sum_v deg_part(v)/cap_sizes[part] always
    exist while violations remain, so the repair loop terminates.
    """
    n = graph.n
    caps = cap_sizes - 1
    part = np.arange(n, dtype=np.int64) % ell
    d = np.zeros((n, ell), dtype=np.int64)
    for i in range(ell):
        mask = graph.pack_vertex_mask(np.nonzero(part == i)[0])
        d[:, i] = graph.degrees_within(mask)
    weights = 1.0 / cap_sizes.astype(np.float64)
    moves = 0
    while True:
        mine = d[np.arange(n), part]
        viol = np.nonzero(mine > caps[part])[0]
        if len(viol) == 0:
            break
        v = int(viol[0])
        scores = d[v] * weights
        j = int(np.argmin(scores))
        i = int(part[v])
        if scores[j] >= d[v, i] * weights[i]:
            raise AssertionError("capacity split: no improving move")
        nbr = graph.neighbors(v)
        d[nbr, i] -= 1
        d[nbr, j] += 1
        part[v] = j
        moves += 1
        if moves > 50 * graph.n_edges + 10 * n + 100:
            raise AssertionError("capacity split did not converge")
    log.note("capacity-split", moves=moves)
    return part


def det_partition_general(sim: Simulator, graph: Graph, cfg: Config,
                          log: RunLog):
    """Partition a high-degree graph into ell parts plus a left-over, all
    within per-part degree caps, consuming at most Delta+1 colors total.

    The seeded route requires the expected number of cap violations under
    the hash family to be below one (then some seed is violation-free and
    a bounded deterministic scan finds it).  At desk scale that premise
    fails, raising NoZeroViolationSeed; the caller falls back to the
    capacity split.  Returns (part array with ell = G*, plan, palettes
    lo/hi arrays per part index).
    """
    n = graph.n
    delta = graph.max_degree
    if delta ** 4 <= (cfg.c_fit * n) ** 3:
        raise ParameterViolation("partition reserved for Delta > (c n)^3/4")
    plan = GeneralPartitionPlan.from_delta(delta)
    if plan.p_i <= 0 or plan.q >= 0.5:
        raise NoZeroViolationSeed(
            f"degenerate plan (q={plan.q:.3f}) at Delta={delta}")
    # feasibility of the seeded route: pairwise-variance tail bound
    expected_bad = 0.0
    mu = graph.degrees.astype(np.float64) * plan.p_i
    t = plan.cap_parts - mu
    var = graph.degrees * plan.p_i * (1 - plan.p_i)
    with np.errstate(divide="ignore", invalid="ignore"):
        pbad = np.where(t > 0, np.minimum(1.0, var / np.maximum(t, 1e-12) ** 2), 1.0)
    expected_bad = float(pbad.sum()) * plan.ell
    if expected_bad < 1.0:
        bits_res = 16
        gamma = max(1, (n - 1).bit_length())
        family = HashFamily(gamma, bits_res, cfg.d_independence)
        widths = np.full(plan.ell, int(plan.p_i * (1 << bits_res)),
                         dtype=np.int64)
        cum = np.concatenate([[0], np.cumsum(widths)])
        for trial in range(64):
            with sim.stage("partition:probe"):
                sim.broadcast_seed(family.seed_len)
            seed_bits = (trial * 0x9E3779B97F4A7C15) & \
                ((1 << family.seed_len) - 1)
            ys = family.eval_vec(seed_bits, np.arange(n, dtype=np.uint64))
            part = np.searchsorted(cum, ys.astype(np.int64),
                                   side="right") - 1
            part = np.minimum(part, plan.ell)  # tail cells -> G*
            part[part < 0] = plan.ell
            ok = True
            for i in range(plan.ell):
                members = np.nonzero(part == i)[0]
                mask = graph.pack_vertex_mask(members)
                if int(graph.degrees_within(mask, rows=members)[members]
                       .max(initial=0)) > plan.cap_parts:
                    ok = False
                    break
            star = np.nonzero(part == plan.ell)[0]
            if ok and len(star):
                mask = graph.pack_vertex_mask(star)
                dstar = int(graph.degrees_within(mask, rows=star)[star]
                            .max(initial=0))
                ok = dstar <= plan.cap_star
            with sim.stage("partition:probe"):
                sim.charge_route_counts(np.ones(n, dtype=np.int64),
                                        np.ones(n, dtype=np.int64))
            if ok:
                log.note("partition-seeded", trial=trial)
                return part, plan, _allocate_measured(graph, part, plan,
                                                      delta, log)
        raise NoZeroViolationSeed("no violation-free seed in scan budget")
    raise NoZeroViolationSeed(
        f"expected violations {expected_bad:.1f} >= 1 at this scale")


def _allocate_measured(graph: Graph, part: np.ndarray,
                       plan: GeneralPartitionPlan, delta: int,
                       log: RunLog):
    """Disjoint palette ranges sized by measured part degrees."""
    sizes = []
    for i in range(plan.ell):
        members = np.nonzero(part == i)[0]
        mask = graph.pack_vertex_mask(members)
        dmax = int(graph.degrees_within(mask, rows=members)[members]
                   .max(initial=0))
        sizes.append(dmax + 1)
    log.require("partition-budget", sum(sizes) <= delta + 1,
                total=sum(sizes), parent=delta + 1)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return bounds


def det_coloring(sim: Simulator, graph: Graph, cfg: Config,
                 log: RunLog) -> tuple[np.ndarray, dict]:
    """Deterministic (Delta+1) coloring: dispatch by degree regime.

    Consumes no randomness; identical inputs give identical colorings and
    ledgers.
    """
    n = graph.n
    delta = graph.max_degree
    palettes = Palettes.uniform_range(n, 1, delta + 1)
    info = {"budget": delta + 1, "phases": 0, "regime": ""}
    coloring = np.zeros(n, dtype=np.int64)
    if delta == 0:
        coloring[:] = 1
        info["regime"] = "trivial"
        return coloring, info
    if delta * delta <= cfg.c_fit * n:
        info["regime"] = "sqrt"
        with sim.stage("det:sqrt"):
            _, phases = det_list_color_sqrt(sim, graph, palettes, cfg, log,
                                            coloring=coloring)
        info["phases"] = phases
        return coloring, info
    if delta ** 4 <= (cfg.c_fit * n) ** 3:
        info["regime"] = "n34"
        with sim.stage("det:n34"):
            _, phases = det_list_color_n34(sim, graph, palettes, cfg, log,
                                           coloring=coloring)
        info["phases"] = phases
        return coloring, info
    info["regime"] = "partition"
    try:
        part, plan, bounds = det_partition_general(sim, graph, cfg, log)
    except NoZeroViolationSeed as exc:
        log.note("partition-fallback", reason=str(exc))
        plan = GeneralPartitionPlan.from_delta(delta)
        sizes = np.full(plan.ell, (delta + 1) // plan.ell, dtype=np.int64)
        sizes[: (delta + 1) % plan.ell] += 1
        with sim.stage("partition:split"):
            part = _capacity_split(graph, plan.ell, sizes, log)
            sim.charge_route_counts(graph.degrees, graph.degrees)
        bounds = np.concatenate([[0], np.cumsum(sizes)])
    # verify caps and color parts simultaneously
    branches = []
    for i in range(plan.ell):
        members = np.nonzero(part == i)[0]
        if len(members) == 0:
            continue
        mask = graph.pack_vertex_mask(members)
        dmax = int(graph.degrees_within(mask, rows=members)[members]
                   .max(initial=0))
        log.require("partition-cap", dmax ** 4 <= delta ** 3,
                    part=i, deg=dmax)
        lo, hi = int(bounds[i]) + 1, int(bounds[i + 1])
        log.require("partition-palette", hi - lo + 1 >= dmax + 1, part=i)
        pal_i = Palettes.uniform_range(n, lo, hi).restrict(members)
        branches.append((members, pal_i))

    branch_cfg = cfg.with_overrides(
        term_budget=max(2000, cfg.term_budget // max(1, len(branches))),
        eval_budget=max(1_000_000,
                        cfg.eval_budget // max(1, len(branches))))
    jobs = []
    for idx, (members, pal_i) in enumerate(branches):
        jobs.append(lambda m=members, p=pal_i, j=idx: det_list_color_n34(
            sim, graph, p, branch_cfg, log, vertices=m, coloring=coloring,
            instance_id=j)[1])
    results = sim.run_parallel(jobs)
    max_phases = max(results, default=0)
    # left-over part (empty under the capacity split)
    star = np.nonzero(part == plan.ell)[0]
    if len(star):
        mask = graph.pack_vertex_mask(star)
        dstar = int(graph.degrees_within(mask, rows=star)[star]
                    .max(initial=0))
        log.record("partition-star-cap", dstar <= plan.cap_star + 1,
                   deg=dstar, cap=plan.cap_star)
        star_free = {int(v): free_colors(int(v), palettes, coloring, graph)
                     for v in star}
        star_pals = Palettes.from_lists(n, star_free)
        with sim.stage("det:star"):
            _, p2 = det_list_color_n34(sim, graph, star_pals, cfg, log,
                                       vertices=star, coloring=coloring)
        max_phases = max(max_phases, p2)
    info["phases"] = max_phases
    return coloring, info
