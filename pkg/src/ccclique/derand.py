"""d-wise independent hashing and method-of-conditional-expectations search.

The hash family is polynomial evaluation over GF(2^K), K = max(gamma,
beta): a seed of d*K bits is read as d coefficients (LSB-first within each
K-bit chunk, coefficient 0 first) of a degree-(d-1) polynomial, evaluated
at the gamma-bit input and truncated to the low beta output bits.  For any
d distinct inputs the outputs are exactly jointly uniform over a uniform
seed.

Seed searches fix the seed in chunks of z bits, greedily choosing each
chunk assignment to maximize (or minimize) the objective's exact
conditional expectation; ties break toward the smallest assignment value.
Two objective shapes are provided:

* TableObjective - an explicit value table over all seeds (tiny scales,
  oracle tests).
* AffineObjective - a weighted sum of conjunctions of parity constraints
  over seed bits.  Because a fixed input makes every hash output bit a
  parity of seed bits, the success estimators used by the deterministic
  coloring steps take this form, and conditioning on a bit prefix reduces
  to echelon bookkeeping: rows whose pivot is below the prefix are
  consistency checks, rows above it each halve the probability.

The distributed variant runs the same search through the simulator: per
stage every node ships its conditional value to one leader per chunk
assignment (one routing call), leaders aggregate, and the winning
assignment is broadcast.  It returns bit-identical seeds to the offline
search because both use the same integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChunkTooWide, SeedLengthMismatch
from .gf2 import (EchelonTemplate, column_masks_vec, gf_mul,
                  irreducible_poly, solve_parity_rows)


@dataclass(frozen=True)
class Seed:
    """A shared random seed: `bits` packed LSB-first into an int."""

    bits: int
    length: int
    fixed_prefix_len: int = 0

    def bit(self, i: int) -> int:
        return (self.bits >> i) & 1


class HashFamily:
    """d-wise independent functions {0,1}^gamma -> {0,1}^beta."""

    def __init__(self, gamma: int, beta: int, d: int):
        if gamma < 1 or beta < 1 or d < 1:
            raise ValueError("gamma, beta, d must be positive")
        self.gamma, self.beta, self.d = gamma, beta, d
        self.k = max(gamma, beta)
        self.seed_len = d * self.k
        self.poly = irreducible_poly(self.k)

    def coefficients(self, seed_bits: int) -> list[int]:
        mask = (1 << self.k) - 1
        return [(seed_bits >> (c * self.k)) & mask for c in range(self.d)]

    def eval(self, seed_bits: int, x: int) -> int:
        """Evaluate one input (Horner over the field, truncated)."""
        if not (0 <= x < (1 << self.gamma)):
            raise ValueError("input outside gamma bits")
        coeffs = self.coefficients(seed_bits)
        acc = coeffs[-1]
        for c in range(self.d - 2, -1, -1):
            acc = gf_mul(acc, x, self.k) ^ coeffs[c]
        return acc & ((1 << self.beta) - 1)

    def eval_vec(self, seed_bits: int, xs: np.ndarray) -> np.ndarray:
        """Vectorized evaluation for many inputs (requires k <= 31)."""
        if 2 * self.k > 63:
            return np.array([self.eval(seed_bits, int(x)) for x in xs],
                            dtype=np.uint64)
        k = self.k
        f = np.uint64(self.poly)
        xs = np.asarray(xs, dtype=np.uint64)
        coeffs = self.coefficients(seed_bits)
        acc = np.full(len(xs), np.uint64(coeffs[-1]), dtype=np.uint64)
        for c in range(self.d - 2, -1, -1):
            prod = np.zeros_like(acc)
            for j in range(k):
                bit = (xs >> np.uint64(j)) & np.uint64(1)
                prod ^= bit * (acc << np.uint64(j))
            for t in range(2 * k - 2, k - 1, -1):
                hit = (prod >> np.uint64(t)) & np.uint64(1)
                prod ^= hit * (f << np.uint64(t - k))
            acc = prod ^ np.uint64(coeffs[c])
        return acc & np.uint64((1 << self.beta) - 1)

    def bit_masks_vec(self, xs: np.ndarray) -> np.ndarray:
        """Seed-bit parity masks of every output bit, per input.

        Returns (len(xs), beta) uint64; masks[v, t] has seed-bit j set iff
        output bit t of h(xs[v]) depends on seed bit j.  Needs seed_len
        <= 64.
        """
        if self.seed_len > 64:
            raise ValueError("affine masks require seed_len <= 64")
        xs = np.asarray(xs, dtype=np.uint64)
        out = np.zeros((len(xs), self.beta), dtype=np.uint64)
        power = np.ones(len(xs), dtype=np.uint64)
        for c in range(self.d):
            cols = column_masks_vec(power, self.k)  # (n, k)
            out ^= cols[:, : self.beta] << np.uint64(c * self.k)
            if c + 1 < self.d:
                if 2 * self.k > 63:
                    power = np.array(
                        [gf_mul(int(p), int(x), self.k)
                         for p, x in zip(power, xs)], dtype=np.uint64)
                else:
                    nxt = np.zeros_like(power)
                    f = np.uint64(self.poly)
                    for j in range(self.k):
                        bit = (xs >> np.uint64(j)) & np.uint64(1)
                        nxt ^= bit * (power << np.uint64(j))
                    for t in range(2 * self.k - 2, self.k - 1, -1):
                        hit = (nxt >> np.uint64(t)) & np.uint64(1)
                        nxt ^= hit * (f << np.uint64(t - self.k))
                    power = nxt
        return out


def hash_eval(family: HashFamily, seed: Seed, x: int) -> int:
    """Spec-level wrapper: evaluate with a full-length seed."""
    if seed.length != family.seed_len:
        raise SeedLengthMismatch(
            f"need {family.seed_len} seed bits, got {seed.length}")
    return family.eval(seed.bits, x)


# --------------------------------------------------------------------- #
# objectives
# --------------------------------------------------------------------- #

class TableObjective:
    """Exact objective given by a value table over all 2^L seeds.

    Per-node decomposition is a list of tables that sum to the total;
    values are integers so all conditional sums are exact.
    """

    def __init__(self, node_tables: dict[int, np.ndarray], seed_len: int):
        self.seed_len = seed_len
        size = 1 << seed_len
        self.node_tables = {int(v): np.asarray(t, dtype=np.int64)
                            for v, t in node_tables.items()}
        for t in self.node_tables.values():
            if len(t) != size:
                raise ValueError("table size must be 2^seed_len")
        self.total = np.zeros(size, dtype=np.int64)
        for t in self.node_tables.values():
            self.total += t
        self.committed = 0
        self.k = 0

    def reset(self):
        self.committed, self.k = 0, 0

    def _sums(self, table: np.ndarray, width: int) -> np.ndarray:
        k1 = self.k + width
        folded = table.reshape(-1, 1 << k1).sum(axis=0)
        idx = self.committed + (np.arange(1 << width) << self.k)
        return folded[idx]

    def eval_block(self, width: int) -> np.ndarray:
        """Conditional sums (exact, common denominator) per assignment."""
        return self._sums(self.total, width)

    def node_eval_block(self, width: int):
        nodes = np.array(sorted(self.node_tables), dtype=np.int64)
        vals = np.stack([self._sums(self.node_tables[int(v)], width)
                         for v in nodes]) if len(nodes) else \
            np.zeros((0, 1 << width), dtype=np.int64)
        return nodes, vals

    def commit(self, assignment: int, width: int) -> None:
        self.committed |= assignment << self.k
        self.k += width

    def exhaustive_mean_num_denom(self):
        return int(self.total.sum()), 1 << self.seed_len

    def value_of(self, seed_bits: int) -> int:
        return int(self.total[seed_bits])


class AffineObjective:
    """Sum of coef * [conjunction of seed-bit parities] terms.

    Conditional expectations are exact dyadic rationals returned as int64
    numerators at a fixed power-of-two scale (`denom_log2`).
    """

    def __init__(self, seed_len: int):
        if seed_len > 64:
            raise ValueError("affine objectives support seed_len <= 64")
        self.seed_len = seed_len
        self._staging = []          # (node, coef, echelon_rows)
        self._blocks = []           # bulk template batches
        self.const_total = 0
        self._node_const: dict[int, int] = {}
        self._frozen = False

    def add_term(self, node: int, coef: int, rows) -> None:
        """Add coef * [all rows hold]; rows are (mask, rhs) parities."""
        ech, sat = solve_parity_rows(rows)
        if not sat:
            return  # probability-zero event contributes nothing
        self.add_term_prereduced(node, coef, ech)

    def add_term_prereduced(self, node: int, coef: int, ech) -> None:
        """Add a term whose rows are already in echelon form (distinct
        pivots, non-zero masks)."""
        if not ech:
            self.const_total += coef
            self._node_const[node] = self._node_const.get(node, 0) + coef
            return
        self._staging.append((node, coef, ech))

    def add_template_terms(self, template, nodes, coefs,
                           rhs_bits: np.ndarray) -> None:
        """Bulk-add terms sharing one EchelonTemplate mask set.

        rhs_bits packs each term's input-row rhs values as an int; rows
        reduce through the template (terms contradicting a zero-mask row
        are dropped as probability-zero events).
        """
        out_rhs, ok = template.reduce_rhs(rhs_bits)
        nodes = np.asarray(nodes, dtype=np.int64)
        coefs = np.asarray(coefs, dtype=np.int64)
        if len(template.out_masks) == 0:
            for node, coef, good in zip(nodes, coefs, ok):
                if good:
                    self.const_total += int(coef)
                    self._node_const[int(node)] = \
                        self._node_const.get(int(node), 0) + int(coef)
            return
        self._blocks.append((template.out_masks, template.out_pivots,
                             nodes[ok], coefs[ok], out_rhs[ok]))

    def freeze(self) -> None:
        t_stage = len(self._staging)
        t_bulk = sum(len(b[2]) for b in self._blocks)
        T = t_stage + t_bulk
        self.n_terms = T
        self.term_coef = np.zeros(T, dtype=np.int64)
        self.term_node = np.zeros(T, dtype=np.int64)
        masks, rhss, terms, pivots = [], [], [], []
        nrows = np.zeros(T, dtype=np.int64)
        for t, (node, coef, ech) in enumerate(self._staging):
            self.term_coef[t] = coef
            self.term_node[t] = node
            nrows[t] = len(ech)
            for mask, rhs in ech:
                masks.append(mask)
                rhss.append(rhs)
                terms.append(t)
                pivots.append(mask.bit_length() - 1)
        mask_arrs = [np.array(masks, dtype=np.uint64)]
        rhs_arrs = [np.array(rhss, dtype=np.uint8)]
        term_arrs = [np.array(terms, dtype=np.int64)]
        pivot_arrs = [np.array(pivots, dtype=np.int64)]
        at = t_stage
        for bmasks, bpivots, bnodes, bcoefs, brhs in self._blocks:
            B, R = brhs.shape
            ids = np.arange(at, at + B, dtype=np.int64)
            self.term_coef[at:at + B] = bcoefs
            self.term_node[at:at + B] = bnodes
            nrows[at:at + B] = R
            mask_arrs.append(np.tile(bmasks, B))
            rhs_arrs.append(brhs.reshape(-1))
            term_arrs.append(np.repeat(ids, R))
            pivot_arrs.append(np.tile(bpivots, B))
            at += B
        self.row_mask = np.concatenate(mask_arrs)
        self.row_rhs = np.concatenate(rhs_arrs)
        self.row_term = np.concatenate(term_arrs)
        self.row_pivot = np.concatenate(pivot_arrs)
        order = np.argsort(self.row_pivot, kind="stable")
        self.row_mask = self.row_mask[order]
        self.row_rhs = self.row_rhs[order]
        self.row_term = self.row_term[order]
        self.row_pivot = self.row_pivot[order]
        self.max_rank = int(nrows.max()) if T else 0
        coef_bits = int(np.abs(self.term_coef).max()) if T else 1
        total_bits = (self.max_rank + max(1, coef_bits).bit_length()
                      + max(1, T).bit_length())
        if total_bits > 62:
            raise ValueError("objective magnitude overflows exact int64")
        # rows_below[k, t] = #rows of t with pivot < k
        L = self.seed_len
        hist = np.zeros((L + 1, max(T, 1)), dtype=np.int16)
        if len(self.row_pivot):
            np.add.at(hist, (self.row_pivot + 1, self.row_term), 1)
        self.rows_below = np.cumsum(hist, axis=0, dtype=np.int16)
        self.n_rows_per_term = nrows
        self.denom_log2 = self.max_rank
        self.committed = 0
        self.k = 0
        self.alive = np.ones(T, dtype=bool)
        self._frozen = True
        self._staging = None
        self._blocks = None
        self._last = None

    def reset(self):
        self.committed, self.k = 0, 0
        self.alive[:] = True
        self._last = None

    # -- evaluation -------------------------------------------------- #

    def _stage_rows(self, width: int):
        lo = int(np.searchsorted(self.row_pivot, self.k))
        hi = int(np.searchsorted(self.row_pivot, self.k + width))
        return lo, hi

    def eval_block(self, width: int) -> np.ndarray:
        vals, fail = self._eval(width)
        self._last = (width, fail)
        return vals

    def node_eval_block(self, width: int):
        vals, fail = self._eval(width)
        self._last = (width, fail)
        B = 1 << width
        nodes = np.unique(np.concatenate([
            self.term_node, np.array(sorted(self._node_const),
                                     dtype=np.int64)]))
        idx = {int(v): i for i, v in enumerate(nodes)}
        out = np.zeros((len(nodes), B), dtype=np.int64)
        if self.n_terms:
            k1 = self.k + width
            r = self.n_rows_per_term - self.rows_below[k1]
            w = self.term_coef << (self.denom_log2 - r)
            contrib = np.where(self.alive[:, None] & (fail == 0),
                               w[:, None], 0)
            np.add.at(out, np.array([idx[int(v)] for v in self.term_node]),
                      contrib)
        for v, c in self._node_const.items():
            out[idx[int(v)]] += c << self.denom_log2
        return nodes, out

    def _eval(self, width: int):
        B = 1 << width
        T = self.n_terms
        lo, hi = self._stage_rows(width)
        fail = np.zeros((max(T, 1), B), dtype=np.int16)
        if hi > lo:
            masks = self.row_mask[lo:hi]
            base_par = (np.bitwise_count(
                masks & np.uint64(self.committed))).astype(np.int64) & 1
            chunk = (masks >> np.uint64(self.k)) & np.uint64(B - 1)
            bvals = np.arange(B, dtype=np.uint64)
            par = (base_par[:, None]
                   + np.bitwise_count(chunk[:, None] & bvals[None, :])) & 1
            bad = (par != self.row_rhs[lo:hi, None]).astype(np.int16)
            np.add.at(fail, self.row_term[lo:hi], bad)
        if T:
            k1 = self.k + width
            r = self.n_rows_per_term - self.rows_below[k1]
            w = self.term_coef << (self.denom_log2 - r)
            vals = np.where(self.alive[:, None] & (fail[:T] == 0),
                            w[:, None], 0).sum(axis=0, dtype=np.int64)
        else:
            vals = np.zeros(B, dtype=np.int64)
        vals += self.const_total << self.denom_log2
        return vals, fail[:T] if T else fail[:0]

    def commit(self, assignment: int, width: int) -> None:
        if self._last is None or self._last[0] != width:
            self.eval_block(width)
        _, fail = self._last
        if self.n_terms:
            self.alive &= fail[:, assignment] == 0
        self.committed |= assignment << self.k
        self.k += width
        self._last = None

    def expectation_num(self) -> int:
        """Current conditional expectation numerator (denom 2^denom_log2)."""
        vals, _ = self._eval(0)
        return int(vals[0])


# --------------------------------------------------------------------- #
# searches
# --------------------------------------------------------------------- #

def default_chunk_bits(n: int) -> int:
    return max(1, int(np.log2(max(2, n))))


def auto_chunk_bits(n: int, seed_len: int, n_terms: int, n_rows: int,
                    eval_budget: int, cap: int | None = None) -> int:
    """Largest chunk width z whose total search cost fits the budget."""
    zmax = min(default_chunk_bits(n), seed_len, 20)
    if cap is not None:
        zmax = min(zmax, cap)
    work_unit = max(1, n_terms + n_rows)
    for z in range(zmax, 1, -1):
        stages = -(-seed_len // z)
        if stages * work_unit * (1 << z) <= eval_budget:
            return z
    return 1


def _pick(vals: np.ndarray, minimize: bool) -> int:
    return int(np.argmin(vals)) if minimize else int(np.argmax(vals))


def cond_exp_search(objective, seed_len: int, z: int,
                    minimize: bool = False) -> Seed:
    """Greedy chunked seed fixing; the result's objective value meets or
    beats the average over all seeds (exact conditional expectations)."""
    if z < 1:
        raise ValueError("chunk size must be >= 1")
    k = 0
    bits = 0
    while k < seed_len:
        width = min(z, seed_len - k)
        vals = objective.eval_block(width)
        b = _pick(vals, minimize)
        objective.commit(b, width)
        bits |= b << k
        k += width
    return Seed(bits, seed_len, seed_len)


def distributed_seed_agreement(sim, objective, seed_len: int, z: int,
                               minimize: bool = False, instance_id: int = 0,
                               stage_name: str = "seed-agreement") -> Seed:
    """Leader-based chunked seed agreement over the simulator.

    Per stage: every contributing node sends its conditional value to the
    leader of each chunk assignment (one routing call), each leader sums
    its column, leaders forward sums to the arbiter (1 round), and the
    winning assignment is broadcast (1 round).  Chooses the same seed as
    cond_exp_search for the same objective and chunk size.
    """
    if z < 1:
        raise ValueError("chunk size must be >= 1")
    if (instance_id + 1) * (1 << min(z, seed_len)) > sim.n:
        raise ChunkTooWide(
            f"2^{z} leaders (instance {instance_id}) exceed n={sim.n}")
    k = 0
    bits = 0
    with sim.stage(stage_name):
        while k < seed_len:
            width = min(z, seed_len - k)
            B = 1 << width
            nodes, vals = objective.node_eval_block(width)
            leaders = instance_id * B + np.arange(B)
            if leaders[-1] >= sim.n:
                raise ChunkTooWide(
                    f"leader {int(leaders[-1])} out of range n={sim.n}")
            # nodes -> leaders (one value per assignment per node)
            out_counts = np.zeros(sim.n, dtype=np.int64)
            in_counts = np.zeros(sim.n, dtype=np.int64)
            if len(nodes):
                out_counts[nodes] = B
                in_counts[leaders] = len(nodes)
            sim._check_route_bounds(np.minimum(out_counts, sim.n),
                                    np.minimum(in_counts, sim.n))
            sim.charge_route_counts(out_counts, in_counts)
            # leaders aggregate locally, then forward sums to the arbiter
            totals = vals.sum(axis=0, dtype=np.int64) if len(nodes) else \
                np.zeros(B, dtype=np.int64)
            sim.ledger.messages_total += B
            sim.ledger.advance(1)
            b = _pick(totals, minimize)
            # arbiter broadcasts the winning assignment to all nodes
            sim.ledger.messages_total += sim.n
            sim.ledger.advance(1)
            objective.commit(b, width)
            bits |= b << k
            k += width
    return Seed(bits, seed_len, seed_len)


# --------------------------------------------------------------------- #
# affine-event helpers shared by the deterministic colorers
# --------------------------------------------------------------------- #

def value_rows(bit_masks: np.ndarray, bits: list[int], value: int):
    """Parity rows pinning the listed output bits of one node to `value`.

    `bit_masks` is that node's (beta,) mask row; bit t of `value`
    corresponds to bits[t].
    """
    return [(int(bit_masks[t]), (value >> i) & 1)
            for i, t in enumerate(bits)]


def aligned_blocks(lo: int, hi: int, width: int):
    """Decompose [lo, hi) over `width`-bit values into aligned blocks.

    Yields (t, high_value): bits t..width-1 fixed to high_value, low t
    bits free.  At most 2*width blocks.
    """
    if not (0 <= lo <= hi <= 1 << width):
        raise ValueError("interval out of range")
    while lo < hi:
        t = 0
        while (t < width and lo % (1 << (t + 1)) == 0
               and lo + (1 << (t + 1)) <= hi):
            t += 1
        yield t, lo >> t
        lo += 1 << t


def dyadic_blocks(limit: int, width: int):
    """Decompose [0, limit) over `width`-bit values into aligned blocks.

    Yields (t, high_value) pairs: each block fixes bits t..width-1 to
    high_value and leaves bits 0..t-1 free; blocks are disjoint and cover
    exactly [0, limit).
    """
    if limit > 1 << width:
        raise ValueError("limit exceeds width")
    prefix = 0
    for t in range(width, -1, -1):
        if (limit >> t) & 1:
            yield t, prefix >> t
            prefix |= 1 << t
