"""Run configuration: model cost constants and algorithm knobs.

All constants the underlying method leaves symbolic are exposed here with
the defaults documented in the README.  A single Config object is threaded
through the simulator and every algorithm entry point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace


@dataclass(frozen=True)
class Config:
    # --- simulator cost model ---
    c_word: int = 1            # word size = c_word * ceil(log2 n) bits
    lenzen_cost: int = 2       # rounds charged per routing-primitive call
    connectivity_cost: int = 1  # rounds charged per component-labeling call
    seed_broadcast_cost: int = 1  # rounds per word of broadcast seed
    rng_seed: int = 0          # master seed for all randomized algorithms

    # --- shared algorithm knobs ---
    c_fit: float = 1.0         # admissible degree: Delta^2 <= c_fit * n
    delta_min: int = 64        # below this, dense machinery falls back
    big_k: int = 100           # final sparsity constant (1/K threshold)
    one_shot_iters: int = 3    # "O(1) iterations" of the one-shot colorer
    dense_iters: int = 6       # dense-step applications per stratum
    bidding_iters: int = 6     # color-bidding iterations before cleanup
    retry_budget: int = 3      # fresh-randomness retries on overflow
    const_deg_cap: int = 8     # "constant degree" cutoff for cleanup gather

    # --- derandomization knobs ---
    d_independence: int = 4    # independence order for "O(1)-wise" sites
    c_phase: int = 4           # deterministic phase cap: <= c_phase*log2 n
    chunk_bits: int = 0        # seed-reveal chunk z; 0 = floor(log2 n)
    term_budget: int = 120_000  # max estimator terms for in-budget search
    eval_budget: int = 300_000_000  # rough op budget for one seed search
    debug_checks: bool = False  # per-commit properness assertions

    def word_bits(self, n: int) -> int:
        return max(1, self.c_word * max(1, (max(2, n) - 1).bit_length()))

    def with_overrides(self, **kw) -> "Config":
        return replace(self, **kw)

    def snapshot(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_INT_KEYS = {f.name for f in fields(Config) if f.type == "int"}
_FLOAT_KEYS = {f.name for f in fields(Config) if f.type == "float"}
_BOOL_KEYS = {f.name for f in fields(Config) if f.type == "bool"}


def parse_override(key: str, value: str):
    """Parse one key=value CLI override into the right field type."""
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _BOOL_KEYS:
        return value.lower() in ("1", "true", "yes", "on")
    raise KeyError(key)


def load_config(path: str | None = None, overrides: dict | None = None) -> Config:
    """Build a Config from an optional JSON file plus key=value overrides."""
    data = {}
    if path:
        with open(path) as fh:
            data.update(json.load(fh))
    if overrides:
        data.update(overrides)
    known = {f.name for f in fields(Config)}
    unknown = set(data) - known
    if unknown:
        raise KeyError(f"unknown config keys: {sorted(unknown)}")
    typed = {}
    for k, v in data.items():
        typed[k] = parse_override(k, str(v)) if isinstance(v, str) else v
    return Config(**typed)
