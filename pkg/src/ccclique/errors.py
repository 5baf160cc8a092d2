"""Exception types shared across the simulator and coloring algorithms.

Verification *results* (e.g. an improper edge found by a checker) are plain
values, not exceptions; the classes here signal contract violations or
desk-scale parameter rejections that callers are expected to handle.
"""


class CliqueError(Exception):
    """Base class for all package errors."""


class BandwidthViolation(CliqueError):
    """A message exceeded the word size, or an ordered pair was used twice
    in one round."""

    def __init__(self, src, dst, bits):
        self.src, self.dst, self.bits = src, dst, bits
        super().__init__(f"pair ({src}->{dst}) sent {bits} bits in one round")


class RoutingOverload(CliqueError):
    """A routing call exceeded the per-node send/receive bound."""

    def __init__(self, node, count):
        self.node, self.count = node, count
        super().__init__(f"node {node} is endpoint of {count} routed messages")


class SeedLengthMismatch(CliqueError):
    """Seed bit-string does not match the hash family's required length."""


class ChunkTooWide(CliqueError):
    """A seed-search chunk needs more leader nodes than the clique has."""


class DegreeTooLarge(CliqueError):
    """Graph degree violates an operation's admissibility precondition."""


class CliqueTooLarge(CliqueError):
    """A leader gather would exceed the per-node message bound."""


class ParameterViolation(CliqueError):
    """Caller-supplied algorithm parameters violate a stated precondition."""


class PlanRejected(CliqueError):
    """A partition plan's probabilities are invalid at this scale."""

    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


class AllocationOverflow(CliqueError):
    """Measured subgraph degrees do not fit into the parent palette."""


class PaletteWindowUnsatisfiable(CliqueError):
    """A left-over vertex has too few free colors for the palette window."""


class NoZeroViolationSeed(CliqueError):
    """Derandomized partition cannot certify zero degree-cap violations."""


class InputError(CliqueError):
    """Malformed external input (files, CLI arguments)."""
