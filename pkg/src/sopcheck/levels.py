"""The consistency-level registry: each level is one convergence constraint
paired with one relationship constraint, plus the implication hierarchy and
availability metadata."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .constraints import Relationship, RelationshipKind, StalenessBound, rel_geq
from .ordering import Convergence


class AvailabilityBound(Enum):
    TOTALLY_AVAILABLE = "Totally available"
    STICKY_AVAILABLE = "Sticky available"
    WEAKLY_AVAILABLE = "Weakly available"

    @property
    def rank(self) -> int:
        return {
            "Totally available": 3,
            "Sticky available": 2,
            "Weakly available": 1,
        }[self.value]

    def __ge__(self, other: "AvailabilityBound") -> bool:
        return self.rank >= other.rank

    def __le__(self, other: "AvailabilityBound") -> bool:
        return self.rank <= other.rank


@dataclass(frozen=True)
class ConsistencyLevel:
    key: str
    display: str
    bound: StalenessBound | None = None

    def __str__(self) -> str:
        return self.key


LINEARIZABLE = ConsistencyLevel("linearizable", "Linearizability")
REGULAR_SEQUENTIAL = ConsistencyLevel("regular-sequential", "Regular Sequential")
SEQUENTIAL = ConsistencyLevel("sequential", "Sequential")
BOUNDED_STALENESS = ConsistencyLevel("bounded-staleness", "Bounded Staleness")
REAL_TIME_CAUSAL = ConsistencyLevel("real-time-causal", "Real-time Causal")
CAUSAL_PLUS = ConsistencyLevel("causal+", "Causal+")
CAUSAL = ConsistencyLevel("causal", "Causal")
PRAM = ConsistencyLevel("pram", "PRAM")
PER_KEY_SEQUENTIAL = ConsistencyLevel("per-key-sequential", "Per-key Sequential")
EVENTUAL = ConsistencyLevel("eventual", "Eventual")
WEAK = ConsistencyLevel("weak", "Weak")

REGISTRY: tuple[ConsistencyLevel, ...] = (
    LINEARIZABLE,
    REGULAR_SEQUENTIAL,
    SEQUENTIAL,
    BOUNDED_STALENESS,
    REAL_TIME_CAUSAL,
    CAUSAL_PLUS,
    CAUSAL,
    PRAM,
    PER_KEY_SEQUENTIAL,
    EVENTUAL,
    WEAK,
)

COMMON_FOUR: tuple[ConsistencyLevel, ...] = (LINEARIZABLE, SEQUENTIAL, CAUSAL_PLUS, EVENTUAL)

_ALIASES = {
    "linearizable": LINEARIZABLE,
    "linearizability": LINEARIZABLE,
    "regular-sequential": REGULAR_SEQUENTIAL,
    "sequential": SEQUENTIAL,
    "bounded-staleness": BOUNDED_STALENESS,
    "real-time-causal": REAL_TIME_CAUSAL,
    "causal+": CAUSAL_PLUS,
    "causal-plus": CAUSAL_PLUS,
    "causal": CAUSAL,
    "pram": PRAM,
    "per-key-sequential": PER_KEY_SEQUENTIAL,
    "eventual": EVENTUAL,
    "weak": WEAK,
}


def level_named(name: str, bound: StalenessBound | None = None) -> ConsistencyLevel:
    """Resolve a level by CLI name; bounded staleness needs its bound."""
    try:
        level = _ALIASES[name.strip().lower()]
    except KeyError:
        valid = ", ".join(sorted(set(_ALIASES)))
        raise ValueError(f"unknown level {name!r}; valid names: {valid}") from None
    if level == BOUNDED_STALENESS:
        if bound is None:
            raise ValueError(
                "bounded-staleness needs a bound (--staleness-j/-k/-t)"
            )
        return bounded_staleness(bound)
    return level


def bounded_staleness(bound: StalenessBound) -> ConsistencyLevel:
    return ConsistencyLevel(BOUNDED_STALENESS.key, BOUNDED_STALENESS.display, bound)


def constraints_of(level: ConsistencyLevel) -> tuple[Convergence, Relationship]:
    """The (convergence, relationship) pair defining a level."""
    table = {
        LINEARIZABLE.key: (Convergence.SO, Relationship(RelationshipKind.RT)),
        REGULAR_SEQUENTIAL.key: (Convergence.SO, Relationship(RelationshipKind.RTW_CASLR)),
        SEQUENTIAL.key: (Convergence.SO, Relationship(RelationshipKind.CASL)),
        REAL_TIME_CAUSAL.key: (Convergence.CPO, Relationship(RelationshipKind.RTPRIME_CASL)),
        CAUSAL_PLUS.key: (Convergence.CPO, Relationship(RelationshipKind.CASL)),
        CAUSAL.key: (Convergence.NPO, Relationship(RelationshipKind.CASL)),
        PRAM.key: (Convergence.NPO, Relationship(RelationshipKind.FIFO)),
        PER_KEY_SEQUENTIAL.key: (Convergence.CPO, Relationship(RelationshipKind.CASL_PER_KEY)),
        EVENTUAL.key: (Convergence.CPO, Relationship(RelationshipKind.NONE)),
        WEAK.key: (Convergence.NPO, Relationship(RelationshipKind.NONE)),
    }
    if level.key == BOUNDED_STALENESS.key:
        bound = level.bound if level.bound is not None else StalenessBound(max_key_updates=1)
        return (Convergence.NPO, Relationship(RelationshipKind.BOUNDED_CASL, bound))
    return table[level.key]


def implies(a: ConsistencyLevel, b: ConsistencyLevel) -> bool:
    """True when any history satisfying level a also satisfies level b."""
    conv_a, rel_a = constraints_of(a)
    conv_b, rel_b = constraints_of(b)
    return conv_a >= conv_b and rel_geq(rel_a, rel_b)


def availability_upper_bound(level: ConsistencyLevel) -> AvailabilityBound:
    """Best possible availability under arbitrary network partitions."""
    weakly = {LINEARIZABLE.key, REGULAR_SEQUENTIAL.key, SEQUENTIAL.key, BOUNDED_STALENESS.key}
    sticky = {
        REAL_TIME_CAUSAL.key,
        CAUSAL_PLUS.key,
        CAUSAL.key,
        PRAM.key,
        PER_KEY_SEQUENTIAL.key,
    }
    if level.key in weakly:
        return AvailabilityBound.WEAKLY_AVAILABLE
    if level.key in sticky:
        return AvailabilityBound.STICKY_AVAILABLE
    return AvailabilityBound.TOTALLY_AVAILABLE


# Session guarantees are checkable predicates, not levels; these bounds are
# registry metadata for the availability table.
SESSION_GUARANTEE_AVAILABILITY = {
    "Read My Writes": AvailabilityBound.STICKY_AVAILABLE,
    "Writes Follow Reads": AvailabilityBound.TOTALLY_AVAILABLE,
    "Monotonic Reads": AvailabilityBound.TOTALLY_AVAILABLE,
    "Monotonic Writes": AvailabilityBound.TOTALLY_AVAILABLE,
}


def registry_table() -> str:
    """The level definition table (display name, convergence, relationship)."""
    rows = [("Consistency Level", "Convergence", "Relationship")]
    for level in REGISTRY:
        conv, rel = constraints_of(level)
        rows.append((level.display, conv.value, rel.label))
    return _render_table(rows)


def availability_table() -> str:
    """The availability upper-bound table, including session guarantees."""
    rows = [("Consistency Level", "Availability Upper Bound")]
    for level in REGISTRY:
        rows.append((level.display, availability_upper_bound(level).value))
    for name, bound in SESSION_GUARANTEE_AVAILABILITY.items():
        rows.append((f"  {name}", bound.value))
    return _render_table(rows)


def _render_table(rows: list[tuple[str, ...]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append(" | ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if idx == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)
