"""Relationship-constraint predicates over (timeline, ordering, reads-from).

Each predicate is pure and decides one constraint family for a candidate
ordering.  Indeterminate operations participate only when they appear in
the ordering (i.e. on the branch where they took effect).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .history import Kind, OperationSpan, Outcome, Timeline
from .ordering import INITIAL, Convergence, OrderingDag, ReadsFrom

__all__ = [
    "Convergence",
    "Relationship",
    "RelationshipKind",
    "SessionGuarantee",
    "StalenessBound",
    "bounded_forced_pairs",
    "causal_pairs",
    "check_bounded_casl",
    "check_casl",
    "check_casl_per_key",
    "check_fifo",
    "check_rt",
    "check_rt_prime",
    "check_rtw_caslr",
    "check_session_guarantees",
    "realtime_pairs",
    "rel_geq",
]


@dataclass(frozen=True)
class StalenessBound:
    """Recency bound on write visibility; whichever enabled bound trips
    first forces the write before later same-key reads."""

    max_writer_ops: int | None = None
    max_key_updates: int | None = None
    max_delay: int | None = None  # nanoseconds

    def __post_init__(self):
        present = [
            b for b in (self.max_writer_ops, self.max_key_updates, self.max_delay)
            if b is not None
        ]
        if not present:
            raise ValueError("at least one bound must be present")
        if any(b <= 0 for b in present):
            raise ValueError("bounds must be positive")

    def tighter_or_equal(self, other: "StalenessBound") -> bool:
        """Pointwise comparison; an absent bound counts as infinite."""

        def le(a: int | None, b: int | None) -> bool:
            if b is None:
                return True
            return a is not None and a <= b

        return (
            le(self.max_writer_ops, other.max_writer_ops)
            and le(self.max_key_updates, other.max_key_updates)
            and le(self.max_delay, other.max_delay)
        )


class RelationshipKind(Enum):
    RT = "RT"
    RT_PRIME = "RT'"
    RTW_CASLR = "RT-W & CASL-R"
    BOUNDED_CASL = "Bounded-CASL"
    RTPRIME_CASL = "RT' & CASL"
    CASL = "CASL"
    FIFO = "FIFO"
    CASL_PER_KEY = "CASL-per-key"
    NONE = "None"


@dataclass(frozen=True)
class Relationship:
    kind: RelationshipKind
    bound: StalenessBound | None = None

    def __post_init__(self):
        if (self.kind is RelationshipKind.BOUNDED_CASL) != (self.bound is not None):
            raise ValueError("exactly the bounded variant carries a staleness bound")

    @property
    def label(self) -> str:
        return self.kind.value


# Strength order fixed as: RT above everything; RT-W & CASL-R, Bounded-CASL
# and RT' & CASL each strengthen CASL along incomparable axes; CASL above
# FIFO and the per-key projection; everything above None.
_WEAKER: dict[RelationshipKind, frozenset[RelationshipKind]] = {
    RelationshipKind.RT: frozenset(RelationshipKind),
    RelationshipKind.RTW_CASLR: frozenset(
        {
            RelationshipKind.RTW_CASLR,
            RelationshipKind.CASL,
            RelationshipKind.FIFO,
            RelationshipKind.CASL_PER_KEY,
            RelationshipKind.NONE,
        }
    ),
    RelationshipKind.RTPRIME_CASL: frozenset(
        {
            RelationshipKind.RTPRIME_CASL,
            RelationshipKind.RT_PRIME,
            RelationshipKind.CASL,
            RelationshipKind.FIFO,
            RelationshipKind.CASL_PER_KEY,
            RelationshipKind.NONE,
        }
    ),
    RelationshipKind.BOUNDED_CASL: frozenset(
        {
            RelationshipKind.BOUNDED_CASL,
            RelationshipKind.CASL,
            RelationshipKind.FIFO,
            RelationshipKind.CASL_PER_KEY,
            RelationshipKind.NONE,
        }
    ),
    RelationshipKind.CASL: frozenset(
        {
            RelationshipKind.CASL,
            RelationshipKind.FIFO,
            RelationshipKind.CASL_PER_KEY,
            RelationshipKind.NONE,
        }
    ),
    RelationshipKind.FIFO: frozenset({RelationshipKind.FIFO, RelationshipKind.NONE}),
    RelationshipKind.CASL_PER_KEY: frozenset(
        {RelationshipKind.CASL_PER_KEY, RelationshipKind.NONE}
    ),
    RelationshipKind.RT_PRIME: frozenset({RelationshipKind.RT_PRIME, RelationshipKind.NONE}),
    RelationshipKind.NONE: frozenset({RelationshipKind.NONE}),
}


def rel_geq(a: Relationship, b: Relationship) -> bool:
    """True when constraint a is at least as strong as constraint b."""
    if b.kind not in _WEAKER[a.kind]:
        return False
    if a.kind is RelationshipKind.BOUNDED_CASL and b.kind is RelationshipKind.BOUNDED_CASL:
        return a.bound.tighter_or_equal(b.bound)
    return True


class SessionGuarantee(Enum):
    READ_MY_WRITES = "RMW"
    MONOTONIC_WRITES = "MW"
    MONOTONIC_READS = "MR"
    WRITES_FOLLOW_READS = "WFR"


ALL_SESSION_GUARANTEES = frozenset(SessionGuarantee)
FIFO_SESSION_GUARANTEES = frozenset(
    {
        SessionGuarantee.READ_MY_WRITES,
        SessionGuarantee.MONOTONIC_WRITES,
        SessionGuarantee.MONOTONIC_READS,
    }
)


def _branch_queue(timeline: Timeline, client: str, nodes: frozenset[int]) -> list[OperationSpan]:
    return [s for s in timeline.queues.get(client, ()) if s.op_id in nodes]


def _node_set(timeline: Timeline, dag: OrderingDag | None) -> frozenset[int]:
    if dag is None:
        return frozenset(timeline.spans)
    return frozenset(dag.node_ids)


def realtime_pairs(timeline: Timeline, nodes: frozenset[int] | None = None) -> frozenset[tuple[int, int]]:
    """All (a, b) with a acknowledged strictly before b starts.  Spans with
    no acknowledgment contribute no pairs as the first element."""
    if nodes is None:
        nodes = frozenset(timeline.spans)
    spans = [timeline.spans[i] for i in sorted(nodes)]
    pairs = set()
    for a in spans:
        if a.end_time is None:
            continue
        for b in spans:
            if a.op_id != b.op_id and a.end_time < b.start_time:
                pairs.add((a.op_id, b.op_id))
    return frozenset(pairs)


def check_rt(dag: OrderingDag, timeline: Timeline) -> bool:
    """Every real-time pair must be ordered the same way."""
    nodes = _node_set(timeline, dag)
    return all(dag.ordered_before(a, b) for a, b in realtime_pairs(timeline, nodes))


def check_rt_prime(dag: OrderingDag, timeline: Timeline) -> bool:
    """No real-time pair may be inverted (the weaker no-travel-forward rule:
    an operation acknowledged before another starts must not be ordered
    after it)."""
    nodes = _node_set(timeline, dag)
    return not any(dag.ordered_before(b, a) for a, b in realtime_pairs(timeline, nodes))


def causal_pairs(
    timeline: Timeline, rf: ReadsFrom, nodes: frozenset[int] | None = None
) -> frozenset[tuple[int, int]]:
    """Transitive closure of per-client program order and reads-from."""
    if nodes is None:
        nodes = frozenset(timeline.spans)
    ids = sorted(nodes)
    pos = {op_id: i for i, op_id in enumerate(ids)}
    succ = [0] * len(ids)
    for client in timeline.clients:
        queue = _branch_queue(timeline, client, nodes)
        for a, b in zip(queue, queue[1:]):
            succ[pos[a.op_id]] |= 1 << pos[b.op_id]
    for r, src in rf.items():
        if src != INITIAL and r in pos and src in pos and src != r:
            succ[pos[src]] |= 1 << pos[r]
    reach = [0] * len(ids)
    for i in _closure_order(succ):
        m = succ[i]
        r = m
        while m:
            j = (m & -m).bit_length() - 1
            r |= reach[j]
            m &= m - 1
        reach[i] = r
    pairs = set()
    for i, op_id in enumerate(ids):
        m = reach[i]
        while m:
            j = (m & -m).bit_length() - 1
            if j != i:
                pairs.add((op_id, ids[j]))
            m &= m - 1
    return frozenset(pairs)


def _closure_order(succ: list[int]) -> list[int]:
    # Reverse topological order; program order + reads-from is acyclic for
    # any well-formed branch (sources precede readers, queues are chains).
    n = len(succ)
    indeg = [0] * n
    for m in succ:
        while m:
            j = (m & -m).bit_length() - 1
            indeg[j] += 1
            m &= m - 1
    order = [i for i in range(n) if indeg[i] == 0]
    head = 0
    while head < len(order):
        m = succ[order[head]]
        head += 1
        while m:
            j = (m & -m).bit_length() - 1
            indeg[j] -= 1
            if indeg[j] == 0:
                order.append(j)
            m &= m - 1
    if len(order) != n:
        raise ValueError("cyclic reads-from assignment")
    return list(reversed(order))


def check_casl(dag: OrderingDag, timeline: Timeline, rf: ReadsFrom) -> bool:
    """Every causal dependency must be ordered accordingly."""
    nodes = _node_set(timeline, dag)
    try:
        pairs = causal_pairs(timeline, rf, nodes)
    except ValueError:
        return False
    return all(dag.ordered_before(a, b) for a, b in pairs)


def check_session_guarantees(
    dag: OrderingDag,
    timeline: Timeline,
    rf: ReadsFrom,
    which: Iterable[SessionGuarantee],
) -> bool:
    """Conjunction of the requested per-session guarantees.

    Monotonic writes: a client's writes are ordered as issued.  Read my
    writes: a client's reads are ordered after its earlier writes to the
    same key.  Monotonic reads: the write observed by an earlier read is
    ordered before the client's later reads, and two same-key reads never
    regress (the later read's source is not ordered before the earlier
    one's).  Writes follow reads: a client's writes are ordered after its
    earlier reads.
    """
    which = frozenset(which)
    nodes = _node_set(timeline, dag)
    for client in timeline.clients:
        queue = _branch_queue(timeline, client, nodes)
        for i, a in enumerate(queue):
            for b in queue[i + 1 :]:
                if SessionGuarantee.MONOTONIC_WRITES in which:
                    if a.may_write and b.may_write and not dag.ordered_before(a.op_id, b.op_id):
                        return False
                if SessionGuarantee.READ_MY_WRITES in which:
                    if (
                        a.may_write
                        and b.is_read_bearing
                        and a.key == b.key
                        and not dag.ordered_before(a.op_id, b.op_id)
                    ):
                        return False
                if SessionGuarantee.WRITES_FOLLOW_READS in which:
                    if (
                        a.is_read_bearing
                        and b.may_write
                        and not dag.ordered_before(a.op_id, b.op_id)
                    ):
                        return False
                if SessionGuarantee.MONOTONIC_READS in which:
                    if a.is_read_bearing and b.is_read_bearing:
                        src_a, src_b = rf[a.op_id], rf[b.op_id]
                        if src_a != INITIAL and src_a != b.op_id:
                            if not dag.ordered_before(src_a, b.op_id):
                                return False
                        if a.key == b.key and src_a != INITIAL and src_b != INITIAL:
                            if src_b != src_a and dag.ordered_before(src_b, src_a):
                                return False
    return True


def check_fifo(dag: OrderingDag, timeline: Timeline, rf: ReadsFrom) -> bool:
    """Read-my-writes, monotonic writes and monotonic reads combined."""
    return check_session_guarantees(dag, timeline, rf, FIFO_SESSION_GUARANTEES)


def check_rtw_caslr(dag: OrderingDag, timeline: Timeline, rf: ReadsFrom) -> bool:
    """Causal ordering plus real time among write/CAS pairs; reads may
    travel back in time."""
    if not check_casl(dag, timeline, rf):
        return False
    nodes = _node_set(timeline, dag)
    for a, b in realtime_pairs(timeline, nodes):
        if timeline.spans[a].may_write and timeline.spans[b].may_write:
            if not dag.ordered_before(a, b):
                return False
    return True


def bounded_forced_pairs(
    timeline: Timeline, bound: StalenessBound, nodes: frozenset[int] | None = None
) -> frozenset[tuple[int, int]]:
    """(write, read) pairs whose ordering is forced because the write's
    staleness allowance ran out before the read started.

    Writer-ops counts the writer's later acknowledged write operations;
    key-updates counts later acknowledged updates on the same object; the
    delay bound is wall time after acknowledgment.  Unacknowledged writes
    never force anything.
    """
    if nodes is None:
        nodes = frozenset(timeline.spans)
    spans = [timeline.spans[i] for i in sorted(nodes)]
    acked_updates = [s for s in spans if s.may_write and s.end_time is not None]
    pairs = set()
    for w in acked_updates:
        own_queue = [o for o in timeline.queues[w.client] if o.op_id in nodes]
        w_at = next(i for i, o in enumerate(own_queue) if o.op_id == w.op_id)
        later_own_writes = [
            o for o in own_queue[w_at + 1 :] if o.may_write and o.end_time is not None
        ]
        later_key_updates = [
            u for u in acked_updates if u.key == w.key and u.end_time > w.end_time
        ]
        for r in spans:
            if r.op_id == w.op_id or not r.is_read_bearing or r.key != w.key:
                continue
            forced = False
            if bound.max_delay is not None and r.start_time > w.end_time + bound.max_delay:
                forced = True
            if not forced and bound.max_writer_ops is not None:
                acked = sum(1 for o in later_own_writes if o.end_time < r.start_time)
                forced = acked >= bound.max_writer_ops
            if not forced and bound.max_key_updates is not None:
                acked = sum(1 for u in later_key_updates if u.end_time < r.start_time)
                forced = acked >= bound.max_key_updates
            if forced:
                pairs.add((w.op_id, r.op_id))
    return frozenset(pairs)


def check_bounded_casl(
    dag: OrderingDag, timeline: Timeline, rf: ReadsFrom, bound: StalenessBound
) -> bool:
    """Causal ordering plus forced visibility once a staleness bound trips."""
    if not check_casl(dag, timeline, rf):
        return False
    nodes = _node_set(timeline, dag)
    return all(
        dag.ordered_before(w, r) for w, r in bounded_forced_pairs(timeline, bound, nodes)
    )


def _is_pure_read(span: OperationSpan) -> bool:
    return span.kind.kind is Kind.READ and span.outcome is Outcome.OK


def check_casl_per_key(dag: OrderingDag, timeline: Timeline, rf: ReadsFrom) -> bool:
    """Serial order and causal ordering on each object independently."""
    nodes = _node_set(timeline, dag)
    by_key: dict[str, list[OperationSpan]] = {}
    for op_id in sorted(nodes):
        span = timeline.spans[op_id]
        by_key.setdefault(span.key, []).append(span)
    for key, spans in by_key.items():
        # Per-key causal pairs: same-key program order plus reads-from.
        key_nodes = frozenset(s.op_id for s in spans)
        key_rf = {r: s for r, s in rf.items() if r in key_nodes}
        try:
            pairs = causal_pairs(timeline, key_rf, key_nodes)
        except ValueError:
            return False
        if not all(dag.ordered_before(a, b) for a, b in pairs):
            return False
        # Per-key seriality with the cluster-of-reads exception, judged on
        # same-key write ancestors.
        key_writes = [s.op_id for s in spans if s.may_write]
        for i, a in enumerate(spans):
            for b in spans[i + 1 :]:
                if not dag.unordered(a.op_id, b.op_id):
                    continue
                if _is_pure_read(a) and _is_pure_read(b):
                    anc_a = frozenset(
                        w for w in key_writes if dag.ordered_before(w, a.op_id)
                    )
                    anc_b = frozenset(
                        w for w in key_writes if dag.ordered_before(w, b.op_id)
                    )
                    if anc_a == anc_b:
                        continue
                return False
    return True
