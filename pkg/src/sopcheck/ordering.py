"""Candidate orderings as DAGs: reachability, immediate precedence, and
read materialization.

Nodes are operation ids from one timeline; a directed edge means "ordered
before".  Reachability is cached as per-node bitmasks so that predicates
over the transitive relation are O(1) after construction.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable, Mapping

from .history import Kind, OperationSpan, Outcome

INITIAL = -1  # distinguished reads-from source: the object's initial value 0

ReadsFrom = Mapping[int, int]


class CycleError(ValueError):
    """The proposed edge set is not acyclic."""


class Convergence(Enum):
    """How constrained the shape of a valid ordering is, strongest first:
    a single serial chain (SO), a partial order with strongly convergent
    reads (CPO), or a partial order with merely well-formed reads (NPO)."""

    SO = "SO"
    CPO = "CPO"
    NPO = "NPO"

    @property
    def strength(self) -> int:
        return {"SO": 3, "CPO": 2, "NPO": 1}[self.value]

    def __ge__(self, other: "Convergence") -> bool:
        return self.strength >= other.strength


def _toposort_reach(n: int, succ: list[int]) -> list[int]:
    """Reachability bitmasks for a graph given per-node successor masks.

    Returns reach[i] = mask of nodes strictly reachable from i.  Raises
    CycleError when the graph is cyclic.
    """
    indeg = [0] * n
    for i in range(n):
        m = succ[i]
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
        raise CycleError("ordering contains a cycle")
    reach = [0] * n
    for i in reversed(order):
        r = succ[i]
        m = succ[i]
        while m:
            j = (m & -m).bit_length() - 1
            r |= reach[j]
            m &= m - 1
        reach[i] = r
    return reach


class OrderingDag:
    """Immutable DAG over the effective operations of one timeline."""

    __slots__ = (
        "_spans",
        "_ids",
        "_pos",
        "_edges",
        "_succ",
        "_reach",
        "_write_pos_by_key",
        "_write_mask_by_key",
        "_write_mask",
    )

    def __init__(self, spans: Mapping[int, OperationSpan], edges: Iterable[tuple[int, int]]):
        self._spans = dict(spans)
        self._ids = sorted(self._spans)
        self._pos = {op_id: i for i, op_id in enumerate(self._ids)}
        n = len(self._ids)
        succ = [0] * n
        edge_set = set()
        for a, b in edges:
            ia, ib = self._position(a), self._position(b)
            if ia == ib:
                raise CycleError(f"self edge on op {a}")
            edge_set.add((a, b))
            succ[ia] |= 1 << ib
        self._edges = tuple(sorted(edge_set))
        self._succ = succ
        self._reach = _toposort_reach(n, succ)
        self._write_pos_by_key: dict[str, list[int]] = {}
        self._write_mask_by_key: dict[str, int] = {}
        self._write_mask = 0
        for i, op_id in enumerate(self._ids):
            span = self._spans[op_id]
            if span.may_write:
                self._write_pos_by_key.setdefault(span.key, []).append(i)
                self._write_mask_by_key[span.key] = (
                    self._write_mask_by_key.get(span.key, 0) | 1 << i
                )
                self._write_mask |= 1 << i

    def _position(self, op_id: int) -> int:
        try:
            return self._pos[op_id]
        except KeyError:
            raise KeyError(f"unknown op id {op_id}") from None

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(self._ids)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return self._edges

    def span(self, op_id: int) -> OperationSpan:
        return self._spans[self._ids[self._position(op_id)]]

    def with_edges(self, extra: Iterable[tuple[int, int]]) -> "OrderingDag":
        """A new snapshot extended with more edges (copy-on-extend)."""
        return OrderingDag(self._spans, list(self._edges) + list(extra))

    def ordered_before(self, a: int, b: int) -> bool:
        ia, ib = self._position(a), self._position(b)
        return ia != ib and bool(self._reach[ia] >> ib & 1)

    def unordered(self, a: int, b: int) -> bool:
        return not self.ordered_before(a, b) and not self.ordered_before(b, a)

    def immediate_predecessors(self, r: int) -> frozenset[int]:
        """Write/CAS nodes on r's key ordered before r with no same-key
        write strictly in between.  Empty means r sees the initial value 0."""
        ir = self._position(r)
        span = self._spans[r]
        if not span.is_read_bearing:
            raise ValueError(f"op {r} is not a read-bearing node")
        return frozenset(self._ids[i] for i in self._immediate_pred_positions(ir, span.key))

    def _immediate_pred_positions(self, ir: int, key: str) -> list[int]:
        before = [
            iw for iw in self._write_pos_by_key.get(key, []) if self._reach[iw] >> ir & 1
        ]
        out = []
        for iw in before:
            if not any(
                self._reach[iw] >> im & 1 for im in before if im != iw
                and self._reach[im] >> ir & 1
            ):
                out.append(iw)
        return out

    def write_ancestor_mask(self, pos: int) -> int:
        """Bitmask of write/CAS node positions ordered before the given position."""
        anc = 0
        for iw in range(len(self._ids)):
            if self._write_mask >> iw & 1 and self._reach[iw] >> pos & 1:
                anc |= 1 << iw
        return anc


def is_serial_order(dag: OrderingDag) -> bool:
    """True when every pair of nodes is ordered, except pairs of pure reads
    that share the same set of writes ordered before them (a cluster of
    reads between two writes may stay mutually unordered)."""
    ids = dag._ids
    n = len(ids)
    reach = dag._reach
    write_anc = [dag.write_ancestor_mask(i) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if reach[i] >> j & 1 or reach[j] >> i & 1:
                continue
            a, b = dag._spans[ids[i]], dag._spans[ids[j]]
            pure_reads = (
                a.kind.kind is Kind.READ
                and b.kind.kind is Kind.READ
                and a.outcome is Outcome.OK
                and b.outcome is Outcome.OK
            )
            if not (pure_reads and write_anc[i] == write_anc[j]):
                return False
    return True


def _source_value(dag: OrderingDag, source: int) -> int:
    if source == INITIAL:
        return 0
    return dag._spans[source].kind.value


def reader_value(dag: OrderingDag, rf: ReadsFrom, r: int) -> int:
    """The value a read-bearing node returns under a reads-from choice."""
    return _source_value(dag, rf[r])


def _reader_consistent(span: OperationSpan, value: int) -> bool:
    if span.kind.kind is Kind.READ:
        return span.observed == value
    if span.outcome is Outcome.CAS_FAILED:
        return value != span.kind.expected
    return value == span.kind.expected  # successful or take-effect CAS read expected


def validate_read_materialization(dag: OrderingDag, rf: ReadsFrom, mode: Convergence) -> bool:
    """Decide whether every read's result is materialized consistently.

    In every mode a reader's source must be one of its immediate
    predecessors (or the initial value when it has none), and the value the
    reader returned must match the source's written value; a failed CAS
    instead constrains its source's value to differ from its expected value.
    CPO additionally requires any two same-key readers with equal
    immediate-predecessor sets to return equal values; SO requires each
    reader to have at most one immediate predecessor.
    """
    groups: dict[tuple[str, frozenset[int]], int] = {}
    for op_id in dag._ids:
        span = dag._spans[op_id]
        if not span.is_read_bearing:
            continue
        if op_id not in rf:
            raise KeyError(f"reads-from does not cover op {op_id}")
        preds = dag.immediate_predecessors(op_id)
        source = rf[op_id]
        if source == INITIAL:
            if preds:
                return False
        elif source not in preds:
            return False
        value = _source_value(dag, source)
        if not _reader_consistent(span, value):
            return False
        if mode is Convergence.SO and len(preds) > 1:
            return False
        if mode is Convergence.CPO:
            group = (span.key, preds)
            if group in groups:
                if groups[group] != value:
                    return False
            else:
                groups[group] = value
    return True


def export_witness(dag: OrderingDag, rf: ReadsFrom) -> str:
    """Serialize a found ordering: one ``a -> b`` line per edge, then one
    reads-from annotation per read, in stable op-id order."""
    lines = [f"{a} -> {b}" for a, b in dag.edges]
    for r in sorted(rf):
        src = rf[r]
        lines.append(f"{r} reads-from {'initial' if src == INITIAL else src}")
    return "\n".join(lines)
