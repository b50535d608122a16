"""Operation histories: line-delimited event files, spans, and per-client timelines.

A history file is UTF-8 text with one JSON object per line.  Each object has
exactly the fields ``index``, ``client``, ``phase``, ``f``, ``key``, ``value``
and ``time``.  Events pair up into operation spans (invoke + completion), and
the spans of each client form an ordered queue; the collection of queues is
the timeline that the checker consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum


class HistoryError(ValueError):
    """Raised for malformed history files or ill-formed event sequences."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class Kind(Enum):
    READ = "read"
    WRITE = "write"
    CAS = "cas"


class Phase(Enum):
    INVOKE = "invoke"
    OK = "ok"
    FAIL = "fail"
    INFO = "info"


class Outcome(Enum):
    OK = "ok"
    CAS_FAILED = "cas_failed"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class OpKind:
    """What an operation does: a read, a write of ``value``, or a
    compare-and-swap that writes ``value`` when the register equals
    ``expected``."""

    kind: Kind
    value: int | None = None
    expected: int | None = None

    def __post_init__(self):
        if self.kind is Kind.READ and not (self.value is None and self.expected is None):
            raise ValueError("read carries no payload")
        if self.kind is Kind.WRITE and (self.value is None or self.expected is not None):
            raise ValueError("write carries exactly a value")
        if self.kind is Kind.CAS and (self.value is None or self.expected is None):
            raise ValueError("cas carries both an expected and a new value")


def read_op() -> OpKind:
    return OpKind(Kind.READ)


def write_op(value: int) -> OpKind:
    return OpKind(Kind.WRITE, value=value)


def cas_op(expected: int, new: int) -> OpKind:
    return OpKind(Kind.CAS, value=new, expected=expected)


@dataclass(frozen=True)
class HistoryEvent:
    """One line of a history file."""

    index: int
    client: str
    phase: Phase
    kind: OpKind
    key: str
    value: int | None  # observed value on a read's ok completion
    time: int


@dataclass(frozen=True)
class OperationSpan:
    """One client operation from invocation to completion.

    ``end_time`` is absent for operations whose completion was never
    observed (outcome ``INDETERMINATE``); such writes/CAS may or may not
    have taken effect.  ``observed`` holds a read's returned value, or a
    successful CAS's expected value (the value its internal read saw).  A
    failed CAS saw an unknown value that differed from ``expected``, so its
    ``observed`` stays ``None``.
    """

    op_id: int
    client: str
    kind: OpKind
    key: str
    start_time: int
    end_time: int | None
    outcome: Outcome
    observed: int | None

    @property
    def is_indeterminate(self) -> bool:
        return self.outcome is Outcome.INDETERMINATE

    @property
    def may_write(self) -> bool:
        """True when the span writes a value on the branch where it takes effect."""
        if self.kind.kind is Kind.WRITE:
            return self.outcome is not Outcome.CAS_FAILED
        if self.kind.kind is Kind.CAS:
            return self.outcome in (Outcome.OK, Outcome.INDETERMINATE)
        return False

    @property
    def write_value(self) -> int | None:
        return self.kind.value if self.may_write else None

    @property
    def is_read_bearing(self) -> bool:
        """True when the span constrains the value it saw (reads and CAS)."""
        if self.kind.kind is Kind.READ:
            return self.outcome is Outcome.OK
        return self.kind.kind is Kind.CAS


@dataclass(frozen=True)
class Timeline:
    """Per-client queues of spans plus the object-name universe.

    Every object starts at the integer value 0.  Immutable after
    construction; safe to share across threads.
    """

    queues: dict[str, tuple[OperationSpan, ...]]
    spans: dict[int, OperationSpan]
    keys: frozenset[str]

    @property
    def clients(self) -> tuple[str, ...]:
        return tuple(self.queues)

    @property
    def op_count(self) -> int:
        return len(self.spans)

    def all_spans(self) -> tuple[OperationSpan, ...]:
        return tuple(self.spans[i] for i in sorted(self.spans))


_FIELDS = ("index", "client", "phase", "f", "key", "value", "time")


def _parse_line(raw: str, lineno: int) -> HistoryEvent:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise HistoryError(f"not a JSON object ({exc.msg})", lineno) from exc
    if not isinstance(obj, dict):
        raise HistoryError("not a JSON object", lineno)
    if set(obj) != set(_FIELDS):
        raise HistoryError(f"fields must be exactly {list(_FIELDS)}", lineno)
    if not isinstance(obj["index"], int) or isinstance(obj["index"], bool):
        raise HistoryError("index must be an integer", lineno)
    if not isinstance(obj["time"], int) or isinstance(obj["time"], bool):
        raise HistoryError("time must be an integer", lineno)
    if not isinstance(obj["client"], str) or not isinstance(obj["key"], str):
        raise HistoryError("client and key must be strings", lineno)
    try:
        phase = Phase(obj["phase"])
    except ValueError:
        raise HistoryError(f"unknown phase {obj['phase']!r}", lineno) from None
    f = obj["f"]
    value = obj["value"]
    observed = None
    if f == "write":
        if not _is_int(value):
            raise HistoryError("write events carry an integer value", lineno)
        kind = write_op(value)
    elif f == "cas":
        if (
            not isinstance(value, list)
            or len(value) != 2
            or not all(_is_int(v) for v in value)
        ):
            raise HistoryError("cas events carry a two-element [expected, new] value", lineno)
        kind = cas_op(value[0], value[1])
    elif f == "read":
        kind = read_op()
        if phase is Phase.OK:
            if not _is_int(value):
                raise HistoryError("read ok events carry the observed integer", lineno)
            observed = value
        elif value is not None:
            raise HistoryError("read events carry a value only on ok", lineno)
    else:
        raise HistoryError(f"unknown operation {f!r}", lineno)
    return HistoryEvent(
        index=obj["index"],
        client=obj["client"],
        phase=phase,
        kind=kind,
        key=obj["key"],
        value=observed,
        time=obj["time"],
    )


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def parse_history(text: str) -> list[HistoryEvent]:
    """Parse a history file into its event sequence.

    Rejects unrecognized lines, duplicate or decreasing indices, and time
    regressions, naming the offending line.
    """
    events: list[HistoryEvent] = []
    last_index: int | None = None
    last_time: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        ev = _parse_line(raw, lineno)
        if last_index is not None and ev.index <= last_index:
            if ev.index == last_index:
                raise HistoryError(f"duplicate index {ev.index}", lineno)
            raise HistoryError(f"index {ev.index} not increasing", lineno)
        if last_time is not None and ev.time < last_time:
            raise HistoryError(f"time {ev.time} regresses", lineno)
        last_index, last_time = ev.index, ev.time
        events.append(ev)
    return events


def serialize_history(events: list[HistoryEvent]) -> str:
    """Render events back to the line-delimited format, byte-stably."""
    lines = []
    for ev in events:
        if ev.kind.kind is Kind.WRITE:
            f, value = "write", ev.kind.value
        elif ev.kind.kind is Kind.CAS:
            f, value = "cas", [ev.kind.expected, ev.kind.value]
        else:
            f, value = "read", (ev.value if ev.phase is Phase.OK else None)
        obj = {
            "index": ev.index,
            "client": ev.client,
            "phase": ev.phase.value,
            "f": f,
            "key": ev.key,
            "value": value,
            "time": ev.time,
        }
        lines.append(json.dumps(obj, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")


def build_timeline(events: list[HistoryEvent]) -> Timeline:
    """Pair invocations with completions into per-client span queues.

    An invoke with no completion, or one completed with phase ``info``,
    yields an indeterminate span (the operation may or may not have taken
    effect).  Indeterminate reads constrain nothing and are dropped, as are
    reads/writes completed with phase ``fail`` (they definitely did not
    execute).  Span op_ids are the invoke events' indices.
    """
    pending: dict[str, HistoryEvent] = {}
    raw_spans: list[OperationSpan] = []

    def finish(invoke: HistoryEvent, completion: HistoryEvent | None, lineno: int | None):
        kind = invoke.kind
        if completion is None or completion.phase is Phase.INFO:
            if kind.kind is Kind.READ:
                return
            raw_spans.append(
                OperationSpan(
                    op_id=invoke.index,
                    client=invoke.client,
                    kind=kind,
                    key=invoke.key,
                    start_time=invoke.time,
                    end_time=None,
                    outcome=Outcome.INDETERMINATE,
                    observed=None,
                )
            )
            return
        if completion.time <= invoke.time:
            raise HistoryError(
                f"operation at index {invoke.index} has non-positive duration", lineno
            )
        if completion.phase is Phase.FAIL:
            if kind.kind is not Kind.CAS:
                return
            outcome, observed = Outcome.CAS_FAILED, None
        else:
            outcome = Outcome.OK
            if kind.kind is Kind.READ:
                observed = completion.value
            elif kind.kind is Kind.CAS:
                observed = kind.expected
            else:
                observed = None
        raw_spans.append(
            OperationSpan(
                op_id=invoke.index,
                client=invoke.client,
                kind=kind,
                key=invoke.key,
                start_time=invoke.time,
                end_time=completion.time,
                outcome=outcome,
                observed=observed,
            )
        )

    for pos, ev in enumerate(events, start=1):
        if ev.phase is Phase.INVOKE:
            if ev.client in pending:
                raise HistoryError(
                    f"client {ev.client!r} invoked concurrently (closed-loop violation)", pos
                )
            pending[ev.client] = ev
        else:
            invoke = pending.pop(ev.client, None)
            if invoke is None:
                raise HistoryError(
                    f"{ev.phase.value} for client {ev.client!r} without matching invoke", pos
                )
            if invoke.kind != ev.kind or invoke.key != ev.key:
                raise HistoryError(
                    f"completion at index {ev.index} does not match its invocation", pos
                )
            finish(invoke, ev, pos)
    for invoke in pending.values():
        finish(invoke, None, None)

    raw_spans.sort(key=lambda s: s.op_id)
    queues: dict[str, list[OperationSpan]] = {}
    for ev in events:
        if ev.phase is Phase.INVOKE:
            queues.setdefault(ev.client, [])
    for span in raw_spans:
        queues.setdefault(span.client, []).append(span)
    for client, spans in queues.items():
        for a, b in zip(spans, spans[1:]):
            if a.end_time is not None and a.end_time > b.start_time:
                raise HistoryError(
                    f"client {client!r} spans {a.op_id} and {b.op_id} overlap"
                )
    return Timeline(
        queues={c: tuple(spans) for c, spans in queues.items()},
        spans={s.op_id: s for s in raw_spans},
        keys=frozenset(s.key for s in raw_spans),
    )


def written_values(timeline: Timeline, key: str) -> set[int]:
    """All values that could ever be observed on ``key``: the initial 0 plus
    every value written by a write/CAS span, including indeterminate ones
    (they may have taken effect)."""
    values = {0}
    for span in timeline.spans.values():
        if span.key == key and span.may_write:
            values.add(span.kind.value)
    return values
