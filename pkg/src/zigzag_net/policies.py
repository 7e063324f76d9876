"""Transmission and ACK policies as per-slot decision functions.

Senders and receivers are 0-indexed. A priority ``order`` lists senders from
highest to lowest priority.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from . import rng as crng
from .codec import CodedTransmission, CollisionRecord, Packet, Part, encode_random, superpose
from .errors import InvalidProbability
from .gf import GF

TX_KINDS = ("always_on", "random_access", "centralized")
CODINGS = ("uncoded", "random_linear")
ACK_KINDS = ("arbitrary", "unacked", "priority", "longest_queue", "code_ack", "time_shared")
INNER_KINDS = ("priority", "longest_queue", "time_shared")


def _check_perm(order, n: int | None = None) -> tuple[int, ...]:
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(len(order))):
        raise ValueError(f"priority order {order} is not a permutation")
    if n is not None and len(order) != n:
        raise ValueError(f"priority order {order} does not cover {n} senders")
    return order


@dataclass(frozen=True)
class TransmissionPolicy:
    kind: str = "always_on"
    q: float = 1.0
    order: tuple[int, ...] | None = None
    coding: str = "uncoded"

    def __post_init__(self):
        if self.kind not in TX_KINDS:
            raise ValueError(f"unknown transmission policy {self.kind!r}")
        if self.coding not in CODINGS:
            raise ValueError(f"unknown coding mode {self.coding!r}")
        if self.kind == "random_access" and not 0.0 < self.q <= 1.0:
            raise InvalidProbability(f"access probability {self.q} not in (0, 1]")
        if self.order is not None:
            object.__setattr__(self, "order", _check_perm(self.order))

    @classmethod
    def always_on(cls, coding: str = "uncoded") -> "TransmissionPolicy":
        return cls("always_on", 1.0, None, coding)

    @classmethod
    def random_access(cls, q: float, coding: str = "uncoded") -> "TransmissionPolicy":
        return cls("random_access", q, None, coding)

    @classmethod
    def centralized(cls, order: Sequence[int] | None = None) -> "TransmissionPolicy":
        return cls("centralized", 1.0, None if order is None else tuple(order), "uncoded")

    @property
    def access_prob(self) -> float:
        return self.q if self.kind == "random_access" else 1.0


@dataclass(frozen=True)
class AckPolicy:
    """ACK rule of one receiver (or, for ``code_ack``, of every receiver).

    ``time_shared`` cycles deterministically through priority orders: each
    frame of ``frame`` slots is split into consecutive blocks whose lengths
    are proportional to the weights in ``schedule``.
    """

    kind: str = "arbitrary"
    order: tuple[int, ...] | None = None
    inner: tuple["AckPolicy", ...] = ()
    random_tie: bool = False
    schedule: tuple[tuple[tuple[int, ...], float], ...] = ()
    frame: int = 1000

    def __post_init__(self):
        if self.kind not in ACK_KINDS:
            raise ValueError(f"unknown ACK policy {self.kind!r}")
        if self.kind == "priority":
            if self.order is None:
                raise ValueError("priority ACK needs an order")
            object.__setattr__(self, "order", _check_perm(self.order))
        if self.kind == "code_ack":
            if not self.inner:
                object.__setattr__(self, "inner", (AckPolicy("longest_queue"),))
            for p in self.inner:
                if p.kind not in INNER_KINDS:
                    raise ValueError(f"Code-ACK inner policy must be priority or longest_queue, got {p.kind!r}")
        if self.kind == "time_shared":
            if not self.schedule:
                raise ValueError("time-shared ACK needs a schedule")
            sched = tuple((_check_perm(o), float(w)) for o, w in self.schedule)
            if any(w < 0 for _, w in sched) or sum(w for _, w in sched) <= 0:
                raise ValueError("time-sharing weights must be nonnegative with a positive sum")
            object.__setattr__(self, "schedule", sched)
            if self.frame < 1:
                raise ValueError("frame length must be positive")
            total = sum(w for _, w in sched)
            bounds, acc = [], 0.0
            for o, w in sched:
                acc += w / total
                bounds.append((round(acc * self.frame), o))
            object.__setattr__(self, "_bounds", tuple(bounds))

    def order_at(self, slot: int) -> tuple[int, ...] | None:
        if self.kind == "priority":
            return self.order
        if self.kind == "time_shared":
            pos = slot % self.frame
            for end, o in self._bounds:
                if pos < end:
                    return o
            return self._bounds[-1][1]
        return None

    def inner_for(self, j: int) -> "AckPolicy":
        return self.inner[j] if len(self.inner) > 1 else self.inner[0]


# sender-side state ----------------------------------------------------------


@dataclass
class SenderQueueState:
    """Queue of one sender plus, per packet, the receivers that ACKed it."""

    index: int
    neighbors: tuple[int, ...]
    queue: deque = field(default_factory=deque)
    acked: dict[int, set[int]] = field(default_factory=dict)
    token: bool = False

    def __len__(self) -> int:
        return len(self.queue)

    def push(self, packet: Packet) -> None:
        self.queue.append(packet)
        self.acked[packet.global_id] = set()

    def head(self) -> Packet:
        return self.queue[0]

    def ids(self) -> list[int]:
        return [p.global_id for p in self.queue]


# decisions ------------------------------------------------------------------


def transmit_decision(policy: TransmissionPolicy, sender: SenderQueueState, slot: int, coin: int,
                      F: GF | None = None, coder=None) -> tuple[bool, CodedTransmission | None]:
    """Whether ``sender`` transmits in ``slot`` and what.

    ``coin`` is the sender's 64-bit draw for this slot (random access
    transmits iff it falls below the access threshold). ``coder`` supplies
    coefficients for ``random_linear`` coding.
    """
    if not sender.queue:
        return False, None
    if policy.kind == "random_access":
        if not crng.bernoulli(coin, crng.threshold(policy.q)):
            return False, None
    elif policy.kind == "centralized" and not sender.token:
        return False, None
    if policy.coding == "random_linear":
        return True, encode_random(list(sender.queue), F, coder)
    head = sender.head()
    return True, CodedTransmission(sender.index, {head.global_id: 1}, head.payload)


@dataclass(frozen=True)
class Reception:
    outcome: str  # "idle" | "useful" | "lost"
    record: CollisionRecord | None = None
    count: int = 0
    senders: tuple[int, ...] = ()
    connected: tuple[int, ...] = ()


def reception_outcome(transmissions: Mapping[int, CodedTransmission | None], connected: Callable[[int, int], bool],
                      in_neighbors: Sequence[int], j: int, C: int | None, offset_gain: Callable[[int], tuple[int, int]],
                      F: GF, slot: int, length: int) -> Reception:
    """What receiver ``j`` observes in one slot.

    ``connected(i, j)`` reports the link state; ``offset_gain(i)`` returns
    the symbol offset and gain for sender ``i``'s part. ``C=None`` means no
    contention cap.
    """
    up = tuple(i for i in in_neighbors if connected(i, j))
    surv = tuple(i for i in up if transmissions.get(i) is not None)
    if not surv:
        return Reception("idle", connected=up)
    if C is not None and len(surv) > C:
        return Reception("lost", count=len(surv), senders=surv, connected=up)
    parts = [Part(transmissions[i], *offset_gain(i)) for i in surv]
    rec = superpose(parts, F, slot=slot, length=length)
    return Reception("useful", rec, len(surv), surv, up)


def _longest(cands: Iterable[int], Q: Mapping[int, int]) -> int | None:
    best, bq = None, 0
    for i in sorted(cands):
        if Q.get(i, 0) > bq:
            best, bq = i, Q[i]
    return best


def _by_order(order: Sequence[int], cands: Iterable[int], Q: Mapping[int, int] | None) -> int | None:
    cs = set(cands)
    for i in order:
        if i in cs and (Q is None or Q.get(i, 0) > 0):
            return i
    return None


def ack_decide(policy: AckPolicy, reception: Reception, queues: Mapping[int, int] | None = None,
               acked_by_me: Iterable[int] = (), slot: int = 0, tie_draw: int = 0, j: int = 0) -> int | None:
    """Sender to acknowledge after ``reception``, or ``None``.

    ``queues`` holds the relevant backlogs: real queue lengths for priority
    and longest-queue ACKs, unseen-by-this-receiver counts for Code-ACK.
    """
    if reception.outcome != "useful":
        return None
    colliders = reception.senders
    kind = policy.kind
    if kind == "code_ack":
        return ack_decide(policy.inner_for(j), reception, queues, acked_by_me, slot, tie_draw, j)
    if kind == "arbitrary":
        if policy.random_tie:
            return colliders[crng.below(tie_draw, len(colliders))]
        return min(colliders)
    if kind == "unacked":
        done = set(acked_by_me)
        fresh = sorted(i for i in colliders if i not in done)
        if not fresh:
            return None
        return fresh[crng.below(tie_draw, len(fresh))] if policy.random_tie else fresh[0]
    if kind in ("priority", "time_shared"):
        return _by_order(policy.order_at(slot), colliders, queues)
    if kind == "longest_queue":
        if queues is None:
            raise ValueError("longest-queue ACK needs queue lengths")
        return _longest(colliders, queues)
    raise AssertionError(kind)


def drop_rule(sender: SenderQueueState, acks: Mapping[int, Iterable[int]]) -> list[int]:
    """Record ``acks`` (receiver -> packet ids) and remove fully ACKed packets.

    A packet leaves the queue once every neighbouring receiver has ACKed
    it. Returns the dropped ids in queue order.
    """
    for j, ids in acks.items():
        for k in ids:
            if k in sender.acked:
                sender.acked[k].add(j)
    need = set(sender.neighbors)
    keep, dropped = deque(), []
    for p in sender.queue:
        if sender.acked[p.global_id] >= need:
            dropped.append(p.global_id)
            del sender.acked[p.global_id]
        else:
            keep.append(p)
    if dropped:
        sender.queue = keep
    return dropped


# centralized schedulers -----------------------------------------------------


def token_holder(queue_lengths: Sequence[int], order: Sequence[int] | None = None) -> int | None:
    """Single-receiver centralized choice: longest queue, ties by ``order``.

    With one packet per sender this serves senders one after another.
    """
    order = range(len(queue_lengths)) if order is None else order
    best, bq = None, 0
    for i in order:
        if queue_lengths[i] > bq:
            best, bq = i, queue_lengths[i]
    return best


def greedy_non_interfering(topology, pending: Mapping[int, set[int]], start: int) -> list[int]:
    """Round-robin greedy choice of senders whose receiver sets do not overlap.

    ``pending[i]`` lists the receivers still waiting for sender ``i``. Only
    senders with pending receivers are scheduled; scanning starts at
    ``start`` so every sender gets a turn at being first.
    """
    ns = topology.n_senders
    used: set[int] = set()
    chosen = []
    for k in range(ns):
        i = (start + k) % ns
        if not pending.get(i):
            continue
        outs = set(topology.out_neighbors(i))
        if outs & used:
            continue
        used |= outs
        chosen.append(i)
    return chosen
