"""Slotted-time simulation: delivery-time and streaming experiments.

Per slot the engine applies, in order: channel sampling, transmit decisions,
receptions (each receiver updates its degree-of-freedom ledger), ACK
decisions, drops, and finally arrivals. Every random quantity is a counter
draw keyed by ``(seed, stream, trial, slot, index)``, so trials are
independent and reproducible in any order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from . import rng as crng
from .codec import Packet, ReceiverState, make_payload, zigzag_decode
from .errors import HorizonExceeded, InvalidRate
from .gf import field as get_field, parse_field
from .network import ErasureModel, Topology
from .policies import (AckPolicy, SenderQueueState, TransmissionPolicy, ack_decide, drop_rule,
                       greedy_non_interfering, reception_outcome, token_holder, transmit_decision)

WORKERS_ENV = "ZIGZAG_WORKERS"
STABLE_SLOPE = 1e-3
UNSTABLE_SLOPE = 1e-2


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ArrivalConfig:
    """Per-sender arrivals: Bernoulli, or the sum of ``a_max`` Bernoulli lanes (batch)."""

    rates: tuple[float, ...] = ()
    kind: str = "bernoulli"
    a_max: int = 1

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if self.kind not in ("bernoulli", "batch"):
            raise ValueError(f"unknown arrival kind {self.kind!r}")
        if self.kind == "bernoulli" and self.a_max != 1:
            object.__setattr__(self, "a_max", 1)
        if not 1 <= self.a_max <= kernels.ARRIVAL_LANES:
            raise ValueError(f"a_max must lie in 1..{kernels.ARRIVAL_LANES}")
        for r in self.rates:
            if not 0.0 <= r <= 1.0 or math.isnan(r):
                raise InvalidRate(f"arrival rate {r} outside [0, 1]")

    def lane_prob(self, i: int) -> float:
        return self.rates[i] / self.a_max


@dataclass(frozen=True)
class SimConfig:
    """Everything that defines one experiment except its length.

    ``C=None`` means no contention cap. ``field`` is a field string for
    :func:`gf.parse_field`; the large prime field is the default because
    random coding and the ledger's evaluation of the delay variable rely on
    a large field.
    """

    topology: Topology
    p: float | Mapping = 0.0
    tx: TransmissionPolicy = TransmissionPolicy()
    ack: AckPolicy = AckPolicy()
    C: int | None = None
    field: str = "m61"
    L: int = 16
    u_max: int | None = None
    random_gains: bool = False
    payloads: bool = False
    seed: int = 0
    max_slots: int = 100_000

    def __post_init__(self):
        self.topology.validate_for_experiment()
        ErasureModel(self.topology, self.p)
        parse_field(self.field)
        if self.C is not None and self.C < 1:
            raise ValueError("contention cap must be at least 1")
        if self.L < 1:
            raise ValueError("packet length must be positive")
        if self.offset_max >= self.L:
            raise ValueError("offsets must stay below the packet length")

    @property
    def offset_max(self) -> int:
        return self.L // 4 if self.u_max is None else self.u_max


# engine ---------------------------------------------------------------------


@dataclass
class AuditCounters:
    ack_without_innovation: int = 0
    ack_rank_mismatch: int = 0
    conservation: int = 0
    empty_epochs: int = 0
    epoch_failures: int = 0
    decode_checks: int = 0
    decode_failures: int = 0

    def merge(self, other: "AuditCounters") -> "AuditCounters":
        return AuditCounters(**{k: getattr(self, k) + getattr(other, k) for k in self.__dataclass_fields__})

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class Engine:
    """State of one trial; :meth:`step` advances one slot."""

    def __init__(self, cfg: SimConfig, trial: int = 0, arrivals: ArrivalConfig | None = None):
        self.cfg = cfg
        self.trial = trial
        topo = cfg.topology
        self.topo = topo
        self.F = get_field(parse_field(cfg.field))
        self.model = ErasureModel(topo, cfg.p)
        self.arrivals = arrivals
        seed = cfg.seed
        self.keys = {s: crng.trial_key(seed, s, trial) for s in crng.Stream}
        self.senders = [SenderQueueState(i, topo.out_neighbors(i)) for i in range(topo.n_senders)]
        q = self.F.q
        self.receivers = []
        for j in range(topo.n_receivers):
            z = 1 + crng.below(crng.draw(self.keys[crng.Stream.LEDGER], 0, j), q - 1)
            self.receivers.append(ReceiverState(self.F, z=z, keep_records=cfg.payloads))
        self.code_ack = cfg.ack.kind == "code_ack"
        # with several receivers an uncoded "unacked" ACK must follow innovation, or a sender
        # ACKed on a redundant collision may leave before another receiver has its packet
        self.pivot_acks = (cfg.ack.kind == "unacked" and topo.n_receivers > 1
                           and cfg.tx.coding == "uncoded")
        self.unseen = {(i, j): 0 for (i, j) in topo.edge_list}
        self.owner: dict[int, int] = {}
        self.truth: dict[int, tuple[int, ...]] = {}
        self.arrived_ids: list[set[int]] = [set() for _ in range(topo.n_senders)]
        self.n_arrived = [0] * topo.n_senders
        self.n_dropped = [0] * topo.n_senders
        self.acks: list[list[tuple[int, int, int]]] = [[] for _ in range(topo.n_receivers)]
        self.audit = AuditCounters()
        self.next_gid = 0
        self.t = 0

    # packets --------------------------------------------------------------

    def add_packet(self, i: int, slot: int) -> Packet:
        gid = self.next_gid
        self.next_gid += 1
        payload = make_payload(self.F, self.cfg.L, self.cfg.seed * 1_000_003 + self.trial, gid) \
            if self.cfg.payloads else None
        pk = Packet(gid, i, payload, slot)
        self.senders[i].push(pk)
        self.owner[gid] = i
        if payload is not None:
            self.truth[gid] = payload
        self.arrived_ids[i].add(gid)
        self.n_arrived[i] += 1
        for j in self.topo.out_neighbors(i):
            self.unseen[(i, j)] += 1
        return pk

    # one slot ---------------------------------------------------------------

    def _connected(self, t: int) -> dict[tuple[int, int], bool]:
        key = self.keys[crng.Stream.CHANNEL]
        out = {}
        for (i, j) in self.topo.edge_list:
            h = crng.draw(key, t, self.topo.edge_index(i, j))
            out[(i, j)] = not crng.bernoulli(h, self.model.erasure_threshold(i, j))
        return out

    def _assign_tokens(self, t: int) -> None:
        tx = self.cfg.tx
        for s in self.senders:
            s.token = False
        if tx.kind != "centralized":
            return
        if self.topo.n_receivers == 1:
            h = token_holder([len(s) for s in self.senders], tx.order)
            if h is not None:
                self.senders[h].token = True
            return
        pending = {}
        for s in self.senders:
            if s.queue:
                pending[s.index] = set(s.neighbors) - s.acked[s.head().global_id]
        for i in greedy_non_interfering(self.topo, pending, t % self.topo.n_senders):
            self.senders[i].token = True

    def step(self, arrivals_on: bool = True) -> dict:
        t = self.t
        cfg, F, topo = self.cfg, self.F, self.topo
        conn = self._connected(t)
        self._assign_tokens(t)
        trans = {}
        tkey, ckey = self.keys[crng.Stream.TRANSMIT], self.keys[crng.Stream.CODING]
        for s in self.senders:
            coder = crng.CounterRNG(ckey, t, s.index) if cfg.tx.coding == "random_linear" else None
            ok, tr = transmit_decision(cfg.tx, s, t, crng.draw(tkey, t, s.index), F, coder)
            if ok:
                trans[s.index] = tr
        okey, gkey = self.keys[crng.Stream.OFFSET], self.keys[crng.Stream.GAIN]
        akey = self.keys[crng.Stream.ACK_TIE]
        acks_to: dict[int, dict[int, list[int]]] = {}
        events = []
        for j in range(topo.n_receivers):
            R = self.receivers[j]

            def offset_gain(i, j=j):
                e = topo.edge_index(i, j)
                u = crng.below(crng.draw(okey, t, e), cfg.offset_max + 1)
                g = 1 + crng.below(crng.draw(gkey, t, e), F.q - 1) if cfg.random_gains else 1
                return u, g

            nb = topo.in_neighbors(j)
            rec = reception_outcome(trans, lambda i, jj: conn[(i, jj)], nb, j, cfg.C, offset_gain, F, t, cfg.L)
            pre_unseen = {i: self.unseen[(i, j)] for i in nb}
            innov = False
            if rec.outcome == "useful":
                innov = R.accept(rec.record)
                if innov:
                    c = R.ledger.last_pivot
                    self.unseen[(self.owner[c], j)] -= 1
            if self.code_ack:
                queues = pre_unseen
            else:
                queues = {i: len(self.senders[i]) for i in nb}
            acked_by_me = ()
            if cfg.ack.kind == "unacked" and rec.outcome == "useful":
                acked_by_me = [i for i in rec.senders
                               if j in self.senders[i].acked.get(next(iter(trans[i].coefficients)), ())]
            if self.pivot_acks:
                # ACK the owner of the newly seen packet, so ACKed == seen at every receiver
                a = self.owner[R.ledger.last_pivot] if innov else None
            else:
                a = ack_decide(cfg.ack, rec, queues, acked_by_me, t, crng.draw(akey, t, j), j)
            if a is not None:
                if not innov:
                    self.audit.ack_without_innovation += 1
                if self.code_ack:
                    seen = R.seen
                    ids = [k for k in self.senders[a].ids() if k in seen]
                else:
                    ids = [k for k, c in trans[a].coefficients.items() if c]
                acks_to.setdefault(a, {})[j] = ids
                self.acks[j].append((t, a, R.rank))
            events.append((j, rec.outcome, a, innov))
        for i, acks in acks_to.items():
            dropped = drop_rule(self.senders[i], acks)
            self.n_dropped[i] += len(dropped)
        if arrivals_on and self.arrivals is not None:
            ak = self.keys[crng.Stream.ARRIVAL]
            arr = self.arrivals
            for i in range(topo.n_senders):
                thr = crng.threshold(arr.lane_prob(i))
                for m in range(arr.a_max):
                    if crng.bernoulli(crng.draw(ak, t, i * kernels.ARRIVAL_LANES + m), thr):
                        self.add_packet(i, t)
        self.t = t + 1
        return {"events": events}

    # audits -----------------------------------------------------------------

    def queue_lengths(self) -> list[int]:
        return [len(s) for s in self.senders]

    def receiver_complete(self, j: int) -> bool:
        need = sum(self.n_arrived[i] for i in self.topo.in_neighbors(j))
        return self.receivers[j].rank >= need

    def virtual_empty(self, j: int) -> bool:
        return all(self.unseen[(i, j)] == 0 for i in self.topo.in_neighbors(j))

    def check_conservation(self) -> bool:
        ok = all(self.n_arrived[i] == self.n_dropped[i] + len(self.senders[i]) for i in range(self.topo.n_senders))
        if not ok:
            self.audit.conservation += 1
        return ok

    def audit_receiver(self, j: int, validate_payloads: bool | None = None) -> bool:
        """Does receiver ``j`` hold every packet that ever arrived at its neighbours?"""
        R = self.receivers[j]
        want = set().union(*(self.arrived_ids[i] for i in self.topo.in_neighbors(j)))
        ok = want <= R.decoded
        if ok and (self.cfg.payloads if validate_payloads is None else validate_payloads) and R.records:
            self.audit.decode_checks += 1
            involved = {k for rec in R.records for k in rec.packet_ids()}
            decoded, residual = zigzag_decode(R)
            good = not residual and all(decoded.get(k) == self.truth[k] for k in involved & want)
            if not good:
                self.audit.decode_failures += 1
                ok = False
        return ok

    def empty_epoch_audit(self) -> None:
        """At an epoch where every relevant queue is empty, check full decodability."""
        for j in range(self.topo.n_receivers):
            empty = self.virtual_empty(j) if self.code_ack else \
                all(len(self.senders[i]) == 0 for i in self.topo.in_neighbors(j))
            if not empty:
                continue
            self.audit.empty_epochs += 1
            if not self.audit_receiver(j):
                self.audit.epoch_failures += 1
            R = self.receivers[j]
            if R.records and not any(len(self.senders[i]) for i in self.topo.in_neighbors(j)):
                R.forget_records()


# delivery -------------------------------------------------------------------


@dataclass
class DeliveryTrace:
    T: list[int]  # per receiver
    ack_log: list[list[tuple[int, int, int]]]  # per receiver: (slot, sender, rank after)
    audit: AuditCounters
    ranks: list[int]


def delivery_trial(cfg: SimConfig, trial: int) -> DeliveryTrace:
    """One delivery experiment: every sender starts with one packet."""
    eng = Engine(cfg, trial)
    topo = cfg.topology
    for i in range(topo.n_senders):
        eng.add_packet(i, 0)
    T = [-1] * topo.n_receivers
    while True:
        if eng.t >= cfg.max_slots:
            raise HorizonExceeded(f"trial {trial} unfinished after {cfg.max_slots} slots",
                                  unfinished=sum(1 for x in T if x < 0))
        eng.step(arrivals_on=False)
        for j in range(topo.n_receivers):
            if T[j] < 0 and eng.receiver_complete(j):
                T[j] = eng.t
                if cfg.payloads and not eng.audit_receiver(j, validate_payloads=True):
                    eng.audit.epoch_failures += 1
        if all(x >= 0 for x in T) and all(len(s) == 0 for s in eng.senders):
            break
    if not eng.code_ack:
        for j in range(topo.n_receivers):
            for k, (_, _, r) in enumerate(eng.acks[j], start=1):
                if r != k:
                    eng.audit.ack_rank_mismatch += 1
    return DeliveryTrace(T, eng.acks, eng.audit, [R.rank for R in eng.receivers])


@dataclass
class DeliveryStats:
    """Delivery-time samples per receiver and their summaries."""

    samples: list[np.ndarray]
    interval_means: list[np.ndarray] = dc_field(default_factory=list)
    audit: AuditCounters = dc_field(default_factory=AuditCounters)
    engine: str = "general"

    @property
    def trials(self) -> int:
        return len(self.samples[0])

    def mean(self, j: int = 0) -> float:
        return float(np.mean(self.samples[j]))

    def se(self, j: int = 0) -> float:
        x = self.samples[j]
        return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0

    def ci95(self, j: int = 0) -> float:
        return 1.96 * self.se(j)

    def merge(self, other: "DeliveryStats") -> "DeliveryStats":
        return DeliveryStats([np.concatenate([a, b]) for a, b in zip(self.samples, other.samples)],
                             [(a * self.trials + b * other.trials) / (self.trials + other.trials)
                              for a, b in zip(self.interval_means, other.interval_means)],
                             self.audit.merge(other.audit), self.engine)


def kernel_eligible(cfg: SimConfig) -> bool:
    return (cfg.topology.n_receivers == 1 and cfg.tx.coding == "uncoded" and not cfg.payloads
            and cfg.ack.kind in ("arbitrary", "unacked"))


def _kernel_delivery(cfg: SimConfig, start: int, stop: int) -> DeliveryStats:
    n = cfg.topology.n_senders
    trials = np.arange(start, stop)
    model = ErasureModel(cfg.topology, cfg.p)
    if model.uniform is None and len({model.prob(i, 0) for i in range(n)}) > 1:
        raise ValueError("the delivery kernel needs one erasure probability for all links")
    p_thr, p_all = kernels.thr_pair(model.prob(0, 0))
    q_thr, q_all = kernels.thr_pair(cfg.tx.access_prob)
    mode = {"always_on": kernels.MODE_ALWAYS, "random_access": kernels.MODE_RANDOM,
            "centralized": kernels.MODE_CENTRAL}[cfg.tx.kind]
    order = np.array(cfg.tx.order if cfg.tx.order is not None else range(n), dtype=np.int64)
    T = np.empty(len(trials), np.int64)
    acks = np.zeros((len(trials), n), np.int64)
    kernels.delivery_batch(crng.trial_keys(cfg.seed, crng.Stream.CHANNEL, trials),
                           crng.trial_keys(cfg.seed, crng.Stream.TRANSMIT, trials),
                           crng.trial_keys(cfg.seed, crng.Stream.ACK_TIE, trials),
                           n, p_thr, p_all, q_thr, q_all, mode, order, 0 if cfg.C is None else cfg.C,
                           cfg.ack.random_tie, cfg.max_slots, T, acks)
    if (T < 0).any():
        raise HorizonExceeded(f"{int((T < 0).sum())} trials unfinished after {cfg.max_slots} slots",
                              unfinished=int((T < 0).sum()))
    X = np.diff(np.concatenate([np.zeros((len(trials), 1), np.int64), acks], axis=1), axis=1)
    return DeliveryStats([T.astype(float)], [X.mean(axis=0)], AuditCounters(), "kernel")


def _general_delivery(cfg: SimConfig, start: int, stop: int) -> DeliveryStats:
    nr = cfg.topology.n_receivers
    samples = [[] for _ in range(nr)]
    xs = [[] for _ in range(nr)]
    audit = AuditCounters()
    for trial in range(start, stop):
        tr = delivery_trial(cfg, trial)
        audit = audit.merge(tr.audit)
        for j in range(nr):
            samples[j].append(tr.T[j])
            times = [0] + [s + 1 for s, _, _ in tr.ack_log[j]]
            xs[j].append(np.diff(times))
    means = []
    for j in range(nr):
        width = max(len(x) for x in xs[j])
        pad = np.full((len(xs[j]), width), np.nan)
        for r, x in enumerate(xs[j]):
            pad[r, :len(x)] = x
        means.append(np.nanmean(pad, axis=0))
    return DeliveryStats([np.array(s, float) for s in samples], means, audit, "general")


def _delivery_chunk(args):
    cfg, start, stop, use_kernel = args
    return _kernel_delivery(cfg, start, stop) if use_kernel else _general_delivery(cfg, start, stop)


def run_delivery(cfg: SimConfig, trials: int, engine: str = "auto", workers: int | None = None) -> DeliveryStats:
    """Monte-Carlo delivery times over ``trials`` independent trials.

    ``engine="kernel"`` uses the compiled single-receiver loop (same draws,
    same results as the general engine); ``"auto"`` picks it whenever the
    configuration allows.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if engine not in ("auto", "kernel", "general"):
        raise ValueError(f"unknown engine {engine!r}")
    use_kernel = engine == "kernel" or (engine == "auto" and kernel_eligible(cfg))
    if use_kernel and not kernel_eligible(cfg):
        raise ValueError("configuration not supported by the delivery kernel")
    workers = default_workers() if workers is None else workers
    if workers <= 1 or trials < 2 * workers:
        return _delivery_chunk((cfg, 0, trials, use_kernel))
    bounds = np.linspace(0, trials, workers + 1).astype(int)
    jobs = [(cfg, int(a), int(b), use_kernel) for a, b in zip(bounds, bounds[1:]) if b > a]
    with ProcessPoolExecutor(workers) as ex:
        parts = list(ex.map(_delivery_chunk, jobs))
    out = parts[0]
    for part in parts[1:]:
        out = out.merge(part)
    return out


# streaming ------------------------------------------------------------------


def stability_verdict(times: Sequence[float], tavg: Sequence[float]) -> tuple[str, float]:
    """Slope test on the running average of the total queue over the second half."""
    times = np.asarray(times, float)
    tavg = np.asarray(tavg, float)
    if len(times) < 4:
        return "inconclusive", float("nan")
    half = times >= times[-1] / 2
    slope = float(np.polyfit(times[half], tavg[half], 1)[0])
    if slope < STABLE_SLOPE:
        return "stable", slope
    if slope > UNSTABLE_SLOPE:
        return "unstable", slope
    return "inconclusive", slope


@dataclass
class StreamingStats:
    horizon: int
    mean_queue: float  # time average of the total queue
    times: np.ndarray
    tavg_total: np.ndarray
    snapshots: np.ndarray  # (checkpoints, senders)
    arrived: list[int]
    served: list[int]
    final_queue: list[int]
    decoded: list[int]
    verdict: str
    slope: float
    audit: AuditCounters = dc_field(default_factory=AuditCounters)
    engine: str = "general"


def _serve_mode(cfg: SimConfig) -> int | None:
    if cfg.tx.kind == "centralized":
        return kernels.SERVE_CENTRAL
    return {"priority": kernels.SERVE_PRIORITY, "longest_queue": kernels.SERVE_LONGEST,
            "time_shared": kernels.SERVE_SHARED}.get(cfg.ack.kind)


def streaming_kernel_eligible(cfg: SimConfig) -> bool:
    return (cfg.topology.n_receivers == 1 and not cfg.payloads and cfg.tx.coding == "uncoded"
            and cfg.tx.kind in ("always_on", "centralized") and cfg.C is None and _serve_mode(cfg) is not None)


def _checkpoint_every(horizon: int, every: int | None) -> int:
    return every if every else max(1, horizon // 1000)


class _KernelStream:
    def __init__(self, cfg: SimConfig, arrivals: ArrivalConfig, trial: int):
        n = cfg.topology.n_senders
        self.cfg, self.arrivals, self.n = cfg, arrivals, n
        model = ErasureModel(cfg.topology, cfg.p)
        if model.uniform is None and len({model.prob(i, 0) for i in range(n)}) > 1:
            raise ValueError("the streaming kernel needs one erasure probability for all links")
        self.p_thr, self.p_all = kernels.thr_pair(model.prob(0, 0))
        pairs = [kernels.thr_pair(arrivals.lane_prob(i)) for i in range(n)]
        self.lam_thr = np.array([p[0] for p in pairs], dtype=np.uint64)
        self.lam_all = np.array([p[1] for p in pairs], dtype=np.bool_)
        ack, tx = cfg.ack, cfg.tx
        if ack.kind == "time_shared":
            self.orders = np.array([o for o, _ in ack.schedule], dtype=np.int64)
            self.bounds = np.array([b for b, _ in ack._bounds], dtype=np.int64)
        else:
            o = ack.order if ack.kind == "priority" else (tx.order if tx.order is not None else tuple(range(n)))
            self.orders = np.array([o], dtype=np.int64)
            self.bounds = np.array([ack.frame], dtype=np.int64)
        self.mode = _serve_mode(cfg)
        self.ckey = np.uint64(crng.trial_key(cfg.seed, crng.Stream.CHANNEL, trial))
        self.akey = np.uint64(crng.trial_key(cfg.seed, crng.Stream.ARRIVAL, trial))
        self.Q = np.zeros(n, np.int64)
        self.arrived = np.zeros(n, np.int64)
        self.served = np.zeros(n, np.int64)
        self.area = np.zeros(1, np.float64)
        self.t = 0

    def run(self, slots: int, every: int):
        cps = slots // every + 1
        tavg = np.zeros(cps)
        snaps = np.zeros((cps, self.n), np.int64)
        k = kernels.streaming_trace(self.ckey, self.akey, self.n, self.p_thr, self.p_all, self.lam_thr,
                                    self.lam_all, self.arrivals.a_max, self.mode, self.orders, self.bounds,
                                    self.cfg.ack.frame, self.t, slots, every, self.Q, self.arrived, self.served,
                                    self.area, tavg, snaps)
        first = (self.t // every + 1) * every
        self.t += slots
        return first + every * np.arange(k) , tavg[:k], snaps[:k]


def run_streaming(cfg: SimConfig, arrivals: ArrivalConfig, horizon: int = 1_000_000, trial: int = 0,
                  engine: str = "auto", every: int | None = None, extend: bool = True,
                  drain: int = 0, audit_every_slot: bool = False) -> StreamingStats:
    """Simulate one streaming trace of ``horizon`` slots.

    If the slope test is inconclusive and ``extend`` is set, the trace is
    continued for another ``horizon`` slots and judged again. ``drain``
    slots without arrivals are appended at the end (general engine only)
    before the final decodability audit.
    """
    n = cfg.topology.n_senders
    if len(arrivals.rates) != n:
        raise InvalidRate(f"expected {n} arrival rates, got {len(arrivals.rates)}")
    if engine not in ("auto", "kernel", "general"):
        raise ValueError(f"unknown engine {engine!r}")
    use_kernel = engine == "kernel" or (engine == "auto" and streaming_kernel_eligible(cfg) and not drain)
    if use_kernel and not streaming_kernel_eligible(cfg):
        raise ValueError("configuration not supported by the streaming kernel")
    every = _checkpoint_every(horizon, every)
    if use_kernel:
        ks = _KernelStream(cfg, arrivals, trial)
        times, tavg, snaps = ks.run(horizon, every)
        verdict, slope = stability_verdict(times, tavg)
        if verdict == "inconclusive" and extend:
            t2, a2, s2 = ks.run(horizon, every)
            times, tavg, snaps = np.concatenate([times, t2]), np.concatenate([tavg, a2]), np.concatenate([snaps, s2])
            verdict, slope = stability_verdict(times, tavg)
        return StreamingStats(ks.t, float(ks.area[0] / ks.t), times, tavg, snaps, ks.arrived.tolist(),
                              ks.served.tolist(), ks.Q.tolist(), [int(ks.served.sum())], verdict, slope,
                              AuditCounters(), "kernel")
    eng = Engine(cfg, trial, arrivals)
    area = 0.0
    times, tavg, snaps = [], [], []

    def advance(slots):
        nonlocal area
        for _ in range(slots):
            area += sum(eng.queue_lengths())
            eng.step(arrivals_on=True)
            t = eng.t
            if audit_every_slot or t % every == 0:
                _slot_audits(eng)
            if t % every == 0:
                times.append(t)
                tavg.append(area / t)
                snaps.append(eng.queue_lengths())

    advance(horizon)
    verdict, slope = stability_verdict(times, tavg)
    if verdict == "inconclusive" and extend:
        advance(horizon)
        verdict, slope = stability_verdict(times, tavg)
    T = eng.t
    mean_q = area / T
    for _ in range(drain):
        eng.step(arrivals_on=False)
        _slot_audits(eng)
        done = all(eng.virtual_empty(j) for j in range(cfg.topology.n_receivers)) if eng.code_ack \
            else not any(eng.queue_lengths())
        if done:
            break
    if drain:
        for j in range(cfg.topology.n_receivers):
            if not eng.audit_receiver(j):
                eng.audit.epoch_failures += 1
    return StreamingStats(T, mean_q, np.array(times), np.array(tavg), np.array(snaps, dtype=np.int64).reshape(-1, n),
                          list(eng.n_arrived), list(eng.n_dropped), eng.queue_lengths(),
                          [len(R.decoded) for R in eng.receivers], verdict, slope, eng.audit, "general")


def _slot_audits(eng: Engine) -> None:
    eng.check_conservation()
    if not eng.code_ack and eng.topo.n_receivers == 1:
        if len(eng.acks[0]) != eng.receivers[0].rank:
            eng.audit.ack_rank_mismatch += 1
    eng.empty_epoch_audit()


# stability probe ------------------------------------------------------------


@dataclass
class ProbeResult:
    ray: tuple[float, ...]
    boundary_scale: float
    resolution: float
    points: list[tuple[float, str, float]]


def stability_probe(cfg: SimConfig, ray: Sequence[float], resolution: float = 0.02, horizon: int = 200_000,
                    lo: float = 0.0, hi: float = 1.0, trial: int = 0, engine: str = "auto",
                    arrival_kind: str = "bernoulli", a_max: int = 1) -> ProbeResult:
    """Bisect the rate scale along ``ray`` (normalised to unit sum).

    Each point is judged by :func:`run_streaming`; anything not judged
    stable counts as unstable. The scale therefore equals the total arrival
    rate at the estimated boundary.
    """
    ray = np.asarray(ray, float)
    if (ray < 0).any() or ray.sum() <= 0:
        raise ValueError("ray must be a nonzero direction in the positive orthant")
    d = ray / ray.sum()
    pts = []
    while hi - lo > resolution:
        mid = (lo + hi) / 2
        arr = ArrivalConfig(tuple(float(v) for v in mid * d), arrival_kind, a_max)
        st = run_streaming(cfg, arr, horizon, trial, engine)
        pts.append((mid, st.verdict, st.slope))
        if st.verdict == "stable":
            lo = mid
        else:
            hi = mid
    return ProbeResult(tuple(float(v) for v in ray), (lo + hi) / 2, resolution, pts)
