"""Bipartite single-hop topology and i.i.d. erasure channel sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import rng as crng
from .errors import InvalidProbability, NotFound


@dataclass(frozen=True)
class Topology:
    """Senders ``0..n_senders-1`` and receivers ``0..n_receivers-1`` joined by ``edges``.

    A node is either a sender or a receiver, never both, so the graph is
    bipartite by construction.
    """

    n_senders: int
    n_receivers: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n_senders < 1 or self.n_receivers < 1:
            raise ValueError("need at least one sender and one receiver")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if not (0 <= i < self.n_senders and 0 <= j < self.n_receivers):
                raise NotFound(f"edge ({i}, {j}) references a missing node")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_in", tuple(tuple(sorted(i for i, jj in edges if jj == j)) for j in range(self.n_receivers)))
        object.__setattr__(self, "_out", tuple(tuple(sorted(j for ii, j in edges if ii == i)) for i in range(self.n_senders)))
        object.__setattr__(self, "edge_list", tuple(sorted(edges)))

    @classmethod
    def complete(cls, n_senders: int, n_receivers: int = 1) -> "Topology":
        return cls(n_senders, n_receivers, frozenset((i, j) for i in range(n_senders) for j in range(n_receivers)))

    @classmethod
    def single_receiver(cls, n_senders: int) -> "Topology":
        return cls.complete(n_senders, 1)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], n_senders: int | None = None,
                   n_receivers: int | None = None) -> "Topology":
        edges = [tuple(e) for e in edges]
        ns = n_senders if n_senders is not None else 1 + max(i for i, _ in edges)
        nr = n_receivers if n_receivers is not None else 1 + max(j for _, j in edges)
        return cls(ns, nr, frozenset(edges))

    def in_neighbors(self, j: int) -> tuple[int, ...]:
        """Gamma_I(j): senders that can reach receiver ``j``."""
        if not 0 <= j < self.n_receivers:
            raise NotFound(f"receiver {j}")
        return self._in[j]

    def out_neighbors(self, i: int) -> tuple[int, ...]:
        """Gamma_O(i): receivers that hear sender ``i``."""
        if not 0 <= i < self.n_senders:
            raise NotFound(f"sender {i}")
        return self._out[i]

    def edge_index(self, i: int, j: int) -> int:
        return i * self.n_receivers + j

    def validate_for_experiment(self) -> None:
        for j in range(self.n_receivers):
            if not self._in[j]:
                raise ValueError(f"receiver {j} has no neighbouring sender")
        for i in range(self.n_senders):
            if not self._out[i]:
                raise ValueError(f"sender {i} has no neighbouring receiver")

    def to_dict(self) -> dict:
        return {"n_senders": self.n_senders, "n_receivers": self.n_receivers,
                "edges": [list(e) for e in self.edge_list]}


def neighbors(topology: Topology, node: tuple[str, int]) -> tuple[int, ...]:
    """``("sender", i)`` gives Gamma_O(i); ``("receiver", j)`` gives Gamma_I(j)."""
    kind, idx = node
    if kind == "sender":
        return topology.out_neighbors(idx)
    if kind == "receiver":
        return topology.in_neighbors(idx)
    raise NotFound(f"unknown node kind {kind!r}")


@dataclass(frozen=True)
class ChannelSample:
    slot: int
    connected: Mapping[tuple[int, int], bool]


class ErasureModel:
    """Per-link erasure probabilities: one shared ``p`` or an explicit map."""

    def __init__(self, topology: Topology, p: float | Mapping[tuple[int, int], float]):
        self.topology = topology
        if isinstance(p, Mapping):
            probs = {e: float(p.get(e, p.get(tuple(e), 0.0))) for e in topology.edge_list}
            missing = [e for e in topology.edge_list if e not in p]
            if missing:
                raise InvalidProbability(f"no erasure probability for links {missing}")
            self.uniform = None
        else:
            probs = {e: float(p) for e in topology.edge_list}
            self.uniform = float(p)
        for e, v in probs.items():
            if not 0.0 <= v <= 1.0:
                raise InvalidProbability(f"erasure probability {v} for link {e} outside [0, 1]")
        self.probs = probs
        self._thr = {e: crng.threshold(v) for e, v in probs.items()}

    def erasure_threshold(self, i: int, j: int) -> int | None:
        return self._thr[(i, j)]

    def prob(self, i: int, j: int) -> float:
        return self.probs[(i, j)]


def sample_channel(topology: Topology, p: float | Mapping | ErasureModel, seed: int, t: int,
                   trial: int = 0) -> ChannelSample:
    """Connectivity of every edge in slot ``t``; pure in ``(seed, trial, t)``."""
    model = p if isinstance(p, ErasureModel) else ErasureModel(topology, p)
    key = crng.trial_key(seed, crng.Stream.CHANNEL, trial)
    connected = {}
    for (i, j) in topology.edge_list:
        h = crng.draw(key, t, topology.edge_index(i, j))
        connected[(i, j)] = not crng.bernoulli(h, model.erasure_threshold(i, j))
    return ChannelSample(t, connected)


def channel_block(topology: Topology, model: ErasureModel, seed: int, trial: int, t0: int,
                  nslots: int) -> np.ndarray:
    """Boolean ``(nslots, n_senders, n_receivers)`` connectivity array for slots ``t0..``.

    Non-edges are reported as disconnected. Matches :func:`sample_channel`
    bit for bit.
    """
    key = crng.trial_key(seed, crng.Stream.CHANNEL, trial)
    ns, nr = topology.n_senders, topology.n_receivers
    idx = np.arange(ns * nr)
    h = crng.draws_block_np(key, np.arange(t0, t0 + nslots), idx)
    erased = np.ones((nslots, ns * nr), dtype=bool)
    for (i, j) in topology.edge_list:
        e = topology.edge_index(i, j)
        erased[:, e] = crng.bernoulli_np(h[:, e], model.erasure_threshold(i, j))
    return ~erased.reshape(nslots, ns, nr)
