"""Algebraic collision model and collision decoding.

A reception is one linear equation in the transmitted symbol streams: each
colliding transmission is delayed by an integer symbol offset, scaled by a
nonzero channel gain, and added. Over the delay variable ``D`` a record is
``C(D) = sum_parts gain * D**offset * S_part(D)`` and a set of records is
``C = H S``.

Two views of the same records are maintained:

* the symbol level (:func:`zigzag_decode`), which recovers payloads;
* the coefficient level (:class:`Ledger`), one row per record over global
  packet ids, used to count degrees of freedom and seen packets. Row
  entries are the transfer-matrix entries evaluated at a receiver-specific
  random point for ``D``, so two collisions of the same packets with
  different offsets count as independent, as they do at the symbol level.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Mapping, Sequence

from . import rng as crng
from .errors import EmptyQueue, InconsistentSystem, OffsetTooLarge
from .gf import GF, Matrix, poly_matrix_rank, rref_rows


@dataclass(frozen=True)
class Packet:
    global_id: int
    origin_sender: int
    payload: tuple[int, ...] | None = None
    arrival_slot: int = 0


@dataclass(frozen=True)
class CodedTransmission:
    """A sender's transmitted stream: a linear combination of its own packets.

    ``symbols`` is ``None`` when the simulation runs without payloads; the
    coefficient metadata is always present.
    """

    sender: int
    coefficients: Mapping[int, int]
    symbols: tuple[int, ...] | None = None

    def __post_init__(self):
        if not any(self.coefficients.values()):
            raise ValueError("coding vector must have a nonzero coefficient")


@dataclass(frozen=True)
class Part:
    transmission: CodedTransmission
    offset: int
    gain: int = 1


@dataclass(frozen=True)
class CollisionRecord:
    slot: int
    parts: tuple[Part, ...]
    superposed: tuple[int, ...] | None
    length: int

    @property
    def senders(self) -> tuple[int, ...]:
        return tuple(p.transmission.sender for p in self.parts)

    def packet_ids(self) -> set[int]:
        return {k for p in self.parts for k, c in p.transmission.coefficients.items() if c}


def make_payload(F: GF, length: int, seed: int, global_id: int) -> tuple[int, ...]:
    key = crng.trial_key(seed, crng.Stream.PAYLOAD, global_id)
    return tuple(crng.below(crng.draw(key, 0, i), F.q) for i in range(length))


def combine(F: GF, coefficients: Mapping[int, int], payloads: Mapping[int, Sequence[int]]) -> tuple[int, ...]:
    out: list[int] | None = None
    for k, c in coefficients.items():
        if not c:
            continue
        pl = payloads[k]
        out = F.scale(c, pl) if out is None else F.axpy(c, pl, out)
    assert out is not None
    return tuple(out)


def encode_uncoded(packet: Packet) -> CodedTransmission:
    """Repeat-packet transmission: coefficient 1 on one packet."""
    return CodedTransmission(packet.origin_sender, {packet.global_id: 1}, packet.payload)


def encode_random(queue: Sequence[Packet], F: GF, rng) -> CodedTransmission:
    """Random linear combination of every packet in ``queue``.

    Coefficients are uniform on F_q and the whole vector is redrawn until at
    least one entry is nonzero. ``rng`` needs an ``integers(low, high)``
    method (``numpy.random.Generator`` or :class:`rng.CounterRNG`).
    """
    if not queue:
        raise EmptyQueue("cannot encode from an empty queue")
    sender = queue[0].origin_sender
    while True:
        coeffs = {pk.global_id: int(rng.integers(0, F.q)) for pk in queue}
        if any(coeffs.values()):
            break
    if any(pk.payload is None for pk in queue):
        symbols = None
    else:
        symbols = combine(F, coeffs, {pk.global_id: pk.payload for pk in queue})
    return CodedTransmission(sender, coeffs, symbols)


def superpose(parts: Sequence[Part | tuple], F: GF, slot: int = 0, length: int | None = None) -> CollisionRecord:
    """Build the record a receiver observes when ``parts`` collide."""
    parts = tuple(p if isinstance(p, Part) else Part(*p) for p in parts)
    if not parts:
        raise ValueError("a collision needs at least one part")
    lengths = {len(p.transmission.symbols) for p in parts if p.transmission.symbols is not None}
    if length is None:
        if not lengths:
            raise ValueError("packet length unknown for metadata-only transmissions")
        length = lengths.pop()
    elif lengths and lengths != {length}:
        raise ValueError(f"inconsistent symbol stream lengths {lengths}")
    for p in parts:
        if not 0 <= p.offset < length:
            raise OffsetTooLarge(f"offset {p.offset} not in [0, {length})")
        if p.gain % F.q == 0:
            raise ValueError("channel gain must be nonzero")
    if any(p.transmission.symbols is None for p in parts):
        return CollisionRecord(slot, parts, None, length)
    total = [0] * (length + max(p.offset for p in parts))
    for p in parts:
        shifted = F.scale(p.gain, p.transmission.symbols)
        u = p.offset
        for i, s in enumerate(shifted):
            if s:
                total[u + i] = F.add(total[u + i], s)
    return CollisionRecord(slot, parts, tuple(total), length)


def record_row(record: CollisionRecord, F: GF, z: int) -> dict[int, int]:
    """Coefficient row of ``record`` with the delay variable evaluated at ``z``."""
    row: dict[int, int] = {}
    for p in record.parts:
        scale = F.mul(p.gain, F.pow(z, p.offset))
        for k, c in p.transmission.coefficients.items():
            if c:
                v = F.add(row.get(k, 0), F.mul(scale, c))
                if v:
                    row[k] = v
                else:
                    row.pop(k, None)
    return row


class Ledger:
    """Incremental sparse reduced row-echelon form over global packet ids.

    Columns are ordered by global id (arrival order). Rows whose only
    nonzero is the pivot are decoded packets; they are archived and their
    columns cleared from every incoming row.
    """

    def __init__(self, F: GF):
        self.F = F
        self.rows: dict[int, dict[int, int]] = {}
        self.col_rows: dict[int, set[int]] = {}
        self.decoded: set[int] = set()
        self.seen: set[int] = set()
        self.last_pivot: int | None = None

    @property
    def rank(self) -> int:
        return len(self.rows) + len(self.decoded)

    def reduce(self, row: Mapping[int, int]) -> dict[int, int]:
        F = self.F
        out = {k: v for k, v in row.items() if v and k not in self.decoded}
        for c in sorted(k for k in out if k in self.rows):
            v = out.get(c)
            if not v:
                continue
            neg = F.neg(v)
            for k, w in self.rows[c].items():
                nv = F.add(out.get(k, 0), F.mul(neg, w))
                if nv:
                    out[k] = nv
                else:
                    out.pop(k, None)
        return out

    def _link(self, piv: int, row: Mapping[int, int]) -> None:
        for k in row:
            if k != piv:
                self.col_rows.setdefault(k, set()).add(piv)

    def insert(self, row: Mapping[int, int]) -> bool:
        F = self.F
        red = self.reduce(row)
        if not red:
            self.last_pivot = None
            return False
        c = min(red)
        self.last_pivot = c
        inv = F.inv(red[c])
        new = {k: F.mul(inv, v) for k, v in red.items()}
        touched = [c]
        col_rows = self.col_rows
        for piv in sorted(col_rows.pop(c, ())):
            r = self.rows[piv]
            neg = F.neg(r[c])
            # new has zeros in every existing pivot column, so only non-pivot links change
            for k, w in new.items():
                old = r.get(k, 0)
                nv = F.add(old, F.mul(neg, w))
                if nv:
                    r[k] = nv
                    if not old:
                        col_rows.setdefault(k, set()).add(piv)
                elif old:
                    del r[k]
                    if k != c:
                        s = col_rows[k]
                        s.discard(piv)
                        if not s:
                            del col_rows[k]
            touched.append(piv)
        self.rows[c] = new
        self.seen.add(c)
        self._link(c, new)
        for piv in touched:
            r = self.rows.get(piv)
            if r is not None and len(r) == 1:
                self._archive(piv)
        return True

    def _archive(self, piv: int) -> None:
        del self.rows[piv]
        self.decoded.add(piv)
        # clear the decoded column from rows that still reference it
        for other in sorted(self.col_rows.pop(piv, ())):
            r = self.rows[other]
            r.pop(piv, None)
            if len(r) == 1:
                self._archive(other)


@dataclass
class ReceiverState:
    """Everything one receiver has accumulated.

    ``records`` keeps symbol-level records only when ``keep_records`` is
    set; the coefficient ledger is always maintained.
    """

    F: GF
    z: int = 2
    keep_records: bool = True
    records: list[CollisionRecord] = dc_field(default_factory=list)
    row_log: list[dict[int, int]] = dc_field(default_factory=list)
    n_accepted: int = 0
    ledger: Ledger = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.ledger is None:
            self.ledger = Ledger(self.F)
        if self.z % self.F.q == 0:
            raise ValueError("evaluation point for D must be nonzero")

    @property
    def rank(self) -> int:
        return self.ledger.rank

    @property
    def decoded(self) -> set[int]:
        return self.ledger.decoded

    @property
    def seen(self) -> set[int]:
        return self.ledger.seen

    def row_of(self, record: CollisionRecord) -> dict[int, int]:
        return record_row(record, self.F, self.z)

    def accept(self, record: CollisionRecord) -> bool:
        """Append ``record``; returns whether it was innovative."""
        row = self.row_of(record)
        self.n_accepted += 1
        if self.keep_records:
            self.records.append(record)
            self.row_log.append(row)
        return self.ledger.insert(row)

    def coeff_rows(self) -> tuple[Matrix, list[int]]:
        """Dense coefficient matrix over the referenced ids (needs ``keep_records``)."""
        ids = sorted({k for r in self.row_log for k in r})
        m = Matrix.from_rows(self.F, [[r.get(k, 0) for k in ids] for r in self.row_log], len(ids))
        return m, ids

    def forget_records(self) -> None:
        self.records.clear()
        self.row_log.clear()


def innovative(record: CollisionRecord, state: ReceiverState) -> bool:
    """Would ``record`` raise the rank of the receiver's coefficient system?"""
    return bool(state.ledger.reduce(state.row_of(record)))


def seen_update(state: ReceiverState) -> set[int]:
    """Packets with a pivot in the arrival-ordered reduced system.

    The ledger keeps this set current on every insert (pivots never move
    once placed, so the set only grows); this returns it.
    """
    return state.ledger.seen


def transfer_matrix(records: Sequence[CollisionRecord], unknowns: Sequence[int], F: GF) -> list[list[list[int]]]:
    """Entries of H as polynomials in D (coefficient lists, lowest degree first)."""
    col = {k: j for j, k in enumerate(unknowns)}
    H = []
    for rec in records:
        row: list[list[int]] = [[] for _ in unknowns]
        for p in rec.parts:
            for k, c in p.transmission.coefficients.items():
                if not c or k not in col:
                    continue
                poly = row[col[k]]
                while len(poly) <= p.offset:
                    poly.append(0)
                poly[p.offset] = F.add(poly[p.offset], F.mul(p.gain, c))
        H.append(row)
    return H


def decodable(records: Sequence[CollisionRecord], unknowns: Iterable[int], F: GF,
              known: Iterable[int] = ()) -> bool:
    """True iff the transfer matrix has full column rank over F(D).

    Packets in ``known`` are treated as already decoded and drop out.
    """
    unknowns = sorted(set(unknowns))
    allowed = set(unknowns) | set(known)
    for rec in records:
        extra = rec.packet_ids() - allowed
        if extra:
            raise ValueError(f"record in slot {rec.slot} references unlisted packets {sorted(extra)}")
    if not unknowns:
        return True
    if len(records) < len(unknowns):
        return False
    return poly_matrix_rank(F, transfer_matrix(records, unknowns, F)) == len(unknowns)


class _SymbolSystem:
    """Scalar equations ``sum coef * x[k][i] = rhs``, one per record position."""

    def __init__(self, records: Sequence[CollisionRecord], F: GF, known: Mapping[int, Sequence[int]]):
        self.F = F
        self.L = L = records[0].length
        self.eq_vars: list[dict[tuple[int, int], int]] = []
        self.eq_rhs: list[int] = []
        self.eq_key: list[tuple[int, int]] = []
        self.var_eqs: dict[tuple[int, int], set[int]] = {}
        self.values: dict[tuple[int, int], int] = {}
        self.unknown_ids: set[int] = set()
        for r, rec in enumerate(records):
            if rec.superposed is None:
                raise ValueError("symbol-level decoding needs records with superposed symbols")
            if rec.length != L:
                raise ValueError("all records must share one packet length")
            for pos, y in enumerate(rec.superposed):
                coefs: dict[tuple[int, int], int] = {}
                rhs = y
                for p in rec.parts:
                    i = pos - p.offset
                    if not 0 <= i < L:
                        continue
                    for k, c in p.transmission.coefficients.items():
                        if not c:
                            continue
                        a = F.mul(p.gain, c)
                        if k in known:
                            rhs = F.sub(rhs, F.mul(a, known[k][i]))
                        else:
                            v = (k, i)
                            nv = F.add(coefs.get(v, 0), a)
                            if nv:
                                coefs[v] = nv
                            else:
                                coefs.pop(v, None)
                            self.unknown_ids.add(k)
                e = len(self.eq_vars)
                self.eq_vars.append(coefs)
                self.eq_rhs.append(rhs)
                self.eq_key.append((r, pos))
                if not coefs and rhs:
                    raise InconsistentSystem(f"record {r} position {pos} contradicts known payloads")
                for v in coefs:
                    self.var_eqs.setdefault(v, set()).add(e)

    def assign(self, var: tuple[int, int], val: int, ready: list) -> None:
        F = self.F
        self.values[var] = val
        for e in self.var_eqs.pop(var, ()):
            coefs = self.eq_vars[e]
            a = coefs.pop(var)
            self.eq_rhs[e] = F.sub(self.eq_rhs[e], F.mul(a, val))
            if len(coefs) == 1:
                heapq.heappush(ready, (self.eq_key[e], e))
            elif not coefs and self.eq_rhs[e]:
                r, pos = self.eq_key[e]
                raise InconsistentSystem(f"record {r} position {pos} has no consistent solution")

    def peel(self, ready: list) -> int:
        F = self.F
        solved = 0
        while ready:
            _, e = heapq.heappop(ready)
            coefs = self.eq_vars[e]
            if len(coefs) != 1:
                continue
            (var, a), = coefs.items()
            self.assign(var, F.div(self.eq_rhs[e], a), ready)
            solved += 1
        return solved

    def _solve_block(self, eqs: Sequence[int], vars_: Sequence[tuple[int, int]], ready: list) -> int:
        F = self.F
        idx = {v: j for j, v in enumerate(vars_)}
        n = len(vars_)
        rows = []
        for e in eqs:
            row = [0] * (n + 1)
            for v, a in self.eq_vars[e].items():
                row[idx[v]] = a
            row[n] = self.eq_rhs[e]
            rows.append(row)
        red, piv = rref_rows(F, rows, n + 1)
        if n in piv:
            raise InconsistentSystem("collision records admit no common solution")
        solved = 0
        for r, c in enumerate(piv):
            if any(red[r][j] for j in range(n) if j != c):
                continue
            var = vars_[c]
            if var not in self.values:
                self.assign(var, red[r][n], ready)
                solved += 1
        return solved

    def aligned_step(self, ready: list, max_block: int = 12) -> int:
        """Solve a small group of equations that share one set of unknowns."""
        tried: set[frozenset] = set()
        order = sorted(range(len(self.eq_vars)), key=lambda e: self.eq_key[e])
        for e in order:
            U = frozenset(self.eq_vars[e])
            if not 2 <= len(U) <= max_block or U in tried:
                continue
            tried.add(U)
            cand = set()
            for v in U:
                cand |= self.var_eqs.get(v, set())
            group = sorted((g for g in cand if self.eq_vars[g].keys() <= U), key=lambda g: self.eq_key[g])
            if len(group) < len(U):
                continue
            solved = self._solve_block(group, sorted(U), ready)
            if solved:
                return solved
        return 0

    def global_step(self, ready: list) -> int:
        live = sorted((e for e, c in enumerate(self.eq_vars) if c), key=lambda e: self.eq_key[e])
        if not live:
            return 0
        vars_ = sorted({v for e in live for v in self.eq_vars[e]})
        return self._solve_block(live, vars_, ready)


def decode_records(records: Sequence[CollisionRecord], F: GF,
                   known: Mapping[int, Sequence[int]] | None = None) -> tuple[dict[int, tuple[int, ...]], set[int]]:
    """Recover payloads from symbol-level records.

    Peeling first (an equation with one undetermined symbol is solved and
    substituted everywhere, records in slot order and leftmost position
    first); when peeling stalls, small groups of equations over a common
    set of unknowns are eliminated together, and as a last resort the
    remaining equations are eliminated jointly.
    """
    known = dict(known or {})
    if not records:
        return {}, set()
    sys_ = _SymbolSystem(records, F, known)
    ready: list = []
    for e, coefs in enumerate(sys_.eq_vars):
        if len(coefs) == 1:
            heapq.heappush(ready, (sys_.eq_key[e], e))
    while True:
        sys_.peel(ready)
        if all(not c for c in sys_.eq_vars):
            break
        if sys_.aligned_step(ready):
            continue
        if not sys_.global_step(ready):
            break
    L = sys_.L
    decoded = {}
    for k in sorted(sys_.unknown_ids):
        vals = [sys_.values.get((k, i)) for i in range(L)]
        if all(v is not None for v in vals):
            decoded[k] = tuple(vals)
    residual = sys_.unknown_ids - decoded.keys()
    return decoded, residual


def zigzag_decode(state: ReceiverState, known: Mapping[int, Sequence[int]] | None = None
                  ) -> tuple[dict[int, tuple[int, ...]], set[int]]:
    return decode_records(state.records, state.F, known)
