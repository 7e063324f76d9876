"""Compiled inner loops for the two experiments that need millions of slots.

Both kernels hash the same counters as the general engine
(:mod:`zigzag_net.rng`), so for the configurations they cover they produce
exactly the engine's numbers; the tests hold them to that.

* :func:`delivery_batch`: one receiver, one packet per sender, uncoded
  senders. A reception is useful iff 1..C senders get through, and then one
  unacknowledged collider is ACKed. Under this discipline every useful
  reception is innovative, so only ACKs need counting.
* :func:`streaming_trace`: one receiver, queue lengths only.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import rng as crng

_M1 = np.uint64(0xFF51AFD7ED558CCD)
_M2 = np.uint64(0xC4CEB9FE1A85EC53)
_GOLDEN = np.uint64(crng.GOLDEN)
_STRIDE = np.uint64(crng.STRIDE)
_S33 = np.uint64(33)
_S32 = np.uint64(32)
_LO32 = np.uint64(0xFFFFFFFF)
_ONE = np.uint64(1)

MODE_ALWAYS, MODE_RANDOM, MODE_CENTRAL = 0, 1, 2
SERVE_PRIORITY, SERVE_LONGEST, SERVE_CENTRAL, SERVE_SHARED = 0, 1, 2, 3
ARRIVAL_LANES = 64  # arrival draw index is sender * ARRIVAL_LANES + lane


@njit(cache=True, inline="always")
def _fmix(h):
    h ^= h >> _S33
    h *= _M1
    h ^= h >> _S33
    h *= _M2
    h ^= h >> _S33
    return h


@njit(cache=True, inline="always")
def _draw(key, slot, index):
    return _fmix(key + (np.uint64(slot) * _STRIDE + np.uint64(index) + _ONE) * _GOLDEN)


@njit(cache=True, inline="always")
def _below(h, n):
    n = np.uint64(n)
    return np.int64(((h >> _S32) * n + (((h & _LO32) * n) >> _S32)) >> _S32)


@njit(cache=True, inline="always")
def _hit(h, thr, always):
    return always or h < thr


def thr_pair(prob: float) -> tuple[np.uint64, bool]:
    t = crng.threshold(prob)
    return (np.uint64(0), True) if t is None else (np.uint64(t), False)


@njit(cache=True)
def delivery_batch(ckeys, tkeys, akeys, n, p_thr, p_all, q_thr, q_all, mode, order, cap, random_tie,
                   max_slots, T_out, ack_out):
    """Fill ``T_out[a]`` (slots, or -1 at the horizon) and ``ack_out[a, k]`` (slot of ACK k+1)."""
    surv = np.empty(n, np.int64)
    active = np.empty(n, np.bool_)
    for a in range(ckeys.shape[0]):
        ck, tk, ak = ckeys[a], tkeys[a], akeys[a]
        active[:] = True
        acked = 0
        T_out[a] = -1
        for t in range(max_slots):
            holder = -1
            if mode == MODE_CENTRAL:
                for r in range(n):
                    if active[order[r]]:
                        holder = order[r]
                        break
            cnt = 0
            for i in range(n):
                if not active[i]:
                    continue
                if mode == MODE_RANDOM and not _hit(_draw(tk, t, i), q_thr, q_all):
                    continue
                if mode == MODE_CENTRAL and i != holder:
                    continue
                if _hit(_draw(ck, t, i), p_thr, p_all):
                    continue
                surv[cnt] = i
                cnt += 1
            if cnt == 0 or (cap > 0 and cnt > cap):
                continue
            r = _below(_draw(ak, t, 0), cnt) if random_tie else 0
            active[surv[r]] = False
            ack_out[a, acked] = t + 1
            acked += 1
            if acked == n:
                T_out[a] = t + 1
                break


@njit(cache=True)
def streaming_trace(ckey, akey, n, p_thr, p_all, lam_thr, lam_all, a_max, mode, orders, bounds, frame,
                    t0, horizon, every, Q, arrived, served, area, tavg_out, snap_out):
    """Advance queue lengths ``Q`` through slots ``t0 .. t0+horizon-1`` in place.

    At every slot count ``t+1`` divisible by ``every``, ``tavg_out[k]``
    receives the running time average of the total queue and
    ``snap_out[k]`` the queue vector. ``area`` (length 1) carries the running sum of total queue
    lengths. Returns the number of checkpoints written.
    """
    conn = np.empty(n, np.bool_)
    k = 0
    for t in range(t0, t0 + horizon):
        tot = 0
        for i in range(n):
            conn[i] = not _hit(_draw(ckey, t, i), p_thr, p_all)
            tot += Q[i]
        area[0] += tot
        pick = -1
        if mode == SERVE_PRIORITY or mode == SERVE_SHARED:
            row = 0
            if mode == SERVE_SHARED:
                pos = t % frame
                row = bounds.shape[0] - 1
                for b in range(bounds.shape[0]):
                    if pos < bounds[b]:
                        row = b
                        break
            for r in range(n):
                i = orders[row, r]
                if Q[i] > 0 and conn[i]:
                    pick = i
                    break
        elif mode == SERVE_LONGEST:
            best = 0
            for i in range(n):
                if conn[i] and Q[i] > best:
                    best = Q[i]
                    pick = i
        else:
            best = 0
            holder = -1
            for r in range(n):
                i = orders[0, r]
                if Q[i] > best:
                    best = Q[i]
                    holder = i
            if holder >= 0 and conn[holder]:
                pick = holder
        if pick >= 0:
            Q[pick] -= 1
            served[pick] += 1
        for i in range(n):
            add = 0
            for m in range(a_max):
                if _hit(_draw(akey, t, i * ARRIVAL_LANES + m), lam_thr[i], lam_all[i]):
                    add += 1
            Q[i] += add
            arrived[i] += add
        if (t + 1) % every == 0 and k < tavg_out.shape[0]:
            tavg_out[k] = area[0] / (t + 1)
            for i in range(n):
                snap_out[k, i] = Q[i]
            k += 1
    return k
