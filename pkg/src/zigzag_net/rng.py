"""Counter-based randomness.

Every random draw in a simulation is a pure function of
``(seed, stream, trial, slot, index)``: a trial key is derived from
``(seed, stream, trial)`` and the draw is the splitmix64 output at counter
``slot * STRIDE + index``. Nothing is shared between trials, so trials can
be run in any order or split across processes and still reproduce the same
numbers. The numpy path and the scalar path produce identical bits.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xFF51AFD7ED558CCD
_M2 = 0xC4CEB9FE1A85EC53
STRIDE = 1 << 20  # max distinct indices per slot


class Stream(IntEnum):
    CHANNEL = 1
    TRANSMIT = 2
    ARRIVAL = 3
    OFFSET = 4
    GAIN = 5
    CODING = 6
    ACK_TIE = 7
    PAYLOAD = 8
    LEDGER = 9


def fmix64(h: int) -> int:
    h ^= h >> 33
    h = (h * _M1) & MASK64
    h ^= h >> 33
    h = (h * _M2) & MASK64
    h ^= h >> 33
    return h


def trial_key(seed: int, stream: int, trial: int) -> int:
    k = fmix64((seed * GOLDEN + 0x632BE59BD9B4E019) & MASK64)
    k = fmix64((k ^ (int(stream) * 0xD6E8FEB86659FD93)) & MASK64)
    return fmix64((k + trial * GOLDEN) & MASK64)


def draw(key: int, slot: int, index: int = 0) -> int:
    """64-bit draw for ``(slot, index)`` under a trial key."""
    return fmix64((key + (slot * STRIDE + index + 1) * GOLDEN) & MASK64)


def threshold(prob: float) -> int | None:
    """Integer threshold so that ``draw < threshold`` has probability ``prob``.

    Returns ``None`` for prob >= 1 (always true); 0 for prob <= 0.
    """
    if prob >= 1.0:
        return None
    if prob <= 0.0:
        return 0
    return int(prob * 2.0**64)


def bernoulli(h: int, thr: int | None) -> bool:
    return True if thr is None else h < thr


def uniform(h: int) -> float:
    return (h >> 11) * (1.0 / (1 << 53))


def below(h: int, n: int) -> int:
    """Map a draw to ``[0, n)`` (multiply-shift, bias < n / 2**64)."""
    return (h * n) >> 64


# numpy vectorised path ------------------------------------------------------

_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_U_GOLDEN = np.uint64(GOLDEN)
_S33 = np.uint64(33)


def fmix64_np(h: np.ndarray) -> np.ndarray:
    h = h ^ (h >> _S33)
    h *= _U_M1
    h ^= h >> _S33
    h *= _U_M2
    h ^= h >> _S33
    return h


def trial_keys(seed: int, stream: int, trials: np.ndarray) -> np.ndarray:
    base = fmix64((seed * GOLDEN + 0x632BE59BD9B4E019) & MASK64)
    base = fmix64((base ^ (int(stream) * 0xD6E8FEB86659FD93)) & MASK64)
    with np.errstate(over="ignore"):
        h = np.uint64(base) + trials.astype(np.uint64) * _U_GOLDEN
    return fmix64_np(h)


def draws_np(keys: np.ndarray, slot: int, indices: np.ndarray) -> np.ndarray:
    """Draws of shape ``(len(keys), len(indices))`` for one slot."""
    ctr = (np.uint64(slot * STRIDE + 1) + indices.astype(np.uint64)) * _U_GOLDEN
    return fmix64_np(keys[:, None] + ctr[None, :])


def draws_block_np(key: int, slots: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Draws of shape ``(len(slots), len(indices))`` for one trial."""
    ctr = slots.astype(np.uint64)[:, None] * np.uint64(STRIDE) + np.uint64(1) + indices.astype(np.uint64)[None, :]
    return fmix64_np(np.uint64(key) + ctr * _U_GOLDEN)


def bernoulli_np(h: np.ndarray, thr: int | None) -> np.ndarray:
    if thr is None:
        return np.ones(h.shape, dtype=bool)
    return h < np.uint64(thr)


class CounterRNG:
    """Minimal ``numpy.random.Generator``-like facade over one counter position.

    Successive calls advance a sub-index so several values can be drawn for
    the same ``(slot, index)`` address.
    """

    def __init__(self, key: int, slot: int, index: int = 0):
        self._key = key
        self._base = slot * STRIDE + index
        self._k = 0

    def _next(self) -> int:
        # sub-draws live in a separate hash lane so they never alias other slots
        h = fmix64((self._key ^ 0xA5A5A5A5A5A5A5A5) + (self._base * 64 + self._k) * GOLDEN & MASK64)
        self._k += 1
        return h

    def integers(self, low: int, high: int | None = None) -> int:
        if high is None:
            low, high = 0, low
        return low + below(self._next(), high - low)

    def random(self) -> float:
        return uniform(self._next())
