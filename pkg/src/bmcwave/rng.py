"""Counter-based uniform random streams (Philox4x64-10).

Every consumer of randomness in this package draws from a stream addressed
by a 128-bit key ``(seed, stream_id)`` and a 64-bit counter.  Tree
simulation keys one stream per node (stream_id = node id), so the draws
attached to a node do not depend on evaluation order; sequential consumers
(tagged-branch chains, root draws) use reserved stream ids.  The block
function is implemented vectorised over keys/counters in numpy, and is
bit-identical to ``numpy.random.Philox`` (checked in the test suite).
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_INV53 = float(2.0 ** -53)

# reserved stream ids, outside the node-id range of any practical tree
ROOT_STREAM = np.uint64(2**64 - 1)
TAGGED_STREAM = np.uint64(2**64 - 2)


def _mulhilo(a: np.uint64, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full 64x64 -> 128 bit product as (high word, low word)."""
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    t = a_hi * b_lo + (ll >> _S32)
    u = a_lo * b_hi + (t & _MASK32)
    hi = a_hi * b_hi + (t >> _S32) + (u >> _S32)
    lo = (u << _S32) | (ll & _MASK32)
    return hi, lo


def philox4(counter: np.ndarray, key0: np.ndarray, key1: np.ndarray) -> np.ndarray:
    """Philox4x64-10 block: counter words (..., 4) -> output words (..., 4).

    ``counter`` carries the four 64-bit counter words in its last axis;
    ``key0``/``key1`` broadcast against ``counter[..., 0]``.
    """
    counter = np.asarray(counter, dtype=np.uint64)
    shape = np.broadcast_shapes(
        counter.shape[:-1], np.shape(key0), np.shape(key1)
    )
    # keep everything >= 1-d: numpy decays 0-d uint arrays to scalars, which
    # warn on the (intentional) modular wrap-around
    work = shape if shape else (1,)
    x0 = np.broadcast_to(counter[..., 0], work).copy()
    x1 = np.broadcast_to(counter[..., 1], work).copy()
    x2 = np.broadcast_to(counter[..., 2], work).copy()
    x3 = np.broadcast_to(counter[..., 3], work).copy()
    k0 = np.broadcast_to(np.asarray(key0, dtype=np.uint64), work).copy()
    k1 = np.broadcast_to(np.asarray(key1, dtype=np.uint64), work).copy()
    for r in range(10):
        if r:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, x0)
        hi1, lo1 = _mulhilo(_M1, x2)
        x0 = hi1 ^ x1 ^ k0
        x1 = lo1
        x2 = hi0 ^ x3 ^ k1
        x3 = lo0
    out = np.stack([x0, x1, x2, x3], axis=-1)
    return out.reshape(shape + (4,))


def _to_unit(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles in [0, 1) (53-bit mantissa fill)."""
    return (words >> _S11).astype(np.float64) * _INV53


class NodeStreams:
    """Per-node uniform streams for one simulation seed.

    Round ``r`` of node ``u`` yields four uniforms, computed as
    ``philox4(counter=(r,0,0,0), key=(seed, u))``; nodes are therefore
    statistically independent streams and any subset can be generated in
    isolation, in any order.
    """

    def __init__(self, seed: int):
        self.seed = np.uint64(seed)

    def uniforms(self, node_ids: np.ndarray, rnd: int) -> np.ndarray:
        """Four uniforms per node id, shape (len(node_ids), 4)."""
        ids = np.asarray(node_ids, dtype=np.uint64)
        ctr = np.zeros(ids.shape + (4,), dtype=np.uint64)
        ctr[..., 0] = np.uint64(rnd)
        return _to_unit(philox4(ctr, np.broadcast_to(self.seed, ids.shape), ids))


class UniformStream:
    """Buffered sequential uniform stream for scalar consumers.

    Stream position is a pure function of (seed, stream_id, #draws made),
    independent of buffering, so results are reproducible across chunk
    sizes.
    """

    _CHUNK = 1 << 14  # Philox blocks per refill (4 uniforms each)

    def __init__(self, seed: int, stream_id: int = int(TAGGED_STREAM)):
        self._key0 = np.uint64(seed)
        self._key1 = np.uint64(stream_id)
        self._block = 0
        self._buf: list[float] = []
        self._pos = 0

    def _refill(self) -> None:
        ctr = np.zeros((self._CHUNK, 4), dtype=np.uint64)
        ctr[:, 0] = np.arange(self._block, self._block + self._CHUNK, dtype=np.uint64)
        words = philox4(ctr, self._key0, self._key1)
        self._block += self._CHUNK
        self._buf = _to_unit(words).ravel().tolist()
        self._pos = 0

    def u(self) -> float:
        """Next uniform in [0, 1)."""
        if self._pos >= len(self._buf):
            self._refill()
        v = self._buf[self._pos]
        self._pos += 1
        return v

    def take(self, k: int) -> np.ndarray:
        return np.array([self.u() for _ in range(k)])
