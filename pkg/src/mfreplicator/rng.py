"""Counter-based random streams.

Every Gaussian increment used by the integrators is a pure function of
``(root seed, stream path, particle id, step index)``.  The block cipher is
Philox4x32-10 (Salmon et al., SC'11), evaluated with vectorised numpy
``uint64`` arithmetic so a whole ensemble is served by one call.  Because no
generator state is carried between calls, results do not depend on how the
particle loop is chunked or scheduled.

Samplers that need an ordinary sequential generator (bootstrap replications,
Gamma/Beta draws) get a ``numpy.random.Generator`` built from a key derived
the same way, see :func:`generator`.
"""

from __future__ import annotations

import hashlib

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _tag(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    digest = hashlib.blake2b(str(part).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_key(seed: int, *path) -> int:
    """Hash a root seed and a path of names/indices into a 64-bit key."""
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    key = _splitmix64(int(seed) & _MASK64)
    for part in path:
        key = _splitmix64(key ^ _tag(part))
    return key


def philox4x32(c0, c1, c2, c3, k0, k1, rounds: int = 10):
    """Philox4x32 bijection on broadcastable arrays of 32-bit words.

    Inputs may be any integer arrays holding values below 2**32; the four
    output words are returned as ``uint64`` arrays with values below 2**32.
    """
    c0, c1, c2, c3, k0, k1 = (np.asarray(v, dtype=np.uint64) & _MASK32
                              for v in (c0, c1, c2, c3, k0, k1))
    c0, c1, c2, c3, k0, k1 = np.broadcast_arrays(c0, c1, c2, c3, k0, k1)
    k0 = k0.copy()
    k1 = k1.copy()
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def _unit_double(hi, lo):
    # 53 random bits, shifted half an ulp off zero: result lies in (0, 1).
    bits = ((hi >> np.uint64(5)) << np.uint64(26)) | (lo >> np.uint64(6))
    return (bits.astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


class CounterStream:
    """Stateless stream family addressed by ``(particle, step, block)``.

    ``key`` may be a scalar or an integer array; array keys broadcast against
    the particle ids, which is how independent replicas are batched.
    """

    def __init__(self, seed: int, *path, replicas=None):
        if replicas is None:
            key = derive_key(seed, *path)
            self._k0 = np.uint64(key & 0xFFFFFFFF)
            self._k1 = np.uint64(key >> 32)
        else:
            keys = [derive_key(seed, *path, int(r)) for r in replicas]
            arr = np.array(keys, dtype=np.uint64)[:, None]
            self._k0 = arr & _MASK32
            self._k1 = arr >> _SHIFT32
        self.seed = seed
        self.path = path
        self.replicas = None if replicas is None else list(replicas)

    def _blocks(self, ids, step, nblocks):
        ids = np.asarray(ids, dtype=np.uint64)
        step = int(step)
        s_lo, s_hi = step & 0xFFFFFFFF, step >> 32
        out = []
        for blk in range(nblocks):
            out.append(philox4x32(ids, s_lo, s_hi, blk, self._k0, self._k1))
        return out

    def uniform(self, ids, step: int, k: int) -> np.ndarray:
        """``k`` open-interval uniforms per particle, shape ``ids.shape + (k,)``."""
        nblocks = (k + 1) // 2
        cols = []
        for w0, w1, w2, w3 in self._blocks(ids, step, nblocks):
            cols.append(_unit_double(w0, w1))
            cols.append(_unit_double(w2, w3))
        return np.stack(cols[:k], axis=-1)

    def normal(self, ids, step: int, k: int) -> np.ndarray:
        """``k`` standard normals per particle (Box-Muller on Philox output)."""
        nblocks = (k + 1) // 2
        cols = []
        for w0, w1, w2, w3 in self._blocks(ids, step, nblocks):
            u1 = _unit_double(w0, w1)
            u2 = _unit_double(w2, w3)
            r = np.sqrt(-2.0 * np.log(u1))
            theta = 2.0 * np.pi * u2
            cols.append(r * np.cos(theta))
            cols.append(r * np.sin(theta))
        return np.stack(cols[:k], axis=-1)


def generator(seed: int, *path) -> np.random.Generator:
    """Sequential numpy generator for the named sub-stream ``path``."""
    key = derive_key(seed, *path)
    return np.random.Generator(np.random.Philox(key=key))
