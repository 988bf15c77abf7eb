"""Deterministic, platform-independent random numbers.

Every stochastic stage draws from a SplitMix64 counter stream feeding
Box-Muller pairs.  The generator is counter-based: the k-th raw draw of a
stream is a pure function of (seed, stream_id, k), so any index range of a
stream can be computed independently.  That is what makes per-strip and
per-tile parallelism bit-reproducible regardless of partitioning or thread
count.

Documented draw order
---------------------
* raw u64 draw k:   mix64(state0 + (k + 1) * GOLDEN), with
  state0 = mix64(seed ^ SEED_SALT) ^ mix64(stream_id ^ STREAM_SALT).
* uniform draw k in [0, 1):  (raw_k >> 11) * 2**-53.
* normal draws come in Box-Muller pairs.  Pair p consumes uniforms
  (2p, 2p + 1), with u1 shifted into (0, 1]:
      u1 = ((raw_{2p}   >> 11) + 1) * 2**-53
      u2 =  (raw_{2p+1} >> 11)      * 2**-53
      normal_{2p}   = sqrt(-2 ln u1) * cos(2 pi u2)
      normal_{2p+1} = sqrt(-2 ln u1) * sin(2 pi u2)

Stateful convenience methods advance an internal draw counter; the *_at
variants address absolute indices and never touch generator state.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SEED_SALT = np.uint64(0x8BADF00D5EEDC0DE)
_STREAM_SALT = np.uint64(0x0DDBA11CAFEF00D5)

_U53 = np.float64(1.0 / (1 << 53))


def _mix64(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """SplitMix64 finalizer; operates elementwise on uint64."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_stream(seed: int, *parts: int | str) -> int:
    """Derive a stream id from a seed and a sequence of labels.

    Labels may be ints or strings (hashed as UTF-8 in 8-byte little-endian
    chunks, zero padded); the total chunk count is absorbed last so that
    ("ab",) and ("a", "b") derive different streams.
    """
    h = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _SEED_SALT)
    n_chunks = 0
    for part in parts:
        if isinstance(part, (int, np.integer)):
            chunks = [int(part) & 0xFFFFFFFFFFFFFFFF]
        elif isinstance(part, str):
            data = part.encode("utf-8")
            chunks = [
                int.from_bytes(data[i : i + 8].ljust(8, b"\0"), "little")
                for i in range(0, max(len(data), 1), 8)
            ]
        else:
            raise TypeError(f"stream labels must be int or str, got {type(part)!r}")
        for c in chunks:
            h = _mix64((h ^ np.uint64(c)) + _GOLDEN)
            n_chunks += 1
    return int(_mix64(h ^ np.uint64(n_chunks)))


class Rng:
    """Counter-based SplitMix64 generator with Box-Muller normals.

    Identical (seed, stream_id) produce identical draw sequences on every
    platform; numpy uint64 arithmetic wraps mod 2**64 by construction.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        self._state0 = _mix64(np.uint64(self.seed) ^ _SEED_SALT) ^ _mix64(
            np.uint64(self.stream_id) ^ _STREAM_SALT
        )
        self._counter = 0  # raw u64 draws consumed so far

    def stream(self, *parts: int | str) -> "Rng":
        """Child generator on the stream derived from this seed and labels."""
        return Rng(self.seed, derive_stream(self.seed ^ self.stream_id, *parts))

    def raw_at(self, offset: int, n: int) -> np.ndarray:
        """Raw u64 draws at absolute indices [offset, offset + n)."""
        idx = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
        return _mix64(self._state0 + idx * _GOLDEN)

    def uniform_at(self, offset: int, n: int) -> np.ndarray:
        """Uniform [0, 1) float64 draws at absolute indices."""
        return (self.raw_at(offset, n) >> np.uint64(11)).astype(np.float64) * _U53

    def normal_at(self, offset: int, n: int) -> np.ndarray:
        """Standard-normal draws at absolute indices [offset, offset + n).

        Pure function of (seed, stream_id, offset, n): partition-independent,
        so strips of one noise field can be generated concurrently.
        """
        if n == 0:
            return np.empty(0, dtype=np.float64)
        p0 = offset // 2
        p1 = (offset + n + 1) // 2
        block = self._normal_pairs(p0, p1 - p0)
        start = offset - 2 * p0
        return block[start : start + n]

    def _normal_pairs(self, pair_offset: int, n_pairs: int) -> np.ndarray:
        raw = self.raw_at(2 * pair_offset, 2 * n_pairs)
        u1 = ((raw[0::2] >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _U53
        u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * _U53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        out = np.empty(2 * n_pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out

    # Stateful conveniences -------------------------------------------------

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Next n uniforms in [low, high); advances the counter by n."""
        u = self.uniform_at(self._counter, n)
        self._counter += n
        return low + (high - low) * u

    def normal(self, n: int) -> np.ndarray:
        """Next n standard normals; consumes ceil(n/2) whole pairs."""
        start = (self._counter + 1) // 2 * 2  # align to a fresh pair
        out = self.normal_at(start, n)
        self._counter = start + n + (n % 2)  # odd n discards the partner
        return out


def hash_unit(seed: int, *parts: int | str) -> float:
    """Deterministic hash of labels to a float in [0, 1).

    Used for split assignment: a pure function of (seed, labels), stable
    across runs and platforms.
    """
    return (derive_stream(seed, *parts) >> 11) * float(_U53)
