"""Deterministic counter-based pseudo-random numbers.

The generator is splitmix64 used in counter mode: output i of a stream
seeded with s is ``mix(s + (i+1) * GOLDEN)`` where ``mix`` is the
splitmix64 finalizer. Because each output depends only on (seed, index),
blocks of any size can be produced with vectorized uint64 arithmetic and
the stream is reproducible across platforms and numpy versions.

Not cryptographic; passes the statistical bar needed here (dataset
sampling, weight init, diffusion noise).
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1


def _mix(z):
    """splitmix64 finalizer on a uint64 array (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


class Rng:
    """Counter-mode splitmix64 stream."""

    def __init__(self, seed):
        self.seed = int(seed) & _U64_MASK
        self._index = 0

    def _raw(self, n):
        idx = np.arange(self._index + 1, self._index + n + 1, dtype=np.uint64)
        self._index += n
        with np.errstate(over="ignore"):
            ctr = np.uint64(self.seed) + idx * _GOLDEN
        return _mix(ctr)

    def child(self, tag):
        """Independent stream derived from this seed and an integer tag."""
        t = np.uint64(int(tag) & _U64_MASK)
        with np.errstate(over="ignore"):
            s = _mix(np.uint64(self.seed) ^ _mix(t + _GOLDEN))
        return Rng(int(s))

    def uniform(self, shape=()):
        """float64 in [0, 1)."""
        n = int(np.prod(shape)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return u.reshape(shape) if shape else float(u[0])

    def normal(self, shape=()):
        """Standard normal via Box-Muller."""
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        u = (self._raw(2 * m) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        u1 = 1.0 - u[:m]  # (0, 1], keeps log finite
        u2 = u[m:]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])[:n]
        return z.reshape(shape) if shape else float(z[0])

    def integers(self, low, high, shape=()):
        """Integers in [low, high); scaling bias < span * 2^-53, negligible here."""
        if high <= low:
            raise ValueError("integers() needs high > low")
        n = int(np.prod(shape)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        out = (np.floor(u * (high - low)) + low).astype(np.int64)
        return out.reshape(shape) if shape else int(out[0])

    def shuffle_index(self, n):
        """Deterministic permutation of range(n) (argsort of one uniform block)."""
        return np.argsort(self.uniform((n,)), kind="stable")

    def choice(self, n, size, replace=False):
        """Sample `size` indices from range(n)."""
        if replace:
            return self.integers(0, n, (size,))
        if size > n:
            raise ValueError("choice without replacement needs size <= n")
        return self.shuffle_index(n)[:size]
