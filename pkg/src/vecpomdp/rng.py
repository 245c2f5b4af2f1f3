"""Counter-based random streams with per-row reproducibility.

Every draw is a pure function of (root seed, derivation path, row id, draw
index).  Nothing is sequenced: instead of consuming a shared stream, each
sampling site derives its own key and hashes it together with the logical
row ids it is sampling for.  Consequently the value drawn for a given row
never depends on the width or composition of the batch it shares a kernel
call with, and any serial re-execution of the same logical rows reproduces
the vectorized results bit for bit.

The mixing function is the SplitMix64 finalizer, which is more than enough
for Monte Carlo use.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 2.0**-53
_TWO_PI = 2.0 * np.pi


def mix64(x):
    """SplitMix64 finalizer over uint64 scalars or arrays."""
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _MIX_A
        x = (x ^ (x >> np.uint64(27))) * _MIX_B
        return x ^ (x >> np.uint64(31))


def _fold(key: np.uint64, word: int) -> np.uint64:
    with np.errstate(over="ignore"):
        return mix64(key + _GOLDEN * (np.uint64(word) + np.uint64(1)))


class RowRng:
    """A node in a tree of deterministic random streams.

    ``derive(*words)`` walks to a child stream; ``bind(rows)`` fixes the
    logical row ids so models can draw without knowing where their batch
    came from.  Instances are immutable and cheap to create.
    """

    __slots__ = ("key",)

    def __init__(self, key: np.uint64):
        self.key = np.uint64(key)

    @classmethod
    def from_seed(cls, seed: int) -> "RowRng":
        return cls(mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN))

    def derive(self, *words: int) -> "RowRng":
        key = self.key
        for w in words:
            if w < 0:
                raise ValueError("derivation words must be non-negative")
            key = _fold(key, w)
        return RowRng(key)

    def bind(self, rows) -> "BoundRng":
        return BoundRng(self, rows)

    def _hash_rows(self, rows: np.ndarray, k: int | None):
        with np.errstate(over="ignore"):
            base = mix64(self.key + _GOLDEN * (rows.astype(np.uint64) + np.uint64(2)))
            if k is None:
                return mix64(base + _MIX_A)
            draws = np.arange(1, k + 1, dtype=np.uint64) * _MIX_B
            return mix64(base[:, None] + draws[None, :])

    def uniform(self, rows, k: int | None = None) -> np.ndarray:
        """Per-row uniforms in [0, 1); shape (n,) or (n, k)."""
        rows = np.asarray(rows, dtype=np.int64)
        h = self._hash_rows(rows, k)
        return (h >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def normal(self, rows, k: int | None = None) -> np.ndarray:
        """Per-row standard normals via Box-Muller; shape (n,) or (n, k)."""
        rows = np.asarray(rows, dtype=np.int64)
        h1 = self.derive(101)._hash_rows(rows, k)
        h2 = self.derive(211)._hash_rows(rows, k)
        # map to (0, 1] so the log is finite
        u1 = ((h1 >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (h2 >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)

    def uniform1(self) -> float:
        """A single uniform in [0, 1) drawn from this stream's key."""
        return float(self.uniform(np.array([0], dtype=np.int64))[0])


class BoundRng:
    """A :class:`RowRng` with a fixed vector of logical row ids.

    This is what batched operations receive: they call ``derive`` to name
    their internal sampling sites and then draw per-row values without
    ever seeing the row ids.
    """

    __slots__ = ("rng", "rows")

    def __init__(self, rng: RowRng, rows):
        self.rng = rng
        self.rows = np.asarray(rows, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.rows)

    def derive(self, *words: int) -> "BoundRng":
        return BoundRng(self.rng.derive(*words), self.rows)

    def uniform(self, k: int | None = None) -> np.ndarray:
        return self.rng.uniform(self.rows, k)

    def normal(self, k: int | None = None) -> np.ndarray:
        return self.rng.normal(self.rows, k)
