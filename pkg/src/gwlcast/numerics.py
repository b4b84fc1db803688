"""Dense float64 helpers, gate nonlinearities and the package PRNG.

Matrices and vectors are plain ``numpy.ndarray`` objects of dtype float64
(2-D and 1-D respectively).  The functions here add the shape checking and
NaN rejection the model code relies on.

The random generator is xoshiro256** (Blackman & Vigna, 2018) seeded through
splitmix64.  It is implemented on Python integers so the stream is identical
on every platform and numpy version.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "ShapeError",
    "Prng",
    "as_matrix",
    "as_vector",
    "matmul",
    "sigmoid",
    "sigmoid_vec",
    "tanh_elem",
    "uniform_init",
]

_MASK64 = (1 << 64) - 1


class ShapeError(ValueError):
    """Raised when array shapes are incompatible."""


def _check_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    a = np.array(data, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if rows is not None and a.shape[0] != rows:
        raise ShapeError(f"expected {rows} rows, got {a.shape[0]}")
    if cols is not None and a.shape[1] != cols:
        raise ShapeError(f"expected {cols} cols, got {a.shape[1]}")
    _check_finite(a, "matrix")
    return a


def as_vector(data, length: int | None = None) -> np.ndarray:
    a = np.array(data, dtype=np.float64, copy=True)
    if a.ndim != 1 or a.shape[0] < 1:
        raise ShapeError(f"expected a non-empty 1-D vector, got shape {a.shape}")
    if length is not None and a.shape[0] != length:
        raise ShapeError(f"expected length {length}, got {a.shape[0]}")
    _check_finite(a, "vector")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of an (m, k) and a (k, n) matrix."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply matrices of shape {a.shape} and {b.shape}"
        )
    _check_finite(a, "left operand")
    _check_finite(b, "right operand")
    return a @ b


def sigmoid(x: float) -> float:
    # branch on sign so exp never overflows
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def sigmoid_vec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    pos = v >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def tanh_elem(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    _check_finite(v, "vector")
    return np.tanh(v)


class Prng:
    """xoshiro256** generator with splitmix64 seeding.

    Single owner, advanced sequentially.  ``Prng(seed)`` always yields the
    same stream for the same 64-bit seed.
    """

    __slots__ = ("seed", "_s")

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be a non-negative 64-bit integer")
        self.seed = seed & _MASK64
        x = self.seed
        state = []
        for _ in range(4):
            x = (x + 0x9E3779B97F4A7C15) & _MASK64
            z = x
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            state.append(z ^ (z >> 31))
        self._s = state

    def next_u64(self) -> int:
        s = self._s
        r = (s[1] * 5) & _MASK64
        r = ((r << 7) | (r >> 57)) & _MASK64
        result = (r * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = ((s[3] << 45) | (s[3] >> 19)) & _MASK64
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def exponential(self, mean: float) -> float:
        return -mean * math.log1p(-self.random())

    def normal(self) -> float:
        # Box-Muller, one variate per call
        u1 = 1.0 - self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``range(n)``."""
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return np.array(idx, dtype=np.int64)


def uniform_init(prng: Prng, rows: int, cols: int, scale: float) -> np.ndarray:
    """Matrix of i.i.d. uniform draws in [-scale, scale], row-major order."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    data = [prng.uniform(-scale, scale) for _ in range(rows * cols)]
    return np.array(data, dtype=np.float64).reshape(rows, cols)
