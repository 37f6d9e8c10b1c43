"""Counter-addressable random streams.

Every stream is a PCG64 generator (128-bit LCG state, multiplier
``0x2360ED051FC65DA44385DF649FCCF645``, XSL-RR 64-bit output) whose state and
increment are set directly from ``(seed, index)`` through splitmix64, so a
sample depends only on its key and not on how many samples came before.

Uniform doubles use the top 53 bits: ``(raw >> 11) * 2**-53``.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Stream:
    def __init__(self, seed: int, index: int = 0, salt: int = 0):
        a = splitmix64((seed & _MASK64) ^ splitmix64(salt))
        b = splitmix64(a ^ (index & _MASK64))
        c = splitmix64(b)
        d = splitmix64(c)
        e = splitmix64(d)
        self._bg = np.random.PCG64()
        self._bg.state = {
            "bit_generator": "PCG64",
            "state": {"state": (b << 64) | c, "inc": ((d << 64) | e) | 1},
            "has_uint32": 0,
            "uinteger": 0,
        }

    def raw(self, n: int) -> np.ndarray:
        return self._bg.random_raw(n)

    def uniform(self, lo=0.0, hi=1.0, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        u = lo + (hi - lo) * u
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def normal(self, mean=0.0, std=1.0, size=None):
        n = 1 if size is None else int(np.prod(size))
        m = (n + 1) // 2
        u1 = 1.0 - self.uniform(size=m)  # (0, 1]
        u2 = self.uniform(size=m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:n]
        z = mean + std * z
        if size is None:
            return float(z[0])
        return z.reshape(size)

    def permutation(self, n: int) -> np.ndarray:
        # Fisher-Yates driven by uniforms
        u = self.uniform(size=max(n - 1, 0))
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = int(u[n - 1 - i] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm
