"""Seeded random streams.

A counter-based generator (Philox) drives every random draw in the
package, so that a 64-bit seed fully determines datasets, noise,
time draws, and network initialization. The integer stream is
bit-exact across platforms; normal variates are produced by
Box-Muller with a fixed cos/sin pairing and are identical on any
IEEE-754 double hardware.

Parallel code must not share an Rng; derive independent children with
``split()`` instead.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Rng"]

_TWO_PI = 2.0 * np.pi


class Rng:
    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        self.seed = seed
        self._gen = np.random.Generator(np.random.Philox(key=seed))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"

    def raw_u64(self, n: int) -> np.ndarray:
        """n raw draws from the 64-bit integer stream."""
        if n < 0:
            raise ValueError("n must be >= 0")
        return self._gen.integers(0, 2**64, size=n, dtype=np.uint64, endpoint=False)

    def uniform(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1)."""
        if n < 0:
            raise ValueError("n must be >= 0")
        return self._gen.random(n)

    def normal(self, n: int) -> np.ndarray:
        """n i.i.d. standard normal draws.

        Box-Muller on consecutive uniform pairs; each pair yields
        (r*cos, r*sin) placed at consecutive output positions.
        """
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0:
            return np.zeros(0)
        m = (n + 1) // 2
        u1 = self.uniform(m)
        u2 = self.uniform(m)
        # 1-u1 lies in (0, 1]: log never sees zero
        r = np.sqrt(-2.0 * np.log1p(-u1))
        ang = _TWO_PI * u2
        out = np.empty(2 * m)
        out[0::2] = r * np.cos(ang)
        out[1::2] = r * np.sin(ang)
        return out[:n]

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.normal(rows * cols).reshape(rows, cols)

    def integers(self, bound: int, n: int) -> np.ndarray:
        """n unbiased draws from {0, ..., bound-1}."""
        if bound < 1:
            raise ValueError("bound must be >= 1")
        return self._gen.integers(0, bound, size=n, dtype=np.int64)

    def split(self) -> "Rng":
        """Derive an independent child stream (advances this stream)."""
        return Rng(int(self.raw_u64(1)[0]))

    # -- checkpoint support ------------------------------------------------

    def get_state(self) -> dict:
        st = self._gen.bit_generator.state
        return {
            "seed": self.seed,
            "counter": [int(x) for x in st["state"]["counter"]],
            "key": [int(x) for x in st["state"]["key"]],
            "buffer": [int(x) for x in st["buffer"]],
            "buffer_pos": int(st["buffer_pos"]),
            "has_uint32": int(st["has_uint32"]),
            "uinteger": int(st["uinteger"]),
        }

    def set_state(self, state: dict) -> None:
        self.seed = int(state["seed"])
        bg = np.random.Philox()
        bg.state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.array(state["counter"], dtype=np.uint64),
                "key": np.array(state["key"], dtype=np.uint64),
            },
            "buffer": np.array(state["buffer"], dtype=np.uint64),
            "buffer_pos": int(state["buffer_pos"]),
            "has_uint32": int(state["has_uint32"]),
            "uinteger": int(state["uinteger"]),
        }
        self._gen = np.random.Generator(bg)
