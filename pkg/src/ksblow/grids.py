"""Graded radial grids in the mass variable s = r^n, plus difference stencils.

Nodes follow s_i = R^n * (i/N)**grading, which concentrates resolution near
s = 0 where the diffusion coefficient degenerates and where aggregation
concentrates.  First/second derivatives use the standard three-point formulas
for non-uniform spacing (second order on smoothly graded grids); endpoint
first derivatives are one-sided second order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MassGrid:
    s: np.ndarray
    grading: float = 1.0
    # stencil coefficients, built once in __post_init__
    _d1: tuple = field(init=False, repr=False)
    _d2: tuple = field(init=False, repr=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.ndim != 1 or s.size < 17:
            raise ValueError("grid needs at least 17 nodes (N >= 16 cells)")
        if s[0] != 0.0:
            raise ValueError("first node must be exactly 0")
        if not np.all(np.diff(s) > 0):
            raise ValueError("nodes must be strictly increasing")
        if self.grading < 1.0:
            raise ValueError("grading exponent must be >= 1")
        self.s = s
        hm = s[1:-1] - s[:-2]   # h_i^-
        hp = s[2:] - s[1:-1]    # h_i^+
        self._d1 = (-hp / (hm * (hm + hp)),
                    (hp - hm) / (hm * hp),
                    hm / (hp * (hm + hp)))
        self._d2 = (2.0 / (hm * (hm + hp)),
                    -2.0 / (hm * hp),
                    2.0 / (hp * (hm + hp)))

    @classmethod
    def graded(cls, R: float, n: int, N: int, grading: float = 2.0) -> "MassGrid":
        if N < 16:
            raise ValueError(f"N must be >= 16, got {N}")
        xi = np.arange(N + 1, dtype=float) / N
        s = (R ** n) * xi ** grading
        s[0] = 0.0
        s[-1] = R ** n
        return cls(s=s, grading=grading)

    @property
    def n_nodes(self) -> int:
        return self.s.size

    def spow(self, expnt: float) -> np.ndarray:
        """Memoized node-wise power s**expnt (hot in the time-stepping loop)."""
        cache = self.__dict__.setdefault("_spow_cache", {})
        if expnt not in cache:
            cache[expnt] = self.s ** expnt
        return cache[expnt]

    def radii(self, n: int) -> np.ndarray:
        return self.spow(1.0 / n)

    def first_derivative(self, f: np.ndarray) -> np.ndarray:
        s, (c0, c1, c2) = self.s, self._d1
        out = np.empty_like(f)
        out[1:-1] = c0 * f[:-2] + c1 * f[1:-1] + c2 * f[2:]
        # one-sided second-order ends
        h0, h1 = s[1] - s[0], s[2] - s[1]
        out[0] = (-(2 * h0 + h1) / (h0 * (h0 + h1)) * f[0]
                  + (h0 + h1) / (h0 * h1) * f[1]
                  - h0 / (h1 * (h0 + h1)) * f[2])
        g1, g0 = s[-2] - s[-3], s[-1] - s[-2]
        out[-1] = ((2 * g0 + g1) / (g0 * (g0 + g1)) * f[-1]
                   - (g0 + g1) / (g0 * g1) * f[-2]
                   + g0 / (g1 * (g0 + g1)) * f[-3])
        return out

    def second_derivative(self, f: np.ndarray) -> np.ndarray:
        (c0, c1, c2) = self._d2
        out = np.empty_like(f)
        out[1:-1] = c0 * f[:-2] + c1 * f[1:-1] + c2 * f[2:]
        out[0] = out[1]
        out[-1] = out[-2]
        return out

    def cumtrapz(self, f: np.ndarray) -> np.ndarray:
        out = np.empty_like(f)
        out[0] = 0.0
        np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(self.s), out=out[1:])
        return out

    def nearest_node(self, s0: float) -> int:
        """Index of the node closest to s0 (s0 values snap to nodes)."""
        return int(np.argmin(np.abs(self.s - s0)))
