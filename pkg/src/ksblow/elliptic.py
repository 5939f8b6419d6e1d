"""Chemoattractant equation in mass-accumulation form, one time slice.

With w, z the mass accumulations of the cell density u and the concentration
v, the quasi-stationary concentration equation reduces to the linear
two-point boundary value problem

    n^2 * s^(2-2/n) * z''(s) - z(s) = -w(s)   on (0, R^n),
    z(0) = 0,   z(R^n) = w(R^n),

the right condition expressing the no-flux wall (v_r(R) = 0).  The coefficient
degenerates at s = 0 but the Dirichlet row removes the singular equation.
v is reconstructed from v = n * z_s with the same stencil used elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs

from .grids import MassGrid


class SingularSystemError(RuntimeError):
    """Tridiagonal solve broke down (cannot happen for this sign pattern)."""


@dataclass
class ChemoField:
    z: np.ndarray
    v: np.ndarray | None
    residual_norm: float


class ChemoSolver:
    """Prefactored assembly of the concentration BVP on a fixed grid.

    The matrix depends only on the grid and n, so one instance serves every
    time slice of a run.  Rows are equilibrated by their diagonal, which makes
    the residual check spacing-independent.
    """

    def __init__(self, grid: MassGrid, n: int, tol: float = 1e-10):
        self.grid = grid
        self.n = int(n)
        self.tol = tol
        s = grid.s
        N = s.size - 1
        coef = float(n) ** 2 * s[1:-1] ** (2.0 - 2.0 / n)
        c0, c1, c2 = grid._d2
        self._lo = coef * c0          # multiplies z_{i-1}
        self._diag = coef * c1 - 1.0  # multiplies z_i
        self._hi = coef * c2          # multiplies z_{i+1}
        self._scale = np.abs(self._diag)
        # equilibrated tridiagonal bands for LAPACK gtsv
        self._d = np.ones(N + 1)
        self._d[1:-1] = self._diag / self._scale
        self._du = np.zeros(N)
        self._du[1:] = self._hi / self._scale
        self._dl = np.zeros(N)
        self._dl[:-1] = self._lo / self._scale
        (self._gtsv,) = get_lapack_funcs(("gtsv",), (self._d,))

    def solve(self, w: np.ndarray, with_v: bool = True) -> ChemoField:
        s = self.grid.s
        if w.shape != s.shape:
            raise ValueError("w and grid must have matching shapes")
        rhs = np.empty_like(w)
        rhs[0] = 0.0
        rhs[-1] = w[-1]
        rhs[1:-1] = -w[1:-1] / self._scale
        _, _, _, z, info = self._gtsv(self._dl.copy(), self._d.copy(),
                                      self._du.copy(), rhs,
                                      overwrite_dl=True, overwrite_d=True,
                                      overwrite_du=True, overwrite_b=True)
        if info != 0:
            raise SingularSystemError(f"tridiagonal solve failed (info={info})")
        if not np.all(np.isfinite(z)):
            raise SingularSystemError("non-finite solution from banded solve")
        res = (self._lo * z[:-2] + self._diag * z[1:-1] + self._hi * z[2:]
               + w[1:-1]) / self._scale
        residual = float(np.max(np.abs(res)))
        residual = max(residual, abs(z[0]), abs(float(z[-1]) - float(w[-1])))
        if residual > self.tol:
            raise SingularSystemError(
                f"BVP residual {residual:.3e} exceeds tolerance {self.tol:.3e}"
            )
        if with_v:
            v = float(self.n) * self.grid.first_derivative(z)
        else:
            v = None  # inner time-stepping never reads v
        return ChemoField(z=z, v=v, residual_norm=residual)


def get_solver(grid: MassGrid, n: int, tol: float = 1e-10) -> ChemoSolver:
    cache = grid.__dict__.setdefault("_chemo_solvers", {})
    key = (int(n), tol)
    if key not in cache:
        cache[key] = ChemoSolver(grid, n, tol)
    return cache[key]


def solve_chemo_bvp(w: np.ndarray, grid: MassGrid, n: int,
                    tol: float = 1e-10) -> ChemoField:
    """Solve the concentration BVP for a mass-accumulation profile w."""
    return get_solver(grid, n, tol).solve(np.asarray(w, dtype=float))
