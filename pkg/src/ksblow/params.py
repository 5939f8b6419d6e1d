"""Model parameters and radial coefficient functions.

All physical and analytic parameters of the chemotaxis system live in
:class:`ModelParams`.  The growth coefficient ``lambda`` and the logistic
coefficient ``mu`` are radial functions; the defaults are the constant
profile ``lambda(r) = lambda1`` and the power profile ``mu(r) = mu1 * r**q``.
Tabulated radial profiles can be loaded from CSV and are linearly
interpolated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np


def unit_sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2*pi^(n/2)/Gamma(n/2))."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


class ParamValidationError(ValueError):
    """Raised with the full list of violated parameter constraints."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(problems))


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the quasilinear parabolic-elliptic system on B_R(0)."""

    n: int
    R: float
    m: float
    alpha: float
    chi: float
    kappa: float
    p: float
    K: float
    M0: float
    M1: float
    lambda1: float = 0.0
    mu1: float = 0.0
    q: float = 0.0
    omega_n1: float = field(default=0.0)

    def __post_init__(self):
        problems = []
        if int(self.n) != self.n or self.n < 3:
            problems.append(f"n must be an integer >= 3, got {self.n}")
        if not self.R > 0:
            problems.append(f"R must be > 0, got {self.R}")
        if not self.m > 0:
            problems.append(f"m must be > 0, got {self.m}")
        if not self.alpha > 0:
            problems.append(f"alpha must be > 0, got {self.alpha}")
        if not self.chi > 0:
            problems.append(f"chi must be > 0, got {self.chi}")
        if not self.kappa >= 1:
            problems.append(f"kappa must be >= 1, got {self.kappa}")
        if self.n >= 3 and not self.p >= self.n:
            problems.append(f"p must be >= n, got p={self.p}, n={self.n}")
        if not self.K > 0:
            problems.append(f"K must be > 0, got {self.K}")
        if not self.M0 > 0:
            problems.append(f"M0 must be > 0, got {self.M0}")
        if not 0 < self.M1 < self.M0:
            problems.append(f"M1 must satisfy 0 < M1 < M0, got M1={self.M1}, M0={self.M0}")
        if self.lambda1 < 0:
            problems.append(f"lambda1 must be >= 0, got {self.lambda1}")
        if self.mu1 < 0:
            problems.append(f"mu1 must be >= 0, got {self.mu1}")
        if self.q < 0:
            problems.append(f"q must be >= 0, got {self.q}")
        if problems:
            raise ParamValidationError(problems)
        omega = unit_sphere_area(int(self.n))
        if self.omega_n1 == 0.0:
            object.__setattr__(self, "omega_n1", omega)
        elif not math.isclose(self.omega_n1, omega, rel_tol=1e-12):
            raise ParamValidationError(
                [f"omega_n1={self.omega_n1} inconsistent with n={self.n} (expected {omega})"]
            )
        object.__setattr__(self, "n", int(self.n))

    def lambda_fn(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.lambda1)

    def mu_fn(self, r):
        return self.mu1 * np.asarray(r, dtype=float) ** self.q

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


class RadialTable:
    """Radial coefficient profile tabulated as (r, value) CSV rows."""

    def __init__(self, r: np.ndarray, values: np.ndarray):
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != values.shape:
            raise ValueError("table must be two equal-length 1-D columns")
        if not np.all(np.diff(r) > 0):
            raise ValueError("table radii must be strictly increasing")
        if np.any(values < 0):
            raise ValueError("radial coefficients must be nonnegative")
        self.r = r
        self.values = values

    @classmethod
    def from_csv(cls, path: str | Path) -> "RadialTable":
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    continue  # header line
        if not rows:
            raise ValueError(f"no numeric rows in {path}")
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:, 1])

    def __call__(self, r):
        return np.interp(np.asarray(r, dtype=float), self.r, self.values)
