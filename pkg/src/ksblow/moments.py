"""Moment functionals, their differential inequality, and blow-up time bounds.

Given a mass-accumulation state w on [0, R^n], a probe location s0 and a
weight exponent gamma in (0, 1), this module evaluates

    phi(s0, t)       = int_0^s0 s^-gamma (s0 - s) w ds,
    psi_alpha(s0, t) = int_0^s0 s^(-gamma + (p/n)(1-alpha)_+) (s0 - s) w w_s ds,

the four lower-bound integrals I1..I4 whose sum bounds d(phi)/dt from below,
the explicit-constant pointwise estimates that connect them, and the exact
blow-up time of the comparison equation phi' = a*phi^2 - b.

Quadrature uses product integration: the non-weight factor of each integrand
is taken piecewise linear on the grid and multiplied by exact cell moments of
the singular weight s^a (s0-s)^b, computed from the regularized incomplete
beta function.  This keeps endpoint singularities (a, b > -1) at full
quadrature order, which plain trapezoid rules cannot do on a grid graded only
toward s = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .dynamics import MassState
from .elliptic import ChemoField
from .grids import MassGrid
from .params import ModelParams

__all__ = [
    "IntegrabilityError",
    "MomentSample",
    "beta_function",
    "weighted_integral",
    "snap_probe",
    "phi",
    "psi_alpha",
    "integrals_I",
    "sample_moments",
    "finalize_moment_series",
    "check_paphi_inequality",
    "LemmaCheck",
    "LemmaBoundsReport",
    "verify_lemma_bounds",
    "KeyineqReport",
    "verify_keyineq",
    "phi0_lower_bound",
    "riccati_blowup_time",
]

_WS_FLOOR = 1e-12


class IntegrabilityError(ValueError):
    pass


def _pos(x: float) -> float:
    return x if x > 0.0 else 0.0


def beta_function(a: float, b: float) -> float:
    """Euler beta B(a, b) via log-gamma; relative error below 1e-12."""
    if a <= 0 or b <= 0:
        raise ValueError(f"beta_function needs positive arguments, got ({a}, {b})")
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def weighted_integral(s: np.ndarray, f: np.ndarray, a: float, b: float,
                      s0: float) -> float:
    """integral of s^a (s0-s)^b f(s) over [s[0], s[-1]] subset of [0, s0].

    f is interpolated linearly on each cell; the weight moments per cell are
    exact.  Requires a > -1 and b > -1 for integrability.
    """
    if a <= -1 or b <= -1:
        raise IntegrabilityError(
            f"weight exponents must exceed -1, got a={a}, b={b}")
    if s0 <= 0:
        raise ValueError("s0 must be positive")
    s = np.asarray(s, dtype=float)
    f = np.asarray(f, dtype=float)
    if s[-1] > s0 * (1 + 1e-12):
        raise ValueError("nodes must not exceed s0")
    x = np.clip(s / s0, 0.0, 1.0)
    B1 = beta_function(a + 1, b + 1)
    B2 = beta_function(a + 2, b + 1)
    P0 = betainc(a + 1, b + 1, x)
    P1 = betainc(a + 2, b + 1, x)
    M0 = (s0 ** (a + b + 1) * B1) * np.diff(P0)   # cell integrals of the weight
    M1 = (s0 ** (a + b + 2) * B2) * np.diff(P1)   # ... of s * weight
    ds = np.diff(s)
    left = (s[1:] * M0 - M1) / ds
    right = (M1 - s[:-1] * M0) / ds
    return float(np.dot(f[:-1], left) + np.dot(f[1:], right))


def snap_probe(grid: MassGrid, s0: float) -> tuple[int, float]:
    """Snap a requested probe location to the nearest grid node.

    Returns (node index, snapped value); the index is at least 2 so the
    restricted integral has at least two cells.
    """
    if not 0 < s0 <= grid.s[-1] * (1 + 1e-12):
        raise ValueError(f"s0 must lie in (0, {grid.s[-1]}], got {s0}")
    k = grid.nearest_node(s0)
    k = max(k, 2)
    return k, float(grid.s[k])


def phi(state: MassState, s0: float, gamma: float) -> float:
    """Moment functional int_0^s0 s^-gamma (s0-s) w ds (s0 snapped to a node)."""
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    k, s0s = snap_probe(state.grid, s0)
    return weighted_integral(state.grid.s[:k + 1], state.w[:k + 1],
                             a=-gamma, b=1.0, s0=s0s)


def psi_alpha(state: MassState, s0: float, gamma: float, p: float,
              alpha: float, n: int) -> float:
    """Weighted functional with the density-gradient factor w * w_s."""
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    a = -gamma + (p / n) * _pos(1 - alpha)
    if a <= -1:
        raise IntegrabilityError(
            f"psi_alpha weight exponent {a} <= -1 is not integrable")
    k, s0s = snap_probe(state.grid, s0)
    ws = state.grid.first_derivative(state.w)
    f = state.w[:k + 1] * ws[:k + 1]
    return weighted_integral(state.grid.s[:k + 1], f, a=a, b=1.0, s0=s0s)


def integrals_I(state: MassState, chemo: ChemoField, s0: float, gamma: float,
                params: ModelParams) -> tuple[float, float, float, float]:
    """The four integrals whose sum bounds d(phi)/dt from below.

    I1: chemotactic self-interaction (positive part), I2: degenerate
    diffusion, I3: concentration sink (-z part), I4: logistic sink with the
    inner integral taken over the whole window (0, s0), which only deepens the
    lower bound.
    """
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    n, m, alpha, chi, kappa, q = (params.n, params.m, params.alpha,
                                  params.chi, params.kappa, params.q)
    grid = state.grid
    k, s0s = snap_probe(grid, s0)
    sl = slice(0, k + 1)
    s = grid.s[sl]
    w = state.w[sl]
    ws = grid.first_derivative(state.w)[sl]
    wss = grid.second_derivative(state.w)[sl]
    z = chemo.z[sl]
    base = np.maximum(n * ws + 1.0, _WS_FLOOR)

    I1 = chi * n * weighted_integral(
        s, base ** (alpha - 1.0) * w * ws, a=-gamma, b=1.0, s0=s0s)
    I2 = n * n * m * weighted_integral(
        s, base ** (m - 1.0) * wss, a=2.0 - 2.0 / n - gamma, b=1.0, s0=s0s)
    I3 = -chi * n * weighted_integral(
        s, base ** (alpha - 1.0) * z * ws, a=-gamma, b=1.0, s0=s0s)
    if params.mu1 > 0.0:
        inner = weighted_integral(s, np.maximum(ws, 0.0) ** kappa,
                                  a=q / n, b=0.0, s0=s0s)
        outer = weighted_integral(s, np.ones_like(s), a=-gamma, b=1.0, s0=s0s)
        I4 = -float(n) ** (kappa - 1.0) * params.mu1 * inner * outer
    else:
        I4 = 0.0
    return I1, I2, I3, I4


@dataclass
class MomentSample:
    t: float
    s0: float
    gamma: float
    phi: float
    psi_alpha: float
    I: tuple[float, float, float, float]
    theta: float | None = None
    dphi_dt_fd: float | None = None
    c1: float | None = None
    c2: float | None = None
    ineq_margin: float | None = None


def sample_moments(state: MassState, chemo: ChemoField, s0_list, gamma: float,
                   params: ModelParams, theta: float | None = None
                   ) -> list[MomentSample]:
    out = []
    for s0 in s0_list:
        _, s0s = snap_probe(state.grid, s0)
        out.append(MomentSample(
            t=state.t, s0=s0s, gamma=gamma,
            phi=phi(state, s0s, gamma),
            psi_alpha=psi_alpha(state, s0s, gamma, params.p, params.alpha, params.n),
            I=integrals_I(state, chemo, s0s, gamma, params),
            theta=theta,
        ))
    return out


def _fd_derivative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Centered three-point derivative on a non-uniform time series."""
    d = np.empty_like(y)
    hm = t[1:-1] - t[:-2]
    hp = t[2:] - t[1:-1]
    d[1:-1] = (-hp / (hm * (hm + hp)) * y[:-2]
               + (hp - hm) / (hm * hp) * y[1:-1]
               + hm / (hp * (hm + hp)) * y[2:])
    d[0] = (y[1] - y[0]) / (t[1] - t[0])
    d[-1] = (y[-1] - y[-2]) / (t[-1] - t[-2])
    return d


def finalize_moment_series(samples: list[MomentSample]
                           ) -> dict[float, list[MomentSample]]:
    """Group samples by probe location and fill the finite-difference fields."""
    by_s0: dict[float, list[MomentSample]] = {}
    for smp in samples:
        by_s0.setdefault(smp.s0, []).append(smp)
    for s0, group in by_s0.items():
        group.sort(key=lambda smp: smp.t)
        if len(group) < 2:
            continue
        t = np.array([smp.t for smp in group])
        ph = np.array([smp.phi for smp in group])
        d = _fd_derivative(t, ph)
        for smp, di in zip(group, d):
            smp.dphi_dt_fd = float(di)
            smp.ineq_margin = float(di - sum(smp.I))
    return by_s0


def check_paphi_inequality(group: list[MomentSample], tol_factor: float = 1e-3
                           ) -> tuple[bool, float]:
    """Check d(phi)/dt >= I1+I2+I3+I4 at interior samples of one probe.

    The tolerance budget is tol_factor * max |I_j| per sample (quadrature and
    finite-difference noise).  Returns (ok, worst normalized margin).
    """
    worst = math.inf
    for smp in group[1:-1]:
        if smp.ineq_margin is None:
            continue
        scale = max(max(abs(v) for v in smp.I), 1e-300)
        worst = min(worst, smp.ineq_margin / scale + tol_factor)
    return worst >= 0.0, worst


@dataclass
class LemmaCheck:
    name: str
    hypothesis_met: bool
    passed: bool | None      # None when the hypothesis is not met
    margin: float | None
    constant: float | None = None


@dataclass
class LemmaBoundsReport:
    t: float
    s0: float
    gamma: float
    checks: list[LemmaCheck]
    gamma_tilde: float | None

    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks if c.hypothesis_met)


def _gamma_tilde(n: int, p: float, alpha: float, gamma: float) -> float | None:
    # Auxiliary weight used inside the concentration-sink estimate; the
    # admissible interval is open, we record its midpoint.
    if alpha < 1:
        lo = max((p / n) * (1 - alpha), gamma - 4 / n + (2 * p / n) * (1 - alpha))
        hi = min(gamma, 2 - 4 / n + (p / n) * (1 - alpha))
    else:
        lo = max(0.0, gamma - 4 / n + (2 * p / n) * (alpha - 1))
        hi = min(gamma, 2 - 4 / n)
    return 0.5 * (lo + hi) if lo < hi else None


def verify_lemma_bounds(state: MassState, chemo: ChemoField, s0: float,
                        gamma: float, params: ModelParams,
                        K: float | None = None,
                        lemma: str = "L4_1") -> LemmaBoundsReport:
    """Numerical checks of the explicit-constant estimates at one state.

    (a) I1 >= chi*n*(K+R^p)^(-(1-alpha)_+) * psi_alpha;
    (b) pointwise w(s) <= sqrt(2) s^(gamma/2-(p/2n)(1-alpha)_+)
        (s0-s)^(-1/2) sqrt(psi_alpha) on interior nodes;
    (c) phi <= sqrt(2) B(1-gamma/2-(p/2n)(1-alpha)_+, 1/2)
        s0^((3-gamma)/2-(p/2n)(1-alpha)_+) sqrt(psi_alpha);
    (d) fitted constants C for the power-form lower bounds of I2, I3, I4
        (sign-correct: C = 0 when the integral is already nonnegative).

    ``lemma`` selects the diffusion-estimate case: "L4_1" uses the
    steep-diffusion form, "L4_2" the shallow one.  Checks whose gamma
    hypothesis fails are reported with hypothesis_met=False, not failed.
    """
    if K is None:
        K = params.K
    n, p, alpha, m, q, chi, kappa = (params.n, params.p, params.alpha,
                                     params.m, params.q, params.chi,
                                     params.kappa)
    pn = p / n
    pos1a = _pos(1 - alpha)
    posa1 = _pos(alpha - 1)
    posm1 = _pos(m - 1)
    k, s0s = snap_probe(state.grid, s0)
    ph = phi(state, s0s, gamma)
    psi = psi_alpha(state, s0s, gamma, p, alpha, n)
    I1, I2, I3, I4 = integrals_I(state, chemo, s0s, gamma, params)
    sqrt_psi = math.sqrt(max(psi, 0.0))
    checks: list[LemmaCheck] = []
    rtol = 1e-9

    # (a) chemotactic self-interaction vs psi_alpha
    C1 = chi * n * (K + params.R ** p) ** (-pos1a)
    scale = max(abs(I1), C1 * psi, 1e-300)
    margin = I1 - C1 * psi
    checks.append(LemmaCheck("I1_lower", True, margin >= -rtol * scale,
                             margin, C1))

    # (b) pointwise bound on w
    wps_ok = 0.0 < gamma - pn * pos1a < 1.0
    if wps_ok:
        s = state.grid.s[1:k]
        w = state.w[1:k]
        bound = (math.sqrt(2.0) * s ** (gamma / 2 - (pn / 2) * pos1a)
                 * (s0s - s) ** (-0.5) * sqrt_psi)
        margin = float(np.min(bound - w))
        scale = max(float(np.max(w)), 1e-300)
        checks.append(LemmaCheck("w_pointwise", True,
                                 margin >= -rtol * scale, margin, math.sqrt(2.0)))
    else:
        checks.append(LemmaCheck("w_pointwise", False, None, None))

    # (c) phi vs sqrt(psi_alpha)
    if gamma < 2 - pn * pos1a:
        Cc = math.sqrt(2.0) * beta_function(1 - gamma / 2 - (pn / 2) * pos1a, 0.5)
        rhs_val = Cc * s0s ** ((3 - gamma) / 2 - (pn / 2) * pos1a) * sqrt_psi
        margin = rhs_val - ph
        checks.append(LemmaCheck("phi_vs_psi", wps_ok,
                                 margin >= -rtol * max(ph, 1e-300) if wps_ok else None,
                                 margin if wps_ok else None, Cc))
    else:
        checks.append(LemmaCheck("phi_vs_psi", False, None, None))

    # (d) fitted power-law constants for the negative parts
    if lemma == "L4_1":
        i2_ok = (0 < m < 1 + (n - 2) / p
                 and 1 - 2 / n - pn * posm1 < gamma
                 < 2 - 4 / n - pn * (2 * posm1 + pos1a))
        form2 = (s0s ** ((3 - gamma) / 2 - 2 / n - (pn / 2) * (2 * posm1 + pos1a))
                 * sqrt_psi + s0s ** (3 - 2 / n - gamma))
    else:
        i2_ok = (0 < m < min(1.0, 2 * (n - 1) / p)
                 and 0 < gamma < 2 - 2 / n - pn * m)
        form2 = s0s ** (3 - gamma - 2 / n - pn * m) + s0s ** (3 - 2 / n - gamma)
    c2fit = max(0.0, -I2) / form2
    checks.append(LemmaCheck("I2_lower", i2_ok, True if i2_ok else None,
                             I2 + c2fit * form2 if i2_ok else None, c2fit))

    i3_ok = (1 - 2 / p < alpha < 1 + 2 / p
             and gamma < 2 - 2 * pn * posa1 and wps_ok)
    form3 = (s0s ** (2 / n + (1 - gamma) / 2 - (pn / 2) * (pos1a + 2 * posa1))
             * sqrt_psi
             + s0s ** (2 / n - pn * (pos1a + posa1)) * max(psi, 0.0))
    c3fit = max(0.0, -I3) / max(form3, 1e-300)
    checks.append(LemmaCheck("I3_lower", i3_ok, True if i3_ok else None,
                             I3 + c3fit * form3 if i3_ok else None, c3fit))

    i4_ok = wps_ok and pn * (2 * (kappa - 1) + pos1a) - 2 * q / n < gamma
    form4 = s0s ** ((3 - gamma) / 2 + q / n
                    - (pn / 2) * (2 * (kappa - 1) + pos1a)) * sqrt_psi
    c4fit = max(0.0, -I4) / max(form4, 1e-300)
    checks.append(LemmaCheck("I4_lower", i4_ok, True if i4_ok else None,
                             I4 + c4fit * form4 if i4_ok else None, c4fit))

    return LemmaBoundsReport(t=state.t, s0=s0s, gamma=gamma, checks=checks,
                             gamma_tilde=_gamma_tilde(n, p, alpha, gamma))


@dataclass
class KeyineqReport:
    s0: float
    gamma: float
    theta: float
    C_fit: float
    passed: bool | None      # for a supplied C; None when only fitting
    worst_t: float | None
    n_samples: int


def verify_keyineq(group: list[MomentSample], s0: float, gamma: float,
                   theta: float, params: ModelParams,
                   C: float | None = None) -> KeyineqReport:
    """Fit (and optionally test) the constant of the comparison inequality

        d(phi)/dt >= (1/C) s0^(gamma-3+(p/n)(1-alpha)_+) phi^2
                     - C s0^(3-gamma-theta).

    For each interior sample the minimal admissible C solves a quadratic; the
    fitted constant is the max over samples.  A supplied C passes when it is
    at least the fitted one.
    """
    if len(group) < 3:
        raise ValueError("insufficient samples: need at least 3")
    a = s0 ** (gamma - 3 + (params.p / params.n) * _pos(1 - params.alpha))
    b = s0 ** (3 - gamma - theta)
    C_fit = 0.0
    worst_t = None
    for smp in group[1:-1]:
        if smp.dphi_dt_fd is None:
            raise ValueError("samples must be finalized (dphi_dt_fd missing)")
        d = smp.dphi_dt_fd
        ci = (-d + math.sqrt(d * d + 4 * a * b * smp.phi ** 2)) / (2 * b)
        if ci > C_fit:
            C_fit = ci
            worst_t = smp.t
    passed = None
    if C is not None:
        if C <= 0:
            raise ValueError("supplied C must be positive")
        passed = C >= C_fit * (1 - 1e-12)
    return KeyineqReport(s0=s0, gamma=gamma, theta=theta, C_fit=C_fit,
                         passed=passed, worst_t=worst_t,
                         n_samples=len(group))


def riccati_coefficients(C: float, s0: float, gamma: float, theta: float,
                         p: float, n: int, alpha: float) -> tuple[float, float]:
    """Map a fitted comparison constant to (c1, c2) of phi' = c1 phi^2 - c2."""
    if C <= 0:
        raise ValueError("C must be positive")
    c1 = s0 ** (gamma - 3 + (p / n) * _pos(1 - alpha)) / C
    c2 = C * s0 ** (3 - gamma - theta)
    return c1, c2


def phi0_lower_bound(eta: float, M1: float, n: int, gamma: float,
                     s0: float) -> float:
    """Initial moment lower bound eta^2 M1 / omega_{n-1} * s0^(2-gamma).

    Valid when the mass M1 sits inside the ball of radius ((1-eta)s0)^(1/n).
    """
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if M1 < 0 or s0 <= 0 or not 0 < gamma < 1:
        raise ValueError("need M1 >= 0, s0 > 0, gamma in (0, 1)")
    from .params import unit_sphere_area
    return eta * eta * M1 / unit_sphere_area(n) * s0 ** (2 - gamma)


def riccati_blowup_time(phi0: float, a: float, b: float) -> float | None:
    """Exact blow-up time of phi' = a phi^2 - b from phi(0) = phi0.

    Returns None when phi0 <= sqrt(b/a) (no forced blow-up).  For b = 0 the
    time is 1/(a phi0); for b > 0 it is
    (1/(2 sqrt(ab))) * log((phi0 + sqrt(b/a)) / (phi0 - sqrt(b/a))).
    """
    if a <= 0:
        raise ValueError(f"a must be positive, got {a}")
    if b < 0:
        raise ValueError(f"b must be nonnegative, got {b}")
    if b == 0.0:
        if phi0 <= 0:
            return None
        return 1.0 / (a * phi0)
    c = math.sqrt(b / a)
    if phi0 <= c:
        return None
    return math.log((phi0 + c) / (phi0 - c)) / (2.0 * math.sqrt(a * b))
