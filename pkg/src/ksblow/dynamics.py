"""Time integration of the transformed scalar evolution equation.

The radial system is evolved through the mass accumulation
w(s,t) = integral of rho^(n-1) u(rho,t) over rho in (0, s^(1/n)), s = r^n,
which satisfies

    w_t = n^2 m s^(2-2/n) (n w_s + 1)^(m-1) w_ss
          + chi n w_s (n w_s + 1)^(alpha-1) (w - z)
          + int_0^s lambda(sigma^(1/n)) w_s dsigma
          - n^(kappa-1) int_0^s mu(sigma^(1/n)) w_s^kappa dsigma

with w(0,t) = 0 and w(R^n, t) evolving by the source integrals over the whole
domain (no-flux walls make total mass move only through the logistic terms).
u is recovered from u = n w_s.

Stepping is explicit RK2 with a diffusion-CFL time step and step rejection;
near blow-up the admissible dt collapses, and that collapse is itself the
detection signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .elliptic import ChemoField, get_solver
from .grids import MassGrid
from .params import ModelParams

__all__ = [
    "MassState",
    "BlowupReport",
    "RunResult",
    "InfeasibleProfileError",
    "StepRejectedError",
    "init_profile",
    "reconstruct_u",
    "sup_norm_u",
    "check_power_bound",
    "rhs",
    "cfl_dt",
    "step",
    "run",
]

_WS_FLOOR = 1e-12  # floor for n*w_s + 1 before real-exponent powers


@dataclass
class MassState:
    grid: MassGrid
    w: np.ndarray
    t: float


@dataclass
class BlowupReport:
    detected: bool
    T_star_numeric: float | None
    trigger: str  # "sup-threshold" | "dt-collapse" | "horizon-reached"
    sup_u_history: list[tuple[float, float]]
    power_bound_ok: list[tuple[float, bool]]
    K_fit: float


@dataclass
class RunResult:
    snapshots: list[MassState]
    report: BlowupReport
    moment_series: list = field(default_factory=list)


class InfeasibleProfileError(ValueError):
    def __init__(self, message: str, achievable_mass: float, achievable_inner: float):
        super().__init__(message)
        self.achievable_mass = achievable_mass
        self.achievable_inner = achievable_inner


class StepRejectedError(RuntimeError):
    pass


def _cumulative_mass(r, plateau: float, L: float, p: float, n: int):
    """Closed-form integral of rho^(n-1) * min(plateau, L rho^-p) over (0, r)."""
    r = np.asarray(r, dtype=float)
    if math.isinf(L):
        return plateau * r ** n / n
    r_c = (L / plateau) ** (1.0 / p)
    inner = plateau * np.minimum(r, r_c) ** n / n
    tail_r = np.maximum(r, r_c)
    if p == n:
        tail = L * np.log(tail_r / r_c)
    else:
        tail = L * (tail_r ** (n - p) - r_c ** (n - p)) / (n - p)
    return inner + tail


def init_profile(params: ModelParams, grid: MassGrid, r1: float, L: float,
                 p: float) -> MassState:
    """Capped-plateau initial data u0(r) = min(A, L r^-p) with mass M0.

    The plateau height A is bisected so that the total mass equals M0 to
    relative accuracy 1e-10; the construction guarantees u0 <= L r^-p
    pointwise.  Raises InfeasibleProfileError when the inner mass over the
    ball of radius r1 falls short of M1 (the achievable value is reported).
    """
    n, R, M0, M1, omega = params.n, params.R, params.M0, params.M1, params.omega_n1
    if not 0 < r1 < R:
        raise ValueError(f"r1 must lie in (0, R), got {r1}")
    if L <= 0 or p < n:
        raise ValueError("need L > 0 and p >= n")
    target = M0 / omega

    def total(A):
        return float(_cumulative_mass(R, A, L, p, n))

    if math.isinf(L):
        A = n * target / R ** n
    else:
        A_lo, A_hi = 1e-300, n * target / R ** n
        while total(A_hi) < target:
            A_hi *= 2.0
            if A_hi > 1e300:  # unreachable for p >= n, guards bad input
                raise InfeasibleProfileError(
                    "no plateau height reaches the requested mass",
                    omega * total(A_hi), 0.0)
        for _ in range(200):
            A = 0.5 * (A_lo + A_hi)
            if total(A) < target:
                A_lo = A
            else:
                A_hi = A
            if (A_hi - A_lo) <= 1e-14 * A_hi:
                break
        A = 0.5 * (A_lo + A_hi)

    mass = omega * total(A)
    if abs(mass - M0) > 1e-10 * M0:
        raise InfeasibleProfileError(
            f"bisection failed to reach M0 (got {mass})", mass, 0.0)
    inner = omega * float(_cumulative_mass(r1, A, L, p, n))
    if inner < M1 * (1 - 1e-12):
        raise InfeasibleProfileError(
            f"inner mass over B_r1 is {inner:.6g} < M1={M1:.6g} "
            f"(total mass {mass:.6g})", mass, inner)
    w = np.asarray(_cumulative_mass(grid.radii(n), A, L, p, n))
    w[0] = 0.0
    return MassState(grid=grid, w=w, t=0.0)


def reconstruct_u(state: MassState, n: int) -> np.ndarray:
    """Node values of the cell density, u_i = n * (w_s)_i."""
    return float(n) * state.grid.first_derivative(state.w)


def sup_norm_u(state: MassState, n: int) -> float:
    return float(np.max(reconstruct_u(state, n)))


def check_power_bound(state: MassState, K: float, p: float, n: int
                      ) -> tuple[bool, float, float]:
    """Check u <= K r^-p at all nodes with r > 0.

    Returns (ok, worst_ratio, K_fit) with worst_ratio = max u r^p / K and
    K_fit = max u r^p, the smallest constant for which the bound holds.
    """
    if p < n:
        raise ValueError(f"p must be >= n, got {p}")
    u = reconstruct_u(state, n)[1:]
    r = state.grid.radii(n)[1:]
    prod = u * r ** p
    K_fit = float(np.max(prod))
    worst = K_fit / K
    return worst <= 1.0 + 1e-12, worst, K_fit


def rhs(state: MassState, chemo: ChemoField, params: ModelParams,
        lambda_fn: Callable | None = None,
        mu_fn: Callable | None = None) -> np.ndarray:
    """Time derivative of w at every node.

    Interior nodes carry the four-term sum (degenerate diffusion, chemotactic
    drift, growth integral, logistic sink); the first node is pinned to 0 and
    the last evolves by the source integrals over the whole domain (mass law).
    Non-finite output near blow-up is the caller's signal to shrink dt.
    """
    grid = state.grid
    n, m, alpha, chi, kappa = params.n, params.m, params.alpha, params.chi, params.kappa
    w = state.w
    ws = grid.first_derivative(w)
    wss = grid.second_derivative(w)
    base = np.maximum(n * ws + 1.0, _WS_FLOOR)
    out = np.empty_like(w)

    diff = (n * n * m) * grid.spow(2.0 - 2.0 / n) * wss
    if m != 1.0:
        diff *= base ** (m - 1.0)
    drift = (chi * n) * ws * (w - chemo.z)
    if alpha != 1.0:
        drift *= base ** (alpha - 1.0)
    out[:] = diff + drift

    ws_pos = np.maximum(ws, 0.0)
    r = grid.radii(n)
    growth = sink = None
    if lambda_fn is not None or params.lambda1 > 0.0:
        lam = lambda_fn if lambda_fn is not None else params.lambda_fn
        growth = grid.cumtrapz(np.asarray(lam(r)) * ws_pos)
        out += growth
    if mu_fn is not None or params.mu1 > 0.0:
        mu = mu_fn if mu_fn is not None else params.mu_fn
        sink = float(n) ** (kappa - 1.0) * grid.cumtrapz(np.asarray(mu(r)) * ws_pos ** kappa)
        out -= sink

    out[0] = 0.0
    # mass law at s = R^n: diffusion flux and drift vanish at the no-flux wall
    out[-1] = ((growth[-1] if growth is not None else 0.0)
               - (sink[-1] if sink is not None else 0.0))
    return out


def cfl_dt(state: MassState, params: ModelParams, cfl: float = 0.35,
           ws: np.ndarray | None = None) -> float:
    """Diffusion-limited explicit time step on the graded grid."""
    grid = state.grid
    n, m = params.n, params.m
    cache = grid.__dict__.setdefault("_cfl_cache", {})
    if "local2" not in cache:
        h = np.diff(grid.s)
        cache["local2"] = np.minimum(h[:-1], h[1:]) ** 2  # spacing at interior nodes
    if ws is None:
        ws = grid.first_derivative(state.w)
    denom = n * n * m * grid.spow(2.0 - 2.0 / n)[1:-1]
    if m != 1.0:
        base = np.maximum(n * ws[1:-1] + 1.0, _WS_FLOOR)
        denom = denom * base ** (m - 1.0)
    return cfl * float(np.min(cache["local2"] / np.maximum(denom, 1e-300)))


def step(state: MassState, chemo: ChemoField, params: ModelParams, dt: float,
         lambda_fn: Callable | None = None, mu_fn: Callable | None = None,
         mono_tol: float = 1e-12) -> MassState:
    """One explicit midpoint (RK2) step.

    Rejects the step (StepRejectedError) when the update produces non-finite
    values or breaks monotonicity of w beyond ``mono_tol`` (scaled by the
    total mass level); the caller halves dt and retries.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    grid = state.grid
    solver = get_solver(grid, params.n)
    # overflow near blow-up is the rejection signal, not an error
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = rhs(state, chemo, params, lambda_fn, mu_fn)
        w_mid = state.w + (0.5 * dt) * k1
        w_mid[0] = 0.0
        if not np.all(np.isfinite(w_mid)):
            raise StepRejectedError("non-finite midpoint")
        mid = MassState(grid=grid, w=w_mid, t=state.t + 0.5 * dt)
        try:
            chemo_mid = solver.solve(w_mid, with_v=False)
        except Exception as exc:
            raise StepRejectedError(f"midpoint BVP failed: {exc}") from exc
        k2 = rhs(mid, chemo_mid, params, lambda_fn, mu_fn)
        w_new = state.w + dt * k2
        w_new[0] = 0.0
        if not np.all(np.isfinite(w_new)):
            raise StepRejectedError("non-finite state")
    tol = mono_tol * max(1.0, float(w_new[-1]))
    if dt > 0 and float(np.min(np.diff(w_new))) < -tol:
        raise StepRejectedError("monotonicity of w violated")
    return MassState(grid=grid, w=w_new, t=state.t + dt)


def run(params: ModelParams, state0: MassState, T_end: float,
        s0_list: Sequence[float] | None = None, gamma: float | None = None,
        moment_hook: Callable | None = None, *,
        cfl: float = 0.35, u_cap: float | None = None, dt_min: float = 1e-12,
        snapshot_every: float | None = None, moment_every: float | None = None,
        lambda_fn: Callable | None = None, mu_fn: Callable | None = None,
        max_steps: int = 50_000_000) -> RunResult:
    """Adaptive explicit integration with blow-up detection.

    Stops at T_end (horizon-reached), when the sup norm of u exceeds u_cap
    (sup-threshold, default 1e8 x initial sup norm), or when the accepted dt
    falls below dt_min (dt-collapse).  ``moment_hook(state, chemo, s0_list,
    gamma)`` is evaluated at the moment cadence and its samples are collected
    into the returned series.
    """
    if T_end <= 0:
        raise ValueError("T_end must be > 0")
    grid = state0.grid
    solver = get_solver(grid, params.n)
    n = params.n
    sup0 = sup_norm_u(state0, n)
    if u_cap is None:
        u_cap = 1e8 * (sup0 if sup0 > 0 else 1.0)
    if snapshot_every is None:
        snapshot_every = T_end / 20.0
    if moment_every is None:
        moment_every = snapshot_every

    state = state0
    chemo = solver.solve(state.w, with_v=False)
    ws = grid.first_derivative(state.w)
    snapshots = [state]
    moment_series: list = []
    sup_hist: list[tuple[float, float]] = []
    power_ok: list[tuple[float, bool]] = []
    K_fit_run = 0.0
    rpow = grid.radii(n)[1:] ** params.p

    def record_sample(st: MassState, ch: ChemoField, ws_st: np.ndarray) -> None:
        nonlocal K_fit_run
        u = float(n) * ws_st
        sup_hist.append((st.t, float(np.max(u))))
        kf = float(np.max(u[1:] * rpow))
        K_fit_run = max(K_fit_run, kf)
        power_ok.append((st.t, kf <= params.K * (1 + 1e-12)))
        if moment_hook is not None and s0_list:
            moment_series.extend(moment_hook(st, ch, s0_list, gamma))

    record_sample(state, chemo, ws)
    next_snap = snapshot_every
    next_moment = moment_every
    trigger = "horizon-reached"
    t_star: float | None = None
    eps_t = 1e-12 * T_end

    for _ in range(max_steps):
        if state.t >= T_end - eps_t:
            break
        t_next = min(T_end, next_snap, next_moment)
        dt = min(cfl_dt(state, params, cfl, ws=ws), t_next - state.t)
        accepted = None
        while True:
            if dt < dt_min:
                trigger = "dt-collapse"
                t_star = state.t
                break
            try:
                accepted = step(state, chemo, params, dt, lambda_fn, mu_fn)
                break
            except StepRejectedError:
                dt *= 0.5
        if accepted is None:
            break
        state = accepted
        chemo = solver.solve(state.w, with_v=False)
        ws = grid.first_derivative(state.w)
        sup_u = float(n) * float(np.max(ws))
        if sup_u > u_cap:
            trigger = "sup-threshold"
            t_star = state.t
            record_sample(state, chemo, ws)
            break
        if state.t >= next_moment - eps_t:
            record_sample(state, chemo, ws)
            while next_moment <= state.t + eps_t:
                next_moment += moment_every
        if state.t >= next_snap - eps_t:
            snapshots.append(state)
            while next_snap <= state.t + eps_t:
                next_snap += snapshot_every
    else:
        raise RuntimeError("max_steps exceeded without reaching a stop condition")

    if snapshots[-1] is not state:
        snapshots.append(state)
    if not sup_hist or sup_hist[-1][0] != state.t:
        record_sample(state, chemo, ws)

    detected = trigger in ("sup-threshold", "dt-collapse")
    report = BlowupReport(
        detected=detected,
        T_star_numeric=t_star,
        trigger=trigger,
        sup_u_history=sup_hist,
        power_bound_ok=power_ok,
        K_fit=K_fit_run,
    )
    return RunResult(snapshots=snapshots, report=report, moment_series=moment_series)
