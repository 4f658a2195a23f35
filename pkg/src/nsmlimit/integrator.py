"""Time integration: exact per-mode stiff propagation + explicit SSP-RK2.

The scaled system has two stiff mechanisms: the 1/kappa Maxwell rotation
and the 1/(tau*eps) current-field coupling.  Both are linear once the
density in the coupling terms is frozen at its spatial mean, so each
Fourier mode carries a small constant matrix whose exponential is
computed once per run.  A step is the Strang composition

    exp(dt/2 L)  o  SSP-RK2 on (full RHS - L)  o  exp(dt/2 L)

which is second order, unconditionally stable in kappa, and reduces to
plain SSP-RK2 when L = 0.  E and B are Leray-projected after every step.

The limit system reuses the same machinery with only the viscous block.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import BlowUpError, ConfigError, VacuumError
from .model import (
    FullState,
    LimitState,
    Params,
    _full_rate,
    _limit_rate,
)
from .spectral import Grid, ScalarField, VectorField, array_leray_project

__all__ = [
    "StepControl",
    "StiffLinearOperator",
    "build_stiff_operator",
    "step_full",
    "step_limit",
    "evolve",
    "StepLog",
]


@dataclass(frozen=True)
class StepControl:
    """Step size, horizon and stepping mode.

    In adaptive mode dt is additionally capped by cfl*dx/max(1, |u|_inf);
    the stiff propagator being exact, dt is never constrained by 1/kappa.
    """

    dt: float
    t_end: float
    cfl: float = 0.5
    mode: str = "fixed_dt"

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be nonnegative")
        if not (0.0 < self.cfl <= 1.0):
            raise ConfigError("cfl must lie in (0, 1]")
        if self.mode not in ("fixed_dt", "adaptive"):
            raise ConfigError("mode must be 'fixed_dt' or 'adaptive'")


def _hats(grid: Grid, arrs: np.ndarray) -> np.ndarray:
    """(c, nx, ny, nz) physical -> (M, c) spectral stack."""
    h = np.fft.fftn(arrs, axes=grid.fft_axes)
    return h.reshape(h.shape[0], -1).T


def _phys(grid: Grid, hats: np.ndarray, comps: int) -> np.ndarray:
    h = hats.T.reshape((comps,) + grid.shape)
    return np.fft.ifftn(h, axes=grid.fft_axes).real


class StiffLinearOperator:
    """Per-Fourier-mode linear generators and their half-step exponentials.

    The (J, E, B) block couples d_t J = a E (a = (1+eps)/(tau eps) n_mean),
    d_t E = (ik x B)/kappa - n_mean P_k J and d_t B = -(ik x E)/kappa,
    with the viscous multiplier on J; P_k is the per-mode Leray projector
    (the projected current source keeps the split solenoidal).  The u
    block carries the viscous multiplier alone.  The Maxwell sub-block is
    skew-Hermitian, so its exponential is unitary.
    """

    def __init__(self, grid: Grid, dt: float, n_mean: float,
                 gen_u: np.ndarray, gen_jeb: np.ndarray):
        self.grid = grid
        self.dt = dt
        self.n_mean = n_mean
        self.gen_u = gen_u        # (M, 3, 3)
        self.gen_jeb = gen_jeb    # (M, 9, 9)
        self.prop_u_half = scipy.linalg.expm(gen_u * (0.5 * dt))
        self.prop_jeb_half = scipy.linalg.expm(gen_jeb * (0.5 * dt))

    @classmethod
    def zero(cls, grid: Grid, dt: float) -> "StiffLinearOperator":
        m = grid.npoints
        return cls(
            grid, dt, 1.0,
            np.zeros((m, 3, 3), dtype=complex),
            np.zeros((m, 9, 9), dtype=complex),
        )

    def apply_half(self, u, J, E, B):
        """One half-step exact propagation of (u, J, E, B)."""
        g = self.grid
        zu = np.einsum("mij,mj->mi", self.prop_u_half, _hats(g, u))
        z = np.concatenate([_hats(g, J), _hats(g, E), _hats(g, B)], axis=1)
        z = np.einsum("mij,mj->mi", self.prop_jeb_half, z)
        return (
            _phys(g, zu, 3),
            _phys(g, z[:, 0:3], 3),
            _phys(g, z[:, 3:6], 3),
            _phys(g, z[:, 6:9], 3),
        )

    def linear_rate(self, u, J, E, B):
        """L applied to (u, J, E, B), for forming the explicit remainder."""
        g = self.grid
        zu = np.einsum("mij,mj->mi", self.gen_u, _hats(g, u))
        z = np.concatenate([_hats(g, J), _hats(g, E), _hats(g, B)], axis=1)
        z = np.einsum("mij,mj->mi", self.gen_jeb, z)
        return (
            _phys(g, zu, 3),
            _phys(g, z[:, 0:3], 3),
            _phys(g, z[:, 3:6], 3),
            _phys(g, z[:, 6:9], 3),
        )


def build_stiff_operator(
    grid: Grid, p: Params, n_mean: float, dt: float
) -> StiffLinearOperator:
    """Assemble per-mode generators and exponentiate the half step."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    kx, ky, kz = (np.broadcast_to(k, grid.shape).ravel() for k in grid.wavenumbers)
    kvec = np.stack([kx, ky, kz], axis=1)  # (M, 3), Nyquist-zeroed derivative k
    m = kvec.shape[0]
    k2 = (kvec**2).sum(axis=1)
    k2_full = np.broadcast_to(grid.k_squared, grid.shape).ravel()
    eye = np.eye(3)

    kk = np.einsum("mi,mj->mij", kvec, kvec)
    # matches the physical-space viscous operator: full |k|^2 Laplacian,
    # derivative wavenumbers in grad div
    visc = -(p.mu * k2_full[:, None, None] * eye + (p.mu + p.lam) * kk) / n_mean

    cross = np.zeros((m, 3, 3))
    cross[:, 0, 1] = -kvec[:, 2]
    cross[:, 0, 2] = kvec[:, 1]
    cross[:, 1, 0] = kvec[:, 2]
    cross[:, 1, 2] = -kvec[:, 0]
    cross[:, 2, 0] = -kvec[:, 1]
    cross[:, 2, 1] = kvec[:, 0]

    k2_safe = np.where(k2 == 0.0, 1.0, k2)
    leray = eye - kk / k2_safe[:, None, None]
    leray[k2 == 0.0] = eye

    a_coef = (1.0 + p.epsilon) / (p.tau * p.epsilon) * n_mean
    gen = np.zeros((m, 9, 9), dtype=complex)
    gen[:, 0:3, 0:3] = visc
    gen[:, 0:3, 3:6] = a_coef * eye
    gen[:, 3:6, 0:3] = -n_mean * leray
    gen[:, 3:6, 6:9] = 1j * cross / p.kappa
    gen[:, 6:9, 3:6] = -1j * cross / p.kappa
    return StiffLinearOperator(grid, dt, n_mean, visc.astype(complex), gen)


# ---------------------------------------------------------------------------
# steppers


def _check_step(t: float, n: np.ndarray, *others: np.ndarray) -> None:
    for arr in (n,) + others:
        if not np.isfinite(arr).all():
            raise BlowUpError(t)
    if n.min() <= 0.0:
        raise VacuumError(f"vacuum state at t={t:g}")


def step_full(
    state: FullState,
    p: Params,
    sc: StepControl,
    op: StiffLinearOperator | None = None,
    forcing: Callable | None = None,
    t: float = 0.0,
) -> FullState:
    """One Strang step of the scaled system.

    ``forcing(t)`` may supply extra explicit rates (dn, du, dJ, dE, dB) as
    arrays, e.g. for manufactured-solution tests.
    """
    grid = state.grid
    dt = sc.dt
    if op is None:
        op = build_stiff_operator(grid, p, state.n.mean, dt)

    n = state.n.values
    J = p.kappa * state.jt.values
    u, J, E, B = op.apply_half(state.u.values, J, state.E.values, state.B.values)

    def remainder(vals, tt):
        n_, u_, J_, E_, B_ = vals
        dn, du, dJ, dE, dB = _full_rate(grid, p, n_, u_, J_, E_, B_)
        lu, lJ, lE, lB = op.linear_rate(u_, J_, E_, B_)
        du = du - lu
        dJ = dJ - lJ
        dE = dE - lE
        dB = dB - lB
        if forcing is not None:
            fn, fu, fJ, fE, fB = forcing(tt)
            dn = dn + fn
            du = du + fu
            dJ = dJ + fJ
            dE = dE + fE
            dB = dB + fB
        return dn, du, dJ, dE, dB

    s0 = (n, u, J, E, B)
    k1 = remainder(s0, t)
    s1 = tuple(x + dt * k for x, k in zip(s0, k1))
    k2 = remainder(s1, t + dt)
    n, u, J, E, B = (
        x + 0.5 * dt * (a + b) for x, a, b in zip(s0, k1, k2)
    )

    u, J, E, B = op.apply_half(u, J, E, B)
    E = array_leray_project(grid, E)
    B = array_leray_project(grid, B)
    _check_step(t + dt, n, u, J, E, B)
    return FullState(
        ScalarField(grid, n),
        VectorField(grid, u),
        VectorField(grid, J / p.kappa),
        VectorField(grid, E),
        VectorField(grid, B),
    )


def step_limit(
    state: LimitState,
    p: Params,
    sc: StepControl,
    op: StiffLinearOperator | None = None,
    forcing: Callable | None = None,
    t: float = 0.0,
) -> LimitState:
    """One IMEX step of the limit system: exact viscous multiplier around
    an explicit SSP-RK2 stage for advection and pressure."""
    grid = state.grid
    dt = sc.dt
    if op is None:
        op = build_stiff_operator(grid, p, state.n.mean, dt)

    n = state.n.values
    zu = np.einsum("mij,mj->mi", op.prop_u_half, _hats(grid, state.u.values))
    u = _phys(grid, zu, 3)

    def remainder(vals, tt):
        n_, u_ = vals
        dn, du = _limit_rate(grid, p, n_, u_)
        lu = np.einsum("mij,mj->mi", op.gen_u, _hats(grid, u_))
        du = du - _phys(grid, lu, 3)
        if forcing is not None:
            fn, fu = forcing(tt)
            dn = dn + fn
            du = du + fu
        return dn, du

    s0 = (n, u)
    k1 = remainder(s0, t)
    s1 = tuple(x + dt * k for x, k in zip(s0, k1))
    k2 = remainder(s1, t + dt)
    n, u = (x + 0.5 * dt * (a + b) for x, a, b in zip(s0, k1, k2))

    zu = np.einsum("mij,mj->mi", op.prop_u_half, _hats(grid, u))
    u = _phys(grid, zu, 3)
    _check_step(t + dt, n, u)
    return LimitState(ScalarField(grid, n), VectorField(grid, u))


# ---------------------------------------------------------------------------
# driver


@dataclass
class StepLog:
    """What happened during an evolve call."""

    status: str = "completed"
    message: str = ""
    n_steps: int = 0
    wall_seconds: float = 0.0
    times: list = field(default_factory=list)


def _n_fixed_steps(sc: StepControl) -> int:
    if sc.t_end == 0.0:
        return 0
    n = round(sc.t_end / sc.dt)
    if n < 1 or abs(n * sc.dt - sc.t_end) > 1e-9 * max(sc.dt, sc.t_end):
        raise ConfigError("t_end must be an integer multiple of dt in fixed_dt mode")
    return n


def evolve(
    state: FullState | LimitState,
    p: Params,
    sc: StepControl,
    observer: Callable | None = None,
    stride: int = 1,
    forcing: Callable | None = None,
):
    """March a state to t_end; observer(step_index, t, state) runs at the
    given stride (and at t = 0).  Returns (final_state, StepLog)."""
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    stepper = step_full if isinstance(state, FullState) else step_limit
    grid = state.grid
    log = StepLog()
    start = _time.perf_counter()
    if observer is not None:
        observer(0, 0.0, state)
        log.times.append(0.0)

    try:
        if sc.mode == "fixed_dt":
            n_steps = _n_fixed_steps(sc)
            op = build_stiff_operator(grid, p, state.n.mean, sc.dt)
            for i in range(n_steps):
                t = i * sc.dt
                state = stepper(state, p, sc, op=op, forcing=forcing, t=t)
                log.n_steps += 1
                if observer is not None and (i + 1) % stride == 0:
                    observer(i + 1, (i + 1) * sc.dt, state)
                    log.times.append((i + 1) * sc.dt)
        else:
            t = 0.0
            i = 0
            dx = grid.spacing
            while t < sc.t_end - 1e-12 * sc.t_end:
                speed = max(1.0, np.abs(state.u.values).max())
                dt = min(sc.dt, sc.cfl * dx / speed, sc.t_end - t)
                sub = StepControl(dt=dt, t_end=sc.t_end, cfl=sc.cfl, mode="adaptive")
                op = build_stiff_operator(grid, p, state.n.mean, dt)
                state = stepper(state, p, sub, op=op, forcing=forcing, t=t)
                t += dt
                i += 1
                log.n_steps += 1
                if observer is not None and i % stride == 0:
                    observer(i, t, state)
                    log.times.append(t)
    except (BlowUpError, VacuumError) as exc:
        log.status = "blowup" if isinstance(exc, BlowUpError) else "vacuum"
        log.message = str(exc)
    log.wall_seconds = _time.perf_counter() - start
    return state, log
