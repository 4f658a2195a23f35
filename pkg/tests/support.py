"""Shared helpers for order tests and paired trajectories."""

import numpy as np

from nsmlimit.initdata import WellPreparedSpec, make_limit_data, make_well_prepared
from nsmlimit.integrator import StepControl, build_stiff_operator, step_full, step_limit
from nsmlimit.model import FullState, LimitState, Params, _full_rate, _limit_rate
from nsmlimit.spectral import Grid, ScalarField, VectorField


def l2_state_error(arrs_a, arrs_b):
    return float(
        np.sqrt(sum(((a - b) ** 2).sum() for a, b in zip(arrs_a, arrs_b)))
    )


class ManufacturedFull:
    """Time-periodic exact solution of the forced scaled system.

    All fields are band-limited with analytic time derivatives; div E and
    div B vanish because the first components are x-independent on a
    1-active-axis grid.  The forcing is the defect of the exact solution
    under the discrete right-hand side, so the time integrator is the
    only error source.
    """

    def __init__(self, grid: Grid, p: Params, amp=0.05):
        self.grid = grid
        self.p = p
        self.amp = amp
        self.x = grid.coordinate(0) * np.ones(grid.shape)

    def state_arrays(self, t):
        a, x = self.amp, self.x
        shape = self.grid.shape
        n = 1.0 + a * np.sin(x) * np.cos(2.0 * t)
        u = np.stack([
            a * np.cos(x) * np.sin(t),
            a * np.sin(x) * np.cos(t),
            a * np.cos(x) * np.cos(3.0 * t),
        ])
        J = np.stack([
            a * np.sin(x) * np.sin(2.0 * t),
            a * np.cos(x) * np.cos(t),
            a * np.sin(x) * np.sin(t),
        ])
        E = np.stack([
            np.zeros(shape),
            a * np.cos(x) * np.cos(2.0 * t),
            a * np.sin(x) * np.sin(t),
        ])
        B = np.stack([
            np.zeros(shape),
            a * np.sin(x) * np.sin(t),
            a * np.cos(x) * np.cos(t),
        ])
        return n, u, J, E, B

    def rate_arrays(self, t):
        a, x = self.amp, self.x
        shape = self.grid.shape
        dn = -2.0 * a * np.sin(x) * np.sin(2.0 * t)
        du = np.stack([
            a * np.cos(x) * np.cos(t),
            -a * np.sin(x) * np.sin(t),
            -3.0 * a * np.cos(x) * np.sin(3.0 * t),
        ])
        dJ = np.stack([
            2.0 * a * np.sin(x) * np.cos(2.0 * t),
            -a * np.cos(x) * np.sin(t),
            a * np.sin(x) * np.cos(t),
        ])
        dE = np.stack([
            np.zeros(shape),
            -2.0 * a * np.cos(x) * np.sin(2.0 * t),
            a * np.sin(x) * np.cos(t),
        ])
        dB = np.stack([
            np.zeros(shape),
            a * np.sin(x) * np.cos(t),
            -a * np.cos(x) * np.sin(t),
        ])
        return dn, du, dJ, dE, dB

    def state(self, t) -> FullState:
        n, u, J, E, B = self.state_arrays(t)
        g = self.grid
        return FullState(
            ScalarField(g, n), VectorField(g, u),
            VectorField(g, J / self.p.kappa), VectorField(g, E), VectorField(g, B),
        )

    def forcing(self, t):
        exact = self.state_arrays(t)
        rate = _full_rate(self.grid, self.p, *exact)
        target = self.rate_arrays(t)
        return tuple(want - have for want, have in zip(target, rate))

    def error_after(self, dt, t_end) -> float:
        sc = StepControl(dt=dt, t_end=t_end)
        n_steps = round(t_end / dt)
        state = self.state(0.0)
        op = build_stiff_operator(self.grid, self.p, 1.0, dt)
        for i in range(n_steps):
            state = step_full(state, self.p, sc, op=op, forcing=self.forcing, t=i * dt)
        n, u, J, E, B = self.state_arrays(t_end)
        got = (
            state.n.values, state.u.values, self.p.kappa * state.jt.values,
            state.E.values, state.B.values,
        )
        return l2_state_error(got, (n, u, J, E, B))


class ManufacturedLimit:
    """Forced exact solution of the limit system (same construction)."""

    def __init__(self, grid: Grid, p: Params, amp=0.05):
        self.grid = grid
        self.p = p
        self.amp = amp
        self.x = grid.coordinate(0) * np.ones(grid.shape)

    def state_arrays(self, t):
        a, x = self.amp, self.x
        n = 1.0 + a * np.sin(x) * np.cos(2.0 * t)
        u = np.stack([
            a * np.cos(x) * np.sin(t),
            a * np.sin(x) * np.cos(t),
            a * np.cos(x) * np.cos(3.0 * t),
        ])
        return n, u

    def rate_arrays(self, t):
        a, x = self.amp, self.x
        dn = -2.0 * a * np.sin(x) * np.sin(2.0 * t)
        du = np.stack([
            a * np.cos(x) * np.cos(t),
            -a * np.sin(x) * np.sin(t),
            -3.0 * a * np.cos(x) * np.sin(3.0 * t),
        ])
        return dn, du

    def state(self, t) -> LimitState:
        n, u = self.state_arrays(t)
        return LimitState(ScalarField(self.grid, n), VectorField(self.grid, u))

    def forcing(self, t):
        rate = _limit_rate(self.grid, self.p, *self.state_arrays(t))
        target = self.rate_arrays(t)
        return tuple(want - have for want, have in zip(target, rate))

    def error_after(self, dt, t_end) -> float:
        sc = StepControl(dt=dt, t_end=t_end)
        n_steps = round(t_end / dt)
        state = self.state(0.0)
        op = build_stiff_operator(self.grid, self.p, 1.0, dt)
        for i in range(n_steps):
            state = step_limit(state, self.p, sc, op=op, forcing=self.forcing, t=i * dt)
        n, u = self.state_arrays(t_end)
        return l2_state_error((state.n.values, state.u.values), (n, u))


def observed_order(errors: list[float]) -> float:
    """Mean Richardson exponent from errors at dt, dt/2, dt/4, ..."""
    rates = [np.log2(a / b) for a, b in zip(errors, errors[1:])]
    return float(np.mean(rates))


def paired_trajectory(grid, kappa, dt, n_steps, seed=7, amplitude=0.1, c0=1.0,
                      stride=1):
    """Evolve full and limit side by side, returning stride snapshots."""
    p = Params(kappa=kappa)
    limit = make_limit_data(grid, seed=seed, amplitude=amplitude)
    spec = WellPreparedSpec.from_seed(limit, seed=seed, c0=c0, kappa=kappa)
    full = make_well_prepared(spec)
    sc = StepControl(dt=dt, t_end=n_steps * dt)
    op_f = build_stiff_operator(grid, p, full.n.mean, dt)
    op_l = build_stiff_operator(grid, p, limit.n.mean, dt)
    snaps = [(0.0, full, limit)]
    for i in range(n_steps):
        full = step_full(full, p, sc, op=op_f, t=i * dt)
        limit = step_limit(limit, p, sc, op=op_l, t=i * dt)
        if (i + 1) % stride == 0:
            snaps.append(((i + 1) * dt, full, limit))
    return snaps, p
