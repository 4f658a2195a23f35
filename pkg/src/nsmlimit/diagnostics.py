"""Error-state extraction, energy functionals and identity audits.

The error state collects N = n - n0, U = u - u0, J = kappa j~, E, B on a
shared grid.  Its squared H^l size Gamma = |N|_l^2 + |U|_l^2 + |J|_l^2 +
|E|_l^2 + |B|_l^2 is the quantity the convergence estimate bounds by
O(kappa^2).  Alongside it we evaluate the relative-enthalpy functional
integral_x integral_0^N [h(s+n0) - h(n0)] ds dx, the density-weighted
high-order norm sum_{1<=|a|<=l} integral h'(N+n0)/(N+n0) |d^a N|^2 dx,
and a term-by-term audit of the zero-order kinetic-energy balance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as _iproduct

import numpy as np

from .errors import GridMismatchError, SnapshotSpacingError, VacuumError
from .model import FullState, LimitState, Params, PressureLaw, _cross
from .spectral import (
    Grid,
    ScalarField,
    VectorField,
    array_divergence,
    array_grad_div,
    array_gradient,
    array_laplacian,
    grid_integral,
    sobolev_norm,
    sup_norm,
)

__all__ = [
    "ErrorState",
    "EnergyLedger",
    "error_state",
    "gamma_norm",
    "enthalpy_functional",
    "weighted_high_norm",
    "dissipation_rates",
    "make_energy_ledger",
    "energy_identity_audit",
    "AuditReport",
    "bound_monitor",
    "BoundReport",
    "LEDGER_COLUMNS",
]


@dataclass(frozen=True)
class ErrorState:
    """Differences between the full and limit solutions (J = kappa j~)."""

    N: ScalarField
    U: VectorField
    J: VectorField
    E: VectorField
    B: VectorField

    @property
    def grid(self) -> Grid:
        return self.N.grid

    @property
    def parabolic_block(self):
        """Fields obeying parabolic equations (velocity and current errors)."""
        return (self.U, self.J)

    @property
    def hyperbolic_block(self):
        """Fields obeying the symmetric-hyperbolic sub-system."""
        return (self.N, self.E, self.B)


def error_state(full: FullState, limit: LimitState, kappa: float) -> ErrorState:
    if full.grid != limit.grid:
        raise GridMismatchError("full and limit states live on different grids")
    if full.n.values.min() <= 0.0:
        raise VacuumError("vacuum state: total density nonpositive")
    return ErrorState(
        N=full.n - limit.n,
        U=full.u - limit.u,
        J=kappa * full.jt,
        E=full.E,
        B=full.B,
    )


def gamma_norm(e: ErrorState, l: float) -> float:
    """Squared H^l size of the error state (sum over the five fields)."""
    return (
        sobolev_norm(e.N, l) ** 2
        + sobolev_norm(e.U, l) ** 2
        + sobolev_norm(e.J, l) ** 2
        + sobolev_norm(e.E, l) ** 2
        + sobolev_norm(e.B, l) ** 2
    )


# ---------------------------------------------------------------------------
# energy functionals


def _inner_enthalpy_integral(
    N: np.ndarray, n0: np.ndarray, law: PressureLaw, tol: float = 1e-10
) -> np.ndarray:
    """Pointwise integral_0^N [h(s+n0) - h(n0)] ds by Gauss-Legendre,
    doubling the node count until the relative change drops below tol."""
    lowest = n0 + np.minimum(N, 0.0)
    if lowest.min() <= 0.0:
        raise VacuumError("vacuum in inner integral range")
    h0 = law.enthalpy(n0)
    prev = None
    nodes = 8
    while True:
        xi, w = np.polynomial.legendre.leggauss(nodes)
        s = 0.5 * N[..., None] * (xi + 1.0)
        vals = law.enthalpy(s + n0[..., None]) - h0[..., None]
        cur = 0.5 * N * (w * vals).sum(axis=-1)
        if prev is not None:
            scale = max(float(np.abs(cur).max()), 1e-300)
            if float(np.abs(cur - prev).max()) <= tol * scale:
                return cur
        if nodes >= 256:
            return cur
        prev = cur
        nodes *= 2


def enthalpy_functional(e: ErrorState, limit: LimitState, law: PressureLaw) -> float:
    """Relative-enthalpy energy (nonnegative whenever P' > 0)."""
    grid = e.grid
    inner = _inner_enthalpy_integral(e.N.values, limit.n.values, law)
    return grid_integral(grid, inner)


def _interior_multi_indices(dims: int, l: int):
    for alpha in _iproduct(range(l + 1), repeat=dims):
        if 1 <= sum(alpha) <= l:
            yield alpha


def weighted_high_norm(
    e: ErrorState, limit: LimitState, law: PressureLaw, l: int
) -> float:
    """sum_{1<=|a|<=l} integral h'(N+n0)/(N+n0) |d^a N|^2 dx."""
    grid = e.grid
    rho = e.N.values + limit.n.values
    if rho.min() <= 0.0:
        raise VacuumError("vacuum state: total density nonpositive")
    weight = law.denthalpy(rho) / rho
    hat = np.fft.fftn(e.N.values, axes=grid.fft_axes)
    total = 0.0
    for alpha in _interior_multi_indices(grid.dims_active, int(l)):
        mult = np.ones(grid.shape, dtype=complex)
        for ax, order in enumerate(alpha):
            if order:
                mult = mult * (1j * grid.wavenumbers[ax]) ** order
        d = np.fft.ifftn(mult * hat, axes=grid.fft_axes).real
        total += grid_integral(grid, weight * d * d)
    return total


def dissipation_rates(e: ErrorState, p: Params) -> tuple[float, float]:
    """Instantaneous viscous dissipation of U and of J = kappa j~:
    mu |grad .|^2 + (mu+lam) |div .|^2."""
    grid = e.grid

    def rate(v: VectorField) -> float:
        grad_sq = sum(
            grid_integral(grid, array_gradient(grid, v.values[i]) ** 2)
            for i in range(3)
        )
        div_sq = grid_integral(grid, array_divergence(grid, v.values) ** 2)
        return p.mu * grad_sq + (p.mu + p.lam) * div_sq

    return rate(e.U), rate(e.J)


# ---------------------------------------------------------------------------
# ledger rows

LEDGER_COLUMNS = (
    "t", "gamma", "norm_N", "norm_U", "norm_J", "norm_E", "norm_B",
    "enthalpy_fn", "weighted_high", "diss_U", "diss_J", "divE", "divB",
    "mass_err",
)


@dataclass(frozen=True)
class EnergyLedger:
    """One diagnostics row; field order matches the CSV schema."""

    t: float
    gamma: float
    norm_N: float
    norm_U: float
    norm_J: float
    norm_E: float
    norm_B: float
    enthalpy_fn: float
    weighted_high: float
    diss_U: float
    diss_J: float
    divE: float
    divB: float
    mass_err: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in LEDGER_COLUMNS)


def make_energy_ledger(
    t: float,
    full: FullState,
    limit: LimitState,
    p: Params,
    l: float,
    mass0: float,
) -> EnergyLedger:
    grid = full.grid
    e = error_state(full, limit, p.kappa)
    norms = [
        sobolev_norm(e.N, l),
        sobolev_norm(e.U, l),
        sobolev_norm(e.J, l),
        sobolev_norm(e.E, l),
        sobolev_norm(e.B, l),
    ]
    diss_u, diss_j = dissipation_rates(e, p)
    div_scale = 1.0 + sup_norm(full.E) + sup_norm(full.B)
    div_e = float(np.abs(array_divergence(grid, full.E.values)).max()) / div_scale
    div_b = float(np.abs(array_divergence(grid, full.B.values)).max()) / div_scale
    mass = grid_integral(grid, full.n.values)
    return EnergyLedger(
        t=t,
        gamma=sum(x * x for x in norms),
        norm_N=norms[0],
        norm_U=norms[1],
        norm_J=norms[2],
        norm_E=norms[3],
        norm_B=norms[4],
        enthalpy_fn=enthalpy_functional(e, limit, p.pressure),
        weighted_high=weighted_high_norm(e, limit, p.pressure, int(l)),
        diss_U=diss_u,
        diss_J=diss_j,
        divE=div_e,
        divB=div_b,
        mass_err=abs(mass - mass0) / abs(mass0),
    )


# ---------------------------------------------------------------------------
# zero-order energy identity audit
#
# Along solutions of the error system, multiplying the velocity-error
# equation by (N+n0)U and integrating gives
#
#   d/dt (1/2) int (N+n0)|U|^2 dx + mu |grad U|^2 + (mu+lam) |div U|^2
#     = T1 + T2 + T3 + T4 + T5 + T6
#
# with the six right-hand terms listed below.  The audit evaluates both
# sides on stored snapshots, the time derivative by centered differences,
# and reports the normalized defect, which should shrink at second order
# when the snapshot spacing halves.  drop_term deliberately deletes one
# right-hand term to confirm the audit would catch a modeling error.


@dataclass(frozen=True)
class AuditReport:
    times: tuple
    residuals: tuple
    terms: dict
    max_residual: float
    mean_residual: float


def _audit_terms(full: FullState, limit: LimitState, p: Params) -> dict:
    grid = full.grid
    eps = p.epsilon
    law = p.pressure
    n_tot = full.n.values          # N + n0
    n0 = limit.n.values
    U = (full.u - limit.u).values
    u0 = limit.u.values
    u_full = full.u.values
    jt = full.jt.values
    B = full.B.values

    h_diff = law.enthalpy(n_tot) - law.enthalpy(n0)
    div_nU = array_divergence(grid, n_tot * U)
    t1 = ((1.0 + eps) * p.eta / p.tau) * grid_integral(grid, h_diff * div_nU)

    # d_t(N+n0) from the combined continuity equation
    dt_n = -array_divergence(grid, n_tot * u_full) / (1.0 + eps)
    t2 = 0.5 * grid_integral(grid, dt_n * (U * U).sum(axis=0))

    grad_U = np.stack([array_gradient(grid, U[i]) for i in range(3)])  # (i, j, ...)
    adv = np.einsum("j...,ij...->i...", u_full, grad_U)
    grad_u0 = np.stack([array_gradient(grid, u0[i]) for i in range(3)])
    adv = adv + np.einsum("j...,ij...->i...", U, grad_u0)
    t3 = -grid_integral(grid, (adv * n_tot * U).sum(axis=0)) / (1.0 + eps)

    grad_jt = np.stack([array_gradient(grid, jt[i]) for i in range(3)])
    jdotj = np.einsum("j...,ij...->i...", jt, grad_jt)
    t4 = (
        -(eps / (1.0 + eps))
        * p.kappa**2
        * grid_integral(grid, (jdotj * n_tot * U).sum(axis=0))
    )

    lorentz = _cross(jt, B)
    t5 = (p.kappa**2 / p.tau) * grid_integral(grid, (lorentz * n_tot * U).sum(axis=0))

    visc0 = p.mu * array_laplacian(grid, u0) + (p.mu + p.lam) * array_grad_div(grid, u0)
    t6 = grid_integral(
        grid, ((1.0 / n_tot - 1.0 / n0) * visc0 * n_tot * U).sum(axis=0)
    )

    diss = p.mu * sum(
        grid_integral(grid, array_gradient(grid, U[i]) ** 2) for i in range(3)
    ) + (p.mu + p.lam) * grid_integral(grid, array_divergence(grid, U) ** 2)

    energy = 0.5 * grid_integral(grid, n_tot * (U * U).sum(axis=0))
    return {
        "energy": energy, "dissipation": diss,
        "T1": t1, "T2": t2, "T3": t3, "T4": t4, "T5": t5, "T6": t6,
    }


def energy_identity_audit(
    snapshots, p: Params, drop_term: int | None = None
) -> AuditReport:
    """Audit the zero-order energy balance on >= 3 uniformly spaced
    snapshots of (t, full_state, limit_state)."""
    snaps = list(snapshots)
    if len(snaps) < 3:
        raise ValueError("need at least 3 snapshots")
    times = np.array([t for t, _, _ in snaps])
    spacings = np.diff(times)
    if spacings.min() <= 0 or (
        np.abs(spacings - spacings[0]).max() > 1e-9 * spacings[0]
    ):
        raise SnapshotSpacingError("nonuniform snapshot spacing")
    dt = float(spacings[0])
    if drop_term is not None and drop_term not in range(1, 7):
        raise ValueError("drop_term must be in 1..6")

    per_snap = [_audit_terms(full, limit, p) for _, full, limit in snaps]
    residuals = []
    mid_terms = None
    for i in range(1, len(snaps) - 1):
        ddt = (per_snap[i + 1]["energy"] - per_snap[i - 1]["energy"]) / (2.0 * dt)
        terms = per_snap[i]
        lhs = ddt + terms["dissipation"]
        keys = [f"T{j}" for j in range(1, 7) if j != drop_term]
        rhs = sum(terms[k] for k in keys)
        scale = max(
            abs(ddt), terms["dissipation"], *(abs(terms[f"T{j}"]) for j in range(1, 7)),
            1e-300,
        )
        residuals.append(abs(lhs - rhs) / scale)
        if mid_terms is None or i == (len(snaps) - 1) // 2:
            mid_terms = dict(terms, ddt=ddt)
    res = np.array(residuals)
    return AuditReport(
        times=tuple(times[1:-1]),
        residuals=tuple(res),
        terms=mid_terms,
        max_residual=float(res.max()),
        mean_residual=float(res.mean()),
    )


# ---------------------------------------------------------------------------
# uniform bound monitor


@dataclass(frozen=True)
class BoundReport:
    """sup_t Gamma/kappa^2 plus the fitted envelope Gamma <= C kappa^2 e^{c t}."""

    sup_ratio: float
    c_envelope: float
    growth_rate: float
    trivial: bool


def bound_monitor(times, gammas, c0: float, kappa: float) -> BoundReport:
    """Fit log(Gamma/kappa^2) = log(C) + c*t over the recorded samples."""
    t = np.asarray(times, dtype=float)
    g = np.asarray(gammas, dtype=float)
    if t.size == 0:
        raise ValueError("empty record")
    ratio = g / kappa**2
    mask = g > 0.0
    if not mask.any():
        return BoundReport(sup_ratio=0.0, c_envelope=0.0, growth_rate=0.0, trivial=True)
    tm = t[mask]
    y = np.log(ratio[mask])
    if tm.size == 1 or np.ptp(tm) == 0.0:
        return BoundReport(
            sup_ratio=float(ratio.max()),
            c_envelope=float(np.exp(y[0])),
            growth_rate=0.0,
            trivial=True,
        )
    A = np.stack([np.ones_like(tm), tm], axis=1)
    coeff, *_ = np.linalg.lstsq(A, y, rcond=None)
    return BoundReport(
        sup_ratio=float(ratio.max()),
        c_envelope=float(math.exp(coeff[0])),
        growth_rate=float(coeff[1]),
        trivial=False,
    )
