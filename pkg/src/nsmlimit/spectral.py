"""Periodic-torus spectral discretization: grids, fields, calculus, norms.

Fields live on a torus [0, L)^d embedded in three space dimensions: vector
fields always carry three components, but the grid may vary along one, two
or three axes (slab symmetry), so full cross products survive while
one-axis runs stay cheap.  Derivatives are exact spectral derivatives of
the trigonometric interpolant; quadratic and cubic nonlinearities are
controlled with the classical 2/3 dealiasing rule.

Conventions
-----------
* Physical values are real float64 arrays of shape ``grid.shape`` (size-1
  entries along inactive axes).
* ``hat`` holds normalized Fourier coefficients c_k with
  f(x) = sum_k c_k exp(i k.x), i.e. ``fftn(values)/grid.npoints``.
* The H^l norm is the Fourier-multiplier form
  ``sqrt(V * sum_k (1+|k|^2)^l |c_k|^2)`` with V the domain volume, so
  l = 0 reproduces the L^2 norm by Parseval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product as _iproduct
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import GridMismatchError, InactiveAxisError

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "SobolevIndex",
    "derivative",
    "gradient",
    "divergence",
    "curl",
    "laplacian",
    "sobolev_norm",
    "sobolev_seminorm",
    "sup_norm",
    "grid_integral",
    "l2_inner",
    "leray_project",
    "dealias",
    "translate",
    "random_smooth_field",
    "random_smooth_vector",
    "derive_seed",
    "moser_ratios",
    "moser_ensemble",
]

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on a torus, varying along the first axes only.

    Parameters
    ----------
    dims_active:
        Number of coordinates the fields vary along (1, 2 or 3).  Inactive
        axes carry exactly one grid point.
    points_per_dim:
        Points along each active axis; a power of two, at least 8.
    period:
        Domain length per active axis.
    """

    dims_active: int
    points_per_dim: int
    period: float = _TWO_PI

    def __post_init__(self):
        if self.dims_active not in (1, 2, 3):
            raise ValueError("dims_active must be 1, 2 or 3")
        n = self.points_per_dim
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError("points_per_dim must be a power of two >= 8")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @cached_property
    def shape(self) -> tuple[int, int, int]:
        n = self.points_per_dim
        return tuple(n if ax < self.dims_active else 1 for ax in range(3))

    @cached_property
    def npoints(self) -> int:
        return self.points_per_dim**self.dims_active

    @cached_property
    def spacing(self) -> float:
        return self.period / self.points_per_dim

    @cached_property
    def volume(self) -> float:
        return self.period**self.dims_active

    def is_active(self, axis: int) -> bool:
        return 0 <= axis < self.dims_active

    @cached_property
    def wavenumbers_full(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-axis angular wavenumbers including the Nyquist mode, shaped
        for broadcasting (used for |k|^2 multipliers, norms and masks)."""
        out = []
        for ax in range(3):
            if self.is_active(ax):
                k = (
                    np.fft.fftfreq(self.points_per_dim, d=1.0 / self.points_per_dim)
                    * _TWO_PI
                    / self.period
                )
            else:
                k = np.zeros(1)
            shape = [1, 1, 1]
            shape[ax] = k.size
            out.append(k.reshape(shape))
        return tuple(out)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Odd-derivative multipliers: the Nyquist entry is zeroed so first
        derivatives of real fields stay real (the ik multiplier at k = -N/2
        has no conjugate partner)."""
        nyq = self.nyquist_wavenumber
        out = []
        for ax, k in enumerate(self.wavenumbers_full):
            k = k.copy()
            if self.is_active(ax):
                k[np.abs(k) >= nyq * (1.0 - 1e-12)] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def mode_indices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer FFT mode indices on the full grid shape."""
        out = []
        for ax in range(3):
            if self.is_active(ax):
                m = np.rint(
                    np.fft.fftfreq(self.points_per_dim) * self.points_per_dim
                ).astype(np.int64)
            else:
                m = np.zeros(1, dtype=np.int64)
            shape = [1, 1, 1]
            shape[ax] = m.size
            out.append(np.broadcast_to(m.reshape(shape), self.shape))
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky, kz = self.wavenumbers_full
        return (kx**2 + ky**2 + kz**2) * np.ones(self.shape)

    @cached_property
    def nyquist_wavenumber(self) -> float:
        return math.pi * self.points_per_dim / self.period

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True where every |k_i| <= (2/3) k_max (the 2/3 rule)."""
        cutoff = (2.0 / 3.0) * self.nyquist_wavenumber * (1.0 + 1e-12)
        mask = np.ones(self.shape, dtype=bool)
        for ax in range(self.dims_active):
            mask &= np.abs(self.wavenumbers_full[ax]) <= cutoff
        return mask

    @cached_property
    def fft_axes(self) -> tuple[int, ...]:
        """Axes actually transformed; size-1 axes are skipped (identity)."""
        return tuple(range(-3, -3 + self.dims_active))

    def coordinate(self, axis: int) -> np.ndarray:
        """Grid coordinates along one axis, shaped for broadcasting."""
        if self.is_active(axis):
            x = np.arange(self.points_per_dim) * self.spacing
        else:
            x = np.zeros(1)
        shape = [1, 1, 1]
        shape[axis] = x.size
        return x.reshape(shape)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.coordinate(ax) for ax in range(3))


def _require_same_grid(*grids: Grid) -> Grid:
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise GridMismatchError("fields live on different grids")
    return first


# ---------------------------------------------------------------------------
# array-level kernels (shared by the field API and the model right-hand sides)


def _fft(grid: Grid, values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values, axes=grid.fft_axes)


def _ifft(grid: Grid, hat: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(hat, axes=grid.fft_axes).real


def array_gradient(grid: Grid, a: np.ndarray) -> np.ndarray:
    A = _fft(grid, a)
    return np.stack([_ifft(grid, 1j * grid.wavenumbers[ax] * A) for ax in range(3)])


def array_divergence(grid: Grid, v: np.ndarray) -> np.ndarray:
    V = _fft(grid, v)
    out = 1j * grid.wavenumbers[0] * V[0]
    for ax in (1, 2):
        out = out + 1j * grid.wavenumbers[ax] * V[ax]
    return _ifft(grid, out)


def array_curl(grid: Grid, v: np.ndarray) -> np.ndarray:
    V = _fft(grid, v)
    kx, ky, kz = grid.wavenumbers
    cx = 1j * (ky * V[2] - kz * V[1])
    cy = 1j * (kz * V[0] - kx * V[2])
    cz = 1j * (kx * V[1] - ky * V[0])
    return np.stack([_ifft(grid, cx), _ifft(grid, cy), _ifft(grid, cz)])


def array_laplacian(grid: Grid, a: np.ndarray) -> np.ndarray:
    return _ifft(grid, -grid.k_squared * _fft(grid, a))


def array_grad_div(grid: Grid, v: np.ndarray) -> np.ndarray:
    V = _fft(grid, v)
    div_hat = sum(1j * grid.wavenumbers[ax] * V[ax] for ax in range(3))
    return np.stack([_ifft(grid, 1j * grid.wavenumbers[ax] * div_hat) for ax in range(3)])


def array_dealias(grid: Grid, a: np.ndarray) -> np.ndarray:
    return _ifft(grid, grid.dealias_mask * _fft(grid, a))


def array_leray_project(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Remove the gradient part per mode: v_hat - k (k.v_hat)/|k|^2.

    Built from the derivative wavenumbers (Nyquist zeroed) so it is an
    exact orthogonal projector consistent with array_divergence."""
    V = _fft(grid, v)
    kx, ky, kz = grid.wavenumbers
    k2 = (kx**2 + ky**2 + kz**2) * np.ones(grid.shape)
    k2_safe = np.where(k2 == 0.0, 1.0, k2)
    k_dot_v = sum(grid.wavenumbers[ax] * V[ax] for ax in range(3))
    coeff = np.where(k2 == 0.0, 0.0, k_dot_v / k2_safe)
    return np.stack(
        [_ifft(grid, V[ax] - grid.wavenumbers[ax] * coeff) for ax in range(3)]
    )


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "ScalarField":
        x, y, z = grid.coordinates()
        return cls(grid, np.asarray(fn(x, y, z)) * np.ones(grid.shape))

    @cached_property
    def hat(self) -> np.ndarray:
        """Normalized Fourier coefficients c_k (f = sum c_k e^{ik.x})."""
        return _fft(self.grid, self.values) / self.grid.npoints

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    def __add__(self, other: "ScalarField") -> "ScalarField":
        _require_same_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        _require_same_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    values: np.ndarray  # shape (3, *grid.shape)

    def __post_init__(self):
        if self.values.shape != (3,) + self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} != (3, *{self.grid.shape})"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((3,) + grid.shape))

    @classmethod
    def from_components(cls, fx: ScalarField, fy: ScalarField, fz: ScalarField):
        grid = _require_same_grid(fx.grid, fy.grid, fz.grid)
        return cls(grid, np.stack([fx.values, fy.values, fz.values]))

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return tuple(ScalarField(self.grid, self.values[i]) for i in range(3))

    @cached_property
    def hat(self) -> np.ndarray:
        return _fft(self.grid, self.values) / self.grid.npoints

    def __add__(self, other: "VectorField") -> "VectorField":
        _require_same_grid(self.grid, other.grid)
        return VectorField(self.grid, self.values + other.values)

    def __sub__(self, other: "VectorField") -> "VectorField":
        _require_same_grid(self.grid, other.grid)
        return VectorField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "VectorField":
        return VectorField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return VectorField(self.grid, -self.values)


Field = ScalarField | VectorField


@dataclass(frozen=True)
class SobolevIndex:
    """Sobolev exponent l >= 0; convergence studies need l > 2 + 3/2 so that
    H^l embeds into C^2 in three dimensions."""

    l: float = 4.0

    def __post_init__(self):
        if self.l < 0:
            raise ValueError("Sobolev exponent must be nonnegative")

    @property
    def embeds_c2(self) -> bool:
        return self.l > 2.0 + 1.5


def _exponent(l) -> float:
    return float(l.l) if isinstance(l, SobolevIndex) else float(l)


# ---------------------------------------------------------------------------
# calculus


def derivative(f: ScalarField, axis: int, order: int = 1) -> ScalarField:
    """Spectral partial derivative of given order along one active axis."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if not f.grid.is_active(axis):
        raise InactiveAxisError("derivative along collapsed axis")
    mult = (1j * f.grid.wavenumbers[axis]) ** order
    return ScalarField(f.grid, _ifft(f.grid, mult * _fft(f.grid, f.values)))


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.grid, array_gradient(f.grid, f.values))


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, array_divergence(v.grid, v.values))


def curl(v: VectorField) -> VectorField:
    return VectorField(v.grid, array_curl(v.grid, v.values))


def laplacian(f: Field) -> Field:
    return type(f)(f.grid, array_laplacian(f.grid, f.values))


def dealias(f: Field) -> Field:
    """Zero Fourier modes with any |k_i| above the 2/3 cutoff (idempotent)."""
    return type(f)(f.grid, array_dealias(f.grid, f.values))


def leray_project(v: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free fields (mean part kept)."""
    return VectorField(v.grid, array_leray_project(v.grid, v.values))


def translate(f: Field, shifts: Sequence[float]) -> Field:
    """Evaluate the trigonometric interpolant at x - shift (exact for band-limited f)."""
    phase = np.exp(
        -1j * sum(f.grid.wavenumbers[ax] * shifts[ax] for ax in range(3))
    )
    return type(f)(f.grid, _ifft(f.grid, phase * _fft(f.grid, f.values)))


# ---------------------------------------------------------------------------
# norms and integrals


def grid_integral(grid: Grid, values: np.ndarray) -> float:
    """Trapezoid-on-torus integral: exact for band-limited integrands.

    Integrates over the spatial axes; any leading (component) axes are
    summed, so a squared vector stack integrates to sum_i int |v_i|^2.
    """
    return float(np.sum(values.mean(axis=(-3, -2, -1))) * grid.volume)


def l2_inner(f: Field, g: Field) -> float:
    _require_same_grid(f.grid, g.grid)
    prod = f.values * g.values
    if prod.ndim == 4:  # vector fields: contract components
        prod = prod.sum(axis=0)
    return grid_integral(f.grid, prod)


def sup_norm(f: Field) -> float:
    if isinstance(f, VectorField):
        return float(np.sqrt((f.values**2).sum(axis=0)).max())
    return float(np.abs(f.values).max())


def _weighted_coeff_sum(f: Field, weight: np.ndarray) -> float:
    c2 = np.abs(f.hat) ** 2
    if c2.ndim == 4:
        c2 = c2.sum(axis=0)
    return float((weight * c2).sum() * f.grid.volume)


def sobolev_norm(f: Field, l=SobolevIndex()) -> float:
    """H^l norm, ``sqrt(V sum_k (1+|k|^2)^l |c_k|^2)``; l=0 is the L^2 norm."""
    s = _exponent(l)
    if s < 0:
        raise ValueError("Sobolev exponent must be nonnegative")
    return math.sqrt(_weighted_coeff_sum(f, (1.0 + f.grid.k_squared) ** s))


def sobolev_seminorm(f: Field, s: float) -> float:
    """Homogeneous seminorm |f|_{H^s} = sqrt(V sum |k|^{2s} |c_k|^2)."""
    if s == 0:
        return sobolev_norm(f, 0.0)
    return math.sqrt(_weighted_coeff_sum(f, f.grid.k_squared ** s))


# ---------------------------------------------------------------------------
# seeded smooth random fields
#
# Coefficients are drawn per Fourier mode from a counter-style integer hash
# of (seed, mode index), so a given seed names the same function on every
# resolution: refining the grid only appends modes with (exponentially)
# smaller amplitude.  That keeps ensemble statistics comparable across
# resolution-doubling checks.

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps mod 2^64 by construction
    with np.errstate(over="ignore"):
        x = (np.asarray(x, dtype=np.uint64) + _GOLDEN) & _MASK64
        x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
        x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
        return x ^ (x >> np.uint64(31))


def _hash_unit(seed: int, *counters: np.ndarray) -> np.ndarray:
    """Deterministic uniforms in [0, 1) keyed by (seed, counters)."""
    h = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    for c in counters:
        h = _mix64(h ^ np.asarray(c, dtype=np.int64).view(np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def derive_seed(seed: int, *tags: int) -> int:
    """Stable child seed for independent perturbation streams."""
    h = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    for t in tags:
        h = _mix64(h ^ np.uint64(t & 0xFFFFFFFFFFFFFFFF))
    return int(h & np.uint64(0x7FFFFFFFFFFFFFFF))


def random_smooth_field(
    grid: Grid,
    seed: int,
    decay_rate: float,
    *,
    max_wavenumber: float | None = None,
    zero_mean: bool = False,
) -> ScalarField:
    """Real random field with |c_k| = exp(-decay_rate |k|), random phases.

    Deterministic in ``seed`` and independent of the grid resolution (the
    same seed names the same function on a finer grid, up to the appended
    exponentially small tail).  ``max_wavenumber`` band-limits the sample;
    ``zero_mean`` removes the k = 0 mode.
    """
    if decay_rate <= 0:
        raise ValueError("decay_rate must be positive")
    mi = grid.mode_indices
    half = grid.points_per_dim // 2
    # conjugate-partner index, componentwise -k with Nyquist fixed points
    ci = tuple(np.where(m == -half, m, -m) for m in mi)
    self_conj = (mi[0] == ci[0]) & (mi[1] == ci[1]) & (mi[2] == ci[2])
    is_canon = (mi[0] > ci[0]) | (
        (mi[0] == ci[0])
        & ((mi[1] > ci[1]) | ((mi[1] == ci[1]) & (mi[2] >= ci[2])))
    )
    canon = tuple(np.where(is_canon, m, c) for m, c in zip(mi, ci))
    u = _hash_unit(seed, *canon)

    k_abs = np.sqrt(grid.k_squared)
    mag = np.exp(-decay_rate * k_abs)
    if max_wavenumber is not None:
        mag = np.where(k_abs <= max_wavenumber * (1.0 + 1e-12), mag, 0.0)
    phase = np.where(is_canon, 1.0, -1.0) * _TWO_PI * u
    coeff = mag * np.exp(1j * phase)
    # self-conjugate modes (k = 0 and Nyquist combinations) must stay real
    coeff = np.where(self_conj, mag * np.cos(_TWO_PI * u), coeff)
    if zero_mean:
        coeff[0, 0, 0] = 0.0
    values = np.fft.ifftn(coeff * grid.npoints, axes=grid.fft_axes).real
    return ScalarField(grid, values)


def random_smooth_vector(
    grid: Grid,
    seed: int,
    decay_rate: float,
    *,
    max_wavenumber: float | None = None,
    zero_mean: bool = False,
) -> VectorField:
    comps = [
        random_smooth_field(
            grid,
            derive_seed(seed, 101 + i),
            decay_rate,
            max_wavenumber=max_wavenumber,
            zero_mean=zero_mean,
        )
        for i in range(3)
    ]
    return VectorField.from_components(*comps)


# ---------------------------------------------------------------------------
# product / commutator inequality ratios
#
# For f, g in H^s the calculus inequalities bound
#   ||d^a (fg)||            by  ||f||_inf |g|_{H^s} + ||g||_inf |f|_{H^s}
#   ||d^a (fg) - f d^a g||  by  ||Df||_inf |g|_{H^{s-1}} + ||g||_inf |f|_{H^s}
# over multi-indices |a| <= s.  The empirical ratios below should admit a
# resolution-stable uniform constant for smooth fields.


def _multi_indices(dims: int, max_order: int, min_order: int = 0):
    for alpha in _iproduct(range(max_order + 1), repeat=dims):
        if min_order <= sum(alpha) <= max_order:
            yield alpha


def _partial(grid: Grid, values: np.ndarray, alpha: Sequence[int]) -> np.ndarray:
    mult = np.ones(grid.shape, dtype=complex)
    for ax, order in enumerate(alpha):
        if order:
            mult = mult * (1j * grid.wavenumbers[ax]) ** order
    return _ifft(grid, mult * _fft(grid, values))


def _l2(grid: Grid, values: np.ndarray) -> float:
    return math.sqrt(grid_integral(grid, values**2))


def moser_ratios(f: ScalarField, g: ScalarField, s: int) -> tuple[float, float]:
    """Max product-rule and commutator ratios over multi-indices |alpha| <= s."""
    grid = _require_same_grid(f.grid, g.grid)
    fg = f.values * g.values
    sup_f = sup_norm(f)
    sup_g = sup_norm(g)
    sup_df = float(
        np.sqrt((array_gradient(grid, f.values) ** 2).sum(axis=0)).max()
    )
    den1 = sup_f * sobolev_seminorm(g, s) + sup_g * sobolev_seminorm(f, s)
    den2 = sup_df * sobolev_seminorm(g, s - 1) + sup_g * sobolev_seminorm(f, s)
    r1 = 0.0
    r2 = 0.0
    for alpha in _multi_indices(grid.dims_active, s):
        d_fg = _partial(grid, fg, alpha)
        r1 = max(r1, _l2(grid, d_fg) / den1)
        if sum(alpha) >= 1:
            comm = d_fg - f.values * _partial(grid, g.values, alpha)
            r2 = max(r2, _l2(grid, comm) / den2)
    return r1, r2


def moser_ensemble(
    grid: Grid,
    s: int = 4,
    n_pairs: int = 100,
    seed: int = 0,
    decay_rate: float = 1.0,
) -> tuple[float, float]:
    """Empirical uniform constants of the two inequalities over a seeded ensemble."""
    c1 = 0.0
    c2 = 0.0
    for i in range(n_pairs):
        f = random_smooth_field(grid, derive_seed(seed, 2 * i), decay_rate)
        g = random_smooth_field(grid, derive_seed(seed, 2 * i + 1), decay_rate)
        r1, r2 = moser_ratios(f, g, s)
        c1 = max(c1, r1)
        c2 = max(c2, r2)
    return c1, c2
