"""Logarithmic grids on the half-line, quadrature and dense kernels.

Everything in the package lives on a :class:`LogGrid`: points
``x_j = x_min * r**j`` with trapezoid weights taken in ``u = ln x``.  The
grid is closed under ``x -> x_min * x_max / x`` (index reversal), which
makes the dilations and inversions of the ax+b group cheap shifts in the
log variable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Invalid numeric parameters (bounds, sizes, hbar)."""


class StructuralError(ValueError):
    """Objects defined on incompatible grids or with incompatible shapes."""


class AccuracyError(RuntimeError):
    """A quadrature or truncation check failed its stated threshold."""


class ResolutionError(AccuracyError):
    """A grid or window is too coarse or too narrow for the request."""


class DomainError(ValueError):
    """Argument outside the analytic domain of a formula."""


@dataclass(frozen=True, eq=False)
class LogGrid:
    """Geometric grid on ``[x_min, x_max]`` with log-trapezoid weights."""

    x_min: float
    x_max: float
    n: int
    x: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ParameterError("grid bounds must be finite")
        if not 0 < self.x_min < self.x_max:
            raise ParameterError(f"need 0 < x_min < x_max, got {self.x_min}, {self.x_max}")
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f"need an integer n >= 2, got {self.n}")
        u = np.linspace(np.log(self.x_min), np.log(self.x_max), int(self.n))
        x = np.exp(u)
        x[0], x[-1] = self.x_min, self.x_max
        w = x * self.step
        w[0] *= 0.5
        w[-1] *= 0.5
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)

    @property
    def step(self) -> float:
        """Spacing in ``ln x``."""
        return (np.log(self.x_max) - np.log(self.x_min)) / (self.n - 1)

    @property
    def ratio(self) -> float:
        return float(np.exp(self.step))

    @property
    def u(self) -> np.ndarray:
        return np.log(self.x)

    def same_as(self, other: "LogGrid") -> bool:
        return self is other or (
            self.n == other.n and self.x_min == other.x_min and self.x_max == other.x_max
        )

    def interpolate(self, values, xq) -> np.ndarray:
        """Cubic interpolation of grid samples in ``ln x``; zero off-grid."""
        return interp_uniform(values, np.log(self.x_min), self.step, np.log(xq))


def make_log_grid(x_min: float, x_max: float, n: int) -> LogGrid:
    """Build a :class:`LogGrid`; raises :class:`ParameterError` on bad input."""
    return LogGrid(float(x_min), float(x_max), n)


def default_grid() -> LogGrid:
    return make_log_grid(1e-4, 40.0, 2048)


def interp_uniform(values, u0: float, du: float, uq) -> np.ndarray:
    """Four-point Lagrange interpolation of samples on a uniform grid.

    ``values`` may carry trailing axes; the first axis is the sampled one.
    Query points outside ``[u0, u0 + (n-1) du]`` evaluate to zero.
    """
    values = np.asarray(values)
    n = values.shape[0]
    uq = np.asarray(uq, dtype=float)
    t = (uq - u0) / du
    inside = (t >= -1e-9) & (t <= n - 1 + 1e-9)
    # left node of the 4-point stencil, clamped so the stencil stays in range
    i0 = np.clip(np.floor(t).astype(np.int64) - 1, 0, max(n - 4, 0))
    s = t - i0
    out_shape = uq.shape + values.shape[1:]
    if n < 4:
        return np.interp(t, np.arange(n), values) * inside
    l0 = -(s - 1) * (s - 2) * (s - 3) / 6.0
    l1 = s * (s - 2) * (s - 3) / 2.0
    l2 = -s * (s - 1) * (s - 3) / 2.0
    l3 = s * (s - 1) * (s - 2) / 6.0
    extra = (np.newaxis,) * (values.ndim - 1)
    res = (
        l0[(...,) + extra] * values[i0]
        + l1[(...,) + extra] * values[i0 + 1]
        + l2[(...,) + extra] * values[i0 + 2]
        + l3[(...,) + extra] * values[i0 + 3]
    )
    res = np.where(inside[(...,) + extra], res, 0.0)
    return res.reshape(out_shape)


@dataclass(frozen=True, eq=False)
class HalfLineFunction:
    """Complex samples of a function on a :class:`LogGrid`."""

    grid: LogGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise StructuralError(f"expected {self.grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: LogGrid, f) -> "HalfLineFunction":
        return cls(grid, f(grid.x))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2 * self.grid.weights)))

    def normalized(self) -> "HalfLineFunction":
        nrm = self.norm()
        if nrm == 0:
            raise ParameterError("cannot normalize the zero function")
        return HalfLineFunction(self.grid, self.values / nrm)

    def __call__(self, xq):
        return self.grid.interpolate(self.values, xq)

    def __add__(self, other):
        _check_grids(self.grid, other.grid)
        return HalfLineFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_grids(self.grid, other.grid)
        return HalfLineFunction(self.grid, self.values - other.values)

    def __mul__(self, c):
        return HalfLineFunction(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Integral kernel sampled on a grid.

    ``(W f)(x_i) = sum_j entries[i, j] * w_j * f(x_j)``.
    """

    grid: LogGrid
    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        n = self.grid.n
        if e.shape != (n, n):
            raise StructuralError(f"expected ({n}, {n}) kernel, got {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ParameterError("kernel entries must be finite")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def identity(cls, grid: LogGrid) -> "OperatorMatrix":
        return cls(grid, np.diag(1.0 / grid.weights))

    @classmethod
    def zeros(cls, grid: LogGrid) -> "OperatorMatrix":
        return cls(grid, np.zeros((grid.n, grid.n)))

    @classmethod
    def projector(cls, f: HalfLineFunction, g: HalfLineFunction | None = None) -> "OperatorMatrix":
        """The rank-one kernel ``|f><g|`` (``g`` defaults to ``f``)."""
        g = f if g is None else g
        _check_grids(f.grid, g.grid)
        return cls(f.grid, np.outer(f.values, np.conj(g.values)))

    def adjoint(self) -> "OperatorMatrix":
        return OperatorMatrix(self.grid, self.entries.conj().T)

    def symmetric_form(self) -> np.ndarray:
        """``D^{1/2} E D^{1/2}``: the matrix in the weighted orthonormal basis."""
        sw = np.sqrt(self.grid.weights)
        return sw[:, None] * self.entries * sw[None, :]

    def hermiticity_defect(self) -> float:
        nrm = np.linalg.norm(self.entries)
        if nrm == 0:
            return 0.0
        return float(np.linalg.norm(self.entries - self.entries.conj().T) / nrm)

    def __add__(self, other):
        _check_grids(self.grid, other.grid)
        return OperatorMatrix(self.grid, self.entries + other.entries)

    def __sub__(self, other):
        _check_grids(self.grid, other.grid)
        return OperatorMatrix(self.grid, self.entries - other.entries)

    def __mul__(self, c):
        return OperatorMatrix(self.grid, self.entries * c)

    __rmul__ = __mul__

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _check_grids(self.grid, other.grid)
        return OperatorMatrix(self.grid, (self.entries * self.grid.weights) @ other.entries)


@dataclass(frozen=True)
class PlanckScale:
    hbar: float

    def __post_init__(self):
        h = float(self.hbar)
        if not np.isfinite(h) or h <= 0:
            raise ParameterError(f"hbar must be positive, got {self.hbar}")
        # keeps 2/hbar + 1 inside the validated log-gamma range
        if 2.0 / h + 1.0 > 1e6:
            raise ParameterError(f"hbar={h} too small for the gamma evaluation range")
        object.__setattr__(self, "hbar", h)


def as_hbar(hb) -> float:
    return hb.hbar if isinstance(hb, PlanckScale) else PlanckScale(hb).hbar


def _check_grids(g1: LogGrid, g2: LogGrid):
    if not g1.same_as(g2):
        raise StructuralError("objects live on different grids")


def inner_product(f: HalfLineFunction, g: HalfLineFunction) -> complex:
    """Quadrature of ``conj(f) g dx``; conjugate-linear in ``f``."""
    _check_grids(f.grid, g.grid)
    return complex(np.sum(np.conj(f.values) * g.values * f.grid.weights))


def apply_operator(W: OperatorMatrix, f: HalfLineFunction) -> HalfLineFunction:
    _check_grids(W.grid, f.grid)
    return HalfLineFunction(f.grid, W.entries @ (f.grid.weights * f.values))


def trace(W: OperatorMatrix) -> complex:
    return complex(np.sum(np.diag(W.entries) * W.grid.weights))


def uniform_weights(b: np.ndarray) -> np.ndarray:
    """Trapezoid weights for a uniform 1-D grid."""
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise ParameterError("uniform grid needs at least two points")
    db = np.diff(b)
    if np.any(db <= 0) or not np.allclose(db, db[0], rtol=1e-9, atol=0):
        raise ParameterError("grid must be uniform and increasing")
    w = np.full(b.size, db[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True, eq=False)
class AffineSymbol:
    """Samples of a function of ``(a, b)``, ``a > 0``, on a product grid.

    ``values[i, k]`` is the value at ``(a_grid.x[i], b[k])``.
    """

    a_grid: LogGrid
    b: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        uniform_weights(b)
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.a_grid.n, b.size):
            raise StructuralError(f"values shape {v.shape} does not match grids")
        if not np.all(np.isfinite(v)):
            raise ParameterError("symbol values must be finite")
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, a_grid: LogGrid, b, f) -> "AffineSymbol":
        b = np.asarray(b, dtype=float)
        return cls(a_grid, b, f(a_grid.x[:, None], b[None, :]))

    @property
    def a(self) -> np.ndarray:
        return self.a_grid.x

    @property
    def db(self) -> float:
        return float(self.b[1] - self.b[0])

    def integrate(self, a_power: float = -2.0) -> complex:
        """Trapezoid integral of the samples against ``a**a_power da db``."""
        wa = self.a_grid.weights * self.a ** a_power
        return complex(wa @ self.values @ uniform_weights(self.b))

    def with_values(self, values) -> "AffineSymbol":
        return AffineSymbol(self.a_grid, self.b, values)

    def inner_window(self):
        """Index slices covering the central half of the window in ``ln a`` and ``b``."""
        na, nb = self.a_grid.n, self.b.size
        return slice(na // 4, na - na // 4), slice(nb // 4, nb - nb // 4)


def phase_window(a_min=0.1, a_max=10.0, n_a=256, b_min=-12.0, b_max=12.0, n_b=512):
    """The (log a, b) product window used for symbols and phase-space fields."""
    return make_log_grid(a_min, a_max, n_a), np.linspace(b_min, b_max, n_b)
