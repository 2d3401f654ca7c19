"""Mellin transform on the line ``s = 1/2 + i tau``.

With ``u = ln x`` the Mellin transform ``f_M(s) = int x**s f(x) dx / x`` is
the Fourier transform of ``exp(u/2) f(exp(u))`` at frequency ``-tau``, so on a
:class:`~affine_husimi.core.LogGrid` both directions are plain trapezoid
sums.  The normalization is the standard one:

    f(x) = (1 / 2 pi i) int_{1/2 - i inf}^{1/2 + i inf} x**(-s) f_M(s) ds
         = (1 / 2 pi) int x**(-1/2 - i tau) f_M(1/2 + i tau) dtau.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .core import (
    AccuracyError,
    AffineSymbol,
    HalfLineFunction,
    LogGrid,
    ParameterError,
    StructuralError,
    as_hbar,
    uniform_weights,
)

DECAY_TOL = 1e-10


@dataclass(frozen=True)
class CriticalLineGrid:
    """Uniform samples ``tau_k`` of ``s = 1/2 + i tau`` on ``[-tau_max, tau_max]``."""

    tau_max: float
    m: int
    tau: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.tau_max) and self.tau_max > 0):
            raise ParameterError("tau_max must be positive")
        if int(self.m) != self.m or self.m < 3:
            raise ParameterError("need at least three contour samples")
        tau = np.linspace(-self.tau_max, self.tau_max, int(self.m))
        tau.setflags(write=False)
        object.__setattr__(self, "tau", tau)

    @property
    def s(self) -> np.ndarray:
        return 0.5 + 1j * self.tau

    @property
    def dtau(self) -> float:
        return 2.0 * self.tau_max / (self.m - 1)

    @property
    def weights(self) -> np.ndarray:
        return uniform_weights(self.tau)


def default_contour(tau_max: float = 60.0, dtau: float = 0.1) -> CriticalLineGrid:
    return CriticalLineGrid(tau_max, int(round(2 * tau_max / dtau)) + 1)


def contour_for_hbar(hb, tol: float = 1e-12, dtau: float = 0.1) -> CriticalLineGrid:
    """Shortest contour on which ``|Gamma(s/2 + 1/hbar + 1)|^2`` falls below ``tol`` of its peak."""
    from .special import log_gamma

    h = as_hbar(hb)
    tau = np.arange(0.0, 2000.0, dtau)
    lg = 2 * log_gamma(0.5 * (0.5 + 1j * tau) + 1.0 / h + 1.0).real
    below = np.nonzero(lg - lg.max() < np.log(tol))[0]
    if below.size == 0:
        raise AccuracyError("gamma factor does not decay on the searched range")
    return default_contour(float(np.ceil(tau[below[0]])), dtau)


@dataclass(frozen=True, eq=False)
class MellinSpectrum:
    """``w_M(s, xi)`` sampled on ``contour x xi``; ``values`` has shape ``(m, n_xi)``.

    ``b_transform`` records whether the second variable was Fourier
    transformed (``xi`` a frequency) or left as the symbol's ``b`` variable.
    """

    contour: CriticalLineGrid
    xi: np.ndarray
    values: np.ndarray
    b_transform: bool = False

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float)
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.contour.m, xi.size):
            raise StructuralError(f"spectrum shape {v.shape} does not match its grids")
        if not np.all(np.isfinite(v)):
            raise ParameterError("spectrum values must be finite")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "values", v)

    def scaled(self, c) -> "MellinSpectrum":
        return MellinSpectrum(self.contour, self.xi, self.values * c, self.b_transform)


def _check_decay(samples: np.ndarray, axis_len_first: bool, what: str, tol: float):
    mag = np.abs(samples)
    peak = mag.max()
    if peak == 0:
        return
    ends = max(mag[0].max(), mag[-1].max()) if axis_len_first else max(mag[..., 0].max(), mag[..., -1].max())
    if ends > tol * peak:
        raise AccuracyError(
            f"{what}: endpoint magnitude {ends / peak:.3e} (relative) exceeds {tol:.0e}"
        )


def _log_trapezoid(grid: LogGrid) -> np.ndarray:
    """Weights for ``dx/x``, i.e. trapezoid in ``ln x``."""
    return grid.weights / grid.x


def mellin_transform(f: HalfLineFunction, contour: CriticalLineGrid, decay_tol: float = DECAY_TOL) -> np.ndarray:
    """Mellin transform of ``f`` on the contour samples.

    Raises
    ------
    AccuracyError
        If ``sqrt(x) |f(x)|`` at either grid end exceeds ``decay_tol`` times
        its maximum, i.e. the integral is visibly truncated.
    """
    g = np.sqrt(f.grid.x) * f.values
    _check_decay(g, True, "mellin_transform", decay_tol)
    return _mellin_matrix(f.grid, contour) @ (g * _log_trapezoid(f.grid))


def _mellin_matrix(grid: LogGrid, contour: CriticalLineGrid) -> np.ndarray:
    # x**(i tau) for every (tau, x) pair
    return np.exp(1j * np.outer(contour.tau, grid.u))


def inverse_mellin(
    spectrum, contour: CriticalLineGrid, grid: LogGrid, decay_tol: float = DECAY_TOL
) -> HalfLineFunction:
    """Trapezoid quadrature of the inversion integral, evaluated on ``grid``."""
    spectrum = np.asarray(spectrum, dtype=complex)
    if spectrum.shape != (contour.m,):
        raise StructuralError("spectrum does not match the contour")
    _check_decay(spectrum, True, "inverse_mellin", decay_tol)
    vals = np.exp(-1j * np.outer(grid.u, contour.tau)) @ (spectrum * contour.weights)
    vals *= grid.x ** -0.5 / (2 * np.pi)
    return HalfLineFunction(grid, vals)


def unitarity_defect(f: HalfLineFunction, contour: CriticalLineGrid, decay_tol: float = DECAY_TOL) -> float:
    """``| ||f||^2 - (1/2pi) int |f_M(1/2 + i tau)|^2 dtau |`` (Plancherel check)."""
    fm = mellin_transform(f, contour, decay_tol)
    lhs = f.norm() ** 2
    rhs = float(np.sum(np.abs(fm) ** 2 * contour.weights)) / (2 * np.pi)
    return abs(lhs - rhs)


def symbol_mellin(
    W: AffineSymbol,
    contour: CriticalLineGrid,
    xi_grid=None,
    *,
    b_transform: bool = False,
    decay_tol: float = DECAY_TOL,
) -> MellinSpectrum:
    """Mellin transform of a symbol in its scale variable ``a``.

    Parameters
    ----------
    W : AffineSymbol
        Samples of ``W(a, b)``; should decay at both ends of the ``a`` grid.
    contour : CriticalLineGrid
    xi_grid : array_like, optional
        Second-variable samples.  Without ``b_transform`` this must be (and
        defaults to) the symbol's own ``b`` grid: the output is
        ``w_M(s, b) = int a**(s-1) W(a, b) da``, which is what the coherent
        matrix-element formulas integrate over.
    b_transform : bool
        Also Fourier transform in ``b`` with kernel ``exp(-i xi b)``, giving
        ``int int a**(s-1) exp(-i xi b) W(a, b) da db``.

    Returns
    -------
    MellinSpectrum
    """
    amp = np.sqrt(W.a)[:, None] * W.values
    _check_decay(amp, True, "symbol_mellin (a ends)", decay_tol)
    spec = _mellin_matrix(W.a_grid, contour) @ ((np.sqrt(W.a) * _log_trapezoid(W.a_grid))[:, None] * W.values)
    if not b_transform:
        if xi_grid is not None and not np.array_equal(np.asarray(xi_grid, dtype=float), W.b):
            raise StructuralError("without b_transform the xi grid is the symbol's b grid")
        return MellinSpectrum(contour, W.b, spec, False)
    _check_decay(W.values, False, "symbol_mellin (b ends)", decay_tol)
    xi = np.asarray(W.b if xi_grid is None else xi_grid, dtype=float)
    fourier = np.exp(-1j * np.outer(W.b, xi)) * uniform_weights(W.b)[:, None]
    return MellinSpectrum(contour, xi, spec @ fourier, True)


def refine_spectrum(wM: MellinSpectrum, r: int) -> MellinSpectrum:
    """Cubic-spline resampling of ``w_M(s, xi)`` onto a lattice ``r`` times finer in ``xi``.

    The original samples are kept; only valid for a uniform ``xi`` lattice.
    """
    if int(r) != r or r < 1:
        raise ParameterError("refinement factor must be a positive integer")
    if r == 1:
        return wM
    xi = wM.xi
    step = xi[1] - xi[0]
    if not np.allclose(np.diff(xi), step, rtol=1e-9, atol=0):
        raise StructuralError("xi samples must form a uniform lattice")
    fine = xi[0] + np.arange((xi.size - 1) * r + 1) * (step / r)
    vals = CubicSpline(xi, wM.values, axis=1)(fine)
    return MellinSpectrum(wM.contour, fine, vals, wM.b_transform)
