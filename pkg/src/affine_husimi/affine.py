"""The ax+b group on L2(R+) and affine Weyl quantization.

Conventions (all unitary on ``L2(R+, dx)``)::

    (U(a,b) f)(x) = a**(1/2) exp(i b x / hbar) f(a x)
    (I f)(x)      = f(1/x) / x
    V(a,b)        = U(a,b) I U(a,b)**-1
    (V(a,b) f)(x) = f(1/(a^2 x)) / (a x) * exp(i b (x - 1/(a^2 x)) / hbar)
    (C(a) f)(x)   = (a x + 1/(a x)) / 2 * f(x)

Quantization of a symbol ``W(a, b)`` is ``int W(a,b) V(a,b) da db / (2 a^2 hbar)``,
whose kernel works out to

    w(x, y) = (1/4hbar) int W(1/sqrt(xy), b) exp(-i b (y - x) / hbar) db
            = sqrt(2 pi hbar)/(4 hbar) * W^(1/sqrt(xy), y - x),

with ``W^`` the hbar-Fourier transform in ``b``.  The inverse map is
``W(a,b) = (4/pi) Tr[W V(a,b) C(a)]``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .core import (
    AffineSymbol,
    DomainError,
    HalfLineFunction,
    LogGrid,
    OperatorMatrix,
    ParameterError,
    ResolutionError,
    as_hbar,
    interp_uniform,
    uniform_weights,
)

# Tr[W V(a,b) C(a)] = TRACE_FACTOR * W(a,b) for the quantization measure da db/(2 a^2 hbar)
TRACE_FACTOR = np.pi / 4


@dataclass(frozen=True)
class PhasePoint:
    a: float
    b: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise DomainError(f"scale a must be positive, got {self.a}")
        if not np.isfinite(self.b):
            raise DomainError("translation b must be finite")

    def compose(self, other: "PhasePoint") -> "PhasePoint":
        """Group law ``(a, b)(a', b') = (a a', a b' + b)``."""
        return PhasePoint(self.a * other.a, self.a * other.b + self.b)

    def inverse(self) -> "PhasePoint":
        return PhasePoint(1.0 / self.a, -self.b / self.a)


def u_action(p: PhasePoint, f: HalfLineFunction, hb) -> HalfLineFunction:
    h = as_hbar(hb)
    x = f.grid.x
    vals = np.sqrt(p.a) * np.exp(1j * p.b * x / h) * f(p.a * x)
    return HalfLineFunction(f.grid, vals)


def v_action(p: PhasePoint, f: HalfLineFunction, hb) -> HalfLineFunction:
    h = as_hbar(hb)
    x = f.grid.x
    y = 1.0 / (p.a**2 * x)
    vals = f(y) / (p.a * x) * np.exp(1j * p.b * (x - y) / h)
    return HalfLineFunction(f.grid, vals)


def c_multiplier(a: float, x) -> np.ndarray:
    ax = a * np.asarray(x)
    return 0.5 * (ax + 1.0 / ax)


def c_action(a: float, f: HalfLineFunction) -> HalfLineFunction:
    if not a > 0:
        raise DomainError("C(a) needs a > 0")
    return HalfLineFunction(f.grid, c_multiplier(a, f.grid.x) * f.values)


def _symbol_at(W: AffineSymbol, a_query) -> np.ndarray:
    """Symbol rows interpolated (cubic in ln a) at arbitrary scales; zero outside."""
    return interp_uniform(W.values, np.log(W.a_grid.x_min), W.a_grid.step, np.log(a_query))


def _edge_mass(W: AffineSymbol) -> float:
    mag = np.abs(W.values)
    peak = mag.max()
    if peak == 0:
        return 0.0
    return max(mag[0].max(), mag[-1].max(), mag[:, 0].max(), mag[:, -1].max()) / peak


def _check_b_resolution(W: AffineSymbol, grid: LogGrid, h: float):
    c_needed = grid.x_max - grid.x_min
    if np.pi * h / W.db < c_needed:
        raise ResolutionError(
            f"b step {W.db:.3g} resolves |c| <= {np.pi * h / W.db:.3g} < {c_needed:.3g} needed"
        )


def hbar_fourier(W: AffineSymbol, c, hb) -> np.ndarray:
    """``W^(a_i, c) = (2 pi hbar)^(-1/2) int W(a_i, b) exp(-i b c / hbar) db``."""
    h = as_hbar(hb)
    c = np.asarray(c, dtype=float)
    kern = np.exp(-1j * np.outer(W.b, c) / h) * uniform_weights(W.b)[:, None]
    return (W.values @ kern) / np.sqrt(2 * np.pi * h)


def quantize_kernel(W: AffineSymbol, grid: LogGrid, hb, c_step: float | None = None) -> OperatorMatrix:
    """Kernel of the affine Weyl quantization of ``W`` on ``grid``.

    The hbar-Fourier transform in ``b`` is tabulated on a uniform ``c`` grid
    and interpolated bicubically in ``(ln a, c)`` at ``a = 1/sqrt(x y)``,
    ``c = y - x``.

    Raises
    ------
    ResolutionError
        If the symbol's ``b`` step cannot resolve ``|c|`` up to the grid span.
    """
    h = as_hbar(hb)
    _check_b_resolution(W, grid, h)
    span = grid.x_max - grid.x_min
    bmax = np.max(np.abs(W.b))
    if c_step is None:
        c_step = np.pi * h / (16 * bmax)
    nc = int(np.ceil(2 * span / c_step)) + 7
    c = (np.arange(nc) - (nc - 1) / 2) * c_step
    table = hbar_fourier(W, c, h)
    x = grid.x
    n = grid.n
    ua0, dua = np.log(W.a_grid.x_min), W.a_grid.step
    out = np.empty((n, n), dtype=complex)
    for i in range(n):
        ti = (-0.5 * (np.log(x[i]) + grid.u) - ua0) / dua
        out[i] = _bicubic(table, ti, (x - x[i] - c[0]) / c_step)
    return OperatorMatrix(grid, out * np.sqrt(2 * np.pi * h) / (4 * h))


def _lagrange4(t, n):
    i0 = np.clip(np.floor(t).astype(np.int64) - 1, 0, n - 4)
    s = t - i0
    w = np.stack(
        [
            -(s - 1) * (s - 2) * (s - 3) / 6.0,
            s * (s - 2) * (s - 3) / 2.0,
            -s * (s - 1) * (s - 3) / 2.0,
            s * (s - 1) * (s - 2) / 6.0,
        ]
    )
    inside = (t >= -1e-9) & (t <= n - 1 + 1e-9)
    return i0, w * inside


def _bicubic(table, ta, tc):
    """Tensor 4-point Lagrange interpolation at fractional indices; zero outside."""
    na, nc = table.shape
    ia, wa = _lagrange4(ta, na)
    ic, wc = _lagrange4(tc, nc)
    res = np.zeros(ta.shape, dtype=complex)
    for p in range(4):
        for q in range(4):
            res += wa[p] * wc[q] * table[ia + p, ic + q]
    return res


@numba.njit(cache=True)
def _superpose(rows, a_index, b, x, h, da_over_w):
    # entries[i, j] = sum_k wb_k W(a_ij, b_k) exp(i b_k (x_i - x_j)/hbar) * jac_ij
    n = x.size
    nb = b.size
    out = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            r = a_index[i, j]
            if r < 0:
                continue
            d = (x[i] - x[j]) / h
            z = np.exp(1j * b[0] * d)
            step = np.exp(1j * (b[1] - b[0]) * d)
            acc = 0j
            for k in range(nb):
                acc += rows[r, k] * z
                z *= step
            out[i, j] = acc * da_over_w[i, j]
    return out


def quantize_superposition(W: AffineSymbol, grid: LogGrid, hb) -> OperatorMatrix:
    """Quadrature of ``int W(a,b) V(a,b) da db / (2 a^2 hbar)`` applied to grid deltas.

    For each output point ``x_i`` the scale nodes are placed at
    ``a_ij = 1/sqrt(x_i x_j)``, where ``V(a, b)`` carries the delta at ``x_j``
    onto ``x_i``; the ``a`` integral uses trapezoid weights on those nodes and
    the ``b`` integral is summed directly on the symbol's ``b`` grid.
    """
    h = as_hbar(hb)
    if _edge_mass(W) > 1e-8:
        warnings.warn(
            f"symbol is {_edge_mass(W):.2e} of its peak at the window edge; "
            "quantization truncates it there",
            RuntimeWarning,
            stacklevel=2,
        )
    x = grid.x
    n = grid.n
    # a_ij depends on i + j only
    ksum = np.arange(2 * n - 1)
    a_vals = np.exp(-0.5 * (2 * grid.u[0] + ksum * grid.step))
    rows = _symbol_at(W, a_vals) * uniform_weights(W.b)[None, :]
    live = np.any(rows != 0, axis=1)
    idx = np.add.outer(np.arange(n), np.arange(n))
    a_index = np.where(live[idx], idx, -1)
    a = a_vals[idx]
    # trapezoid weights of the geometric a-nodes along j (half weight at the ends)
    a_pad = np.exp(-0.5 * (np.add.outer(grid.u, np.concatenate(([grid.u[0] - grid.step], grid.u, [grid.u[-1] + grid.step])))))
    da = 0.5 * np.abs(a_pad[:, :-2] - a_pad[:, 2:])
    # halved end weights match the halved grid weights they are divided by
    da[:, 0] *= 0.5
    da[:, -1] *= 0.5
    jac = da / (grid.weights[None, :] * 2 * a**3 * h * x[:, None])
    out = _superpose(rows, a_index, W.b, x, h, jac)
    return OperatorMatrix(grid, out)


def _vc_pairing(grid: LogGrid, column_at, a, b, h):
    """``int dy K(1/(a^2 y), y) (1/(a y)) c_a(y) exp(i b (y - 1/(a^2 y))/hbar)``.

    ``column_at(t)`` returns ``K(x(t_j), y_j)`` for fractional grid positions
    ``t_j`` of the first argument.  Returns an ``(len(a), len(b))`` array.
    """
    y = grid.x
    n = grid.n
    out = np.empty((len(a), len(b)), dtype=complex)
    jrev = np.arange(n)[::-1]
    for ia, av in enumerate(a):
        # 1/(a^2 y_j) = x_{n-1-j} / (a^2 x_min x_max): a constant shift in ln x
        shift = -np.log(av**2 * grid.x_min * grid.x_max) / grid.step
        kvals = column_at(jrev + shift)
        xs = 1.0 / (av**2 * y)
        g = kvals * c_multiplier(av, y) / (av * y) * grid.weights
        out[ia] = np.exp(1j * np.outer(b, y - xs) / h) @ g
    return out


def symbol_of(Wop: OperatorMatrix, a, b, hb) -> AffineSymbol | np.ndarray:
    """Affine Weyl symbol ``(4/pi) Tr[W V(a,b) C(a)]`` at the requested points.

    ``a`` may be a :class:`LogGrid` (then an :class:`AffineSymbol` on
    ``a x b`` is returned) or an array of scales (then a plain array).
    """
    h = as_hbar(hb)
    grid = Wop.grid
    E = Wop.entries
    cols = np.arange(grid.n)

    def column_at(t):
        i0, w = _lagrange4(t, grid.n)
        return sum(w[p] * E[i0 + p, cols] for p in range(4))

    a_arr = a.x if isinstance(a, LogGrid) else np.atleast_1d(np.asarray(a, dtype=float))
    b_arr = np.atleast_1d(np.asarray(b, dtype=float))
    if np.any(a_arr <= 0):
        raise ParameterError("scales must be positive")
    vals = _vc_pairing(grid, column_at, a_arr, b_arr, h) / TRACE_FACTOR
    if isinstance(a, LogGrid):
        return AffineSymbol(a, b_arr, vals)
    return vals


def identity_measure_test(probe: HalfLineFunction, a_grid: LogGrid, b, hb) -> dict:
    """Integrate ``V(a,b) probe`` against ``da db/(2 a^k hbar)`` for ``k = 1, 2``.

    Reports, per power ``k``, the best constant ``lam`` with
    ``int V dadb/(2 a^k hbar) probe ~ lam * probe`` and the relative residual
    of that fit.  Only ``k = 2`` reproduces a multiple of the identity
    (``lam = pi/2``).
    """
    h = as_hbar(hb)
    b = np.asarray(b, dtype=float)
    wb = uniform_weights(b)
    x = probe.grid.x
    report = {}
    acc = {1: np.zeros(x.size, complex), 2: np.zeros(x.size, complex)}
    for av, wa in zip(a_grid.x, a_grid.weights):
        y = 1.0 / (av**2 * x)
        base = probe(y) / (av * x)
        # int db exp(i b (x - y)/hbar) on the truncated b window
        bsum = np.exp(1j * np.outer(x - y, b) / h) @ wb
        v_int = base * bsum
        for k in (1, 2):
            acc[k] += wa * v_int / (2 * av**k * h)
    for k, vec in acc.items():
        out = HalfLineFunction(probe.grid, vec)
        lam = np.sum(np.conj(probe.values) * vec * probe.grid.weights) / probe.norm() ** 2
        resid = (out - probe * lam).norm() / abs(lam) / probe.norm() if lam != 0 else np.inf
        report[k] = {"lambda": complex(lam), "residual": float(resid)}
    return report
