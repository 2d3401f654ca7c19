"""Wavelet coherent states, affine Wigner and wavelet-Husimi fields.

Coherent states are ``phi_{a,b} = U(a,b) phi_{1,0}``::

    phi_{a,b}(x) = C(hbar) a**(1/hbar + 1/2) x**(1/hbar) exp(-(a - i b) x / hbar)

and resolve the identity against the left Haar measure::

    int |phi_{a,b}><phi_{a,b}| da db / (2 pi hbar a^2) = 1.

The Husimi field of an operator is ``<phi_{a,b}, W phi_{a,b}> / hbar`` and
integrates to ``Tr W`` against ``da db / (2 pi a^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy import fft as sp_fft

from .affine import PhasePoint, _lagrange4, _vc_pairing
from .core import (
    AffineSymbol,
    DomainError,
    HalfLineFunction,
    LogGrid,
    OperatorMatrix,
    ResolutionError,
    StructuralError,
    as_hbar,
    uniform_weights,
)
from .mellin import MellinSpectrum
from .special import log_coherent_norm_constant, log_gamma

# phase-space measure normalizing the resolution of identity: da db / (HAAR_NORM * hbar * a^2)
HAAR_NORM = 2 * np.pi


@dataclass(frozen=True, eq=False)
class CoherentState:
    p: PhasePoint
    hbar: float
    state: HalfLineFunction


@dataclass(frozen=True, eq=False)
class HusimiField:
    """Real field on ``a x b``: ``values[i, k]`` at ``(a[i], b[k])``."""

    a: np.ndarray
    b: np.ndarray
    values: np.ndarray
    hbar: float

    def mass(self, a_weights=None) -> float:
        """``int values da db / (2 pi a^2)``; ``a`` must be log-uniform unless weights are given."""
        if a_weights is None:
            a_weights = uniform_weights(np.log(self.a)) * self.a
        wa = a_weights / (HAAR_NORM * self.a**2)
        return float(wa @ self.values @ uniform_weights(self.b))


@dataclass(frozen=True)
class ComplexDisplacement:
    alpha: float
    beta: float


def _log_coherent_amp(a, x, h):
    """``ln`` of the real part ``C a^(1/h+1/2) x^(1/h) e^(-a x/h)`` on an outer grid."""
    a = np.asarray(a, dtype=float)
    return (
        log_coherent_norm_constant(h)
        + (1.0 / h + 0.5) * np.log(a)[..., None]
        + np.log(x) / h
        - a[..., None] * x / h
    )


def coherent_values(p: PhasePoint, hb, x) -> np.ndarray:
    h = as_hbar(hb)
    return np.exp(_log_coherent_amp(p.a, x, h) + 1j * p.b * np.asarray(x) / h)


def coherent_state(p: PhasePoint, hb, grid: LogGrid, check: bool = True) -> CoherentState:
    """Normalized wavelet coherent state ``phi_{a,b}`` sampled on ``grid``.

    Raises
    ------
    ResolutionError
        If the peak ``x* = 1/a`` of ``|phi|`` is not inside
        ``[10 x_min, x_max / 10]``.
    """
    h = as_hbar(hb)
    if check:
        peak = 1.0 / p.a
        if not 10 * grid.x_min <= peak <= grid.x_max / 10:
            raise ResolutionError(
                f"coherent state peak x*={peak:.3g} not resolved by grid "
                f"[{grid.x_min:.3g}, {grid.x_max:.3g}]"
            )
    return CoherentState(p, h, HalfLineFunction(grid, coherent_values(p, h, grid.x)))


def _amplitudes(funcs: np.ndarray, grid: LogGrid, a, b, h) -> np.ndarray:
    """``<phi_{a_i,b_k}, f_r>`` for rows ``f_r`` of ``funcs``; shape ``(R, n_a, n_b)``."""
    funcs = np.atleast_2d(funcs)
    x = grid.x
    amp = np.exp(_log_coherent_amp(a, x, h)) * grid.weights  # (n_a, n)
    phase = np.exp(-1j * np.outer(x, b) / h)  # (n, n_b)
    out = np.empty((funcs.shape[0], len(a), len(b)), dtype=complex)
    for r, f in enumerate(funcs):
        out[r] = (amp * f) @ phase
    return out


def _targets(a, b):
    a_arr = a.x if isinstance(a, LogGrid) else np.atleast_1d(np.asarray(a, dtype=float))
    return a_arr, np.atleast_1d(np.asarray(b, dtype=float))


def husimi_pure(psi: HalfLineFunction, a, b, hb) -> HusimiField:
    """``|<phi_{a,b}, psi>|^2 / hbar`` on the product of ``a`` and ``b`` samples."""
    h = as_hbar(hb)
    a_arr, b_arr = _targets(a, b)
    amp = _amplitudes(psi.values, psi.grid, a_arr, b_arr, h)[0]
    return HusimiField(a_arr, b_arr, np.abs(amp) ** 2 / h, h)


def _factorize(Wop: OperatorMatrix, rel_cut: float):
    """Weighted factorization ``W = sum_k s_k |f_k><g_k|`` with small terms dropped."""
    M = Wop.symmetric_form()
    sw = np.sqrt(Wop.grid.weights)
    if Wop.hermiticity_defect() < 1e-12:
        lam, V = np.linalg.eigh(0.5 * (M + M.conj().T))
        keep = np.abs(lam) > rel_cut * max(np.abs(lam).max(), 1e-300)
        F = (V[:, keep] / sw[:, None]).T
        return lam[keep], F, F
    U, s, Vh = np.linalg.svd(M)
    keep = s > rel_cut * max(s.max(), 1e-300)
    return s[keep], (U[:, keep] / sw[:, None]).T, Vh[keep].conj() / sw[None, :]


class HusimiEvaluator:
    """Husimi field of a fixed operator, factorized once and sampled on demand.

    Parameters
    ----------
    Wop : OperatorMatrix
    hb : float or PlanckScale
    rel_cut : float
        Spectral terms below ``rel_cut`` times the largest are dropped.
    """

    def __init__(self, Wop: OperatorMatrix, hb, rel_cut: float = 1e-12):
        self.grid = Wop.grid
        self.hbar = as_hbar(hb)
        self._s, self._F, self._G = _factorize(Wop, rel_cut)

    @property
    def rank(self) -> int:
        return self._s.size

    def __call__(self, a, b) -> HusimiField:
        h = self.hbar
        a_arr, b_arr = _targets(a, b)
        if self._s.size == 0:
            return HusimiField(a_arr, b_arr, np.zeros((a_arr.size, b_arr.size)), h)
        A = _amplitudes(self._F, self.grid, a_arr, b_arr, h)
        B = A if self._G is self._F else _amplitudes(self._G, self.grid, a_arr, b_arr, h)
        vals = np.einsum("k,kij,kij->ij", self._s, A, B.conj())
        return HusimiField(a_arr, b_arr, vals.real / h, h)


def husimi_operator(Wop: OperatorMatrix, a, b, hb, rel_cut: float = 1e-12) -> HusimiField:
    """``<phi_{a,b}, W phi_{a,b}> / hbar`` via a weighted spectral factorization of ``W``.

    The real part is returned; for Hermitian ``W`` the imaginary part is
    round-off.  Reuse a :class:`HusimiEvaluator` when sampling repeatedly.
    """
    return HusimiEvaluator(Wop, hb, rel_cut)(a, b)


def cross_matrix_element(p1: PhasePoint, p2: PhasePoint, Wop: OperatorMatrix, hb) -> complex:
    """``<phi_{p1}, W phi_{p2}>`` by grid quadrature."""
    h = as_hbar(hb)
    x = Wop.grid.x
    w = Wop.grid.weights
    f1 = coherent_values(p1, h, x)
    f2 = coherent_values(p2, h, x)
    return complex(np.conj(f1 * w) @ Wop.entries @ (w * f2))


def cross_matrix_elements(bra: PhasePoint, a2, b2, Wop: OperatorMatrix, hb) -> np.ndarray:
    """``<phi_bra, W phi_{a2_i, b2_k}>`` on a product of ket points; shape ``(n_a2, n_b2)``."""
    h = as_hbar(hb)
    x, w = Wop.grid.x, Wop.grid.weights
    row = np.conj(coherent_values(bra, h, x) * w) @ Wop.entries  # <phi_bra| W as a row
    a2, b2 = _targets(a2, b2)
    # sum_j row_j w_j phi_{a2,b2}(x_j) = conj(<phi_{a2,b2}, conj(row)>)
    return np.conj(_amplitudes(np.conj(row), Wop.grid, a2, b2, h)[0])


def identity_resolution_defect(probe: HalfLineFunction, a_grid: LogGrid, b, hb, check_coverage: bool = True) -> float:
    """Relative defect of ``int |phi><phi| probe da db / (2 pi hbar a^2)`` over the window.

    Raises
    ------
    ResolutionError
        If the overlap density on the window boundary exceeds ``1e-3`` of
        its peak (the window does not cover the probe).
    """
    h = as_hbar(hb)
    nrm = probe.norm()
    if nrm == 0:
        return 0.0
    b = np.asarray(b, dtype=float)
    x, grid = probe.grid.x, probe.grid
    a = a_grid.x
    amp = _amplitudes(probe.values, grid, a, b, h)[0]  # <phi_ab, probe>
    if check_coverage:
        # overlap density per unit (ln a, b) in the Haar measure
        dens = np.abs(amp) ** 2 / a[:, None]
        peak = dens.max()
        edge = max(dens[0].max(), dens[-1].max(), dens[:, 0].max(), dens[:, -1].max())
        if edge > 1e-3 * peak:
            raise ResolutionError(f"window boundary carries {edge / peak:.2e} of the peak overlap density")
    wa = a_grid.weights / (HAAR_NORM * h * a**2)
    wb = uniform_weights(b)
    coh = np.exp(_log_coherent_amp(a, x, h))  # (n_a, n)
    # sum_k wb_k amp[i,k] exp(i b_k x / h)
    back = (amp * wb) @ np.exp(1j * np.outer(b, x) / h)  # (n_a, n)
    recon = (wa[:, None] * coh * back).sum(axis=0)
    return HalfLineFunction(grid, recon - probe.values).norm() / nrm


def affine_wigner(psi: HalfLineFunction, a, b, hb) -> AffineSymbol | np.ndarray:
    """``(1/hbar) <psi, V(a,b) C(a) psi>`` on the product of ``a`` and ``b`` samples."""
    h = as_hbar(hb)
    grid = psi.grid
    conj_psi = np.conj(psi.values)

    def column_at(t):
        i0, w = _lagrange4(t, grid.n)
        return conj_psi * sum(w[p] * psi.values[i0 + p] for p in range(4))

    a_arr, b_arr = _targets(a, b)
    vals = _vc_pairing(grid, column_at, a_arr, b_arr, h) / h
    if isinstance(a, LogGrid):
        return AffineSymbol(a, b_arr, vals)
    return vals


# ---------------------------------------------------------------------------
# Mellin-kernel route


def _mellin_log_coeffs(wM: MellinSpectrum, h: float, tol: float | None = 1e-17):
    """Contour/xi quadrature coefficients ``Gamma(s/2+1/h+1)^2 w_M(s, xi)`` with weights.

    Returns ``(coeff[k, l], s[k], xi[l])``.  With a ``tol``, xi columns that
    carry nothing are dropped.
    """
    if wM.b_transform:
        raise ValueError("matrix-element formulas need w_M(s, b) untransformed in b")
    s = wM.contour.s
    lg = 2 * log_gamma(s / 2 + 1.0 / h + 1.0)
    wxi = uniform_weights(wM.xi)
    coeff = np.exp(lg)[:, None] * wM.values * wM.contour.weights[:, None] * wxi[None, :] / (2 * np.pi)
    if tol is None:
        return coeff, s, wM.xi
    mag = np.abs(coeff).max(axis=0)
    keep = mag > tol * max(mag.max(), 1e-300)
    return coeff[:, keep], s, wM.xi[keep]


def _grid_offsets(b, xi):
    """Integer positions of ``b`` on the uniform ``xi`` lattice, or ``None``."""
    if xi.size < 2:
        return None
    step = xi[1] - xi[0]
    if not np.allclose(np.diff(xi), step, rtol=1e-9, atol=0):
        return None
    j = np.round((b - xi[0]) / step)
    if np.max(np.abs(xi[0] + j * step - b), initial=0.0) > 1e-9 * step:
        return None
    return j.astype(int), step


def mellin_cross_elements(wM: MellinSpectrum, a1, b1, a2, b2, hb, chunk: int = 64) -> np.ndarray:
    """``<phi_{a1,b1}, W phi_{a2,b2}>`` from the Mellin spectrum of the symbol of ``W``.

    Elementwise over broadcast ``(a1, b1, a2, b2)``::

        C^2 (a1 a2)^(1/h+1/2) / (4 h) * (1/2pi) int dtau int dxi
            Gamma(s/2+1/h+1)^2 w_M(s, xi) ((P Q)/h^2)^-(s/2+1/h+1),
        P = a1 + i (b1 - xi),  Q = a2 - i (b2 - xi),  s = 1/2 + i tau.
    """
    h = as_hbar(hb)
    a1, b1, a2, b2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a1, b1, a2, b2)))
    coeff, s, xi = _mellin_log_coeffs(wM, h)
    c0 = 1.0 / h + 1.0
    out = np.empty(a1.size, dtype=complex)
    A1, B1, A2, B2 = (v.ravel() for v in (a1, b1, a2, b2))
    for lo in range(0, A1.size, chunk):
        sl = slice(lo, lo + chunk)
        P = A1[sl, None] + 1j * (B1[sl, None] - xi[None, :])
        Q = A2[sl, None] - 1j * (B2[sl, None] - xi[None, :])
        # log P + log Q is the principal log of P Q since both lie in the right half-plane
        lpq = np.log(P / h) + np.log(Q / h)
        e = np.exp(-(s[None, None, :] / 2 + c0) * lpq[..., None])
        out[sl] = np.einsum("nlk,kl->n", e, coeff)
    pref = np.exp(2 * log_coherent_norm_constant(h) + (1 / h + 0.5) * np.log(A1 * A2)) / (4 * h)
    return (out * pref).reshape(a1.shape)


def _diagonal_lattice(wM: MellinSpectrum, a, j, step, h):
    """``<phi_{a,b}, W phi_{a,b}>`` for ``b`` on the xi lattice.

    On the diagonal ``PQ = a^2 + (b - xi)^2`` depends on ``b - xi`` only, so
    the xi integral is a discrete convolution done by FFT.
    """
    coeff, s, _ = _mellin_log_coeffs(wM, h, tol=None)
    n = coeff.shape[1]
    r0 = j.min() - (n - 1)
    d = (r0 + np.arange(j.max() - r0 + 1)) * step
    size = sp_fft.next_fast_len(n + d.size - 1)
    chat = sp_fft.fft(coeff, size, axis=1)
    expo = -(s[:, None] / 2 + 1.0 / h + 1.0)
    out = np.empty((a.size, j.size), dtype=complex)
    for i, ai in enumerate(a):
        L = np.log((ai * ai + d * d) / (h * h))
        ehat = sp_fft.fft(np.exp(expo * L[None, :]), size, axis=1)
        conv = sp_fft.ifft(np.einsum("kw,kw->w", chat, ehat))
        out[i] = conv[j - r0]
    pref = np.exp(2 * log_coherent_norm_constant(h) + (2 / h + 1) * np.log(a)) / (4 * h)
    return out * pref[:, None]


def _trim_columns(coeff, tol=1e-17):
    """Contiguous xi range outside which every coefficient column is negligible."""
    mag = np.abs(coeff).max(axis=0)
    live = np.nonzero(mag > tol * max(mag.max(), 1e-300))[0]
    if live.size == 0:
        return 0, 0
    return live[0], live[-1] + 1


def mellin_cross_lattice(wM: MellinSpectrum, bras, a2, j_lo: int, j_hi: int, hb, memory: float = 6e8):
    """``<phi_bra, W phi_{a2_i, b2_j}>`` for ``b2`` on the spectrum's xi lattice.

    ``b2_j = xi[0] + j * step`` for ``j_lo <= j < j_hi``.  The ``b2``
    dependence is a discrete convolution over ``xi`` and is done by FFT,
    sharing the ``a2`` tables across bras; bras are batched so the FFT
    tables stay under ``memory`` bytes.

    Returns
    -------
    b2 : ndarray, shape (j_hi - j_lo,)
    values : ndarray, shape (len(bras), len(a2), j_hi - j_lo)
    """
    h = as_hbar(hb)
    lattice = _grid_offsets(wM.xi[:2], wM.xi) if wM.xi.size >= 2 else None
    if lattice is None:
        raise StructuralError("xi samples must form a uniform lattice")
    step = wM.xi[1] - wM.xi[0]
    coeff, s, xi = _mellin_log_coeffs(wM, h, tol=None)
    lo, hi = _trim_columns(coeff)
    a2 = np.atleast_1d(np.asarray(a2, dtype=float))
    bras = list(bras)
    j = np.arange(j_lo, j_hi)
    b2 = wM.xi[0] + j * step
    out = np.zeros((len(bras), a2.size, j.size), dtype=complex)
    if hi == lo or not bras:
        return b2, out
    coeff, xi = coeff[:, lo:hi], xi[lo:hi]
    j = j - lo  # offsets relative to the trimmed lattice
    n = xi.size
    r0 = j.min() - (n - 1)
    d = (r0 + np.arange(j.max() - r0 + 1)) * step
    size = sp_fft.next_fast_len(n + d.size - 1)
    expo = -(s / 2 + 1.0 / h + 1.0)[:, None]
    batch = max(1, int(memory // (16 * s.size * size)) - 1)
    lnc = 2 * log_coherent_norm_constant(h)
    kap = 1 / h + 0.5
    for start in range(0, len(bras), batch):
        group = bras[start : start + batch]
        chat = np.stack(
            [sp_fft.fft(coeff * np.exp(expo * np.log((p.a + 1j * (p.b - xi)) / h)[None, :]), size, axis=1) for p in group]
        )
        for i, ai in enumerate(a2):
            ehat = sp_fft.fft(np.exp(expo * np.log((ai - 1j * d) / h)[None, :]), size, axis=1)
            conv = sp_fft.ifft(np.einsum("pkw,kw->pw", chat, ehat), axis=1)
            out[start : start + len(group), i] = conv[:, j - r0]
        for g, p in enumerate(group):
            out[start + g] *= (np.exp(lnc + kap * np.log(p.a * a2)) / (4 * h))[:, None]
    return b2, out


def husimi_from_mellin(wM: MellinSpectrum, a, b, hb) -> HusimiField:
    """Husimi field evaluated from the Mellin spectrum of an operator's symbol.

    Targets whose ``b`` samples lie on the spectrum's xi lattice use an FFT
    convolution; other targets fall back to :func:`mellin_cross_elements`.
    """
    h = as_hbar(hb)
    a_arr, b_arr = _targets(a, b)
    lattice = None if wM.b_transform else _grid_offsets(b_arr, wM.xi)
    if lattice is not None:
        vals = _diagonal_lattice(wM, a_arr, *lattice, h)
    else:
        A, B = np.meshgrid(a_arr, b_arr, indexing="ij")
        vals = mellin_cross_elements(wM, A, B, A, B, h)
    return HusimiField(a_arr, b_arr, vals.real / h, h)


def continuation_prefactor(p: PhasePoint, d: ComplexDisplacement, hb) -> complex:
    """``(A^2 / (a a'))^(1/h + 1/2)`` with ``A = a + alpha + i beta``, ``a' = a + 2 alpha``.

    Principal branch; ``A`` stays in the right half-plane whenever ``a + alpha > 0``.
    """
    h = as_hbar(hb)
    A = p.a + d.alpha + 1j * d.beta
    a2 = p.a + 2 * d.alpha
    return np.exp((1 / h + 0.5) * (2 * np.log(A) - np.log(p.a) - np.log(a2)))


def husimi_continuation(p: PhasePoint, d: ComplexDisplacement, Wop: OperatorMatrix, hb) -> complex:
    """``hbar * W~(a + alpha + i beta, b + beta - i alpha)``, the analytically continued Husimi field.

    Equal to ``(A^2/(a a'))^(1/h+1/2) <phi_{a+2alpha, b+2beta}, W phi_{a,b}>``;
    at zero displacement this is ``<phi_{a,b}, W phi_{a,b}>``.

    Raises
    ------
    DomainError
        If ``a + 2 alpha <= 0``.
    """
    if p.a + 2 * d.alpha <= 0 or p.a + d.alpha <= 0:
        raise DomainError(f"displacement alpha={d.alpha} leaves the half-plane at a={p.a}")
    p2 = PhasePoint(p.a + 2 * d.alpha, p.b + 2 * d.beta)
    return continuation_prefactor(p, d, hb) * cross_matrix_element(p2, p, Wop, hb)


def taylor_continuation(field_fn, p: PhasePoint, d: ComplexDisplacement, radius: float = 0.15, degree: int = 6, n: int = 13) -> complex:
    """Continue a real-analytic field by a least-squares polynomial fit around ``p``.

    ``field_fn(a, b)`` evaluates the real field on a product grid.  The fit is
    evaluated at the complex point ``(a + alpha + i beta, b + beta - i alpha)``.
    """
    t = np.linspace(-radius, radius, n)
    vals = field_fn(p.a + t, p.b + t)
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    powers = [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]
    scale = radius
    X = np.stack([(T1 / scale) ** i * (T2 / scale) ** j for i, j in powers], axis=-1).reshape(-1, len(powers))
    coef, *_ = np.linalg.lstsq(X, vals.ravel(), rcond=None)
    za = (d.alpha + 1j * d.beta) / scale
    zb = (d.beta - 1j * d.alpha) / scale
    return complex(sum(c * za**i * zb**j for c, (i, j) in zip(coef, powers)))
