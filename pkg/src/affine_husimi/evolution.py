"""Schrodinger propagation and the Husimi evolution law.

Along ``i hbar d/dt W = [H, W]`` the Husimi field changes at the rate::

    dW~/dt (a, b) = (2 / hbar^2) Im <phi_{a,b}, H W phi_{a,b}>.

Inserting the coherent-state resolution of identity between ``H`` and ``W``
and writing ``<phi_{a',b'}, W phi_{a,b}>`` through the continued Husimi
field ``W~(A, B)`` with ``A = a + alpha + i beta``, ``B = b + beta - i alpha``,
``a' = a + 2 alpha``, ``b' = b + 2 beta`` gives::

    dW~/dt = (2 / hbar) Im int Phi(a, alpha; b, beta) W~(A, B) dalpha dbeta,
    Phi = <phi_{a,b}, H phi_{a',b'}> (a a' / A^2)^(1/hbar + 1/2) * 2 / (pi hbar a'^2),

with the matrix element of ``H`` assembled from the Mellin spectrum of its
symbol.  :data:`CONVENTIONS` lists every constant this chain fixes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .affine import PhasePoint, quantize_kernel
from .core import (
    AccuracyError,
    AffineSymbol,
    DomainError,
    HalfLineFunction,
    LogGrid,
    OperatorMatrix,
    ParameterError,
    ResolutionError,
    StructuralError,
    as_hbar,
    make_log_grid,
    uniform_weights,
)
from .mellin import CriticalLineGrid, MellinSpectrum, refine_spectrum, symbol_mellin
from .phase import (
    HusimiField,
    _log_coherent_amp,
    coherent_values,
    continuation_prefactor,
    ComplexDisplacement,
    husimi_pure,
    mellin_cross_elements,
    mellin_cross_lattice,
)

CONVENTIONS = {
    "U": "U(a,b) f(x) = a^(1/2) exp(+i b x / hbar) f(a x)",
    "V": "V(a,b) f(x) = f(1/(a^2 x)) / (a x) * exp(i b (x - 1/(a^2 x)) / hbar)  (unitary, V^2 = 1)",
    "C": "C(a) = multiplication by (a x + 1/(a x)) / 2",
    "coherent": "phi_{a,b} = C(hbar) a^(1/hbar+1/2) x^(1/hbar) exp(-(a - i b) x / hbar), unit norm",
    "identity": "int |phi_ab><phi_ab| da db / (2 pi hbar a^2) = 1",
    "husimi": "W~(a,b) = <phi_ab, W phi_ab> / hbar; int W~ da db / (2 pi a^2) = Tr W",
    "quantization": "W = int W(a,b) V(a,b) C(a) da db / (2 hbar a^2); symbol = (4/pi) Tr[W V C]",
    "mellin": "w_M(s, xi) = int a^(s-1) W(a, xi) da, no transform in the second variable",
    "continuation": "hbar W~(A, B) = (A^2/(a a'))^(1/hbar+1/2) <phi_{a',b'}, W phi_{a,b}>",
    "rate": "dW~/dt = (2/hbar^2) Im <phi, H W phi> = (2/hbar) Im int Phi W~(A,B) dalpha dbeta",
}

# alternative constants reported when the kernel gate fails; each entry
# rescales the a'-integrand of the adopted convention
_VARIANTS = {
    "adopted": lambda a2, h: np.ones_like(a2),
    "rate_prefactor_2/hbar^2": lambda a2, h: np.full_like(a2, 1.0 / h),
    "identity_measure_da_db/(a_hbar)": lambda a2, h: 2 * np.pi * a2,
}


class BranchError(DomainError):
    """A complex power factor would cross the negative real axis."""

    def __init__(self, message, location):
        self.location = location
        super().__init__(f"{message} at {location}")


class PropagationPlan:
    """Spectral propagator ``exp(-i H t / hbar)`` for a Hermitian operator matrix.

    Parameters
    ----------
    H : OperatorMatrix
        Hamiltonian; ``||H - H^dagger||_F / ||H||_F`` must not exceed ``1e-8``.
    hb : float or PlanckScale
    t_grid : array_like
        Increasing times; :meth:`propagate` accepts ``t`` in their span.
    """

    method = "spectral"

    def __init__(self, H: OperatorMatrix, hb, t_grid=(0.0, 10.0), herm_tol: float = 1e-8):
        self.H = H
        self.hbar = as_hbar(hb)
        t = np.asarray(t_grid, dtype=float)
        if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) <= 0):
            raise ParameterError("t_grid must be increasing")
        self.t_grid = t
        defect = H.hermiticity_defect()
        if defect > herm_tol:
            raise StructuralError(f"Hamiltonian is not Hermitian (relative defect {defect:.2e})")
        M = H.symmetric_form()
        self.energies, vecs = np.linalg.eigh(0.5 * (M + M.conj().T))
        self._sw = np.sqrt(H.grid.weights)
        self._vecs = vecs

    @property
    def grid(self) -> LogGrid:
        return self.H.grid

    def eigenstate(self, k: int) -> HalfLineFunction:
        """Normalized ``k``-th eigenvector (ascending energy)."""
        return HalfLineFunction(self.grid, self._vecs[:, k] / self._sw)

    def propagate(self, psi0: HalfLineFunction, t: float) -> HalfLineFunction:
        if not self.t_grid[0] - 1e-12 <= t <= self.t_grid[-1] + 1e-12:
            raise ParameterError(f"t={t} outside the plan's time span")
        if t == 0:
            return psi0
        c = self._vecs.conj().T @ (self._sw * psi0.values)
        c *= np.exp(-1j * self.energies * t / self.hbar)
        return HalfLineFunction(self.grid, (self._vecs @ c) / self._sw)


def propagate(plan: PropagationPlan, psi0: HalfLineFunction, t: float) -> HalfLineFunction:
    """``exp(-i H t / hbar) psi0`` by the plan's spectral decomposition."""
    return plan.propagate(psi0, t)


def expectation(H: OperatorMatrix, psi: HalfLineFunction) -> float:
    w = psi.grid.weights
    return float(np.real(np.conj(psi.values * w) @ H.entries @ (w * psi.values)))


def density(psi: HalfLineFunction) -> OperatorMatrix:
    return OperatorMatrix.projector(psi, psi)


def husimi_rhs_direct(p: PhasePoint, Wop: OperatorMatrix, H: OperatorMatrix, hb) -> float:
    """Exact rate ``(2/hbar^2) Im <phi_p, H W phi_p>`` of the Husimi field at ``p``."""
    h = as_hbar(hb)
    w = Wop.grid.weights
    phi = coherent_values(p, h, Wop.grid.x)
    Wphi = Wop.entries @ (w * phi)
    HWphi = H.entries @ (w * Wphi)
    return float(2.0 / h**2 * np.imag(np.conj(phi * w) @ HWphi))


def phi_kernel(p: PhasePoint, d: ComplexDisplacement, hM: MellinSpectrum, hb) -> complex:
    """``Phi(a, alpha; b, beta)`` at one displacement.

    Raises
    ------
    BranchError
        If ``a <= 0`` or ``a + 2 alpha <= 0``: one of the factors
        ``a + i(b - xi)``, ``a' - i(b' - xi)`` leaves the right half-plane.
    """
    h = as_hbar(hb)
    a2, b2 = p.a + 2 * d.alpha, p.b + 2 * d.beta
    if p.a <= 0:
        raise BranchError("factor a + i(b - xi) reaches the cut", (p.a, p.b))
    if a2 <= 0:
        raise BranchError("factor a' - i(b' - xi) reaches the cut", (d.alpha, d.beta))
    k = complex(mellin_cross_elements(hM, p.a, p.b, a2, b2, h))
    return k / continuation_prefactor(p, d, h) * 2.0 / (np.pi * h * a2**2)


@dataclass(frozen=True)
class KernelWindow:
    """Displacement quadrature window: log-spaced ``a'`` and a lattice of ``b'``.

    ``b'`` samples are every ``b_stride``-th point of the Hamiltonian
    spectrum's xi lattice within ``b +- b_span``.  Small ``a'`` need a finer
    xi lattice (up to ``max_refine``) and are only filled within
    ``b +- b_span_fine``.  ``memory`` caps the FFT tables in bytes.
    """

    a_min: float = 0.002
    a_max: float = 200.0
    n_a: int = 128
    b_span: float = 40.0
    b_span_fine: float = 12.0
    b_stride: int = 2
    coverage_tol: float = 1e-3
    max_refine: int = 16
    memory: float = 6e8

    def a_grid(self) -> LogGrid:
        return make_log_grid(self.a_min, self.a_max, self.n_a)


@dataclass(frozen=True, eq=False)
class PhiKernel:
    """``Phi`` and the continued Husimi field sampled on a displacement window."""

    p: PhasePoint
    a2: np.ndarray
    b2: np.ndarray
    values: np.ndarray
    husimi: np.ndarray
    weights: np.ndarray
    hbar: float

    @property
    def alpha(self):
        return (self.a2 - self.p.a) / 2

    @property
    def beta(self):
        return (self.b2 - self.p.b) / 2

    def integrand(self) -> np.ndarray:
        return self.values * self.husimi

    def rate(self, a_factor=None) -> float:
        f = self.integrand() * self.weights
        if a_factor is not None:
            f = f * a_factor[:, None]
        return float(2.0 / self.hbar * np.imag(f.sum()))

    def edge_fraction(self) -> float:
        """Largest boundary value of the log-``a'`` integrand density over its peak."""
        dens = np.abs(self.integrand()) * self.a2[:, None]
        peak = dens.max()
        if peak == 0:
            return 0.0
        edge = max(dens[0].max(), dens[-1].max(), dens[:, 0].max(), dens[:, -1].max())
        return float(edge / peak)


def continued_husimi_grid(p: PhasePoint, a2, b2, Wop: OperatorMatrix, hb) -> np.ndarray:
    """``W~(A, B)`` for every ``(a'_i, b'_k)``, via the continuation identity.

    ``A = (a + a')/2 + i (b' - b)/2`` stays in the right half-plane for
    every ``a' > 0``.
    """
    h = as_hbar(hb)
    a2 = np.asarray(a2, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    x, w = Wop.grid.x, Wop.grid.weights
    # <phi_{a',b'}, W phi_p> = sum_ij conj(phi'_i) w_i E_ij w_j phi_p,j
    col = Wop.entries @ (w * coherent_values(p, h, x))
    amp = np.exp(_log_coherent_amp(a2, x, h)) * (w * col)  # (n_a2, n)
    cross = amp @ np.exp(-1j * np.outer(x, b2) / h)
    alpha = (a2 - p.a) / 2
    beta = (b2 - p.b) / 2
    A = p.a + alpha[:, None] + 1j * beta[None, :]
    pref = np.exp((1 / h + 0.5) * (2 * np.log(A) - np.log(p.a) - np.log(a2)[:, None]))
    return pref * cross / h


def _refinement(a2, step, max_refine, tol=1e-6):
    """Smallest power-of-two lattice refinement keeping the xi sum accurate at ``a2``.

    The xi integrand has a pole at distance ``a2`` from the real axis, so the
    trapezoid error is about ``exp(-2 pi a2 / step)``.
    """
    need = np.log(1 / tol) / (2 * np.pi) * step / np.asarray(a2, dtype=float)
    r = 2 ** np.ceil(np.log2(np.maximum(need, 1.0)))
    return np.minimum(r, max_refine).astype(int)


def _kernel_tiers(hM, probes, a2, j_lo, j_hi, h, window):
    """``<phi_p, H phi_{a',b'}>`` on ``a2 x`` the coarse lattice ``[j_lo, j_hi)``.

    Refined tiers only fill ``b'`` within ``window.b_span_fine`` of the probes.
    """
    xi0, step = hM.xi[0], hM.xi[1] - hM.xi[0]
    bs = np.array([p.b for p in probes])
    r_of = _refinement(a2, step, window.max_refine)
    K = np.zeros((len(probes), a2.size, j_hi - j_lo), dtype=complex)
    for r in np.unique(r_of):
        sel = np.nonzero(r_of == r)[0]
        lo, hi = j_lo, j_hi
        if r > 1:
            lo = max(j_lo, int(np.floor((bs.min() - window.b_span_fine - xi0) / step)))
            hi = min(j_hi, int(np.ceil((bs.max() + window.b_span_fine - xi0) / step)) + 1)
        _, Kr = mellin_cross_lattice(
            refine_spectrum(hM, int(r)), probes, a2[sel], lo * r, (hi - 1) * r + 1, h, memory=window.memory
        )
        K[:, sel, lo - j_lo : hi - j_lo] = Kr[:, :, ::r]
    return K


def phi_kernels(probes, hM: MellinSpectrum, Wop: OperatorMatrix, window: KernelWindow, hb) -> list[PhiKernel]:
    """:class:`PhiKernel` for each probe, sharing the ``a'`` FFT tables."""
    h = as_hbar(hb)
    probes = list(probes)
    if not probes:
        return []
    xi0, step = hM.xi[0], hM.xi[1] - hM.xi[0]
    bs = np.array([p.b for p in probes])
    j_lo = int(np.floor((bs.min() - window.b_span - xi0) / step))
    j_hi = int(np.ceil((bs.max() + window.b_span - xi0) / step)) + 1
    ag = window.a_grid()
    a2 = ag.x
    if any(p.a <= 0 for p in probes):
        raise BranchError("probe outside the half-plane", [(p.a, p.b) for p in probes if p.a <= 0])
    K = _kernel_tiers(hM, probes, a2, j_lo, j_hi, h, window)
    b2_all = xi0 + np.arange(j_lo, j_hi) * step
    out = []
    for n, p in enumerate(probes):
        sel = np.nonzero(np.abs(b2_all - p.b) <= window.b_span + 1e-12)[0]
        sel = sel[(sel - sel[0]) % window.b_stride == 0]
        b2 = b2_all[sel]
        alpha = (a2 - p.a) / 2
        beta = (b2 - p.b) / 2
        A = p.a + alpha[:, None] + 1j * beta[None, :]
        inv_pref = np.exp(-(1 / h + 0.5) * (2 * np.log(A) - np.log(p.a) - np.log(a2)[:, None]))
        phi = K[n][:, sel] * inv_pref * (2.0 / (np.pi * h * a2**2))[:, None]
        # d alpha d beta = da' db' / 4
        wts = np.outer(ag.weights, uniform_weights(b2)) / 4
        hus = continued_husimi_grid(p, a2, b2, Wop, h)
        out.append(PhiKernel(p, a2, b2, phi, hus, wts, h))
    return out


def husimi_rhs_kernel(p: PhasePoint, Wop: OperatorMatrix, hM: MellinSpectrum, window: KernelWindow, hb, check: bool = True) -> float:
    """Husimi rate at ``p`` from the ``Phi`` kernel and the continued Husimi field.

    Raises
    ------
    ResolutionError
        If ``check`` and the integrand at the window boundary exceeds
        ``window.coverage_tol`` of its peak.
    """
    (pk,) = phi_kernels([p], hM, Wop, window, hb)
    if check and pk.edge_fraction() > window.coverage_tol:
        raise ResolutionError(f"displacement window edge carries {pk.edge_fraction():.2e} of the peak")
    return pk.rate()


@dataclass
class ProbeResult:
    p: PhasePoint
    finite_difference: float = np.nan
    richardson: float = np.nan
    direct: float = np.nan
    kernel: float = np.nan
    variants: dict = field(default_factory=dict)
    edge_fraction: float = np.nan
    error: str | None = None

    @property
    def fd_gap(self) -> float:
        return abs(self.finite_difference - self.direct)

    @property
    def kernel_gap(self) -> float:
        return abs(self.direct - self.kernel)


@dataclass
class EvolutionReport:
    probes: list
    hbar: float
    t0: float
    delta: float
    fd_tol: float
    kernel_tol: float
    conventions: dict
    diagnostics: dict

    def _max(self, attr):
        vals = [getattr(r, attr) for r in self.probes if r.error is None]
        return float(np.max(vals)) if vals else np.nan

    @property
    def max_fd_gap(self) -> float:
        return self._max("fd_gap")

    @property
    def max_kernel_gap(self) -> float:
        return self._max("kernel_gap")

    def variant_residuals(self) -> dict:
        names = self.probes[0].variants.keys() if self.probes else []
        return {
            n: float(max(abs(r.direct - r.variants[n]) for r in self.probes if r.error is None))
            for n in names
        }

    @property
    def fd_passed(self) -> bool:
        return bool(self.max_fd_gap <= self.fd_tol)

    @property
    def kernel_passed(self) -> bool:
        return bool(self.max_kernel_gap <= self.kernel_tol)

    @property
    def passed(self) -> bool:
        ok = all(r.error is None for r in self.probes)
        return ok and self.fd_passed and self.kernel_passed


def _husimi_at(psi: HalfLineFunction, p: PhasePoint, h: float) -> float:
    return float(husimi_pure(psi, [p.a], [p.b], h).values[0, 0])


def verify_evolution(
    H_symbol: AffineSymbol,
    psi0: HalfLineFunction,
    probes,
    hb,
    *,
    contour: CriticalLineGrid,
    window: KernelWindow = KernelWindow(),
    t0: float = 0.0,
    delta: float = 1e-3,
    fd_tol: float = 1e-5,
    kernel_tol: float = 1e-3,
    H: OperatorMatrix | None = None,
) -> EvolutionReport:
    """Three-way check of the Husimi rate at each probe point.

    Compares a centred finite difference of the propagated Husimi field
    (with a Richardson estimate at ``delta / 2``), the exact rate
    :func:`husimi_rhs_direct` and the kernel rate :func:`husimi_rhs_kernel`.
    Failures of individual probes are recorded, not raised.
    """
    h = as_hbar(hb)
    if H is None:
        H = quantize_kernel(H_symbol, psi0.grid, h)
    plan = PropagationPlan(H, h, (min(0.0, t0 - delta), t0 + delta))
    psi_t = plan.propagate(psi0, t0)
    W = density(psi_t)
    states = {dt: plan.propagate(psi0, t0 + dt) for dt in (-delta, -delta / 2, delta / 2, delta)}
    hM = symbol_mellin(H_symbol, contour)
    results = [ProbeResult(p) for p in probes]
    for r in results:
        try:
            f = {dt: _husimi_at(s, r.p, h) for dt, s in states.items()}
            fd1 = (f[delta] - f[-delta]) / (2 * delta)
            fd2 = (f[delta / 2] - f[-delta / 2]) / delta
            r.finite_difference = fd1
            r.richardson = (4 * fd2 - fd1) / 3
            r.direct = husimi_rhs_direct(r.p, W, H, h)
        except (AccuracyError, DomainError, ValueError) as exc:
            r.error = f"{type(exc).__name__}: {exc}"
    live = [r for r in results if r.error is None]
    try:
        kernels = phi_kernels([r.p for r in live], hM, W, window, h)
    except (AccuracyError, DomainError, ValueError) as exc:
        kernels = []
        for r in live:
            r.error = f"{type(exc).__name__}: {exc}"
    for r, pk in zip(live, kernels):
        r.kernel = pk.rate()
        r.edge_fraction = pk.edge_fraction()
        r.variants = {n: pk.rate(fn(pk.a2, h)) for n, fn in _VARIANTS.items()}
    diagnostics = {
        "tau_max": contour.tau_max,
        "contour_points": contour.m,
        "window_a": (window.a_min, window.a_max, window.n_a),
        "window_b_span": window.b_span,
        "window_b_stride": window.b_stride,
        "max_edge_fraction": float(np.nanmax([r.edge_fraction for r in results])) if results else np.nan,
        "energy_range": (float(plan.energies[0]), float(plan.energies[-1])),
    }
    return EvolutionReport(results, h, t0, delta, fd_tol, kernel_tol, dict(CONVENTIONS), diagnostics)


@dataclass
class ConservationReport:
    times: np.ndarray
    norm: np.ndarray
    energy: np.ndarray
    mass: np.ndarray

    @staticmethod
    def _drift(v):
        return float(np.max(np.abs(v - v[0])) / abs(v[0])) if v[0] != 0 else float(np.max(np.abs(v)))

    @property
    def norm_drift(self) -> float:
        return self._drift(self.norm)

    @property
    def energy_drift(self) -> float:
        return self._drift(self.energy)

    @property
    def mass_drift(self) -> float:
        return self._drift(self.mass)


def husimi_snapshots(plan: PropagationPlan, psi0: HalfLineFunction, times, a: LogGrid, b) -> list[HusimiField]:
    return [husimi_pure(plan.propagate(psi0, t), a, b, plan.hbar) for t in times]


def conservation(plan: PropagationPlan, psi0: HalfLineFunction, times, a: LogGrid, b) -> ConservationReport:
    """Norm, energy and Husimi window mass along the propagated state."""
    times = np.asarray(times, dtype=float)
    norm, energy, mass = [], [], []
    for t in times:
        psi = plan.propagate(psi0, t)
        norm.append(psi.norm())
        energy.append(expectation(plan.H, psi))
        mass.append(husimi_pure(psi, a, b, plan.hbar).mass(a.weights))
    return ConservationReport(times, np.array(norm), np.array(energy), np.array(mass))
