"""Complex log-gamma and the coherent-state normalization."""
from __future__ import annotations

import numpy as np
from scipy import special as _sp

from .core import DomainError, as_hbar

# lower edge of the real part we vouch for (reflection keeps accuracy ~1e-10 there)
RE_Z_MIN = -50.0


class PoleError(DomainError):
    """Gamma evaluated at a non-positive integer."""

    def __init__(self, z):
        self.pole = int(round(np.real(z)))
        super().__init__(f"log_gamma has a pole at z = {self.pole}")


class GammaRangeError(OverflowError):
    """Exponentiation overflowed; ``log_value`` still holds the logarithm."""

    def __init__(self, log_value):
        self.log_value = log_value
        super().__init__(f"value exp({log_value}) is not representable")


def log_gamma(z):
    """Principal branch of ``log Gamma(z)`` for scalar or array input.

    Parameters
    ----------
    z : complex or array_like
        Arguments with ``Re z >= -50``, away from the poles ``0, -1, -2, ...``.

    Returns
    -------
    complex or ndarray
        ``log Gamma(z)`` with ``Im`` continuous off the negative real axis,
        so that ``log_gamma(z + 1) - log_gamma(z) - log(z)`` vanishes.

    Raises
    ------
    PoleError
        If any ``z`` is a non-positive integer.
    DomainError
        If ``Re z < -50``.
    """
    zz = np.asarray(z, dtype=complex)
    if np.any(zz.real < RE_Z_MIN):
        raise DomainError(f"log_gamma validated only for Re z >= {RE_Z_MIN}")
    poles = (zz.imag == 0) & (zz.real <= 0) & (zz.real == np.round(zz.real))
    if np.any(poles):
        raise PoleError(zz[poles].flat[0])
    out = _sp.loggamma(zz)
    return complex(out) if np.ndim(z) == 0 else out


def gamma(z):
    """``Gamma(z) = exp(log_gamma(z))``; raises :class:`GammaRangeError` on overflow."""
    lg = log_gamma(z)
    if np.any(np.real(lg) > 709.0):
        raise GammaRangeError(lg)
    return np.exp(lg)


def log_coherent_norm_constant(hb) -> float:
    """``ln C(hbar)`` with ``C = (2/hbar)**(1/hbar + 1/2) / sqrt(Gamma(2/hbar + 1))``."""
    h = as_hbar(hb)
    return (1.0 / h + 0.5) * np.log(2.0 / h) - 0.5 * log_gamma(2.0 / h + 1.0).real


def coherent_norm_constant(hb) -> float:
    """Normalization making ``C x**(1/hbar) exp(-x/hbar)`` a unit vector in L2(R+).

    ``C(1) = 2`` and ``C(2) = 1``.
    """
    lc = log_coherent_norm_constant(hb)
    if lc > 709.0:
        raise GammaRangeError(lc)
    return float(np.exp(lc))
