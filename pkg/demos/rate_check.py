"""Husimi time derivative three ways: finite difference, exact commutator, Mellin kernel."""

import numpy as np

from affine_husimi import (
    AffineSymbol,
    PhasePoint,
    coherent_state,
    contour_for_hbar,
    make_log_grid,
    quantize_kernel,
    verify_evolution,
)

h = 1.0
grid = make_log_grid(1e-3, 30.0, 512)
ag = make_log_grid(0.02, 50.0, 256)
b = np.linspace(-12.0, 12.0, 512)
H_sym = AffineSymbol.from_callable(ag, b, lambda a, b: 5 * np.exp(-(a + 1 / a - 2)) * np.exp(-(b**2) / 2))
H = quantize_kernel(H_sym, grid, h)
psi0 = coherent_state(PhasePoint(1.3, 0.5), h, grid).state

report = verify_evolution(H_sym, psi0, [PhasePoint(1.4, 0.5)], h, contour=contour_for_hbar(h), H=H)
for r in report.probes:
    print(f"(a, b) = ({r.p.a}, {r.p.b})")
    print(f"  finite difference {r.finite_difference:+.8f}")
    print(f"  direct            {r.direct:+.8f}")
    print(f"  kernel            {r.kernel:+.8f}")
print("passed:", report.passed)
