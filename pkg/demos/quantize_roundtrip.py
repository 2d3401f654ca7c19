"""Quantize a smooth symbol, recover it from the trace formula, and compare Husimi routes."""

import numpy as np

from affine_husimi import (
    AffineSymbol,
    HusimiEvaluator,
    default_contour,
    default_grid,
    husimi_from_mellin,
    make_log_grid,
    quantize_kernel,
    symbol_mellin,
    symbol_of,
)

h = 1.0
ag = make_log_grid(0.02, 50.0, 256)
b = np.linspace(-12.0, 12.0, 512)
W = AffineSymbol.from_callable(ag, b, lambda a, b: np.exp(-(a + 1 / a)) * np.exp(-(b**2)))
op = quantize_kernel(W, default_grid(), h)
print(f"hermiticity defect: {op.hermiticity_defect():.2e}")

a_t = np.array([0.6, 1.0, 1.7])
b_t = np.array([-0.5, 0.0, 0.8])
back = symbol_of(op, a_t, b_t, h)
exact = np.exp(-(a_t[:, None] + 1 / a_t[:, None])) * np.exp(-(b_t[None, :] ** 2))
print(f"symbol round trip, max error: {np.abs(back - exact).max():.2e}")

direct = HusimiEvaluator(op, h)(a_t, b_t).values
mellin = husimi_from_mellin(symbol_mellin(W, default_contour()), a_t, b_t, h).values
print(f"Husimi direct vs Mellin, max relative gap: {np.abs(direct - mellin).max() / np.abs(direct).max():.2e}")
