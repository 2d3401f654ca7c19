"""Husimi field of a coherent state: closed-form peak, covariance and window mass."""

import numpy as np

from affine_husimi import PhasePoint, coherent_state, husimi_pure, make_log_grid, phase_window, u_action

h = 1.0
grid = make_log_grid(1e-4, 40.0, 2048)
p0 = PhasePoint(1.2, 0.4)
psi = coherent_state(p0, h, grid).state
print(f"norm of phi{(p0.a, p0.b)}: {psi.norm():.12f}")

a, b = phase_window()
field = husimi_pure(psi, a, b, h)
i, k = np.unravel_index(np.argmax(field.values), field.values.shape)
print(f"peak at a={a.x[i]:.3f}, b={b[k]:.3f}; value {field.values[i, k]:.4f}")
print(f"mass on default window: {field.mass(a.weights):.4f}")

wa, wb = phase_window(0.01, 100.0, 256, -24.0, 24.0, 512)
print(f"mass on widened window: {husimi_pure(psi, wa, wb, h).mass(wa.weights):.6f}")

# moving the state by U(g) moves its Husimi field by g
g = PhasePoint(1.5, -0.3)
moved = u_action(g, psi, h)
q = PhasePoint(1.0, 0.2)
r = g.inverse().compose(q)
lhs = husimi_pure(moved, [q.a], [q.b], h).values[0, 0]
rhs = husimi_pure(psi, [r.a], [r.b], h).values[0, 0]
print(f"covariance: {lhs:.10f} vs {rhs:.10f}")
