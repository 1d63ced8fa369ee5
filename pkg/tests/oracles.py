"""Independent reference computations used to freeze expected test values.

These deliberately avoid the library's own evaluation paths: the spline
oracle is the Cox-de Boor recursion, matrix entries come from composite
quadrature over elements, and transfer sums are plain nested loops over
eval_basis.
"""

import numpy as np

from vpm.basis import eval_basis, eval_basis_grad


def cox_de_boor(x, k, i, t):
    """B-spline basis B_{i,k}(x) on the knot vector t (recursion)."""
    if k == 0:
        return 1.0 if t[i] <= x < t[i + 1] else 0.0
    c1 = 0.0
    if t[i + k] != t[i]:
        c1 = (x - t[i]) / (t[i + k] - t[i]) * cox_de_boor(x, k - 1, i, t)
    c2 = 0.0
    if t[i + k + 1] != t[i + 1]:
        c2 = (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * cox_de_boor(
            x, k - 1, i + 1, t
        )
    return c1 + c2


def cardinal_cubic(r):
    """Cardinal cubic B-spline at offset r (grid units) via Cox-de Boor."""
    knots = [-2.0, -1.0, 0.0, 1.0, 2.0]
    return cox_de_boor(float(r), 3, 0, knots)


def brute_interp(spec, f_nodal, x):
    """Sum over all grid nodes of f_k psi_k(x)."""
    return sum(f_nodal[k] * eval_basis(spec, k, x) for k in range(spec.n_g))


def brute_grad(spec, f_nodal, x):
    out = np.zeros(spec.dim)
    for k in range(spec.n_g):
        out += f_nodal[k] * eval_basis_grad(spec, k, x)
    return out


def brute_scatter(spec, g, Q):
    """Raw scatter sum_b g_b psi_k(Q_b) for scalar particle values."""
    out = np.zeros(spec.n_g)
    for b in range(len(g)):
        for k in range(spec.n_g):
            out[k] += g[b] * eval_basis(spec, k, Q[b])
    return out


def simpson_elementwise(f, a, b, n_sub):
    """Composite Simpson rule, exact for piecewise quadratics per panel."""
    total = 0.0
    edges = np.linspace(a, b, n_sub + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        total += (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi))
    return total


def hat(x, center, h, width):
    """Periodic P1 hat function on a 1D grid of spacing h and period width."""
    d = abs((x - center + 0.5 * width) % width - 0.5 * width)
    return max(0.0, 1.0 - d / h)


def mass_entry_quadrature(spec, k, l):
    """1D mass matrix entry by composite Simpson over every element."""
    (a, b), = spec.extents
    h = spec.spacing[0]
    width = b - a
    xk = spec.axis_coords(0)[k]
    xl = spec.axis_coords(0)[l]

    def f(x):
        return hat(x, xk, h, width) * hat(x, xl, h, width)

    # panel per half-element keeps the integrand polynomial on each panel
    return simpson_elementwise(f, a, b, 2 * spec.nodes[0])


def stiffness_entry_quadrature(spec, k, l):
    """1D stiffness entry via midpoint rule (derivatives are constants)."""
    (a, b), = spec.extents
    h = spec.spacing[0]
    width = b - a
    xk = spec.axis_coords(0)[k]
    xl = spec.axis_coords(0)[l]
    eps = 1e-7 * h

    def dhat(x, c):
        return (hat(x + eps, c, h, width) - hat(x - eps, c, h, width)) / (2 * eps)

    total = 0.0
    n = spec.nodes[0]
    for j in range(2 * n):
        mid = a + (j + 0.5) * (width / (2 * n))
        total += (width / (2 * n)) * dhat(mid, xk) * dhat(mid, xl)
    return total
