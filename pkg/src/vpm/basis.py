"""Partition-of-unity interpolation basis: cardinal cubic B-splines.

The basis function attached to grid node k is psi_k(x) = B((x - x_k)/h)
per axis (tensor product in 2D), where B is the cardinal cubic B-spline
with support |r| < 2.  On a uniform periodic grid these sum to one
exactly and reproduce linear functions.
"""

import enum

import numpy as np

SUPPORT_CELLS = 2  # support radius in cells: psi vanishes for |x - x_k| >= 2h
_OFFSETS = np.array([-1, 0, 1, 2])


class BasisKind(enum.Enum):
    CUBIC_BSPLINE = "cubic_bspline"


def bspline3(r):
    """Cardinal cubic B-spline B(r), unit value sum on integer shifts."""
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    inner = (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0
    outer = (2.0 - a) ** 3 / 6.0
    return np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))


def bspline3_deriv(r):
    """Derivative dB/dr (odd function, continuous)."""
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    s = np.sign(r)
    inner = (9.0 * a * a - 12.0 * a) / 6.0
    outer = -0.5 * (2.0 - a) ** 2
    return s * np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))


def _check_node(spec, k):
    if not 0 <= k < spec.n_g:
        raise IndexError(f"node index {k} out of range [0, {spec.n_g})")


def eval_basis(spec, k, x):
    """psi_k(x) with periodic minimal-image distance.

    x is a scalar in 1D or a length-2 sequence in 2D.
    """
    _check_node(spec, k)
    x = spec.wrap(np.atleast_1d(np.asarray(x, dtype=float)))
    multi = spec.node_multi_index(k)
    val = 1.0
    for axis, km in enumerate(multi):
        xk = spec.axis_coords(axis)[km]
        d = spec.signed_distance(x[axis], xk, axis)
        val *= float(bspline3(d / spec.spacing[axis]))
    return val


def eval_basis_grad(spec, k, x):
    """Gradient of psi_k at x, shape (dim,), units 1/length."""
    _check_node(spec, k)
    x = spec.wrap(np.atleast_1d(np.asarray(x, dtype=float)))
    multi = spec.node_multi_index(k)
    vals = np.empty(spec.dim)
    ders = np.empty(spec.dim)
    for axis, km in enumerate(multi):
        h = spec.spacing[axis]
        xk = spec.axis_coords(axis)[km]
        r = spec.signed_distance(x[axis], xk, axis) / h
        vals[axis] = bspline3(r)
        ders[axis] = bspline3_deriv(r) / h
    grad = np.empty(spec.dim)
    for axis in range(spec.dim):
        g = ders[axis]
        for other in range(spec.dim):
            if other != axis:
                g *= vals[other]
        grad[axis] = g
    return grad


def axis_stencil(spec, axis, coords):
    """Stencil data along one axis for an array of coordinates.

    Returns (idx, w, dw): node indices (m, 4), weights (m, 4) and weight
    derivatives d/dx (m, 4).  Offsets are ordered [-1, 0, 1, 2] relative
    to the cell containing each coordinate.
    """
    a, _ = spec.extents[axis]
    h = spec.spacing[axis]
    n = spec.nodes[axis]
    t = (np.asarray(coords, dtype=float) - a) / h
    base = np.floor(t)
    s = t - base
    idx = (base.astype(np.int64)[:, None] + _OFFSETS[None, :]) % n

    one = 1.0 - s
    w = np.empty((t.shape[0], 4))
    w[:, 0] = one * one * one / 6.0
    w[:, 1] = (4.0 - 6.0 * s * s + 3.0 * s * s * s) / 6.0
    w[:, 2] = (4.0 - 6.0 * one * one + 3.0 * one * one * one) / 6.0
    w[:, 3] = s * s * s / 6.0

    dw = np.empty_like(w)
    dw[:, 0] = -0.5 * one * one / h
    dw[:, 1] = 0.5 * s * (3.0 * s - 4.0) / h
    dw[:, 2] = 0.5 * one * (1.0 + 3.0 * s) / h
    dw[:, 3] = 0.5 * s * s / h
    return idx, w, dw


def support_nodes(spec, x):
    """Flattened indices of the nodes whose basis covers x (4 per axis)."""
    x = spec.wrap(np.atleast_1d(np.asarray(x, dtype=float)))
    if spec.dim == 1:
        idx, _, _ = axis_stencil(spec, 0, x[:1])
        return idx[0].copy()
    ix, _, _ = axis_stencil(spec, 0, x[:1])
    iy, _, _ = axis_stencil(spec, 1, x[1:2])
    ny = spec.nodes[1]
    return (ix[0][:, None] * ny + iy[0][None, :]).ravel()
