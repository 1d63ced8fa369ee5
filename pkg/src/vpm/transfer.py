"""Grid/particle transfer operators and the left momentum map.

Gather operations interpolate grid data to particles through the
partition-of-unity basis; scatter operations build grid densities from
particle weights, with the mass matrix resolving the dual pairing:

    [f]^P_b      = sum_k f_k psi_k(Q_b)
    [grad f]^P_b = sum_k f_k grad psi_k(Q_b)
    [g]^G        = M^{-1} Psi^T g
    [div g]^G    = -M^{-1} sum_i G_i^T g_i
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .basis import axis_stencil
from .fem import solve_spd


@dataclass
class GridField:
    """Nodal values of a vector (or scalar) field, shape (n_g, c)."""

    spec: object
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != self.spec.n_g:
            raise ValueError(
                f"field has {vals.shape[0]} rows, grid has {self.spec.n_g} nodes"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        self.values = vals

    @property
    def ncomp(self):
        return self.values.shape[1]

    @classmethod
    def zeros(cls, spec, ncomp=None):
        return cls(spec, np.zeros((spec.n_g, ncomp or spec.dim)))

    @classmethod
    def constant(cls, spec, vec):
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        return cls(spec, np.tile(vec, (spec.n_g, 1)))


@dataclass
class ParticleSet:
    """Lagrangian particles: positions Q, momenta P, Jacobians J, weights Dtilde."""

    Q: np.ndarray
    P: np.ndarray
    J: np.ndarray
    Dtilde: np.ndarray

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        self.J = np.asarray(self.J, dtype=float)
        self.Dtilde = np.asarray(self.Dtilde, dtype=float)
        n_p, d = self.Q.shape
        if self.P.shape != (n_p, d):
            raise ValueError("P shape mismatch")
        if self.J.shape != (n_p, d, d):
            raise ValueError("J shape mismatch")
        if self.Dtilde.shape != (n_p,):
            raise ValueError("Dtilde shape mismatch")

    @property
    def n_p(self):
        return self.Q.shape[0]

    @property
    def dim(self):
        return self.Q.shape[1]

    @classmethod
    def at_rest(cls, Q):
        """Particles at positions Q with zero momentum, identity Jacobian, unit weight."""
        Q = np.asarray(Q, dtype=float)
        n_p, d = Q.shape
        return cls(
            Q=Q,
            P=np.zeros((n_p, d)),
            J=np.broadcast_to(np.eye(d), (n_p, d, d)).copy(),
            Dtilde=np.ones(n_p),
        )


class TransferOperators:
    """Cached sparse stencil matrices for a fixed particle configuration.

    psi is the n_p x n_g interpolation matrix with psi[b, k] = psi_k(Q_b);
    grads[i] holds the i-th gradient component of the same stencils.
    """

    def __init__(self, spec, Q):
        Q = spec.wrap(np.asarray(Q, dtype=float))
        if Q.ndim == 1:
            Q = Q[:, None]
        self.spec = spec
        self.Q = Q
        n_p, d = Q.shape
        n_g = spec.n_g
        if d == 1:
            idx, w, dw = axis_stencil(spec, 0, Q[:, 0])
            stencil = 4
            cols = idx.ravel()
            psi_data = w.ravel()
            grad_data = [dw.ravel()]
        else:
            ix, wx, dwx = axis_stencil(spec, 0, Q[:, 0])
            iy, wy, dwy = axis_stencil(spec, 1, Q[:, 1])
            ny = spec.nodes[1]
            stencil = 16
            cols = (ix[:, :, None] * ny + iy[:, None, :]).reshape(-1)
            psi_data = (wx[:, :, None] * wy[:, None, :]).reshape(-1)
            grad_data = [
                (dwx[:, :, None] * wy[:, None, :]).reshape(-1),
                (wx[:, :, None] * dwy[:, None, :]).reshape(-1),
            ]
        # rows come pre-grouped by particle, so the CSR structure is direct
        indptr = np.arange(0, (n_p + 1) * stencil, stencil, dtype=np.int64)
        shape = (n_p, n_g)
        self.psi = sp.csr_matrix((psi_data, cols, indptr), shape=shape)
        self.grads = tuple(
            sp.csr_matrix((g, cols, indptr), shape=shape) for g in grad_data
        )

    @property
    def psi_t(self):
        return self.psi.T

    @property
    def grads_t(self):
        return tuple(g.T for g in self.grads)

    def interp(self, f_vals):
        """[f]^P: (n_g, c) -> (n_p, c)."""
        return self.psi @ np.asarray(f_vals, dtype=float)

    def grad(self, f_vals):
        """[grad f]^P: (n_g, c) -> (n_p, d, c) with entry [b, i, j] = d_i f_j."""
        f_vals = np.asarray(f_vals, dtype=float)
        return np.stack([g @ f_vals for g in self.grads], axis=1)

    def scatter_raw(self, g):
        """Psi^T g without the mass-matrix inverse: (n_p, c) -> (n_g, c)."""
        return self.psi_t @ np.asarray(g, dtype=float)

    def divergence_raw(self, g):
        """-sum_i G_i^T g_i for per-particle vectors g (n_p, d) -> (n_g,)."""
        g = np.asarray(g, dtype=float)
        out = np.zeros(self.spec.n_g)
        for i, gt in enumerate(self.grads_t):
            out -= gt @ g[:, i]
        return out


def interp_to_particles(f, Q):
    """Field values at particle positions, shape (n_p, ncomp)."""
    return TransferOperators(f.spec, Q).interp(f.values)


def grad_at_particles(f, Q):
    """Field gradient at particle positions, shape (n_p, dim, ncomp)."""
    return TransferOperators(f.spec, Q).grad(f.values)


def scatter_density(g, Q, M, tol=1e-12):
    """Grid density [g]^G solving M [g]^G = Psi^T g."""
    g = np.asarray(g, dtype=float)
    ops = TransferOperators(M.spec, Q)
    raw = ops.scatter_raw(g if g.ndim > 1 else g[:, None])
    return GridField(M.spec, solve_spd(M, raw, tol=tol))


def divergence_on_grid(g, Q, M, tol=1e-12):
    """Discrete divergence of a particle vector distribution (scalar field)."""
    ops = TransferOperators(M.spec, Q)
    raw = ops.divergence_raw(g)
    return GridField(M.spec, solve_spd(M, raw, tol=tol))


def left_momentum_map(P, Q, spec):
    """Grid covector J^L_k = sum_b P_b psi_k(Q_b), shape (n_g, d)."""
    ops = TransferOperators(spec, Q)
    return ops.scatter_raw(np.asarray(P, dtype=float))


def velocity_from_particles(P, Q, H, tol=1e-12, x0=None):
    """Grid velocity solving H u = J^L(P, Q) per component."""
    jl = left_momentum_map(P, Q, H.spec)
    return GridField(H.spec, solve_spd(H, jl, tol=tol, x0=x0))


def grid_density(Dtilde, Q, M, tol=1e-12):
    """Density field carried by constant particle weights."""
    return scatter_density(np.asarray(Dtilde, dtype=float)[:, None], Q, M, tol=tol)
