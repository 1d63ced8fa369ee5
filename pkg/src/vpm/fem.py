"""Finite-element operators on the grid: mass and Helmholtz matrices.

The nodal basis N_k is piecewise linear (hat functions), tensor-product
bilinear in 2D, on the same periodic grid as the interpolation basis.
All element integrals are closed-form, so assembled entries are exact.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

from .errors import SolverError


class FEBasisKind(enum.Enum):
    PIECEWISE_LINEAR = "linear"


@dataclass
class SymmetricSparseOperator:
    """Symmetric positive-definite sparse matrix acting per component.

    The scalar matrix is applied identically to each of the d components
    of a grid field, i.e. matvec maps (n_g, c) -> (n_g, c).
    """

    spec: object
    matrix: sp.csr_matrix
    name: str = ""
    _diag: np.ndarray = field(default=None, repr=False)

    @property
    def n(self):
        return self.matrix.shape[0]

    def matvec(self, x):
        return self.matrix @ np.asarray(x, dtype=float)

    def diagonal(self):
        if self._diag is None:
            self._diag = self.matrix.diagonal()
        return self._diag

    def dense(self):
        return self.matrix.toarray()

    def dump_coo(self, stream):
        """Write entries as 'row col value' text lines (debug aid)."""
        coo = self.matrix.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            stream.write(f"{r} {c} {float(v)!r}\n")


def _periodic_band_1d(n, diag, off):
    """Circulant tridiagonal matrix with periodic corner entries."""
    main = np.full(n, diag)
    side = np.full(n - 1, off)
    corner = np.array([off])
    return sp.diags(
        [main, side, side, corner, corner],
        [0, 1, -1, n - 1, -(n - 1)],
        format="csr",
    )


def _mass_1d(n, h):
    return _periodic_band_1d(n, 2.0 * h / 3.0, h / 6.0)


def _stiffness_1d(n, h):
    return _periodic_band_1d(n, 2.0 / h, -1.0 / h)


def assemble_mass(spec, fe=FEBasisKind.PIECEWISE_LINEAR):
    """Mass matrix M_kl = integral of N_k N_l over the periodic box."""
    if fe is not FEBasisKind.PIECEWISE_LINEAR:
        raise ValueError(f"unsupported finite-element basis {fe}")
    if spec.dim == 1:
        m = _mass_1d(spec.nodes[0], spec.spacing[0])
    else:
        mx = _mass_1d(spec.nodes[0], spec.spacing[0])
        my = _mass_1d(spec.nodes[1], spec.spacing[1])
        m = sp.kron(mx, my, format="csr")
    return SymmetricSparseOperator(spec, m, name="mass")


def assemble_helmholtz(spec, fe=FEBasisKind.PIECEWISE_LINEAR, alpha=1.0):
    """Helmholtz matrix H = M + alpha^2 S with S the stiffness matrix."""
    if fe is not FEBasisKind.PIECEWISE_LINEAR:
        raise ValueError(f"unsupported finite-element basis {fe}")
    alpha = float(alpha)
    if alpha < 0.0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    a2 = alpha * alpha
    if spec.dim == 1:
        n, h = spec.nodes[0], spec.spacing[0]
        hmat = _periodic_band_1d(n, 2.0 * h / 3.0 + a2 * 2.0 / h, h / 6.0 - a2 / h)
    else:
        mx = _mass_1d(spec.nodes[0], spec.spacing[0])
        my = _mass_1d(spec.nodes[1], spec.spacing[1])
        sx = _stiffness_1d(spec.nodes[0], spec.spacing[0])
        sy = _stiffness_1d(spec.nodes[1], spec.spacing[1])
        hmat = (sp.kron(mx, my) + a2 * (sp.kron(sx, my) + sp.kron(mx, sy))).tocsr()
    return SymmetricSparseOperator(spec, hmat, name="helmholtz")


@njit(cache=True)
def _pcg_kernel(indptr, indices, data, bm, x, inv_diag, targets, maxiter):
    """Jacobi-PCG on a CSR matrix, columns of bm solved jointly.

    x is updated in place (warm start on entry).  Returns the worst
    relative-to-target residual ratio over still-active columns (<= 1 on
    full convergence).  Serial and deterministic.
    """
    n, c = bm.shape
    r = np.empty((n, c))
    # r = b - A x
    for i in range(n):
        for k in range(c):
            acc = 0.0
            for jj in range(indptr[i], indptr[i + 1]):
                acc += data[jj] * x[indices[jj], k]
            r[i, k] = bm[i, k] - acc

    active = np.zeros(c, dtype=np.bool_)
    for k in range(c):
        acc = 0.0
        for i in range(n):
            acc += r[i, k] * r[i, k]
        active[k] = np.sqrt(acc) > targets[k]

    z = np.empty((n, c))
    p = np.zeros((n, c))
    rz = np.zeros(c)
    for k in range(c):
        if active[k]:
            acc = 0.0
            for i in range(n):
                z[i, k] = inv_diag[i] * r[i, k]
                p[i, k] = z[i, k]
                acc += r[i, k] * z[i, k]
            rz[k] = acc

    Ap = np.empty((n, c))
    it = 0
    while it < maxiter:
        any_active = False
        for k in range(c):
            if active[k]:
                any_active = True
        if not any_active:
            break
        for i in range(n):
            for k in range(c):
                if active[k]:
                    acc = 0.0
                    for jj in range(indptr[i], indptr[i + 1]):
                        acc += data[jj] * p[indices[jj], k]
                    Ap[i, k] = acc
        for k in range(c):
            if not active[k]:
                continue
            pAp = 0.0
            for i in range(n):
                pAp += p[i, k] * Ap[i, k]
            if pAp <= 0.0:
                active[k] = False
                continue
            alpha = rz[k] / pAp
            rnorm2 = 0.0
            for i in range(n):
                x[i, k] += alpha * p[i, k]
                r[i, k] -= alpha * Ap[i, k]
                rnorm2 += r[i, k] * r[i, k]
            if np.sqrt(rnorm2) <= targets[k]:
                # replace the recursive residual by the true one before
                # accepting convergence; restart the direction if it is
                # not actually there yet
                tnorm2 = 0.0
                for i in range(n):
                    acc = 0.0
                    for jj in range(indptr[i], indptr[i + 1]):
                        acc += data[jj] * x[indices[jj], k]
                    r[i, k] = bm[i, k] - acc
                    tnorm2 += r[i, k] * r[i, k]
                if np.sqrt(tnorm2) <= targets[k]:
                    active[k] = False
                    continue
                for i in range(n):
                    z[i, k] = inv_diag[i] * r[i, k]
                    p[i, k] = z[i, k]
                rz[k] = 0.0
                for i in range(n):
                    rz[k] += r[i, k] * z[i, k]
                continue
            rz_new = 0.0
            for i in range(n):
                z[i, k] = inv_diag[i] * r[i, k]
                rz_new += r[i, k] * z[i, k]
            beta = rz_new / rz[k] if rz[k] > 0.0 else 0.0
            for i in range(n):
                p[i, k] = z[i, k] + beta * p[i, k]
            rz[k] = rz_new
        it += 1

    worst = 0.0
    for k in range(c):
        acc = 0.0
        for i in range(n):
            s = 0.0
            for jj in range(indptr[i], indptr[i + 1]):
                s += data[jj] * x[indices[jj], k]
            d = bm[i, k] - s
            acc += d * d
        if targets[k] > 0.0:
            ratio = np.sqrt(acc) / targets[k]
            if ratio > worst:
                worst = ratio
    return worst


def solve_spd(A, b, tol=1e-12, x0=None, maxiter=None):
    """Solve A x = b with Jacobi-preconditioned conjugate gradients.

    A: SymmetricSparseOperator (SPD).
    b: right-hand side, shape (n,) or (n, c); columns are solved jointly.
    tol: relative residual target, required in (0, 1e-6].
    x0: optional warm start with the same shape as b.
    maxiter: iteration cap, defaults to 10 * n.

    Returns x with norm(A x - b) <= tol * norm(b) per column (columns with
    b = 0 return exactly zero).  Raises SolverError on non-convergence,
    carrying the worst relative residual achieved.
    """
    if not 0.0 < tol <= 1e-6:
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol}")
    b = np.asarray(b, dtype=float)
    single = b.ndim == 1
    bm = np.ascontiguousarray(b[:, None] if single else b)
    n, c = bm.shape
    if maxiter is None:
        maxiter = 10 * n

    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError(
            f"matrix '{A.name}' has a nonpositive diagonal entry; not SPD"
        )
    inv_diag = 1.0 / diag
    norm_b = np.linalg.norm(bm, axis=0)
    targets = tol * norm_b

    if x0 is not None:
        x = np.array(x0, dtype=float, copy=True).reshape(n, c)
        x = np.ascontiguousarray(x)
    else:
        x = np.zeros((n, c))
    x[:, norm_b == 0.0] = 0.0

    mat = A.matrix
    worst = _pcg_kernel(
        mat.indptr, mat.indices, mat.data, bm, x, inv_diag, targets, maxiter
    )
    if worst > 1.0:
        raise SolverError(
            f"PCG did not reach tol={tol:g} within {maxiter} iterations "
            f"(residual {worst * tol:.3e})",
            residual=worst * tol,
        )
    return x[:, 0] if single else x
