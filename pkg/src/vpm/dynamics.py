"""Time evolution: symplectic Euler-A stepping of the particle-mesh system.

One step advances (Q, P, J, u) through the coupled update

    H u' = Psi(Q)^T P'                      (velocity from new momenta)
    (I + dt A_b) P'_b = P_b                 (implicit momentum update)
    Q' = Q + dt Psi(Q) u'                   (explicit position update)
    J'_b = (I + dt A_b^T) J_b               (line-element transport)

with per-particle matrices A_b[i, j] = sum_k d_i psi_k(Q_b) u'_{k, j}.
The first two relations are solved jointly by fixed-point iteration.
Using the transpose of the same A in the J update makes the per-particle
product J^T P invariant under a step in exact arithmetic, so the
relabelling momentum and discrete circulation are conserved to round-off
independently of the fixed-point tolerance.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InitializationError, SolverError, StepError
from .fem import SymmetricSparseOperator, solve_spd
from .transfer import GridField, ParticleSet, TransferOperators

DET_GUARD = 1e-12


@dataclass(frozen=True)
class StepParams:
    """Time step size and the tolerances of the coupled solve.

    The fixed point measures the relative change of u between sweeps,
    which cannot contract below the solution noise of the inner solves,
    roughly cond(H) * pcg_tol.  The defaults keep fp_tol above that
    noise for practically conditioned operators; conservation of the
    relabelling momentum does not depend on either tolerance, and the
    fixed-point error sits far below the O(dt) truncation error.
    """

    dt: float
    fp_tol: float = 1e-8
    fp_maxiter: int = 200
    pcg_tol: float = 1e-12

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass
class SimState:
    """Snapshot of a trajectory: particles plus cached grid fields.

    Invariants (up to solver tolerance): H u = Psi(Q_prev)^T P and
    M m = H u, where Q_prev are the positions the momenta were last
    scattered from (Q itself at t = 0).
    """

    t: float
    step: int
    particles: ParticleSet
    u: GridField
    m: GridField
    fp_iterations: int = 0
    fp_residual: float = 0.0


def _solve_implicit_momentum(A, dt, P):
    """Solve (I + dt A_b) P'_b = P_b per particle, closed form for d <= 2."""
    d = P.shape[1]
    if d == 1:
        det = 1.0 + dt * A[:, 0, 0]
        if np.any(det <= DET_GUARD):
            raise StepError(
                f"singular momentum update: min det {det.min():.3e} <= {DET_GUARD:g}"
            )
        return P / det[:, None]
    m00 = 1.0 + dt * A[:, 0, 0]
    m01 = dt * A[:, 0, 1]
    m10 = dt * A[:, 1, 0]
    m11 = 1.0 + dt * A[:, 1, 1]
    det = m00 * m11 - m01 * m10
    if np.any(det <= DET_GUARD):
        raise StepError(
            f"singular momentum update: min det {det.min():.3e} <= {DET_GUARD:g}"
        )
    out = np.empty_like(P)
    out[:, 0] = (m11 * P[:, 0] - m01 * P[:, 1]) / det
    out[:, 1] = (-m10 * P[:, 0] + m00 * P[:, 1]) / det
    return out


def make_state(particles, H, M, t=0.0, step=0, pcg_tol=1e-12):
    """Build a consistent SimState from particle data alone."""
    ops = TransferOperators(H.spec, particles.Q)
    b = ops.scatter_raw(particles.P)
    u = solve_spd(H, b, tol=pcg_tol)
    m = solve_spd(M, b, tol=pcg_tol)
    return SimState(
        t=t,
        step=step,
        particles=particles,
        u=GridField(H.spec, u),
        m=GridField(M.spec, m),
    )


def initialize_from_velocity(u0, Q0, H, M, pcg_tol=1e-12, residual_tol=1e-8):
    """Particle momenta reproducing a grid velocity field.

    Returns the minimum-norm P with Psi(Q0)^T P = H u0, computed through
    the normal equations of the transfer matrix; falls back to a tiny
    Tikhonov shift if the particle configuration is rank deficient.
    Jacobians start at the identity and weights at one.
    """
    spec = H.spec
    Q0 = spec.wrap(np.asarray(Q0, dtype=float))
    ops = TransferOperators(spec, Q0)
    b = H.matvec(u0.values)
    gram_mat = (ops.psi_t @ ops.psi).tocsr()
    gram = SymmetricSparseOperator(spec, gram_mat, name="transfer gram")
    try:
        lam = solve_spd(gram, b, tol=pcg_tol)
    except SolverError:
        ridge = gram_mat + 1e-12 * gram_mat.diagonal().max() * sp.eye(
            spec.n_g, format="csr"
        )
        gram = SymmetricSparseOperator(spec, ridge.tocsr(), name="transfer gram (ridge)")
        try:
            lam = solve_spd(gram, b, tol=pcg_tol)
        except SolverError as e:
            raise InitializationError(
                f"momentum fit is infeasible on this particle set: {e}",
                residual=e.residual,
            ) from e
    P = ops.psi @ lam

    norm_b = np.linalg.norm(b)
    if norm_b > 0.0:
        rel = np.linalg.norm(ops.scatter_raw(P) - b) / norm_b
        if not rel <= residual_tol:  # catches NaN as well
            raise InitializationError(
                f"momentum fit residual {rel:.3e} exceeds {residual_tol:g}",
                residual=rel,
            )
    else:
        P = np.zeros_like(P)
    n_p, d = Q0.shape
    return ParticleSet(
        Q=Q0,
        P=P,
        J=np.broadcast_to(np.eye(d), (n_p, d, d)).copy(),
        Dtilde=np.ones(n_p),
    )


def step(state, params, H, M):
    """Advance one time level; returns a new SimState.

    Raises StepError if the fixed-point iteration fails to contract within
    the cap (the caller may halve dt and retry) or a particle update
    turns singular.
    """
    spec = state.u.spec
    parts = state.particles
    ops = TransferOperators(spec, parts.Q)
    dt = params.dt

    u_iter = state.u.values
    A = None
    P_new = parts.P
    b = None
    converged = False
    delta = 0.0
    it = 0
    for it in range(1, params.fp_maxiter + 1):
        A = ops.grad(u_iter)
        P_new = _solve_implicit_momentum(A, dt, parts.P)
        b = ops.scatter_raw(P_new)
        u_next = solve_spd(H, b, tol=params.pcg_tol, x0=u_iter)
        scale = np.linalg.norm(u_next)
        delta = np.linalg.norm(u_next - u_iter) / (scale if scale > 0.0 else 1.0)
        u_iter = u_next
        if delta <= params.fp_tol:
            converged = True
            break
        # Particle momenta on compressing flanks grow like
        # exp(int |grad u| dt) with compensating sign cancellations, so
        # the scatter carries a round-off floor of eps times the
        # cancellation ratio; the sweep change cannot contract below it.
        norm_b = np.linalg.norm(b)
        if norm_b > 0.0:
            cancellation = np.linalg.norm(ops.scatter_raw(np.abs(P_new))) / norm_b
            if delta <= 32.0 * np.finfo(float).eps * cancellation:
                converged = True
                break
    if not converged:
        raise StepError(
            f"fixed point stalled at residual {delta:.3e} after {it} sweeps",
            iterations=it,
            residual=delta,
        )

    # J advances with the transpose of the A used in the final P solve,
    # which keeps J^T P exactly invariant.
    J_new = parts.J + dt * np.einsum("pli,plj->pij", A, parts.J)
    Q_new = spec.wrap(parts.Q + dt * ops.interp(u_iter))
    m_new = solve_spd(M, b, tol=params.pcg_tol, x0=state.m.values)

    return SimState(
        t=state.t + dt,
        step=state.step + 1,
        particles=ParticleSet(Q=Q_new, P=P_new, J=J_new, Dtilde=parts.Dtilde),
        u=GridField(spec, u_iter),
        m=GridField(spec, m_new),
        fp_iterations=it,
        fp_residual=delta,
    )


def advect_loop(points, u, dt):
    """Advance loop sample points through the interpolated velocity."""
    spec = u.spec
    points = spec.wrap(np.asarray(points, dtype=float))
    ops = TransferOperators(spec, points)
    return spec.wrap(points + dt * ops.interp(u.values))
