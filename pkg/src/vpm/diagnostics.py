"""Conserved quantities and structural diagnostics.

Pairings: grid fields pair through the mass matrix, <f, g>_g = f^T M g
(summed over components); particle quantities pair with the plain dot
sum, <F, G>_p = sum_b F_b . G_b.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MeasurementError
from .fem import solve_spd
from .transfer import (
    GridField,
    TransferOperators,
    divergence_on_grid,
    grid_density,
    interp_to_particles,
)


def grid_inner(f_vals, g_vals, M):
    """<f, g>_g = sum_kl f_k . M_kl g_l."""
    return float(np.vdot(M.matvec(np.asarray(f_vals, dtype=float)), g_vals))


def gnorm(r_vals, M):
    return np.sqrt(max(grid_inner(r_vals, r_vals, M), 0.0))


def hamiltonian(m, u, M):
    """Energy 1/2 <m, u>_g; equals 1/2 u^T H u when M m = H u."""
    return 0.5 * grid_inner(m.values, u.values, M)


def energy_from_velocity(u, H):
    """Energy evaluated directly as the velocity quadratic form."""
    return 0.5 * float(np.vdot(H.matvec(u.values), u.values))


def grid_momentum(u, H, M, tol=1e-12):
    """Momentum field m solving M m = H u."""
    return GridField(M.spec, solve_spd(M, H.matvec(u.values), tol=tol))


def ad_particle(u, w, Q):
    """Discrete bracket of two grid velocities at the particle points.

    (ad_u w)_b = [grad u]^P_b^T [w]^P_b - [grad w]^P_b^T [u]^P_b,
    the particle-sampled commutator that enters the constrained-variation
    identity; vanishes identically for w = u.
    """
    ops = TransferOperators(u.spec, Q)
    gu = ops.grad(u.values)
    gw = ops.grad(w.values)
    iu = ops.interp(u.values)
    iw = ops.interp(w.values)
    return np.einsum("pij,pi->pj", gu, iw) - np.einsum("pij,pi->pj", gw, iu)


def ad_star_grid(u, P, Q, M, tol=1e-12):
    """Grid representative of ad*_u m, dual to ad_particle in the g-pairing.

    Satisfies <ad*_u m, w>_g = <P, (ad_u w)>_p for every grid field w,
    where m is the momentum carried by (P, Q).  Returned as nodal values
    (n_g, d); apply the M-pairing to contract with velocities.
    """
    ops = TransferOperators(u.spec, Q)
    gu = ops.grad(u.values)
    iu = ops.interp(u.values)
    P = np.asarray(P, dtype=float)
    f1 = ops.scatter_raw(np.einsum("pij,pj->pi", gu, P))
    f2 = np.zeros_like(f1)
    for i, gt in enumerate(ops.grads_t):
        f2 += gt @ (iu[:, i : i + 1] * P)
    return solve_spd(M, f1 - f2, tol=tol)


def ep_residual(state_n, state_np1, dt, M):
    """Euler-Poincare defect |(m' - m)/dt + ad*_u m|_g of one step.

    Evaluated at the stepper's level pairing: u and P from the new state,
    particle positions from the old one.
    """
    adm = ad_star_grid(
        state_np1.u, state_np1.particles.P, state_n.particles.Q, M
    )
    r = (state_np1.m.values - state_n.m.values) / dt + adm
    return gnorm(r, M)


def right_momentum_map(P, J):
    """Per-particle relabelling momentum (J^R_b)_j = sum_i P_bi J_bij."""
    return np.einsum("pi,pij->pj", np.asarray(P, dtype=float), np.asarray(J, dtype=float))


@dataclass
class LoopDiagnostic:
    """Discrete circulation loop through a cyclic list of particles.

    indices orders the member particles along the loop; dx0 holds the
    initial line elements, transported later by each particle's Jacobian.
    """

    indices: np.ndarray
    dx0: np.ndarray

    @classmethod
    def from_particle_loop(cls, spec, particles, indices):
        """Line elements from the initial loop polygon, central differences.

        dx0_b = (Q0_{b+1} - Q0_{b-1})/2 with minimal-image differences,
        i.e. dgamma/ds * ds for the index parameterisation.
        """
        indices = np.asarray(indices, dtype=int)
        if indices.size < 3:
            raise ValueError("a loop needs at least 3 member particles")
        if np.unique(indices).size != indices.size:
            raise ValueError("loop particle indices must be distinct")
        Q = particles.Q[indices]
        nxt = np.roll(Q, -1, axis=0)
        prv = np.roll(Q, 1, axis=0)
        dx0 = np.empty_like(Q)
        for ax in range(Q.shape[1]):
            dx0[:, ax] = 0.5 * spec.signed_distance(nxt[:, ax], prv[:, ax], ax)
        return cls(indices=indices, dx0=dx0)


def circulation(loopdiag, particles):
    """Discrete loop integral I = sum_b (P_b / Dtilde_b) . (J_b dx0_b)."""
    idx = loopdiag.indices
    dt = particles.Dtilde[idx]
    if np.any(dt == 0.0):
        raise ZeroDivisionError("circulation undefined for zero particle weight")
    dx = np.einsum("pij,pj->pi", particles.J[idx], loopdiag.dx0)
    return float(np.sum(particles.P[idx] * dx / dt[:, None]))


def continuity_residual(state_n, state_np1, M):
    """Defect of the discretised continuity equation over one step."""
    dt = state_np1.t - state_n.t
    parts = state_n.particles
    d0 = grid_density(parts.Dtilde, parts.Q, M)
    d1 = grid_density(state_np1.particles.Dtilde, state_np1.particles.Q, M)
    iu = interp_to_particles(state_np1.u, parts.Q)
    flux = divergence_on_grid(iu * parts.Dtilde[:, None], parts.Q, M)
    r = (d1.values - d0.values) / dt + flux.values
    return gnorm(r, M)


def max_fe_gradient(field):
    """Largest elementwise nodal-difference derivative |du_j/dx_i|.

    For P1/bilinear elements the derivative along an axis is the nodal
    difference over the spacing, constant per element edge.
    """
    spec = field.spec
    cube = field.values.reshape(tuple(spec.nodes) + (field.ncomp,))
    worst = 0.0
    for axis in range(spec.dim):
        d = (np.roll(cube, -1, axis=axis) - cube) / spec.spacing[axis]
        worst = max(worst, float(np.abs(d).max()))
    return worst


# ---------------------------------------------------------------------------
# peak tracking


def _refined_peak(spec, vals, k):
    """Sub-grid peak position by quadratic fit over the 3-node stencil."""
    n = spec.nodes[0]
    y0, y1, y2 = vals[(k - 1) % n], vals[k], vals[(k + 1) % n]
    den = y0 - 2.0 * y1 + y2
    delta = 0.0 if den == 0.0 else 0.5 * (y0 - y2) / den
    delta = float(np.clip(delta, -0.5, 0.5))
    a, _ = spec.extents[0]
    return a + (k + delta) * spec.spacing[0]


def _peak_position(field, rank=0, exclusion=None):
    """Position of the rank-th tallest |u| peak (rank 1 masks the main one)."""
    spec = field.spec
    vals = np.abs(field.values[:, 0])
    k0 = int(np.argmax(vals))
    if rank == 0:
        return _refined_peak(spec, vals, k0)
    if exclusion is None:
        raise ValueError("rank > 0 requires an exclusion radius")
    x = spec.axis_coords(0)
    x0 = x[k0]
    masked = vals.copy()
    masked[np.abs(spec.signed_distance(x, x0, 0)) < exclusion] = 0.0
    k1 = int(np.argmax(masked))
    return _refined_peak(spec, vals, k1)


def _unwrap(positions, width):
    out = np.array(positions, dtype=float)
    for i in range(1, out.size):
        out[i] -= width * np.round((out[i] - out[i - 1]) / width)
    return out


def track_peak_positions(times, fields, window=None, rank=0, exclusion=None):
    """Unwrapped peak trajectory over a time window."""
    times = np.asarray(times, dtype=float)
    if window is not None:
        keep = (times >= window[0]) & (times <= window[1])
        times = times[keep]
        fields = [f for f, k in zip(fields, keep) if k]
    pos = np.array([_peak_position(f, rank=rank, exclusion=exclusion) for f in fields])
    if len(fields) > 0:
        pos = _unwrap(pos, fields[0].spec.widths[0])
    return times, pos


def measure_peakon_speed(times, fields, window):
    """Propagation speed of the dominant peak, least-squares over a window."""
    t, pos = track_peak_positions(times, fields, window=window)
    if t.size < 10:
        raise ValueError(f"need at least 10 samples in the window, got {t.size}")
    slope, _ = np.polyfit(t, pos, 1)
    return float(slope)


def _separated_peaks(field, min_separation):
    """Values/positions of local maxima of |u| above 20% of the global max."""
    vals = np.abs(field.values[:, 0])
    vmax = vals.max()
    up = vals > np.roll(vals, 1)
    down = vals >= np.roll(vals, -1)
    cand = np.where(up & down & (vals >= 0.2 * vmax))[0]
    spec = field.spec
    x = spec.axis_coords(0)
    order = np.argsort(vals[cand])[::-1]
    cand = cand[order]
    if cand.size >= 2:
        sep = abs(float(spec.signed_distance(x[cand[0]], x[cand[1]], 0)))
        if sep < min_separation:
            raise MeasurementError(
                f"peaks separated by {sep:.3g} < {min_separation:.3g}"
            )
    return cand


def measure_phase_shift(
    times_a, fields_a, times_b, fields_b, window, alpha, rank=0
):
    """Asymptotic position offset of a tracked peak between two runs.

    Fits position-vs-time lines to the rank-th peak of the collision run
    (series a) and the unperturbed run (series b) over the same window and
    returns the intercept difference.  Raises MeasurementError when the
    collision run's two leading peaks are closer than 4 alpha anywhere in
    the window.
    """
    min_sep = 4.0 * alpha
    ta = np.asarray(times_a, dtype=float)
    in_win = (ta >= window[0]) & (ta <= window[1])
    for f, k in zip(fields_a, in_win):
        if k:
            _separated_peaks(f, min_sep)
    ta, pa = track_peak_positions(
        times_a, fields_a, window=window, rank=rank,
        exclusion=min_sep if rank else None,
    )
    tb, pb = track_peak_positions(times_b, fields_b, window=window)
    if ta.size < 10 or tb.size < 10:
        raise ValueError("need at least 10 samples in the window")
    # fit in window-centered time so the intercept difference is not
    # amplified by extrapolation outside the window
    t_mid = 0.5 * (window[0] + window[1])
    sa, ia = np.polyfit(ta - t_mid, pa, 1)
    sb, ib = np.polyfit(tb - t_mid, pb, 1)
    width = fields_a[0].spec.widths[0]
    shift = ia - ib
    # unwrapping of the two runs may differ by whole periods
    shift -= width * np.round(shift / width)
    return float(shift)


# ---------------------------------------------------------------------------
# CSV emission

DIAG_COLUMNS = ("step", "t", "energy", "ep_residual", "continuity_residual",
                "jr_min", "jr_max")


def diagnostics_header(loop_names=()):
    return ",".join(DIAG_COLUMNS + tuple(f"circ_{n}" for n in loop_names))


def diagnostics_row(step, t, energy, ep_res, cont_res, jr, circulations=()):
    jr_min = float(np.min(jr))
    jr_max = float(np.max(jr))
    cells = [str(step), repr(float(t)), repr(float(energy)),
             repr(float(ep_res)), repr(float(cont_res)),
             repr(jr_min), repr(jr_max)]
    cells += [repr(float(c)) for c in circulations]
    return ",".join(cells)
