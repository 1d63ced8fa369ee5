"""Experiment driver: particle seeding, time loop, outputs, convergence studies."""

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import SimConfig, serialize_config
from .diagnostics import (
    LoopDiagnostic,
    circulation,
    continuity_residual,
    diagnostics_header,
    diagnostics_row,
    ep_residual,
    hamiltonian,
    measure_peakon_speed,
    measure_phase_shift,
    right_momentum_map,
)
from .dynamics import SimState, StepParams, initialize_from_velocity, make_state, step
from .errors import ConfigError, StepError
from .fem import assemble_helmholtz, assemble_mass
from .ics import build_ic
from .snapshots import (
    write_field_csv,
    write_field_snapshot,
    write_particle_csv,
    write_particle_snapshot,
)
from .transfer import GridField


def lattice_positions(spec, per_axis=2, jitter=0.0, seed=0):
    """Uniform particle lattice, per_axis particles per cell per axis.

    Optional jitter displaces each particle by up to jitter*h (seeded).
    """
    counts = [per_axis * n for n in spec.nodes]
    axes = []
    for (a, b), c in zip(spec.extents, counts):
        stepw = (b - a) / c
        axes.append(a + stepw * (np.arange(c) + 0.5))
    if spec.dim == 1:
        q = axes[0][:, None]
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        q = np.stack([gx.ravel(), gy.ravel()], axis=1)
    if jitter > 0.0:
        rng = np.random.default_rng(seed)
        h = np.array(spec.spacing)
        q = q + jitter * h[None, :] * rng.uniform(-1.0, 1.0, size=q.shape)
    return spec.wrap(q)


def register_circle_loop(spec, particles, loop_spec):
    """LoopDiagnostic through the particles nearest to a sample circle."""
    theta = 2.0 * np.pi * np.arange(loop_spec.npoints) / loop_spec.npoints
    pts = np.stack(
        [
            loop_spec.cx + loop_spec.radius * np.cos(theta),
            loop_spec.cy + loop_spec.radius * np.sin(theta),
        ],
        axis=1,
    )
    pts = spec.wrap(pts)
    indices = []
    for p in pts:
        d2 = np.zeros(particles.n_p)
        for ax in range(spec.dim):
            d2 += spec.signed_distance(particles.Q[:, ax], p[ax], ax) ** 2
        indices.append(int(np.argmin(d2)))
    # drop repeats while keeping loop order
    unique = []
    for i in indices:
        if i not in unique:
            unique.append(i)
    if len(unique) < 3:
        raise ConfigError(
            f"loop '{loop_spec.name}' resolves to fewer than 3 distinct particles"
        )
    return LoopDiagnostic.from_particle_loop(spec, particles, np.array(unique))


@dataclass
class RunOutput:
    config: SimConfig
    times: np.ndarray
    fields: list  # velocity values (n_g, d) per sample
    energies: np.ndarray
    ep_residuals: np.ndarray
    continuity_residuals: np.ndarray
    jr_min: np.ndarray
    jr_max: np.ndarray
    circulations: dict
    final_state: SimState
    csv_path: str = ""
    metadata: dict = field(default_factory=dict)
    snapshot_files: list = field(default_factory=list)

    def field_series(self):
        spec = self.config.grid_spec()
        return [GridField(spec, v) for v in self.fields]


def build_operators(config):
    spec = config.grid_spec()
    return spec, assemble_mass(spec, config.fe), assemble_helmholtz(
        spec, config.fe, config.alpha
    )


def run(config, output_dir=None):
    """Execute a configured experiment; returns in-memory diagnostics.

    When an output directory is given (argument or config), writes the
    diagnostics CSV, snapshots at every sample time and a metadata record
    sufficient to reproduce the run.
    """
    t_start = time.perf_counter()
    spec, M, H = build_operators(config)
    u0 = build_ic(spec, config.alpha, config.ic_name, config.ic_dict())
    q0 = lattice_positions(
        spec, config.particles_per_axis, config.jitter, config.seed
    )
    particles = initialize_from_velocity(u0, q0, H, M, pcg_tol=config.pcg_tol)
    state = make_state(particles, H, M, pcg_tol=config.pcg_tol)
    params = StepParams(
        dt=config.dt,
        fp_tol=config.fp_tol,
        fp_maxiter=config.fp_maxiter,
        pcg_tol=config.pcg_tol,
    )

    loops = {
        ls.name: register_circle_loop(spec, particles, ls) for ls in config.loops
    }

    out_dir = output_dir or (config.output_dir or None)
    csv_file = None
    csv_path = ""
    snapshot_files = []
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "diagnostics.csv")
        csv_file = open(csv_path, "w", encoding="utf-8")
        csv_file.write(diagnostics_header(sorted(loops)) + "\n")

    times, fields, energies = [], [], []
    ep_list, cont_list, jrmin_list, jrmax_list = [], [], [], []
    circ_lists = {name: [] for name in loops}

    def snapshot(st):
        if not out_dir or config.snapshot_format == "none":
            return
        tag = f"{st.step:06d}"
        if config.snapshot_format == "binary":
            fu = os.path.join(out_dir, f"field_u_{tag}.vpm")
            fm = os.path.join(out_dir, f"field_m_{tag}.vpm")
            fp = os.path.join(out_dir, f"particles_{tag}.vpm")
            write_field_snapshot(fu, st.u, st.t)
            write_field_snapshot(fm, st.m, st.t)
            write_particle_snapshot(fp, st.particles, st.t)
        else:
            fu = os.path.join(out_dir, f"field_u_{tag}.csv")
            fm = os.path.join(out_dir, f"field_m_{tag}.csv")
            fp = os.path.join(out_dir, f"particles_{tag}.csv")
            write_field_csv(fu, st.u, st.t)
            write_field_csv(fm, st.m, st.t)
            write_particle_csv(fp, st.particles, st.t)
        snapshot_files.extend([fu, fm, fp])

    def emit(prev, st):
        energy = hamiltonian(st.m, st.u, M)
        ep = ep_residual(prev, st, params.dt, M) if prev is not None else float("nan")
        cont = continuity_residual(prev, st, M) if prev is not None else float("nan")
        jr = right_momentum_map(st.particles.P, st.particles.J)
        circs = [circulation(loops[name], st.particles) for name in sorted(loops)]
        times.append(st.t)
        fields.append(st.u.values.copy())
        energies.append(energy)
        ep_list.append(ep)
        cont_list.append(cont)
        jrmin_list.append(float(jr.min()) if jr.size else 0.0)
        jrmax_list.append(float(jr.max()) if jr.size else 0.0)
        for name, val in zip(sorted(loops), circs):
            circ_lists[name].append(val)
        if csv_file is not None:
            csv_file.write(
                diagnostics_row(st.step, st.t, energy, ep, cont, jr, circs) + "\n"
            )
        snapshot(st)

    n_steps = int(round(config.t_end / config.dt)) if config.t_end > 0 else 0
    sample_every = max(1, int(round(config.sample_interval / config.dt)))

    emit(None, state)
    try:
        prev = state
        for i in range(1, n_steps + 1):
            new_state = step(prev, params, H, M)
            if i % sample_every == 0 or i == n_steps:
                emit(prev, new_state)
            prev = new_state
    except StepError as e:
        if csv_file is not None:
            csv_file.close()
        raise StepError(
            f"step {prev.step + 1} (t={prev.t + config.dt:g}) failed: {e}",
            iterations=e.iterations,
            residual=e.residual,
        ) from e

    if csv_file is not None:
        csv_file.close()

    metadata = {
        "config": serialize_config(config),
        "version": __version__,
        "n_steps": n_steps,
        "wall_time_s": time.perf_counter() - t_start,
    }
    if out_dir:
        with open(os.path.join(out_dir, "metadata.json"), "w", encoding="utf-8") as f:
            json.dump(metadata, f, indent=2)

    return RunOutput(
        config=config,
        times=np.array(times),
        fields=fields,
        energies=np.array(energies),
        ep_residuals=np.array(ep_list),
        continuity_residuals=np.array(cont_list),
        jr_min=np.array(jrmin_list),
        jr_max=np.array(jrmax_list),
        circulations={k: np.array(v) for k, v in circ_lists.items()},
        final_state=prev if n_steps > 0 else state,
        csv_path=csv_path,
        metadata=metadata,
        snapshot_files=snapshot_files,
    )


# ---------------------------------------------------------------------------
# convergence studies

OBSERVABLES = ("peakon_speed", "phase_shift")


@dataclass
class ConvergenceRow:
    resolution: float  # grid points per alpha
    n_g: int
    dt: float
    value: float
    error: float


@dataclass
class ConvergenceResult:
    observable: str
    reference: float
    rows: list
    fitted_order: float
    reliable: bool
    notes: list

    def to_text(self):
        lines = [
            f"observable: {self.observable}   reference: {self.reference:.10g}",
            f"{'pts/alpha':>10} {'n_g':>8} {'dt':>12} {'value':>16} {'error':>12}",
        ]
        for r in self.rows:
            lines.append(
                f"{r.resolution:>10.4g} {r.n_g:>8d} {r.dt:>12.5g} "
                f"{r.value:>16.10g} {r.error:>12.5g}"
            )
        lines.append(
            f"fitted order: {self.fitted_order:.3f}   reliable: {self.reliable}"
        )
        for n in self.notes:
            lines.append(f"note: {n}")
        return "\n".join(lines)


def _scaled_config(base, resolution, **overrides):
    """Rescale node count and dt so resolution = points per alpha."""
    spec = base.grid_spec()
    width = spec.widths[0]
    h_base = spec.spacing[0]
    n_new = int(round(width * resolution / base.alpha))
    h_new = width / n_new
    changes = {
        "nodes": (n_new,) + tuple(base.nodes[1:]),
        "dt": base.dt * (h_new / h_base),
    }
    changes.update(overrides)
    return dataclasses.replace(base, **changes)


def _fit_order(resolutions, errors):
    """Slope of log error against log resolution (sign-flipped)."""
    res = np.asarray(resolutions, dtype=float)
    err = np.asarray(errors, dtype=float)
    ok = err > 0
    if ok.sum() < 2:
        return 0.0
    slope, _ = np.polyfit(np.log(res[ok]), np.log(err[ok]), 1)
    return float(-slope)


def _reliability(errors, notes):
    errors = np.asarray(errors, dtype=float)
    reliable = True
    if np.any(np.diff(errors) >= 0):
        notes.append("non-monotone error sequence")
        reliable = False
    if errors.max() <= 0 or (errors.min() > 0 and errors.max() / max(errors.min(), 1e-300) < 2.0):
        notes.append("errors at measurement floor; order fit unreliable")
        reliable = False
    return reliable


def _phase_shift_for_config(config, window, alpha):
    """Collision run and its unperturbed twin; returns the intercept shift."""
    p = config.ic_dict()
    single_params = tuple(sorted({"c": p["c1"], "x0": p["x1"]}.items()))
    single = dataclasses.replace(
        config, ic_name="single_peakon", ic_params=single_params
    )
    out_a = run(config)
    out_b = run(single)
    return measure_phase_shift(
        out_a.times, out_a.field_series(),
        out_b.times, out_b.field_series(),
        window, alpha,
    )


def convergence_study(base_config, resolutions, observable, window=None):
    """Run a resolution sweep and fit the observed convergence order.

    resolutions are grid points per alpha (at least 3, increasing); dt is
    scaled proportionally to the grid spacing.  The reference value is
    2/3 for the first-peakon speed of the emergence data, the exact speed
    for a single-peakon run, and the Richardson extrapolant for the
    phase shift.
    """
    if observable not in OBSERVABLES:
        raise ConfigError(f"observable must be one of {OBSERVABLES}")
    if len(resolutions) < 3:
        raise ConfigError("need at least 3 resolutions")
    if window is None:
        window = (0.5 * base_config.t_end, base_config.t_end)
    notes = []
    values = []
    configs = [_scaled_config(base_config, r) for r in resolutions]
    for cfg in configs:
        out = run(cfg)
        if observable == "peakon_speed":
            values.append(measure_peakon_speed(out.times, out.field_series(), window))
        else:
            values.append(_phase_shift_for_config(cfg, window, cfg.alpha))

    values = np.array(values)
    if observable == "peakon_speed":
        if base_config.ic_name == "peakon_emergence":
            reference = 2.0 / 3.0
        elif base_config.ic_name == "single_peakon":
            reference = base_config.ic_dict()["c"]
        else:
            raise ConfigError(
                f"peakon_speed needs a peakon initial condition, got '{base_config.ic_name}'"
            )
        errors = np.abs(values - reference)
        fitted = _fit_order(resolutions, errors)
    else:
        d1 = values[-2] - values[-3]
        d2 = values[-1] - values[-2]
        if d1 == 0.0 or d2 == 0.0 or d1 * d2 <= 0.0:
            notes.append("Richardson differences not geometric; order undefined")
            reference = values[-1]
            errors = np.abs(values - reference)
            fitted = 0.0
        else:
            ratio = d1 / d2
            fitted = float(np.log2(ratio))
            reference = values[-1] + d2 / (ratio - 1.0)
            errors = np.abs(values - reference)

    reliable = _reliability(errors, notes)
    rows = [
        ConvergenceRow(
            resolution=r,
            n_g=cfg.nodes[0],
            dt=cfg.dt,
            value=float(v),
            error=float(e),
        )
        for r, cfg, v, e in zip(resolutions, configs, values, errors)
    ]
    return ConvergenceResult(
        observable=observable,
        reference=float(reference),
        rows=rows,
        fitted_order=fitted,
        reliable=reliable,
        notes=notes,
    )
