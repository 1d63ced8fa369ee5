"""Command-line entry point: run, converge, diagnose."""

import argparse
import json
import os
import re
import sys

import numpy as np

from .config import load_config, parse_config
from .diagnostics import hamiltonian, right_momentum_map
from .errors import VpmError, ConfigError
from .runner import build_operators, convergence_study, run
from .snapshots import read_field_snapshot, read_particle_snapshot
from .transfer import GridField


def _cmd_run(args):
    config = load_config(args.config)
    out = run(config, output_dir=args.output_dir)
    last = out.final_state
    print(
        f"completed {last.step} steps to t={last.t:g}; "
        f"energy {out.energies[-1]:.12g}"
    )
    if out.csv_path:
        print(f"diagnostics: {out.csv_path}")
    return 0


def _cmd_converge(args):
    config = load_config(args.config)
    resolutions = [float(r) for r in args.resolutions.split(",")]
    window = None
    if args.window:
        lo, hi = args.window.split(",")
        window = (float(lo), float(hi))
    result = convergence_study(config, resolutions, args.observable, window=window)
    print(result.to_text())
    return 0


def _load_csv(path):
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    data = {name: np.array([float(r[i]) for r in rows]) for i, name in enumerate(header)}
    return header, data


def _cmd_diagnose(args):
    meta_path = os.path.join(args.snapshot_dir, "metadata.json")
    with open(meta_path, "r", encoding="utf-8") as f:
        metadata = json.load(f)
    config = parse_config(metadata["config"])
    spec, M, H = build_operators(config)
    _, csv = _load_csv(os.path.join(args.snapshot_dir, "diagnostics.csv"))

    failures = []
    steps = [int(s) for s in csv["step"]]
    pattern = re.compile(r"field_u_(\d{6})\.vpm$")
    available = sorted(
        int(pattern.search(f).group(1))
        for f in os.listdir(args.snapshot_dir)
        if pattern.search(f)
    )
    checked = 0
    for row, step_no in enumerate(steps):
        if step_no not in available:
            continue
        tag = f"{step_no:06d}"
        _, u_vals, _ = read_field_snapshot(
            os.path.join(args.snapshot_dir, f"field_u_{tag}.vpm"), spec
        )
        _, m_vals, _ = read_field_snapshot(
            os.path.join(args.snapshot_dir, f"field_m_{tag}.vpm"), spec
        )
        _, parts = read_particle_snapshot(
            os.path.join(args.snapshot_dir, f"particles_{tag}.vpm")
        )
        energy = hamiltonian(GridField(spec, m_vals), GridField(spec, u_vals), M)
        logged = csv["energy"][row]
        scale = max(abs(logged), 1e-300)
        if abs(energy - logged) / scale > 1e-12:
            failures.append(
                f"step {step_no}: energy mismatch {energy!r} vs logged {logged!r}"
            )
        jr = right_momentum_map(parts.P, parts.J)
        if jr.size and (
            abs(float(jr.min()) - csv["jr_min"][row]) > 1e-12 * max(1, abs(csv["jr_min"][row]))
            or abs(float(jr.max()) - csv["jr_max"][row]) > 1e-12 * max(1, abs(csv["jr_max"][row]))
        ):
            failures.append(f"step {step_no}: relabelling momentum mismatch")
        checked += 1

    print(f"checked {checked} snapshots against {len(steps)} CSV rows")
    if failures:
        for msg in failures:
            print("FAIL " + msg)
        return 1
    print("all recomputed diagnostics match the log")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="vpm",
        description="Variational particle-mesh solver for the EPDiff equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_conv = sub.add_parser("converge", help="resolution convergence study")
    p_conv.add_argument("config")
    p_conv.add_argument("--observable", required=True,
                        choices=("peakon_speed", "phase_shift"))
    p_conv.add_argument("--resolutions", required=True,
                        help="comma-separated grid points per alpha")
    p_conv.add_argument("--window", default=None,
                        help="measurement window 't0,t1' (default second half)")
    p_conv.set_defaults(func=_cmd_converge)

    p_diag = sub.add_parser("diagnose", help="re-check diagnostics from snapshots")
    p_diag.add_argument("snapshot_dir")
    p_diag.set_defaults(func=_cmd_diagnose)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (VpmError, ConfigError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
