"""Initial velocity fields for the experiment suite."""

import numpy as np

from .errors import ConfigError
from .fem import assemble_helmholtz, assemble_mass
from .transfer import GridField

MIN_EMERGENCE_WIDTH_ALPHAS = 20.0


def ic_peakon_1d(spec, c, x0, alpha):
    """Single peakon profile u(x) = c exp(-dist(x, x0)/alpha)."""
    if spec.dim != 1:
        raise ConfigError("peakon initial data is one-dimensional")
    x = spec.axis_coords(0)
    d = np.abs(spec.signed_distance(x, x0, 0))
    return GridField(spec, c * np.exp(-d / alpha))


def ic_two_peakons_1d(spec, c1, x1, c2, x2, alpha):
    """Superposed pair of peakons (overtaking-collision initial data)."""
    u1 = ic_peakon_1d(spec, c1, x1, alpha)
    u2 = ic_peakon_1d(spec, c2, x2, alpha)
    return GridField(spec, u1.values + u2.values)


def emergence_profile(x):
    """Smooth hump that sheds a train of peakons under the 1D flow."""
    x = np.asarray(x, dtype=float)
    return 0.5 * np.pi * np.exp(x) - 2.0 * np.sinh(x) * np.arctan(np.exp(x)) - 1.0


def ic_peakon_emergence_1d(spec, alpha=1.0, center=None):
    """Peakon-emergence initial data, shifted to the domain center.

    The profile decays to zero in both tails, so a domain at least
    20 alpha wide keeps the periodic seam smooth.
    """
    if spec.dim != 1:
        raise ConfigError("peakon-emergence initial data is one-dimensional")
    width = spec.widths[0]
    if width < MIN_EMERGENCE_WIDTH_ALPHAS * alpha:
        raise ConfigError(
            f"domain width {width:g} is narrower than "
            f"{MIN_EMERGENCE_WIDTH_ALPHAS:g} alpha = {MIN_EMERGENCE_WIDTH_ALPHAS * alpha:g}"
        )
    a, b = spec.extents[0]
    if center is None:
        center = 0.5 * (a + b)
    x = spec.signed_distance(spec.axis_coords(0), center, 0)
    return GridField(spec, emergence_profile(x / alpha))


def _momentum_to_velocity(spec, m_vals, alpha):
    h_op = assemble_helmholtz(spec, alpha=alpha)
    m_op = assemble_mass(spec)
    from .fem import solve_spd

    return GridField(spec, solve_spd(h_op, m_op.matvec(m_vals)))


def ic_tophat_2d(spec, rect, alpha):
    """Velocity from a rectangular x-momentum patch, m = (1, 0) inside.

    rect = (x0, x1, y0, y1); the velocity solves H u = M m so it is the
    Helmholtz smoothing of the discontinuous momentum.
    """
    if spec.dim != 2:
        raise ConfigError("top-hat initial data is two-dimensional")
    x0, x1, y0, y1 = (float(v) for v in rect)
    (ax, bx), (ay, by) = spec.extents
    if not (ax <= x0 < x1 <= bx and ay <= y0 < y1 <= by):
        raise ConfigError(f"degenerate or out-of-domain rectangle {rect}")
    nodes = spec.node_positions()
    inside = (
        (nodes[:, 0] > x0) & (nodes[:, 0] < x1)
        & (nodes[:, 1] > y0) & (nodes[:, 1] < y1)
    )
    m_vals = np.zeros((spec.n_g, 2))
    m_vals[inside, 0] = 1.0
    return _momentum_to_velocity(spec, m_vals, alpha)


def tophat_momentum_2d(spec, rect):
    """Nodal momentum samples of the top-hat patch (diagnostic helper)."""
    x0, x1, y0, y1 = (float(v) for v in rect)
    nodes = spec.node_positions()
    inside = (
        (nodes[:, 0] > x0) & (nodes[:, 0] < x1)
        & (nodes[:, 1] > y0) & (nodes[:, 1] < y1)
    )
    m_vals = np.zeros((spec.n_g, 2))
    m_vals[inside, 0] = 1.0
    return GridField(spec, m_vals)


def ic_two_filaments_2d(
    spec, offsets, amplitudes, alpha, strip_width=None, y_extent=None
):
    """Two parallel finite-length x-momentum strips (overtaking filaments).

    offsets = (x_rear, x_front) strip centers; amplitudes = (rear, front)
    with the rear strip stronger so it catches up.  Strips must not
    overlap.
    """
    if spec.dim != 2:
        raise ConfigError("filament initial data is two-dimensional")
    x_rear, x_front = (float(v) for v in offsets)
    amp_rear, amp_front = (float(v) for v in amplitudes)
    (ax, bx), (ay, by) = spec.extents
    if strip_width is None:
        strip_width = 4.0 * spec.spacing[0]
    if y_extent is None:
        span = by - ay
        y_extent = (ay + 0.3 * span, ay + 0.7 * span)
    y0, y1 = (float(v) for v in y_extent)
    half = 0.5 * strip_width
    if abs(x_front - x_rear) < strip_width:
        raise ConfigError("filament strips overlap")
    nodes = spec.node_positions()
    in_y = (nodes[:, 1] > y0) & (nodes[:, 1] < y1)
    m_vals = np.zeros((spec.n_g, 2))
    for xc, amp in ((x_rear, amp_rear), (x_front, amp_front)):
        in_x = np.abs(spec.signed_distance(nodes[:, 0], xc, 0)) < half
        m_vals[in_x & in_y, 0] += amp
    return _momentum_to_velocity(spec, m_vals, alpha)


# registry used by the configuration layer: name -> (dim, required, optional)
IC_REGISTRY = {
    "single_peakon": (1, ("c", "x0"), ()),
    "two_peakons": (1, ("c1", "x1", "c2", "x2"), ()),
    "peakon_emergence": (1, (), ("center",)),
    "tophat": (2, ("x0", "x1", "y0", "y1"), ()),
    "two_filaments": (
        2,
        ("x_rear", "x_front", "amp_rear", "amp_front"),
        ("strip_width", "y0", "y1"),
    ),
}


def build_ic(spec, alpha, name, params):
    """Dispatch an initial condition by registry name."""
    if name not in IC_REGISTRY:
        raise ConfigError(f"unknown initial condition '{name}'")
    p = dict(params)
    if name == "single_peakon":
        return ic_peakon_1d(spec, p["c"], p["x0"], alpha)
    if name == "two_peakons":
        return ic_two_peakons_1d(spec, p["c1"], p["x1"], p["c2"], p["x2"], alpha)
    if name == "peakon_emergence":
        return ic_peakon_emergence_1d(spec, alpha, center=p.get("center"))
    if name == "tophat":
        return ic_tophat_2d(spec, (p["x0"], p["x1"], p["y0"], p["y1"]), alpha)
    y_extent = None
    if "y0" in p and "y1" in p:
        y_extent = (p["y0"], p["y1"])
    return ic_two_filaments_2d(
        spec,
        (p["x_rear"], p["x_front"]),
        (p["amp_rear"], p["amp_front"]),
        alpha,
        strip_width=p.get("strip_width"),
        y_extent=y_extent,
    )
