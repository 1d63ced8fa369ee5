"""Periodic uniform grid geometry in one and two dimensions."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

MIN_NODES_PER_AXIS = 8


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with periodic wrap on a box prod_i [a_i, b_i).

    Nodes along each axis sit at x_k = a + k*h with h = (b - a)/n, so the
    right endpoint b is identified with a.  Flattened node index in 2D is
    k = ix*ny + iy (x-major).
    """

    extents: tuple
    nodes: tuple

    def __post_init__(self):
        extents = tuple((float(a), float(b)) for a, b in self.extents)
        nodes = tuple(int(n) for n in self.nodes)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "nodes", nodes)
        if len(extents) not in (1, 2) or len(nodes) != len(extents):
            raise ConfigError("grid must be 1D or 2D with one node count per axis")
        for (a, b), n in zip(extents, nodes):
            if not b > a:
                raise ConfigError(f"empty extent [{a}, {b})")
            if n < MIN_NODES_PER_AXIS:
                raise ConfigError(f"need at least {MIN_NODES_PER_AXIS} nodes per axis, got {n}")

    @classmethod
    def line(cls, a, b, n):
        return cls(extents=((a, b),), nodes=(n,))

    @classmethod
    def box(cls, extent_x, extent_y, nx, ny):
        return cls(extents=(tuple(extent_x), tuple(extent_y)), nodes=(nx, ny))

    @property
    def dim(self):
        return len(self.nodes)

    @property
    def widths(self):
        return tuple(b - a for a, b in self.extents)

    @property
    def spacing(self):
        return tuple((b - a) / n for (a, b), n in zip(self.extents, self.nodes))

    @property
    def n_g(self):
        out = 1
        for n in self.nodes:
            out *= n
        return out

    @property
    def origin(self):
        return tuple(a for a, _ in self.extents)

    def wrap(self, x):
        """Map positions into the box, elementwise per axis."""
        x = np.asarray(x, dtype=float)
        out = np.array(x, dtype=float, copy=True)
        flat = out.reshape(-1, self.dim)
        for i, ((a, _), w) in enumerate(zip(self.extents, self.widths)):
            flat[:, i] = a + np.mod(flat[:, i] - a, w)
        return out

    def signed_distance(self, x, y, axis):
        """Minimal-image signed distance x - y along one axis."""
        w = self.widths[axis]
        return (np.asarray(x) - np.asarray(y) + 0.5 * w) % w - 0.5 * w

    def axis_coords(self, axis):
        a, _ = self.extents[axis]
        h = self.spacing[axis]
        return a + h * np.arange(self.nodes[axis])

    def node_positions(self):
        """All node coordinates, shape (n_g, dim), flattened x-major."""
        if self.dim == 1:
            return self.axis_coords(0)[:, None]
        xs = self.axis_coords(0)
        ys = self.axis_coords(1)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def node_multi_index(self, k):
        if not 0 <= k < self.n_g:
            raise IndexError(f"node index {k} out of range [0, {self.n_g})")
        if self.dim == 1:
            return (k,)
        ny = self.nodes[1]
        return (k // ny, k % ny)

    def node_flat_index(self, multi):
        if self.dim == 1:
            return multi[0] % self.nodes[0]
        nx, ny = self.nodes
        return (multi[0] % nx) * ny + (multi[1] % ny)
