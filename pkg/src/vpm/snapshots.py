"""Field and particle snapshot files.

Binary layout (little endian throughout):

  field file:     magic 'VPM1' | uint32 dim | uint32 n per axis |
                  uint32 ncomp | float64 t | float64 values (n_g * ncomp,
                  node-major C order)
  particle file:  magic 'VPM1' | uint32 dim | uint32 n_p | float64 t |
                  float64 blocks Q (n_p*d), P (n_p*d), J (n_p*d*d),
                  Dtilde (n_p)

A CSV mirror of each format exists for plotting tools.
"""

import struct

import numpy as np

from .transfer import GridField, ParticleSet

MAGIC = b"VPM1"


def _write_array(f, arr):
    f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(f, count):
    data = f.read(8 * count)
    if len(data) != 8 * count:
        raise ValueError("truncated snapshot file")
    return np.frombuffer(data, dtype="<f8").copy()


def write_field_snapshot(path, field, t):
    spec = field.spec
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", spec.dim))
        for n in spec.nodes:
            f.write(struct.pack("<I", n))
        f.write(struct.pack("<I", field.ncomp))
        f.write(struct.pack("<d", float(t)))
        _write_array(f, field.values)


def read_field_snapshot(path, spec=None):
    """Returns (t, values (n_g, ncomp), nodes tuple)."""
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError(f"{path}: bad magic")
        (dim,) = struct.unpack("<I", f.read(4))
        nodes = tuple(struct.unpack("<I", f.read(4))[0] for _ in range(dim))
        (ncomp,) = struct.unpack("<I", f.read(4))
        (t,) = struct.unpack("<d", f.read(8))
        n_g = int(np.prod(nodes))
        values = _read_array(f, n_g * ncomp).reshape(n_g, ncomp)
    if spec is not None and tuple(spec.nodes) != nodes:
        raise ValueError(f"{path}: node counts {nodes} do not match grid {spec.nodes}")
    return t, values, nodes


def write_particle_snapshot(path, particles, t):
    n_p, d = particles.Q.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", d))
        f.write(struct.pack("<I", n_p))
        f.write(struct.pack("<d", float(t)))
        _write_array(f, particles.Q)
        _write_array(f, particles.P)
        _write_array(f, particles.J)
        _write_array(f, particles.Dtilde)


def read_particle_snapshot(path):
    """Returns (t, ParticleSet)."""
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError(f"{path}: bad magic")
        (d,) = struct.unpack("<I", f.read(4))
        (n_p,) = struct.unpack("<I", f.read(4))
        (t,) = struct.unpack("<d", f.read(8))
        Q = _read_array(f, n_p * d).reshape(n_p, d)
        P = _read_array(f, n_p * d).reshape(n_p, d)
        J = _read_array(f, n_p * d * d).reshape(n_p, d, d)
        Dtilde = _read_array(f, n_p)
    return t, ParticleSet(Q=Q, P=P, J=J, Dtilde=Dtilde)


def write_field_csv(path, field, t):
    spec = field.spec
    nodes = spec.node_positions()
    cols = ["x", "y"][: spec.dim] + [f"c{i}" for i in range(field.ncomp)]
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# t={t!r}\n")
        f.write(",".join(cols) + "\n")
        for pos, row in zip(nodes, field.values):
            cells = [repr(float(v)) for v in pos] + [repr(float(v)) for v in row]
            f.write(",".join(cells) + "\n")


def write_particle_csv(path, particles, t):
    n_p, d = particles.Q.shape
    cols = (
        [f"q{i}" for i in range(d)]
        + [f"p{i}" for i in range(d)]
        + [f"j{i}{j}" for i in range(d) for j in range(d)]
        + ["dtilde"]
    )
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# t={t!r}\n")
        f.write(",".join(cols) + "\n")
        for b in range(n_p):
            cells = [repr(float(v)) for v in particles.Q[b]]
            cells += [repr(float(v)) for v in particles.P[b]]
            cells += [repr(float(v)) for v in particles.J[b].ravel()]
            cells.append(repr(float(particles.Dtilde[b])))
            f.write(",".join(cells) + "\n")
