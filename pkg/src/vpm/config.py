"""Run configuration: dataclass, INI-style parsing and serialization.

The file format is flat key-value text with one section per concern.
Unknown sections or keys are rejected so typos fail loudly, and
parse(serialize(config)) round-trips exactly.
"""

import configparser
import io
from dataclasses import dataclass, field

from .basis import BasisKind
from .errors import ConfigError
from .fem import FEBasisKind
from .grid import GridSpec
from .ics import IC_REGISTRY

SNAPSHOT_FORMATS = ("binary", "csv", "none")

_SECTION_KEYS = {
    "grid": {"dim", "xmin", "xmax", "nx", "ymin", "ymax", "ny"},
    "model": {"alpha", "basis", "fe"},
    "particles": {"per_axis", "jitter", "seed"},
    "time": {"dt", "t_end"},
    "solver": {"fp_tol", "fp_maxiter", "pcg_tol"},
    "ic": None,  # validated against the IC registry
    "output": {"dir", "sample_interval", "snapshot_format"},
    "loops": None,  # free-form loop names
}


@dataclass(frozen=True)
class LoopSpec:
    """Circle of sample points used to register a circulation loop."""

    name: str
    cx: float
    cy: float
    radius: float
    npoints: int


@dataclass(frozen=True)
class SimConfig:
    dim: int
    extents: tuple
    nodes: tuple
    alpha: float
    dt: float
    t_end: float
    ic_name: str
    ic_params: tuple = ()  # sorted (key, value) pairs
    particles_per_axis: int = 2
    jitter: float = 0.0
    seed: int = 0
    basis: BasisKind = BasisKind.CUBIC_BSPLINE
    fe: FEBasisKind = FEBasisKind.PIECEWISE_LINEAR
    fp_tol: float = 1e-8
    fp_maxiter: int = 200
    pcg_tol: float = 1e-12
    output_dir: str = ""
    sample_interval: float = 0.5
    snapshot_format: str = "binary"
    loops: tuple = ()

    def __post_init__(self):
        if self.ic_name not in IC_REGISTRY:
            raise ConfigError(f"unknown initial condition '{self.ic_name}'")
        ic_dim, required, optional = IC_REGISTRY[self.ic_name]
        if ic_dim != self.dim:
            raise ConfigError(
                f"initial condition '{self.ic_name}' needs dim={ic_dim}, got {self.dim}"
            )
        params = dict(self.ic_params)
        missing = [k for k in required if k not in params]
        if missing:
            raise ConfigError(f"missing [ic] keys for '{self.ic_name}': {missing}")
        allowed = set(required) | set(optional)
        unknown = [k for k in params if k not in allowed]
        if unknown:
            raise ConfigError(f"unknown [ic] keys for '{self.ic_name}': {unknown}")
        for name, value in [
            ("alpha", self.alpha), ("dt", self.dt), ("sample_interval", self.sample_interval),
        ]:
            if not value > 0.0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.t_end < 0.0:
            raise ConfigError(f"t_end must be nonnegative, got {self.t_end}")
        if self.particles_per_axis < 1:
            raise ConfigError("particles per_axis must be >= 1")
        if not 0.0 <= self.jitter <= 0.1:
            raise ConfigError("jitter must lie in [0, 0.1] (fraction of h)")
        if self.snapshot_format not in SNAPSHOT_FORMATS:
            raise ConfigError(f"snapshot_format must be one of {SNAPSHOT_FORMATS}")
        object.__setattr__(self, "ic_params", tuple(sorted(params.items())))
        object.__setattr__(self, "extents", tuple(tuple(e) for e in self.extents))
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        object.__setattr__(self, "loops", tuple(self.loops))
        # validates extents/nodes
        self.grid_spec()

    def grid_spec(self):
        return GridSpec(extents=self.extents, nodes=self.nodes)

    def ic_dict(self):
        return dict(self.ic_params)


def _getfloat(sec, key, default=None):
    if key in sec:
        try:
            return float(sec[key])
        except ValueError as e:
            raise ConfigError(f"bad float for '{key}': {sec[key]}") from e
    if default is None:
        raise ConfigError(f"missing required key '{key}'")
    return default


def _getint(sec, key, default=None):
    if key in sec:
        try:
            return int(sec[key])
        except ValueError as e:
            raise ConfigError(f"bad integer for '{key}': {sec[key]}") from e
    if default is None:
        raise ConfigError(f"missing required key '{key}'")
    return default


def parse_config(text):
    """Parse configuration text into a SimConfig."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from e

    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        allowed = _SECTION_KEYS[section]
        if allowed is not None:
            unknown = set(cp[section]) - allowed
            if unknown:
                raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    for required in ("grid", "model", "time", "ic"):
        if required not in cp:
            raise ConfigError(f"missing section [{required}]")

    g = cp["grid"]
    dim = _getint(g, "dim")
    if dim == 1:
        extents = ((_getfloat(g, "xmin"), _getfloat(g, "xmax")),)
        nodes = (_getint(g, "nx"),)
        for k in ("ymin", "ymax", "ny"):
            if k in g:
                raise ConfigError(f"key '{k}' is only valid for dim=2")
    elif dim == 2:
        extents = (
            (_getfloat(g, "xmin"), _getfloat(g, "xmax")),
            (_getfloat(g, "ymin"), _getfloat(g, "ymax")),
        )
        nodes = (_getint(g, "nx"), _getint(g, "ny"))
    else:
        raise ConfigError(f"dim must be 1 or 2, got {dim}")

    model = cp["model"]
    try:
        basis = BasisKind(model.get("basis", BasisKind.CUBIC_BSPLINE.value))
        fe = FEBasisKind(model.get("fe", FEBasisKind.PIECEWISE_LINEAR.value))
    except ValueError as e:
        raise ConfigError(str(e)) from e

    particles = cp["particles"] if "particles" in cp else {}
    solver = cp["solver"] if "solver" in cp else {}
    output = cp["output"] if "output" in cp else {}

    ic = dict(cp["ic"])
    if "name" not in ic:
        raise ConfigError("missing 'name' in [ic]")
    ic_name = ic.pop("name")
    try:
        ic_params = {k: float(v) for k, v in ic.items()}
    except ValueError as e:
        raise ConfigError(f"bad [ic] value: {e}") from e

    loops = []
    if "loops" in cp:
        for name, value in cp["loops"].items():
            parts = [p.strip() for p in value.split(",")]
            if len(parts) != 4:
                raise ConfigError(
                    f"loop '{name}' must be 'cx,cy,radius,npoints', got '{value}'"
                )
            loops.append(
                LoopSpec(
                    name=name,
                    cx=float(parts[0]),
                    cy=float(parts[1]),
                    radius=float(parts[2]),
                    npoints=int(parts[3]),
                )
            )

    return SimConfig(
        dim=dim,
        extents=extents,
        nodes=nodes,
        alpha=_getfloat(cp["model"], "alpha"),
        dt=_getfloat(cp["time"], "dt"),
        t_end=_getfloat(cp["time"], "t_end"),
        ic_name=ic_name,
        ic_params=tuple(sorted(ic_params.items())),
        particles_per_axis=_getint(particles, "per_axis", 2),
        jitter=_getfloat(particles, "jitter", 0.0),
        seed=_getint(particles, "seed", 0),
        basis=basis,
        fe=fe,
        fp_tol=_getfloat(solver, "fp_tol", 1e-8),
        fp_maxiter=_getint(solver, "fp_maxiter", 200),
        pcg_tol=_getfloat(solver, "pcg_tol", 1e-12),
        output_dir=output.get("dir", "") if output else "",
        sample_interval=_getfloat(output, "sample_interval", 0.5),
        snapshot_format=output.get("snapshot_format", "binary") if output else "binary",
        loops=tuple(loops),
    )


def load_config(path):
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


def serialize_config(config):
    """Render a SimConfig back to config text (full-precision floats)."""
    cp = configparser.ConfigParser(interpolation=None)
    g = {"dim": str(config.dim),
         "xmin": repr(config.extents[0][0]), "xmax": repr(config.extents[0][1]),
         "nx": str(config.nodes[0])}
    if config.dim == 2:
        g.update(ymin=repr(config.extents[1][0]), ymax=repr(config.extents[1][1]),
                 ny=str(config.nodes[1]))
    cp["grid"] = g
    cp["model"] = {
        "alpha": repr(config.alpha),
        "basis": config.basis.value,
        "fe": config.fe.value,
    }
    cp["particles"] = {
        "per_axis": str(config.particles_per_axis),
        "jitter": repr(config.jitter),
        "seed": str(config.seed),
    }
    cp["time"] = {"dt": repr(config.dt), "t_end": repr(config.t_end)}
    cp["solver"] = {
        "fp_tol": repr(config.fp_tol),
        "fp_maxiter": str(config.fp_maxiter),
        "pcg_tol": repr(config.pcg_tol),
    }
    ic = {"name": config.ic_name}
    ic.update({k: repr(v) for k, v in config.ic_params})
    cp["ic"] = ic
    cp["output"] = {
        "dir": config.output_dir,
        "sample_interval": repr(config.sample_interval),
        "snapshot_format": config.snapshot_format,
    }
    if config.loops:
        cp["loops"] = {
            l.name: f"{l.cx!r},{l.cy!r},{l.radius!r},{l.npoints}" for l in config.loops
        }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
