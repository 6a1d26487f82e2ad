"""Run-configuration parsing, validation and canonical echo.

A run is described by a YAML document with explicit units on every physical
quantity ("780 nm", "49.6 deg", "37 Er", "80 us"); a bare number where a unit
is required is rejected, as is any unknown key.  Internally all quantities
are SI plus radians.  The canonical echo re-renders a parsed configuration
with SI units and 17-significant-digit floats, so parsing the echo reproduces
the run exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import yaml

from .constants import ATOMIC_MASS_UNIT
from .errors import ConfigError
from .fock import OscillatorSpec
from .lattice import LatticeSpec
from .prepare import DephasingModel, PreparationConfig
from .tomography import NoiseSpec, ScanGrid

_UNIT_TABLES = {
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "angle": {"rad": 1.0, "mrad": 1e-3, "deg": math.pi / 180.0},
    "mass": {"kg": 1.0, "u": ATOMIC_MASS_UNIT},
    "angular_frequency": {"rad/s": 1.0, "krad/s": 1e3, "Mrad/s": 1e6},
    "energy": {"J": 1.0, "Er": None},  # Er resolves against the lattice recoil
}

_SCHEMA = {
    "lattice": {"wavelength", "intersection_angle", "depth", "mass"},
    "oscillator": {"omega"},
    "truncation": {"dimension"},
    "preparation": {
        "kind",
        "contamination",
        "shift",
        "hold_time",
        "evolve_time",
        "probabilities",
        "realistic_filter",
        "filter_depth",
    },
    "dephasing": {"relative_spread", "sample_count", "truncation_sigmas"},
    "scan": {
        "mode",
        "angle_count",
        "angle_step",
        "displacement_count",
        "displacement_step",
        "bound_dim",
    },
    "noise": {"atom_count", "seed", "repetitions"},
    "mode": {"sampling", "rotation"},
    "output": {"directory"},
}

HUSIMI_DEFAULT_CONFIG = """\
# Ground-projection scan of the displaced (near-coherent) state in the deep
# lattice: 4 bound states, measured well frequency override.
lattice:
  wavelength: "780 nm"
  intersection_angle: "49.6 deg"
  depth: "37 Er"
  mass: "84.911789738 u"
oscillator:
  omega: "48.33 krad/s"
preparation:
  kind: coherent
  contamination: 0.10
  shift: "155 nm"
  evolve_time: "20 us"
scan:
  mode: husimi
noise:
  seed: 20050615
output:
  directory: "out-husimi"
"""

WIGNER_DEFAULT_CONFIG = """\
# Parity-bounded population scan of the two-level reference mixture in the
# shallow lattice: 2 bound states, measured well frequency override.
lattice:
  wavelength: "780 nm"
  intersection_angle: "49.6 deg"
  depth: "17.5 Er"
  mass: "84.911789738 u"
oscillator:
  omega: "32.2 krad/s"
preparation:
  kind: explicit
  probabilities: [0.3, 0.7]
scan:
  mode: wigner
  bound_dim: 2
noise:
  seed: 20050615
output:
  directory: "out-wigner"
"""


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved parameters of one experiment run."""

    lattice: LatticeSpec
    oscillator: OscillatorSpec
    dimension: int
    preparation: PreparationConfig
    dephasing: DephasingModel
    grid: ScanGrid
    bound_dim: int
    noise: NoiseSpec
    sampling: str
    rotation: str
    output_directory: str

    @property
    def exact(self) -> bool:
        return self.sampling == "exact"


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration, applying defaults."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"config parse error{where}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping of sections")
    _reject_unknown(raw)

    lattice_raw = raw.get("lattice") or {}
    wavelength = _quantity(lattice_raw, "wavelength", "length", default="780 nm")
    angle = _quantity(lattice_raw, "intersection_angle", "angle", default="49.6 deg")
    mass = _quantity(lattice_raw, "mass", "mass", default="84.911789738 u")
    depth_value, depth_unit = _quantity_with_unit(lattice_raw, "depth", "energy", default="37 Er")
    try:
        if depth_unit == "Er":
            lattice = LatticeSpec.from_recoil_units(wavelength, angle, depth_value, mass)
        else:
            lattice = LatticeSpec(
                wavelength=wavelength, intersection_angle=angle, depth=depth_value, mass=mass
            )
    except Exception as exc:
        raise ConfigError(f"lattice: {exc}") from exc

    oscillator_raw = raw.get("oscillator") or {}
    if "omega" in oscillator_raw:
        omega = _quantity(oscillator_raw, "omega", "angular_frequency")
    else:
        omega = lattice.frequency
    oscillator = OscillatorSpec(mass=mass, omega=omega)

    truncation_raw = raw.get("truncation") or {}
    dimension = _integer(truncation_raw, "dimension", default=8, minimum=2)

    preparation = _parse_preparation(raw.get("preparation") or {}, lattice, dimension)

    dephasing_raw = raw.get("dephasing") or {}
    spread = _number(dephasing_raw, "relative_spread", default=0.0)
    sample_count = _integer(dephasing_raw, "sample_count", default=33, minimum=1)
    trunc_sigmas = _number(dephasing_raw, "truncation_sigmas", default=2.0)
    try:
        dephasing = DephasingModel(
            mean_omega=omega,
            relative_spread=spread,
            sample_count=sample_count,
            truncation_sigmas=trunc_sigmas,
        )
    except Exception as exc:
        raise ConfigError(f"dephasing: {exc}") from exc

    grid, bound_dim = _parse_scan(raw.get("scan") or {})

    noise_raw = raw.get("noise") or {}
    noise = NoiseSpec(
        atom_count=_integer(noise_raw, "atom_count", default=10000, minimum=1),
        seed=_integer(noise_raw, "seed", default=0, minimum=None),
        repetitions=_integer(noise_raw, "repetitions", default=1, minimum=1),
    )

    mode_raw = raw.get("mode") or {}
    sampling = _choice(mode_raw, "sampling", ("exact", "noise"), default="exact")
    rotation = _choice(mode_raw, "rotation", ("harmonic", "realistic"), default="harmonic")

    output_raw = raw.get("output") or {}
    directory = output_raw.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory must be a non-empty string")

    return RunConfig(
        lattice=lattice,
        oscillator=oscillator,
        dimension=dimension,
        preparation=preparation,
        dephasing=dephasing,
        grid=grid,
        bound_dim=bound_dim,
        noise=noise,
        sampling=sampling,
        rotation=rotation,
        output_directory=directory,
    )


def render_config(config: RunConfig) -> str:
    """Canonical SI-unit echo of a configuration; parsing it reproduces the run."""
    g = _format
    lines = [
        "lattice:",
        f'  wavelength: "{g(config.lattice.wavelength)} m"',
        f'  intersection_angle: "{g(config.lattice.intersection_angle)} rad"',
        f'  depth: "{g(config.lattice.depth)} J"',
        f'  mass: "{g(config.lattice.mass)} kg"',
        "oscillator:",
        f'  omega: "{g(config.oscillator.omega)} rad/s"',
        "truncation:",
        f"  dimension: {config.dimension}",
        "preparation:",
        f"  kind: {config.preparation.kind}",
        f"  contamination: {g(config.preparation.contamination)}",
        f'  shift: "{g(config.preparation.shift)} m"',
        f'  hold_time: "{g(config.preparation.hold_time)} s"',
        f'  evolve_time: "{g(config.preparation.evolve_time)} s"',
    ]
    if config.preparation.probabilities is not None:
        p0, p1 = config.preparation.probabilities
        lines.append(f"  probabilities: [{g(p0)}, {g(p1)}]")
    lines += [
        f"  realistic_filter: {str(config.preparation.realistic_filter).lower()}",
        f'  filter_depth: "{g(config.preparation.filter_depth_recoils * config.lattice.recoil)} J"',
        "dephasing:",
        f"  relative_spread: {g(config.dephasing.relative_spread)}",
        f"  sample_count: {config.dephasing.sample_count}",
        f"  truncation_sigmas: {g(config.dephasing.truncation_sigmas)}",
        "scan:",
        f"  mode: {config.grid.mode}",
        f"  angle_count: {config.grid.angles.size}",
        f'  angle_step: "{g(_step(config.grid.angles))} rad"',
        f"  displacement_count: {config.grid.displacements.size}",
        f'  displacement_step: "{g(_step(config.grid.displacements))} m"',
        f"  bound_dim: {config.bound_dim}",
        "noise:",
        f"  atom_count: {config.noise.atom_count}",
        f"  seed: {config.noise.seed}",
        f"  repetitions: {config.noise.repetitions}",
        "mode:",
        f"  sampling: {config.sampling}",
        f"  rotation: {config.rotation}",
        "output:",
        f'  directory: "{config.output_directory}"',
    ]
    return "\n".join(lines) + "\n"


def _parse_preparation(section: dict, lattice: LatticeSpec, dimension: int) -> PreparationConfig:
    kind = _choice(section, "kind", ("ground", "coherent", "inverted", "explicit"), default="ground")
    contamination = _number(section, "contamination", default=0.10)
    shift_default = "155 nm" if kind in ("coherent", "inverted") else "0 m"
    shift = _quantity(section, "shift", "length", default=shift_default)
    hold_time = _quantity(section, "hold_time", "time", default="80 us")
    evolve_time = _quantity(section, "evolve_time", "time", default="0 s")
    probabilities = section.get("probabilities")
    if probabilities is not None:
        if (
            not isinstance(probabilities, (list, tuple))
            or len(probabilities) != 2
            or not all(isinstance(p, (int, float)) for p in probabilities)
        ):
            raise ConfigError("preparation.probabilities must be a list of two numbers")
        probabilities = (float(probabilities[0]), float(probabilities[1]))
        if probabilities[0] < 0 or probabilities[1] < 0 or abs(sum(probabilities) - 1.0) > 1e-9:
            raise ConfigError(
                "preparation.probabilities must be nonnegative and sum to 1"
            )
    elif kind == "explicit":
        probabilities = (0.3, 0.7)
    realistic = section.get("realistic_filter", False)
    if not isinstance(realistic, bool):
        raise ConfigError("preparation.realistic_filter must be a boolean")
    if "filter_depth" in section:
        value, unit = _quantity_with_unit(section, "filter_depth", "energy")
        filter_depth_recoils = value if unit == "Er" else value / lattice.recoil
    else:
        filter_depth_recoils = 5.0
    try:
        return PreparationConfig(
            kind=kind,
            contamination=contamination,
            shift=shift,
            hold_time=hold_time,
            evolve_time=evolve_time,
            probabilities=probabilities,
            realistic_filter=realistic,
            filter_depth_recoils=filter_depth_recoils,
            dimension=dimension,
        )
    except Exception as exc:
        raise ConfigError(f"preparation: {exc}") from exc


def _parse_scan(section: dict) -> tuple[ScanGrid, int]:
    mode = _choice(section, "mode", ("husimi", "wigner"), default="husimi")
    default = ScanGrid.husimi_default() if mode == "husimi" else ScanGrid.wigner_default()
    angle_count = _integer(section, "angle_count", default=default.angles.size, minimum=1)
    angle_step = (
        _quantity(section, "angle_step", "angle")
        if "angle_step" in section
        else _step(default.angles)
    )
    displacement_count = _integer(
        section, "displacement_count", default=default.displacements.size, minimum=1
    )
    displacement_step = (
        _quantity(section, "displacement_step", "length")
        if "displacement_step" in section
        else _step(default.displacements)
    )
    bound_dim = _integer(section, "bound_dim", default=2, minimum=2)
    try:
        grid = ScanGrid(
            angles=angle_step * np.arange(angle_count),
            displacements=displacement_step * np.arange(displacement_count),
            mode=mode,
        )
    except Exception as exc:
        raise ConfigError(f"scan: {exc}") from exc
    return grid, bound_dim


def _reject_unknown(raw: dict) -> None:
    for section, content in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section {section!r}")
        if content is None:
            continue
        if not isinstance(content, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key in content:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")


def _quantity(section: dict, key: str, kind: str, default: str | None = None) -> float:
    value, _unit = _quantity_with_unit(section, key, kind, default)
    return value


def _quantity_with_unit(
    section: dict, key: str, kind: str, default: str | None = None
) -> tuple[float, str]:
    raw = section.get(key, default)
    if raw is None:
        raise ConfigError(f"missing required key {key!r}")
    if not isinstance(raw, str):
        raise ConfigError(
            f"{key}: physical quantities must be strings with explicit units "
            f"({', '.join(_UNIT_TABLES[kind])}), got {raw!r}"
        )
    parts = raw.split()
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected 'value unit', got {raw!r}")
    try:
        number = float(parts[0])
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse number from {parts[0]!r}") from exc
    table = _UNIT_TABLES[kind]
    unit = parts[1]
    if unit not in table:
        raise ConfigError(
            f"{key}: unknown {kind} unit {unit!r} (allowed: {', '.join(table)})"
        )
    scale = table[unit]
    if scale is None:  # recoil units resolve later against the lattice
        return number, unit
    return number * scale, unit


def _number(section: dict, key: str, default: float) -> float:
    raw = section.get(key, default)
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{key} must be a number, got {raw!r}")
    return float(raw)


def _integer(section: dict, key: str, default: int, minimum: int | None) -> int:
    raw = section.get(key, default)
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(f"{key} must be an integer, got {raw!r}")
    if minimum is not None and raw < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {raw}")
    return raw


def _choice(section: dict, key: str, allowed: tuple[str, ...], default: str) -> str:
    raw = section.get(key, default)
    if raw not in allowed:
        raise ConfigError(f"{key} must be one of {allowed}, got {raw!r}")
    return raw


def _step(values: np.ndarray) -> float:
    return float(values[1] - values[0]) if values.size > 1 else 1.0


def _format(value: float) -> str:
    return format(float(value), ".17g")
