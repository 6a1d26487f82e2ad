"""Run orchestration: preparation, scan, estimators, reports, file emission.

One configuration is one experiment is one result bundle.  Exact mode is
fully deterministic; shot-noise mode derives every record's sample stream
from (seed, grid index, repetition) only, so serial and threaded executions
produce byte-identical output files.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import RunConfig, parse_config, render_config
from .errors import ConfigError, FitError
from .fock import DensityMatrix, OscillatorSpec, rotation_matrix
from .lattice import solve_bound_states
from .prepare import (
    make_inverted_reference,
    prepare_coherent,
    prepare_ground,
    prepare_inverted,
)
from .quasiprob import displaced_number_populations
from .tomography import (
    GaussianFit,
    NoiseSpec,
    PopulationRecord,
    QuasiDistributionSample,
    ScanGrid,
    average_records,
    estimate_wigner,
    fit_gaussian_cross_section,
    infer_xrms_from_normalization,
    normalization_report,
    run_husimi_scan,
    run_wigner_scan,
    sample_shot_noise,
    spectrum_rotation_phases,
)

RECORDS_FILENAME = "records.csv"
SUMMARY_FILENAME = "summary.json"
CONFIG_ECHO_FILENAME = "config_echo.yaml"

CSV_HEADER = "grid_index,alpha_abs,theta,x_m,p0,p1,p_lost,value,upper,lower"


@dataclass
class ResultBundle:
    """Everything one run produced, ready for emission or comparison."""

    config_text: str
    run_id: str
    version: str
    sampling: str
    records: list[PopulationRecord]
    samples: list[QuasiDistributionSample]
    fits: list[GaussianFit] = field(default_factory=list)
    normalization: dict | None = None
    x_rms: dict | None = None
    preparation_loss: float = 0.0
    warnings: list[str] = field(default_factory=list)


def run(config: RunConfig, threads: int = 0) -> ResultBundle:
    """Execute preparation, scan, estimators and reports for one config."""
    warnings: list[str] = []
    omegas, weights = config.dephasing.nodes()
    record_sets = []
    loss = 0.0
    for omega in omegas:
        spec_k = OscillatorSpec(mass=config.lattice.mass, omega=float(omega))
        rho_k, loss_k = _prepare(config, spec_k, warnings)
        record_sets.append(_scan(config, rho_k, spec_k, threads))
        loss = max(loss, loss_k)
    if len(record_sets) == 1:
        records = record_sets[0]
    else:
        records = average_records(record_sets, weights)
    if config.sampling == "noise":
        records = [
            sample_shot_noise(
                r, config.noise.atom_count, config.noise.seed, config.noise.repetitions
            )
            for r in records
        ]
    if config.grid.mode == "husimi":
        samples = [
            QuasiDistributionSample(
                index=r.index,
                alpha_abs=r.alpha_abs,
                theta=r.theta,
                value=r.p0 / math.pi,
                upper=r.p0 / math.pi,
                lower=r.p0 / math.pi,
            )
            for r in records
        ]
    else:
        samples = [estimate_wigner(r) for r in records]
    bundle = ResultBundle(
        config_text=render_config(config),
        run_id=_run_id(config),
        version=__version__,
        sampling=config.sampling,
        records=records,
        samples=samples,
        preparation_loss=loss,
        warnings=[],
    )
    if config.grid.mode == "husimi":
        _husimi_reports(bundle, config, warnings)
    else:
        report = normalization_report(samples, config.grid)
        bundle.normalization = {
            "value": report.value,
            "upper": report.upper,
            "lower": report.lower,
            "ordered": report.ordered,
        }
    bundle.warnings = sorted(set(warnings))
    return bundle


def _prepare(config: RunConfig, spec: OscillatorSpec, warnings: list[str]):
    prep = config.preparation
    if prep.kind == "ground":
        out = prepare_ground(prep, config.lattice if prep.realistic_filter else None)
    elif prep.kind == "coherent":
        out = prepare_coherent(prep.shift, spec, prep)
    elif prep.kind == "inverted":
        out = prepare_inverted(config.lattice, prep, config.dephasing)
    else:
        out = (make_inverted_reference(*prep.probabilities, dim=prep.dimension), 0.0)
    rho, loss = out
    if loss > 0.05:
        warnings.append(f"preparation lost {loss:.3f} of the population")
    if prep.evolve_time > 0.0:
        theta = spec.omega * prep.evolve_time
        rotation = rotation_matrix(theta, rho.dim)
        rho = DensityMatrix(rotation @ rho.elements @ rotation.conj().T)
    return rho, loss


def _scan(config: RunConfig, rho: DensityMatrix, spec: OscillatorSpec, threads: int):
    rotation_phases = None
    if config.rotation == "realistic":
        basis = solve_bound_states(config.lattice)
        rotation_phases = spectrum_rotation_phases(basis.energies, spec.omega)
    n_points = config.grid.n_points
    workers = os.cpu_count() or 1 if threads == 0 else threads
    chunks = _chunks(n_points, workers)

    def scan_chunk(indices):
        if config.grid.mode == "husimi":
            records, _ = run_husimi_scan(
                rho, spec, config.grid, rotation_phases=rotation_phases, indices=indices
            )
            return records
        return run_wigner_scan(
            rho,
            spec,
            config.grid,
            bound_dim=config.bound_dim,
            rotation_phases=rotation_phases,
            indices=indices,
        )

    if len(chunks) == 1:
        return scan_chunk(chunks[0])
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(scan_chunk, chunks))
    records = [record for part in parts for record in part]
    records.sort(key=lambda r: r.index)
    return records


def _husimi_reports(bundle: ResultBundle, config: RunConfig, warnings: list[str]) -> None:
    estimate = infer_xrms_from_normalization(bundle.samples, config.grid)
    if estimate.warning:
        warnings.append("husimi normalization extrapolated: edge value above 1e-3 of peak")
    bundle.x_rms = {
        "x_rms_m": estimate.x_rms,
        "integral": estimate.integral,
        "tail_fraction": estimate.tail_fraction,
        "extrapolated": estimate.warning,
    }
    bundle.fits = _peak_cut_fit(bundle.samples, config.grid, warnings)
    bundle.warnings = sorted(set(warnings))


def _peak_cut_fit(samples, grid: ScanGrid, warnings: list[str]) -> list[GaussianFit]:
    """Gaussian fit of the radial cut through the scan maximum."""
    table = np.array([s.value for s in sorted(samples, key=lambda s: s.index)])
    table = table.reshape(grid.displacements.size, grid.angles.size)
    peak_angle = int(np.argmax(table.max(axis=0)))
    cut = table[:, peak_angle]
    try:
        fit = fit_gaussian_cross_section(
            grid.displacements, cut, cut_angle=float(grid.angles[peak_angle])
        )
    except FitError as exc:
        warnings.append(f"peak-cut Gaussian fit failed: {exc}")
        return []
    return [fit]


def _chunks(n_points: int, workers: int) -> list[list[int]]:
    # Contiguous blocks keep each displacement's matrix exponential in a
    # single worker.
    workers = max(1, min(workers, n_points))
    return [list(part) for part in np.array_split(np.arange(n_points), workers)]


def _run_id(config: RunConfig) -> str:
    digest = hashlib.sha256(render_config(config).encode()).hexdigest()
    return digest[:12]


def emit(bundle: ResultBundle, out_dir: str, fmt: str = "both") -> list[str]:
    """Write the record table (CSV) and/or the structured summary (JSON).

    Floats are serialized with 17 significant digits, so re-reading an
    emitted table reproduces every value exactly.
    """
    if fmt not in ("csv", "structured", "both"):
        raise ConfigError(f"unknown emit format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        path = os.path.join(out_dir, RECORDS_FILENAME)
        _write_records_csv(bundle, path)
        written.append(path)
    if fmt in ("structured", "both"):
        path = os.path.join(out_dir, SUMMARY_FILENAME)
        with open(path, "w") as handle:
            json.dump(_summary_dict(bundle), handle, indent=2, sort_keys=True)
            handle.write("\n")
        written.append(path)
        echo_path = os.path.join(out_dir, CONFIG_ECHO_FILENAME)
        with open(echo_path, "w") as handle:
            handle.write(bundle.config_text)
        written.append(echo_path)
    return written


def _write_records_csv(bundle: ResultBundle, path: str) -> None:
    g = lambda v: format(v, ".17g")  # noqa: E731
    sample_by_index = {s.index: s for s in bundle.samples}
    lines = [CSV_HEADER]
    for record in sorted(bundle.records, key=lambda r: r.index):
        sample = sample_by_index[record.index]
        lines.append(
            ",".join(
                [
                    str(record.index),
                    g(record.alpha_abs),
                    g(record.theta),
                    g(record.displacement),
                    g(record.p0),
                    g(record.p1),
                    g(record.p_lost),
                    g(sample.value),
                    g(sample.upper),
                    g(sample.lower),
                ]
            )
        )
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def _summary_dict(bundle: ResultBundle) -> dict:
    return {
        "run_id": bundle.run_id,
        "version": bundle.version,
        "sampling": bundle.sampling,
        "config": bundle.config_text,
        "preparation_loss": bundle.preparation_loss,
        "fits": [
            {
                "amplitude": f.amplitude,
                "center_m": f.center,
                "rms_width_m": f.rms_width,
                "residual_norm": f.residual_norm,
                "cut_angle": f.cut_angle,
            }
            for f in bundle.fits
        ],
        "normalization": bundle.normalization,
        "x_rms": bundle.x_rms,
        "warnings": bundle.warnings,
        "tables": {"records": RECORDS_FILENAME},
    }


def read_records_csv(path: str) -> list[dict]:
    """Read an emitted record table back into plain dicts."""
    with open(path) as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(f"{path}: unexpected CSV header")
    columns = CSV_HEADER.split(",")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        row = {name: float(value) for name, value in zip(columns, parts)}
        row["grid_index"] = int(parts[0])
        rows.append(row)
    return rows


def load_bundle(out_dir: str) -> tuple[RunConfig, list[dict]]:
    """Reload the configuration echo and record table of an emitted bundle."""
    with open(os.path.join(out_dir, SUMMARY_FILENAME)) as handle:
        summary = json.load(handle)
    config = parse_config(summary["config"])
    rows = read_records_csv(os.path.join(out_dir, RECORDS_FILENAME))
    return config, rows


def compare(config: RunConfig, rows: list[dict]) -> dict:
    """Recompute every emitted sample from the density matrix directly.

    The oracle path folds rotation and displacement into a single complex
    displacement of the prepared state, independent of the factored
    rotate-then-displace kernel the scan used.  For exact-mode bundles the
    report carries max absolute deviations; for shot-noise bundles it adds
    the worst multinomial z-score.
    """
    omegas, weights = config.dephasing.nodes()
    specs = [OscillatorSpec(mass=config.lattice.mass, omega=float(w)) for w in omegas]
    prepared = [_prepare(config, spec, [])[0] for spec in specs]
    deviations = {"p0": 0.0, "p1": 0.0, "p_lost": 0.0, "value": 0.0}
    worst_z = 0.0
    atoms = None
    for row in rows:
        expect = np.zeros(3)
        for weight, spec, rho in zip(weights, specs, prepared):
            alpha = (row["x_m"] / (2.0 * spec.x0)) * np.exp(-1j * row["theta"])
            populations = displaced_number_populations(rho, alpha)
            keep = 2 if config.grid.mode == "husimi" else config.bound_dim
            p_kept = populations[:keep]
            expect += weight * np.array(
                [populations[0], populations[1], max(0.0, 1.0 - p_kept.sum())]
            )
        measured = np.array([row["p0"], row["p1"], row["p_lost"]])
        if config.sampling == "noise":
            atoms = config.noise.atom_count * config.noise.repetitions
            sigma = np.sqrt(np.maximum(expect * (1.0 - expect), 1e-300) / atoms)
            worst_z = max(worst_z, float(np.max(np.abs(measured - expect) / np.maximum(sigma, 1e-15))))
        else:
            deviations["p0"] = max(deviations["p0"], abs(measured[0] - expect[0]))
            deviations["p1"] = max(deviations["p1"], abs(measured[1] - expect[1]))
            deviations["p_lost"] = max(deviations["p_lost"], abs(measured[2] - expect[2]))
            if config.grid.mode == "husimi":
                oracle_value = expect[0] / math.pi
            else:
                oracle_value = (expect[0] - expect[1]) / math.pi
            deviations["value"] = max(deviations["value"], abs(row["value"] - oracle_value))
    report = {"mode": config.grid.mode, "sampling": config.sampling, "points": len(rows)}
    if config.sampling == "noise":
        report["max_z_score"] = worst_z
        report["atoms_per_point"] = atoms
    else:
        report["max_abs_deviation"] = deviations
    return report


def emit_cross_sections(bundles: list[ResultBundle], path: str) -> str:
    """Plot-ready radial cuts through each bundle's scan maximum, keyed by run.

    One CSV with columns run_id, displacement_m, theta, value: the cut at the
    angle of the largest sample, one block per bundle.
    """
    g = lambda v: format(v, ".17g")  # noqa: E731
    lines = ["run_id,displacement_m,theta,value"]
    for bundle in bundles:
        best = max(bundle.samples, key=lambda s: s.value)
        cut = [s for s in bundle.samples if s.theta == best.theta]
        for sample in sorted(cut, key=lambda s: s.alpha_abs):
            record = next(r for r in bundle.records if r.index == sample.index)
            lines.append(
                ",".join([bundle.run_id, g(record.displacement), g(sample.theta), g(sample.value)])
            )
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")
    return path
