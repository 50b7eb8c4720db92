from dataclasses import dataclass, field
from kvnlab import KVNLAB, version
from kvnlab.diagnostics import continuity_residual, density, superselect
from kvnlab.em import (
    X_HAT,
    diagnostics as em_diagnostics,
    em_evolve,
    em_grid,
    mode_to_oscillator,
    plane_wave,
    poynting_continuity_residual,
    project_mode,
    standing_mode,
)
from kvnlab.errors import GridError
from kvnlab.grid import KvnState, Rep, gaussian_state, make_grid, norm, normalized, to_representation
from kvnlab.helpers import create_and_write_file, fft_workers, file_sha256, logger
from kvnlab.hybrid import (
    HybridParams,
    cat_wavefunction,
    cat_wigner,
    ehrenfest_residual,
    evolve_hybrid,
    gaussian_wavefunction,
    hybrid_wigner,
    schrodinger_oracle,
    wigner_from_state,
    wigner_gaussian_state,
    wigner_grid,
    wigner_state,
)
from kvnlab.potentials import PotentialSpec
from kvnlab.propagator import StepperConfig, evolve
from kvnlab.snapshots import read_snapshot, write_diagnostics, write_snapshot
from pathlib import Path
from pydantic import BaseModel, Field
import arrow, numpy as np, os, yaml

MANIFEST_NAME = "manifest.yaml"
DIAGNOSTICS_NAME = "diagnostics.tsv"
CYCLE = (Rep.QLp, Rep.LqLp, Rep.LqP, Rep.QP)


class OutputDirectoryError(OSError):
    pass


class ManifestFile(BaseModel):
    path: str
    kind: str
    sha256: str
    bytes: int


class RunManifest(BaseModel):
    """Everything a run emitted, with checksums, plus its config echo and summary."""

    tool: str = KVNLAB
    version: str = version
    config: dict
    started: str
    finished: str = ""
    files: list[ManifestFile] = Field(default_factory=list)
    summary: dict = Field(default_factory=dict)
    warnings: list[str] = Field(default_factory=list)

    @property
    def mode(self):
        return self.config["run"]["mode"]

    def files_of_kind(self, kind):
        return [entry for entry in self.files if entry.kind == kind]


def write_manifest(directory, manifest):
    path = Path(directory) / MANIFEST_NAME
    create_and_write_file(path, yaml.safe_dump(manifest.model_dump(), sort_keys=False), overwrite=True)
    return path


def read_manifest(path):
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    return RunManifest.model_validate(yaml.safe_load(path.read_text()))


def manifest_entry(directory, path, kind):
    path = Path(path)
    return ManifestFile(
        path=str(path.relative_to(directory)), kind=kind, sha256=file_sha256(path), bytes=path.stat().st_size
    )


@dataclass
class ModeResult:
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def _row(t, norm_value, energy, minimum, residual):
    return {"t": t, "norm": norm_value, "energy": energy, "min_density_or_wigner": minimum, "residual": residual}


def _drift(values):
    values = np.asarray(values, dtype=float)
    return float(np.max(np.abs(values - values[0])))


def _relative_drift(values):
    values = np.asarray(values, dtype=float)
    return float(np.max(np.abs(values - values[0])) / abs(values[0])) if values[0] else _drift(values)


# ---------------------------------------------------------------------------- #
#                                Scenario builders                             #
# ---------------------------------------------------------------------------- #


def build_grid(cfg):
    g = cfg.grid
    return make_grid(g.n_q, g.n_p, (g.q_min, g.q_max), (g.p_min, g.p_max))


def build_potential(cfg, q_axis):
    p = cfg.potential
    if p.kind == "free":
        return PotentialSpec.free()
    if p.kind == "harmonic":
        return PotentialSpec.harmonic(p.omega)
    if p.kind == "quartic":
        return PotentialSpec.quartic(p.a, p.b)
    table = np.loadtxt(p.file, ndmin=2)
    if table.shape != (len(q_axis), 3):
        raise GridError(f"{p.file}: expected {len(q_axis)} rows of 'q V dV/dq', got shape {table.shape}")
    if not np.allclose(table[:, 0], q_axis, rtol=0, atol=1e-9 * abs(q_axis[1] - q_axis[0])):
        raise GridError(f"{p.file}: q column does not match the grid q-axis")
    return PotentialSpec.tabulated(table[:, 1], table[:, 2])


def _phase_field(initial):
    if initial.phase == "qp":
        return lambda q, p: initial.phase_scale * q * p
    if initial.phase == "linear":
        return lambda q, p: initial.phase_scale * q
    return None


def _custom_state(initial, grid):
    snapshot = read_snapshot(initial.file)
    if tuple(snapshot.values.shape) != grid.shape:
        raise GridError(f"{initial.file}: shape {snapshot.values.shape} does not match grid {grid.shape}")
    return KvnState(grid, Rep(snapshot.header.get("representation", "QP")), snapshot.values)


def build_kvn_initial(cfg, grid):
    initial = cfg.initial
    if initial.kind == "custom_file":
        return _custom_state(initial, grid)
    phase = _phase_field(initial)
    if initial.kind == "cat":
        a = initial.separation
        left = gaussian_state(grid, initial.q0 - a, initial.p0, initial.width_q, initial.width_p, phase, False)
        right = gaussian_state(grid, initial.q0 + a, initial.p0, initial.width_q, initial.width_p, phase, False)
        return normalized(left.with_amp(left.amp + right.amp))
    return gaussian_state(grid, initial.q0, initial.p0, initial.width_q, initial.width_p, phase)


def build_hybrid_initial(cfg, grid):
    initial = cfg.initial
    if initial.kind == "custom_file":
        return _custom_state(initial, grid)
    if initial.kind == "cat":
        return wigner_state(grid, cat_wigner(grid, initial.separation, cfg.run.hbar))
    return wigner_gaussian_state(grid, initial.q0, initial.p0, initial.width_q, initial.width_p)


def _state_header(state, t, mode):
    return {
        "axes": list(state.rep.axis_labels),
        "representation": state.rep.value,
        "t": float(t),
        "mode": mode,
        "grid": state.grid.as_dict(),
    }


def _energy_field(grid, potential):
    return 0.5 * grid.p[None, :] ** 2 + potential.value_on(grid.q)[:, None]


def _kvn_energy(state, energy_field):
    qp = to_representation(state, Rep.QP)
    weight = np.abs(qp.amp) ** 2
    return float(np.sum(energy_field * weight) / np.sum(weight))


# ---------------------------------------------------------------------------- #
#                                     Modes                                    #
# ---------------------------------------------------------------------------- #


def run_kvn(cfg):
    grid = build_grid(cfg)
    potential = build_potential(cfg, grid.q)
    state = build_kvn_initial(cfg, grid)
    if cfg.run.superselect:
        state = superselect(state)
    state = to_representation(state, cfg.run.representation)
    trajectory = evolve(state, potential, StepperConfig(cfg.run.dt, cfg.run.steps, cfg.run.record_every))

    result = ModeResult(warnings=list(trajectory.warnings))
    if len(trajectory) >= 3:
        report = continuity_residual(trajectory, potential)
        residuals, result.summary["max_continuity_residual"] = report.per_snapshot, report.max_residual
    else:
        residuals = [float("nan")] * len(trajectory)
        result.warnings.append("fewer than 3 snapshots recorded; continuity residual not evaluated")

    energy_field = _energy_field(grid, potential)
    norms, energies = [], []
    for n, (t, s) in enumerate(zip(trajectory.times, trajectory.states)):
        norms.append(norm(s))
        energies.append(_kvn_energy(s, energy_field))
        result.rows.append(_row(t, norms[-1], energies[-1], float(density(s).min()), residuals[n]))
        result.snapshots.append((f"state_{n:05d}", s.amp, _state_header(s, t, "kvn")))
    norms.append(norm(trajectory.final))
    energies.append(_kvn_energy(trajectory.final, energy_field))
    result.summary.update(
        final_norm=norms[-1],
        norm_drift=_relative_drift(norms),
        energy_drift=_drift(energies),
        potential=potential.describe(),
    )
    return result


def run_hybrid(cfg):
    grid = build_grid(cfg)
    potential = build_potential(cfg, grid.q)
    params = HybridParams(hbar=cfg.run.hbar, kappa=cfg.run.kappa)
    state = to_representation(build_hybrid_initial(cfg, grid), cfg.run.representation)
    stepper_cfg = StepperConfig(cfg.run.dt, cfg.run.steps, cfg.run.record_every)
    trajectory = evolve_hybrid(state, potential, params, stepper_cfg)

    result = ModeResult(warnings=list(trajectory.warnings))
    if len(trajectory) >= 3:
        report = ehrenfest_residual(trajectory, potential, params)
        residuals, result.summary["max_ehrenfest_residual"] = report.per_snapshot, report.max_residual
    else:
        residuals = [float("nan")] * len(trajectory)
        result.warnings.append("fewer than 3 snapshots recorded; Ehrenfest residual not evaluated")

    energy_field = _energy_field(grid, potential)
    cell = grid.dq * grid.dp
    norms, energies, minima, integrals = [], [], [], []
    for n, (t, s) in enumerate(zip(trajectory.times, trajectory.states)):
        w = hybrid_wigner(s)
        norms.append(norm(s))
        energies.append(float(np.sum(energy_field * w.values) * cell))
        minima.append(float(w.values.min()))
        integrals.append(float(np.sum(to_representation(s, Rep.QP).amp.real) * cell))
        result.rows.append(_row(t, norms[-1], energies[-1], minima[-1], residuals[n]))
        result.snapshots.append((f"state_{n:05d}", s.amp, _state_header(s, t, "hybrid")))
    result.summary.update(
        kappa=params.kappa,
        hbar=params.hbar,
        final_norm=norm(trajectory.final),
        norm_drift=_relative_drift([*norms, norm(trajectory.final)]),
        energy_drift=_drift(energies),
        min_wigner=min(minima),
        wigner_integral_drift=_drift(integrals),
        potential=potential.describe(),
    )
    return result


def run_em(cfg):
    grid = em_grid(cfg.grid.n_z, cfg.grid.z_length)
    initial = cfg.initial
    if initial.profile == "standing":
        state = standing_mode(grid, initial.k_index, initial.amplitude, 0.0)
    else:
        state = plane_wave(grid, initial.k_index, initial.amplitude)
    trajectory = em_evolve(state, cfg.run.dt, cfg.run.steps, cfg.run.record_every)

    result = ModeResult()
    if len(trajectory) >= 3:
        report = poynting_continuity_residual(trajectory)
        residuals, result.summary["max_poynting_residual"] = report.per_snapshot, report.max_residual
    else:
        residuals = [float("nan")] * len(trajectory)
        result.warnings.append("fewer than 3 snapshots recorded; Poynting residual not evaluated")

    energies, norms, div_e, div_b = [], [], [], []
    for n, (t, s) in enumerate(zip(trajectory.times, trajectory.states)):
        d = em_diagnostics(s)
        energies.append(d.energy)
        norms.append(np.sqrt(d.energy))
        div_e.append(d.div_E)
        div_b.append(d.div_B)
        result.rows.append(_row(t, norms[-1], d.energy, float(d.energy_density.min()), residuals[n]))
        header = {"axes": ["component", "z"], "representation": "EM", "t": float(t), "mode": "em"}
        result.snapshots.append((f"field_{n:05d}", s.field, {**header, "grid": grid.as_dict()}))
    final = em_diagnostics(trajectory.final)
    result.summary.update(
        final_energy=final.energy,
        energy_drift=_relative_drift([*energies, final.energy]),
        norm_drift=_relative_drift([*norms, np.sqrt(final.energy)]),
        div_E_drift=_drift([*div_e, final.div_E]),
        div_B_drift=_drift([*div_b, final.div_B]),
    )
    if initial.profile == "standing":
        k = grid.wavenumber(initial.k_index)
        mode = mode_to_oscillator(initial.amplitude, 0.0, k)
        t_final = cfg.run.steps * cfg.run.dt
        expected = np.array(mode.field_amplitudes(t_final))
        measured = np.real(np.array(project_mode(trajectory.final, initial.k_index, X_HAT)))
        result.summary["oscillator_mapping_error"] = float(np.max(np.abs(expected - measured)))
    return result


def run_transform(cfg):
    grid = build_grid(cfg)
    potential = build_potential(cfg, grid.q)
    state = build_kvn_initial(cfg, grid)
    if cfg.run.superselect:
        state = superselect(state)
    reference = state.amp
    energy_field = _energy_field(grid, potential)
    result = ModeResult()

    initial_norm = norm(state)
    unitarity = 0.0
    for source in Rep:
        for target in Rep:
            if source != target:
                moved = to_representation(to_representation(state, source), target)
                unitarity = max(unitarity, abs(norm(moved) - initial_norm) / initial_norm)
        view = to_representation(state, source)
        result.snapshots.append((f"state_{source.value}", view.amp, _state_header(view, 0.0, "transform")))

    scale = np.max(np.abs(reference))
    worst = 0.0
    current = state
    for n in range(cfg.run.steps + 1):
        if n:
            for target in CYCLE:
                current = to_representation(current, target)
        error = float(np.max(np.abs(current.amp - reference)) / scale)
        worst = max(worst, error)
        if n % cfg.run.record_every == 0:
            result.rows.append(
                _row(n, norm(current), _kvn_energy(current, energy_field), float(density(current).min()), error)
            )
    result.summary.update(max_roundtrip_error=worst, max_unitarity_error=unitarity, cycles=cfg.run.steps)
    return result


def run_wigner(cfg):
    g = cfg.grid
    params = HybridParams(hbar=cfg.run.hbar, kappa=1.0)
    grid = wigner_grid(g.n_q, g.q_min, g.q_max, params.hk)
    potential = build_potential(cfg, grid.q)
    x = grid.q
    if cfg.initial.kind == "cat":
        psi = cat_wavefunction(x - cfg.initial.q0, cfg.initial.separation, params.hbar)
    else:
        psi = gaussian_wavefunction(x, cfg.initial.q0, cfg.initial.p0, params.hbar, cfg.initial.width_q)
    psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dq)
    run = cfg.run
    trajectory = schrodinger_oracle(psi, x, potential, params.hbar, run.dt, run.steps, run.record_every)

    result = ModeResult()
    energy_field = _energy_field(grid, potential)
    cell = grid.dq * grid.dp
    energies, minima, purities = [], [], []
    for n, (t, wavefunction) in enumerate(zip(trajectory.times, trajectory.wavefunctions)):
        w = wigner_from_state(wavefunction, params, grid)
        integral = w.integral
        energies.append(float(np.sum(energy_field * w.values) * cell))
        minima.append(float(w.values.min()))
        purities.append(trajectory[n].purity)
        wave_norm = float(np.sqrt(np.sum(np.abs(wavefunction) ** 2) * grid.dq))
        result.rows.append(_row(t, wave_norm, energies[-1], minima[-1], abs(integral - 1)))
        header = {"axes": ["q", "p"], "representation": "QP", "t": float(t), "mode": "wigner"}
        result.snapshots.append((f"wigner_{n:05d}", w.values, {**header, "grid": grid.as_dict()}))
    result.summary.update(
        min_wigner=min(minima),
        energy_drift=_drift(energies),
        max_purity_error=float(np.max(np.abs(np.array(purities) - 1))),
        potential=potential.describe(),
    )
    return result


MODE_RUNNERS = {
    "kvn": run_kvn,
    "hybrid": run_hybrid,
    "em": run_em,
    "transform": run_transform,
    "wigner": run_wigner,
}


# ---------------------------------------------------------------------------- #
#                                   Top level                                  #
# ---------------------------------------------------------------------------- #


def prepare_output_directory(directory):
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputDirectoryError(f"cannot create output directory {directory}: {e}") from e
    if not os.access(directory, os.W_OK):
        raise OutputDirectoryError(f"output directory {directory} is not writable")
    return directory


def run_scenario(cfg, threads=None):
    """Run one validated scenario and write its diagnostics, snapshots and manifest (manifest last)."""
    directory = prepare_output_directory(cfg.output.directory)
    started = arrow.utcnow()
    logger.info(f"Running {cfg.run.mode} scenario into {directory}")
    with fft_workers(threads):
        result = MODE_RUNNERS[cfg.run.mode](cfg)

    manifest = RunManifest(config=cfg.echo(), started=started.isoformat())
    if "tsv" in cfg.output.formats:
        path = write_diagnostics(directory / DIAGNOSTICS_NAME, result.rows)
        manifest.files.append(manifest_entry(directory, path, "diagnostics"))
    if "bin" in cfg.output.formats:
        for name, array, header in result.snapshots:
            bin_path, hdr_path = write_snapshot(directory, name, array, header)
            manifest.files.append(manifest_entry(directory, bin_path, "snapshot"))
            manifest.files.append(manifest_entry(directory, hdr_path, "snapshot_header"))
    manifest.summary = {key: _plain(value) for key, value in result.summary.items()}
    manifest.summary["records"] = len(result.rows)
    manifest.warnings = list(dict.fromkeys(result.warnings))
    manifest.finished = arrow.utcnow().isoformat()
    write_manifest(directory, manifest)
    return manifest


def _plain(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def verify_manifest(directory, manifest):
    """Names of listed files whose checksum no longer matches."""
    directory = Path(directory)
    return [entry.path for entry in manifest.files if file_sha256(directory / entry.path) != entry.sha256]
