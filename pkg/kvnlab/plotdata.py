"""gnuplot-ready text files cut out of a finished run: heatmap matrices, 1-D profiles and time series."""

from kvnlab.diagnostics import DEFAULT_PHASE_FLOOR, polar
from kvnlab.em import EmState, em_grid, poynting
from kvnlab.grid import KvnState, PhaseGrid, Rep, to_representation
from kvnlab.helpers import create_and_write_file, logger
from kvnlab.hybrid import hybrid_wigner
from kvnlab.scenario import DIAGNOSTICS_NAME, MANIFEST_NAME, manifest_entry, read_manifest, write_manifest
from kvnlab.snapshots import read_diagnostics, read_snapshot
from pathlib import Path
import io, numpy as np

PHASE_SPACE_MODES = ("kvn", "hybrid", "transform")
SELECTOR_MODES = {
    "density": PHASE_SPACE_MODES,
    "phase": PHASE_SPACE_MODES,
    "marginals": (*PHASE_SPACE_MODES, "wigner"),
    "wigner": ("hybrid", "wigner"),
    "poynting": ("em",),
    "wigner_min_timeseries": ("hybrid", "wigner"),
    "norm_timeseries": None,
    "energy_timeseries": None,
    "residual_timeseries": None,
}
SELECTORS = tuple(SELECTOR_MODES)
TIMESERIES_COLUMNS = {
    "wigner_min_timeseries": "min_density_or_wigner",
    "norm_timeseries": "norm",
    "energy_timeseries": "energy",
    "residual_timeseries": "residual",
}


class PlotSelectorError(ValueError):
    pass


def _matrix_text(matrix):
    buffer = io.StringIO()
    np.savetxt(buffer, matrix, fmt="%.17g", delimiter=" ")
    return buffer.getvalue()


def _columns_text(header, *columns):
    buffer = io.StringIO()
    np.savetxt(buffer, np.column_stack(columns), fmt="%.17g", delimiter=" ", header=" ".join(header))
    return buffer.getvalue()


def _phase_state(snapshot):
    grid = PhaseGrid(**snapshot.header["grid"])
    return KvnState(grid, Rep(snapshot.header["representation"]), snapshot.values)


def _snapshots(directory, manifest):
    for entry in manifest.files_of_kind("snapshot"):
        yield read_snapshot(directory / entry.path)


def _wigner_values(snapshot, mode):
    if mode == "wigner":
        return snapshot.values, PhaseGrid(**snapshot.header["grid"])
    w = hybrid_wigner(_phase_state(snapshot))
    return w.values, w.grid


def _marginals_text(values, grid):
    """Two gnuplot index blocks: (q, int dp) then (p, int dq)."""
    over_p = np.sum(values, axis=1) * grid.dp
    over_q = np.sum(values, axis=0) * grid.dq
    blocks = [_columns_text(["q", "marginal"], grid.q, over_p), _columns_text(["p", "marginal"], grid.p, over_q)]
    return "\n\n".join(blocks)


def _snapshot_files(what, snapshot, mode, phase_floor, warnings):
    """(file stem, text) pairs for one snapshot."""
    name = snapshot.header["name"]
    if what == "density":
        return [(f"density_{name}", _matrix_text(np.abs(snapshot.values) ** 2))]
    if what == "phase":
        decomposition = polar(_phase_state(snapshot), phase_floor)
        if decomposition.empty:
            warnings.append(f"phase plot of {name} is empty: no point above phase_floor={phase_floor:g}")
            return [(f"phase_{name}", "")]
        return [(f"phase_{name}", _matrix_text(decomposition.S))]
    if what == "wigner":
        values, _ = _wigner_values(snapshot, mode)
        return [(f"wigner_{name}", _matrix_text(values))]
    if what == "marginals":
        if mode in ("hybrid", "wigner"):
            values, grid = _wigner_values(snapshot, mode)
        else:
            state = to_representation(_phase_state(snapshot), Rep.QP)
            values, grid = np.abs(state.amp) ** 2, state.grid
        return [(f"marginals_{name}", _marginals_text(values, grid))]
    # poynting
    grid = em_grid(snapshot.header["grid"]["n_z"], snapshot.header["grid"]["length"])
    flux = poynting(EmState(grid, snapshot.values))
    return [(f"poynting_{name}", _columns_text(["z", "S_x", "S_y", "S_z"], grid.z, *flux))]


def emit_plot_data(manifest_path, what, out_dir=None, phase_floor=DEFAULT_PHASE_FLOOR):
    """Write the plot files for one selector and record them (and any warnings) in the manifest.

    Returns the list of written paths.
    """
    if what not in SELECTOR_MODES:
        raise PlotSelectorError(f"unknown plot selector '{what}', choose from: {', '.join(SELECTORS)}")
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    directory = manifest_path.parent
    manifest = read_manifest(manifest_path)
    modes = SELECTOR_MODES[what]
    if modes is not None and manifest.mode not in modes:
        raise PlotSelectorError(f"selector '{what}' does not apply to a {manifest.mode} run")

    out_dir = Path(out_dir) if out_dir else directory / "plots"
    out_dir.mkdir(parents=True, exist_ok=True)
    warnings, outputs = [], []
    if what in TIMESERIES_COLUMNS:
        if not manifest.files_of_kind("diagnostics"):
            raise PlotSelectorError(f"selector '{what}' needs the tsv diagnostics, which this run did not write")
        table = read_diagnostics(directory / DIAGNOSTICS_NAME)
        column = TIMESERIES_COLUMNS[what]
        outputs.append((what, _columns_text(["t", column], table["t"], table[column])))
    else:
        if not manifest.files_of_kind("snapshot"):
            raise PlotSelectorError(f"selector '{what}' needs binary snapshots, which this run did not write")
        for snapshot in _snapshots(directory, manifest):
            outputs.extend(_snapshot_files(what, snapshot, manifest.mode, phase_floor, warnings))

    written = []
    for stem, text in outputs:
        path = out_dir / f"{stem}.dat"
        create_and_write_file(path, text, overwrite=True)
        written.append(path)

    root = directory.resolve()
    for path in written:
        if not _inside(path, root):
            logger.debug(f"{path} lies outside the run directory and is not listed in the manifest")
            continue
        entry = manifest_entry(root, path.resolve(), f"plot:{what}")
        manifest.files = [item for item in manifest.files if item.path != entry.path]
        manifest.files.append(entry)
    for warning in warnings:
        logger.warning(warning)
    manifest.warnings = list(dict.fromkeys([*manifest.warnings, *warnings]))
    write_manifest(directory, manifest)
    return written


def _inside(path, root):
    try:
        path.resolve().relative_to(root)
    except ValueError:
        return False
    return True
