from kvnlab.config import parse_config
from kvnlab.plotdata import PlotSelectorError, emit_plot_data
from kvnlab.scenario import read_manifest, run_scenario, verify_manifest
from kvnlab.snapshots import read_snapshot
from tests.conftest import scenario
import numpy as np, pytest, yaml


@pytest.fixture
def finished_run(tmp_path):
    """Run a scenario into tmp_path/<mode> and return the run directory."""

    def run(mode, **sections):
        data = scenario(mode, **sections)
        cfg = parse_config(yaml.safe_dump(data)).with_output_directory(tmp_path / mode)
        run_scenario(cfg)
        return tmp_path / mode

    return run


def test_density_files(finished_run):
    directory = finished_run("kvn")
    written = emit_plot_data(directory / "manifest.yaml", "density")
    assert [path.name for path in written] == [f"density_state_{n:05d}.dat" for n in range(5)]
    assert all(path.parent == directory / "plots" for path in written)

    matrix = np.loadtxt(written[2])
    expected = np.abs(read_snapshot(directory / "state_00002.hdr").values) ** 2
    assert matrix.shape == (32, 32)
    assert np.allclose(matrix, expected, rtol=1e-15, atol=0)

    manifest = read_manifest(directory)
    assert len(manifest.files_of_kind("plot:density")) == 5
    assert verify_manifest(directory, manifest) == []

    # emitting again replaces the entries rather than duplicating them
    emit_plot_data(directory, "density")
    assert len(read_manifest(directory).files_of_kind("plot:density")) == 5


def test_empty_phase_plot_is_a_warning(finished_run):
    directory = finished_run("kvn")
    written = emit_plot_data(directory, "phase", phase_floor=2.0)
    assert all(path.read_text() == "" for path in written)
    manifest = read_manifest(directory)
    assert any("is empty" in warning for warning in manifest.warnings)


def test_phase_plot_masks_low_density(finished_run):
    directory = finished_run("kvn", initial={"kind": "gaussian", "q0": 1.0, "phase": "qp"})
    written = emit_plot_data(directory, "phase")
    phase = np.loadtxt(written[0])
    assert phase.shape == (32, 32)
    assert np.isnan(phase).any() and np.isfinite(phase).any()


def test_marginals_integrate_to_one(finished_run):
    directory = finished_run("kvn")
    written = emit_plot_data(directory, "marginals")
    blocks = written[0].read_text().split("\n\n")
    assert len(blocks) == 2
    over_p = np.loadtxt(blocks[0].splitlines())
    over_q = np.loadtxt(blocks[1].splitlines())
    assert over_p.shape == over_q.shape == (32, 2)
    dq, dp = over_p[1, 0] - over_p[0, 0], over_q[1, 0] - over_q[0, 0]
    assert np.sum(over_p[:, 1]) * dq == pytest.approx(1.0, abs=1e-12)
    assert np.sum(over_q[:, 1]) * dp == pytest.approx(1.0, abs=1e-12)


def test_wigner_files(finished_run):
    directory = finished_run("wigner")
    written = emit_plot_data(directory, "wigner")
    assert written[0].name == "wigner_wigner_00000.dat"
    assert np.allclose(np.loadtxt(written[0]), read_snapshot(directory / "wigner_00000.hdr").values, rtol=1e-15)

    hybrid = finished_run("hybrid")
    values = np.loadtxt(emit_plot_data(hybrid, "wigner")[-1])
    grid = read_snapshot(hybrid / "state_00000.hdr").header["grid"]
    cell = (grid["q_max"] - grid["q_min"]) / grid["n_q"] * (grid["p_max"] - grid["p_min"]) / grid["n_p"]
    assert np.sum(values) * cell == pytest.approx(1.0, abs=1e-10)


def test_poynting_columns(finished_run):
    directory = finished_run("em")
    table = np.loadtxt(emit_plot_data(directory, "poynting")[0])
    assert table.shape == (32, 4)
    assert np.allclose(table[:, 1:3], 0.0)
    assert np.all(table[:, 3] >= 0)


def test_timeseries(finished_run):
    directory = finished_run("hybrid")
    written = emit_plot_data(directory, "norm_timeseries")
    assert [path.name for path in written] == ["norm_timeseries.dat"]
    assert written[0].read_text().startswith("# t norm")
    table = np.loadtxt(written[0])
    assert table.shape == (5, 2)
    assert table[:, 0] == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])
    assert len(emit_plot_data(directory, "wigner_min_timeseries")) == 1


def test_selector_errors(finished_run):
    directory = finished_run("kvn")
    with pytest.raises(PlotSelectorError, match="unknown plot selector"):
        emit_plot_data(directory, "spectrum")
    with pytest.raises(PlotSelectorError, match="does not apply"):
        emit_plot_data(directory, "poynting")
    with pytest.raises(PlotSelectorError, match="does not apply"):
        emit_plot_data(directory, "wigner")

    binary_only = finished_run("transform", output={"formats": ["bin"]})
    with pytest.raises(PlotSelectorError, match="tsv diagnostics"):
        emit_plot_data(binary_only, "energy_timeseries")


def test_output_outside_the_run_is_not_listed(finished_run, tmp_path):
    directory = finished_run("kvn")
    written = emit_plot_data(directory, "density", out_dir=tmp_path / "elsewhere")
    assert all(path.exists() for path in written)
    assert read_manifest(directory).files_of_kind("plot:density") == []
