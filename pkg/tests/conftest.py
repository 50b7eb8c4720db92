from click.testing import CliRunner
from contextlib import contextmanager
from pathlib import Path
import os, pytest, yaml


@pytest.fixture
def cli_runner():
    # Create a Click CLI runner that can be used to invoke the CLI
    return CliRunner()


@contextmanager
def in_temp_directory(tmp_path):
    old_dir = Path.cwd()
    os.chdir(tmp_path)
    try:
        yield
    finally:
        os.chdir(old_dir)


def scenario(mode, **sections):
    """A small scenario dict for `mode`; keyword arguments override whole sections."""
    base = {
        "grid": {"n_q": 32, "n_p": 32, "q_min": -6.0, "q_max": 6.0, "p_min": -6.0, "p_max": 6.0},
        "potential": {"kind": "harmonic", "omega": 1.0},
        "initial": {"kind": "gaussian", "q0": 1.0, "width_q": 0.8, "width_p": 0.8},
        "run": {"mode": mode, "dt": 0.01, "steps": 20, "record_every": 5},
    }
    if mode == "em":
        base["grid"] = {"n_z": 32}
        base["initial"] = {"kind": "plane_wave_em", "k_index": 1}
    if mode == "wigner":
        base["grid"] = {"n_q": 64, "n_p": 64, "q_min": -8.0, "q_max": 8.0}
    if mode == "hybrid":
        base["run"]["kappa"] = 1.0
    base.update(sections)
    return base


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario dict as YAML, pointing its output into tmp_path unless it names a directory."""

    def write(data, name="scenario.yaml", out="run"):
        data = {**data}
        data.setdefault("output", {"directory": str(tmp_path / out)})
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data, sort_keys=False))
        return path

    return write
