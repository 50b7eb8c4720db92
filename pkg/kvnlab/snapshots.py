"""Flat little-endian field snapshots with YAML sidecar headers, and the diagnostics table."""

from dataclasses import dataclass
from kvnlab.helpers import create_and_write_file
from pathlib import Path
import math, numpy as np, yaml

DTYPES = {"c128le": "<c16", "f64le": "<f8"}
DIAGNOSTIC_COLUMNS = ("t", "norm", "energy", "min_density_or_wigner", "residual")


@dataclass(frozen=True, eq=False)
class Snapshot:
    values: np.ndarray
    header: dict

    @property
    def name(self):
        return self.header["name"]


def dtype_tag(array):
    return "c128le" if np.iscomplexobj(array) else "f64le"


def write_snapshot(directory, name, array, header):
    """Write <name>.bin and <name>.hdr; returns both paths."""
    directory = Path(directory)
    tag = dtype_tag(array)
    data = np.ascontiguousarray(array, dtype=DTYPES[tag])
    full_header = {
        "name": name,
        "file": f"{name}.bin",
        "dtype": tag,
        "shape": list(data.shape),
        "endianness": "little",
        **header,
    }
    bin_path, hdr_path = directory / f"{name}.bin", directory / f"{name}.hdr"
    create_and_write_file(bin_path, data.tobytes(), overwrite=True)
    create_and_write_file(hdr_path, yaml.safe_dump(full_header, sort_keys=False), overwrite=True)
    return bin_path, hdr_path


def read_snapshot(path):
    """Load a snapshot from either its .hdr or its .bin path."""
    path = Path(path)
    hdr_path = path.with_suffix(".hdr")
    header = yaml.safe_load(hdr_path.read_text())
    if header.get("endianness") != "little" or header.get("dtype") not in DTYPES:
        raise ValueError(f"{hdr_path}: unsupported dtype {header.get('dtype')} / {header.get('endianness')}")
    raw = (hdr_path.parent / header["file"]).read_bytes()
    values = np.frombuffer(raw, dtype=DTYPES[header["dtype"]]).reshape(header["shape"]).copy()
    return Snapshot(values=values, header=header)


# ---------------------------------------------------------------------------- #
#                               Diagnostics table                              #
# ---------------------------------------------------------------------------- #


def format_value(value):
    value = float(value)
    return "nan" if math.isnan(value) else f"{value:.17g}"


def write_diagnostics(path, rows):
    """Tab-separated table with a '#' header line, one row per recorded time."""
    lines = ["# " + "\t".join(DIAGNOSTIC_COLUMNS)]
    lines += ["\t".join(format_value(row[column]) for column in DIAGNOSTIC_COLUMNS) for row in rows]
    create_and_write_file(path, "\n".join(lines) + "\n", overwrite=True)
    return Path(path)


def read_diagnostics(path):
    """Returns a dict of column name -> float array."""
    table = np.loadtxt(path, comments="#", ndmin=2)
    return {column: table[:, n] for n, column in enumerate(DIAGNOSTIC_COLUMNS)}
