"""
Storage module for experiment outputs

Every file starts with a "# schema=<name>@<version>" line followed by a
header row. Numbers are written with 17 significant digits.
"""

import csv
import math
import os

import numpy as np

from config import CONFIG
from errors import ConfigError
from problem import Dataset

DATASET_SCHEMA = "dataset@1"
TRAJECTORY_SCHEMA = "trajectory@1"


def format_value(value) -> str:
    """Cell text: '%.17g' for reals, plain text otherwise"""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return "%.17g" % value
    if value is None:
        return ""
    return str(value)


class CsvWriter:
    """Row-by-row CSV output; every append is flushed so partial sweeps survive errors"""

    def __init__(self, path: str, schema: str, columns: list):
        self.path = path
        self.columns = list(columns)
        self._file = open(path, 'w', encoding='utf-8', newline='')
        self._file.write(f"# schema={schema}\n")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(self.columns)
        self._file.flush()

    def append(self, row: dict):
        self._writer.writerow([format_value(row.get(col)) for col in self.columns])
        self._file.flush()

    def extend(self, rows):
        for row in rows:
            self.append(row)

    def close(self):
        if not self._file.closed:
            self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class Storage:
    def __init__(self, output_dir: str = None):
        self.data_dir = output_dir or CONFIG["output_dir"]
        self._ensure_data_dir()

    def _ensure_data_dir(self):
        """Create output directory if it doesn't exist"""
        if not os.path.exists(self.data_dir):
            os.makedirs(self.data_dir)

    def path(self, name: str) -> str:
        """Path of an output file; names cannot leave the output directory"""
        if os.path.basename(name) != name or name in ("", ".", ".."):
            raise ConfigError("output", f"file name '{name}' must not contain a directory part")
        return os.path.join(self.data_dir, name)

    def open_csv(self, name: str, schema: str, columns: list) -> CsvWriter:
        return CsvWriter(self.path(name), schema, columns)

    def write_csv(self, name: str, schema: str, columns: list, rows) -> str:
        with self.open_csv(name, schema, columns) as writer:
            writer.extend(rows)
        return writer.path

    def write_text(self, name: str, text: str) -> str:
        path = self.path(name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        return path

    def save_dataset(self, name: str, S: Dataset) -> str:
        """One point per row, columns z0..z{d-1}"""
        columns = [f"z{k}" for k in range(S.dim)]
        rows = ({col: float(x) for col, x in zip(columns, point)} for point in S.points)
        return self.write_csv(name, DATASET_SCHEMA, columns, rows)

    def save_trajectory(self, name: str, traj) -> str:
        """Retained iterates as rows t, w_0.., v_0.."""
        if traj.iterates is None:
            raise ConfigError("retain_iterates", "trajectory export needs retained iterates")
        dim_w, dim_v = len(traj.avg_w), len(traj.avg_v)
        columns = ["t"] + [f"w_{k}" for k in range(dim_w)] + [f"v_{k}" for k in range(dim_v)]
        rows = []
        for t, (w, v) in enumerate(traj.iterates, start=1):
            row = {"t": t}
            row.update({f"w_{k}": float(x) for k, x in enumerate(w)})
            row.update({f"v_{k}": float(x) for k, x in enumerate(v)})
            rows.append(row)
        return self.write_csv(name, TRAJECTORY_SCHEMA, columns, rows)


def read_csv(path: str) -> tuple:
    """(schema, columns, rows) with rows as lists of cell strings"""
    try:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            first = f.readline().rstrip("\n")
            if not first.startswith("# schema="):
                raise ConfigError(path, "missing schema line")
            reader = csv.reader(f)
            columns = next(reader)
            rows = list(reader)
    except (IOError, StopIteration) as e:
        raise ConfigError(path, f"cannot read CSV ({e})")
    return first[len("# schema="):], columns, rows


def load_dataset(path: str, seed: int, data_radius: float, ball_dims: int) -> Dataset:
    schema, _, rows = read_csv(path)
    if schema != DATASET_SCHEMA:
        raise ConfigError(path, f"expected schema {DATASET_SCHEMA}, got {schema}")
    points = np.array([[float(x) for x in row] for row in rows], dtype=np.float64)
    return Dataset(points=points, seed=seed, data_radius=data_radius, ball_dims=ball_dims)


if __name__ == "__main__":
    # Write a small dataset and read it back
    storage = Storage()
    S = Dataset(points=np.array([[0.5, -0.25], [0.0, 1.0]]), seed=0, data_radius=1.0, ball_dims=2)
    path = storage.save_dataset("demo_dataset.csv", S)
    print(f"Saved: {path}")
    print(f"Loaded: {load_dataset(path, 0, 1.0, 2).points.tolist()}")
