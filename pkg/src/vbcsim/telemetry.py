"""Per-tick log with a fixed column schema."""
import csv

import numpy as np

from .vehicle import ACTUATOR_NAMES

_act = [n.lower() for n in ACTUATOR_NAMES]

STATE_COLUMNS = ("x", "y", "z", "roll", "pitch", "yaw", "u", "v", "w", "p", "q", "r")

LOG_COLUMNS = (
    ("t", "segment")
    + STATE_COLUMNS
    + tuple(f"ext_{a}" for a in _act)
    + tuple(f"cmd_{a}" for a in _act)
    + ("sens_pressure", "sens_roll", "sens_pitch", "sens_yaw")
    + ("sp_depth", "sp_pressure", "sp_roll", "sp_pitch")
    + tuple(f"pid_{ch}_{term}" for ch in ("pressure", "roll", "pitch")
            for term in ("p", "i", "d", "out"))
    + tuple(f"uol_{a}" for a in _act)
    + tuple(f"mix_{a}" for a in _act)
    + tuple(f"sat_{a}" for a in _act)
    + ("travel",)
)

_INDEX = {name: i for i, name in enumerate(LOG_COLUMNS)}


class TickLog:
    """Rows of ``LOG_COLUMNS``, one per control tick."""

    columns = LOG_COLUMNS

    def __init__(self, rows=None):
        self._rows = [] if rows is None else list(rows)
        self._data = None

    def append(self, row):
        if len(row) != len(LOG_COLUMNS):
            raise ValueError(f"row has {len(row)} values, schema has {len(LOG_COLUMNS)}")
        self._rows.append(row)
        self._data = None

    def __len__(self):
        return len(self._rows)

    @property
    def data(self):
        if self._data is None:
            self._data = np.array(self._rows, dtype=float).reshape(-1, len(LOG_COLUMNS))
        return self._data

    def __getitem__(self, name):
        return self.data[:, _INDEX[name]]

    def slice(self, start, stop):
        return TickLog(self._rows[start:stop])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(LOG_COLUMNS)
            for row in self._rows:
                writer.writerow([repr(float(v)) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != LOG_COLUMNS:
            raise ValueError(f"{path}: unexpected log schema")
        return TickLog([[float(v) for v in row] for row in reader])
