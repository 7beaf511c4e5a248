"""Time-series dataset: 9 gauge elevations plus 3 body motions on a uniform clock."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataSchemaError
from .model import ENDO_NAMES, EXO_NAMES

CHANNELS = ENDO_NAMES + EXO_NAMES
HEADER = ("time",) + CHANNELS


@dataclass
class Dataset:
    times: np.ndarray
    channels: np.ndarray
    name: str = "dataset"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.channels = np.asarray(self.channels, dtype=float)
        if self.channels.ndim != 2 or self.channels.shape[1] != len(CHANNELS):
            raise DataSchemaError(f"channels must be [N x {len(CHANNELS)}], got {self.channels.shape}")
        if self.times.shape != (self.channels.shape[0],):
            raise DataSchemaError("times and channels disagree on the row count")
        if len(self.times) > 1:
            steps = np.diff(self.times)
            if np.any(steps <= 0):
                raise DataSchemaError("times must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-9:
                raise DataSchemaError("times must be uniformly spaced")
        if not np.all(np.isfinite(self.channels)):
            bad = np.argwhere(~np.isfinite(self.channels))[0]
            raise DataSchemaError(f"non-finite value at row {bad[0]}, column {CHANNELS[bad[1]]}")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self) > 1 else float("nan")

    @property
    def endo(self) -> np.ndarray:
        return self.channels[:, : len(ENDO_NAMES)]

    @property
    def exo(self) -> np.ndarray:
        return self.channels[:, len(ENDO_NAMES):]

    def rows(self, sl: slice) -> "Dataset":
        return Dataset(self.times[sl], self.channels[sl], self.name, dict(self.meta))


def format_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    table = np.column_stack([ds.times, ds.channels])
    np.savetxt(buf, table, fmt="%.9g", delimiter=",", header=",".join(HEADER), comments="")
    return buf.getvalue()


def write_csv(ds: Dataset, path) -> Path:
    path = Path(path)
    path.write_text(format_csv(ds))
    if ds.meta:
        write_meta(ds.meta, path.with_suffix(".meta"))
    return path


def read_csv(path, name: str | None = None) -> Dataset:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    missing = [c for c in HEADER if c not in header]
    if missing:
        raise DataSchemaError(f"{path.name}: missing column(s) {', '.join(missing)}")
    extra = [c for c in header if c not in HEADER]
    if extra:
        raise DataSchemaError(f"{path.name}: unexpected column(s) {', '.join(extra)}")
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DataSchemaError(f"{path.name}: {exc}") from exc
    if table.shape[1] != len(header):
        raise DataSchemaError(f"{path.name}: expected {len(header)} values per row, got {table.shape[1]}")
    order = [header.index(c) for c in HEADER]
    table = table[:, order]
    meta_path = path.with_suffix(".meta")
    meta = read_meta(meta_path) if meta_path.exists() else {}
    return Dataset(table[:, 0], table[:, 1:], name or path.stem, meta)


def write_meta(meta: dict, path) -> None:
    lines = [f"{k}={meta[k]}" for k in sorted(meta)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_meta(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataSchemaError(f"{path}: malformed line {line!r}")
        out[key.strip()] = value.strip()
    return out
