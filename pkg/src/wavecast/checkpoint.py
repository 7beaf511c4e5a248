"""Byte-stable checkpoint files.

Layout: one magic line, one JSON header line (sorted keys), then the raw
little-endian float64 payload of every array in header order.  Nothing
time- or platform-dependent goes in, so equal inputs give equal bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, IncompatibleCheckpointError
from .model import ModelConfig, ModelParams

MAGIC = b"WAVECAST-CHECKPOINT 1\n"


@dataclass
class Normalizer:
    """Per-channel affine scaling fitted on training rows."""

    mean: np.ndarray
    std: np.ndarray

    STD_FLOOR = 1e-8

    @classmethod
    def fit(cls, rows: np.ndarray) -> "Normalizer":
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise ValueError("normalizer needs a nonempty [N, channels] array")
        return cls(rows.mean(axis=0), np.maximum(rows.std(axis=0), cls.STD_FLOOR))

    @classmethod
    def identity(cls, n: int) -> "Normalizer":
        return cls(np.zeros(n), np.ones(n))

    def apply(self, a, cols=slice(None)):
        return (np.asarray(a) - self.mean[cols]) / self.std[cols]

    def inverse(self, a, cols=slice(None)):
        return np.asarray(a) * self.std[cols] + self.mean[cols]


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    normalizer: Normalizer
    extra: dict = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        arrays = list(self.params.items()) + [("norm.mean", self.normalizer.mean), ("norm.std", self.normalizer.std)]
        header = {
            "config": self.config.to_dict(),
            "arrays": [[k, list(np.shape(v))] for k, v in arrays],
            "extra": self.extra,
        }
        head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"
        body = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for _, v in arrays)
        return MAGIC + head + body

    def save(self, path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Checkpoint":
        if not blob.startswith(MAGIC):
            raise IncompatibleCheckpointError("not a checkpoint file (bad magic line)")
        rest = blob[len(MAGIC):]
        nl = rest.find(b"\n")
        if nl < 0:
            raise IncompatibleCheckpointError("truncated checkpoint header")
        try:
            header = json.loads(rest[:nl])
            cfg = ModelConfig.from_dict(header["config"])
        except (ValueError, KeyError, TypeError, ConfigurationError) as exc:
            raise IncompatibleCheckpointError(f"unreadable checkpoint header: {exc}") from exc
        payload = memoryview(rest)[nl + 1:]
        arrays, offset = {}, 0
        for name, shape in header["arrays"]:
            count = int(np.prod(shape)) if shape else 1
            nbytes = 8 * count
            if offset + nbytes > len(payload):
                raise IncompatibleCheckpointError(f"checkpoint payload ends inside {name}")
            arrays[name] = np.frombuffer(payload[offset:offset + nbytes], dtype="<f8").reshape(shape).astype(float)
            offset += nbytes
        if offset != len(payload):
            raise IncompatibleCheckpointError("trailing bytes after checkpoint payload")
        norm = Normalizer(arrays.pop("norm.mean"), arrays.pop("norm.std"))
        params = ModelParams(arrays)
        try:
            params.check(cfg)
        except ConfigurationError as exc:
            raise IncompatibleCheckpointError(str(exc)) from exc
        return cls(cfg, params, norm, header.get("extra", {}))

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_bytes(Path(path).read_bytes())
