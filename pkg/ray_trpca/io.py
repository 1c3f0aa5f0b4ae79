"""File formats.

Matrices use the ``SRT1`` container: the magic bytes ``b"SRT1"``, the
little-endian ``uint64`` row and column counts, then ``rows * cols``
complex entries as interleaved little-endian float64 ``(re, im)`` pairs in
row-major order. Axis metadata and the provenance header live in a sidecar
``<file>.json``. Every file is written to a temporary file first and then
renamed into place.
"""
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union
import json
import os
import struct
import tempfile

import numpy as np
import pandas as pd
import torch

from ray_trpca.numerics import DTYPE, REAL_DTYPE
from ray_trpca.sar_model import DataMatrix, RadarConfig

MAGIC = b"SRT1"
_SHAPE = struct.Struct("<QQ")

PathLike = Union[str, Path]


@contextmanager
def atomic_write(path: PathLike, mode: str = "wb"):
    """Open a temporary file next to ``path``; rename it onto ``path`` when
    the block exits without error."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(
        dir=str(path.parent), prefix=f".{path.name}.", suffix=".tmp")
    try:
        kwargs = {} if "b" in mode else {"encoding": "utf-8", "newline": ""}
        with os.fdopen(fd, mode, **kwargs) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _to_builtin(value: Any):
    if isinstance(value, torch.Tensor):
        value = value.detach().cpu().numpy()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not "
                    "JSON serializable")


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_to_builtin)


def write_json(path: PathLike, obj: Dict[str, Any],
               header: Optional[Dict[str, Any]] = None) -> Path:
    payload = dict(obj)
    if header:
        payload["header"] = dict(header)
    with atomic_write(path, "w") as f:
        f.write(dumps(payload) + "\n")
    return Path(path)


def read_json(path: PathLike) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def encode_matrix(values: torch.Tensor) -> bytes:
    if values.dim() != 2:
        raise ValueError(
            f"only matrices can be stored, got shape {tuple(values.shape)}")
    rows, cols = values.shape
    data = np.ascontiguousarray(
        values.detach().to(DTYPE).cpu().numpy(), dtype="<c16")
    return MAGIC + _SHAPE.pack(rows, cols) + data.tobytes()


def decode_matrix(blob: bytes) -> torch.Tensor:
    if blob[:len(MAGIC)] != MAGIC:
        raise ValueError(
            f"not an SRT1 matrix: magic bytes {blob[:len(MAGIC)]!r}")
    offset = len(MAGIC) + _SHAPE.size
    if len(blob) < offset:
        raise ValueError("truncated SRT1 header")
    rows, cols = _SHAPE.unpack(blob[len(MAGIC):offset])
    expected = offset + rows * cols * 16
    if len(blob) != expected:
        raise ValueError(
            f"SRT1 payload has {len(blob)} bytes, expected {expected} for "
            f"{rows}x{cols}")
    data = np.frombuffer(blob, dtype="<c16", offset=offset)
    return torch.from_numpy(data.reshape(rows, cols).astype(np.complex128))


def write_matrix(path: PathLike,
                 values: torch.Tensor,
                 meta: Optional[Dict[str, Any]] = None) -> Path:
    """Write ``values`` in the SRT1 container plus its sidecar."""
    with atomic_write(path, "wb") as f:
        f.write(encode_matrix(values))
    write_json(sidecar_path(path), {"shape": list(values.shape),
                                    **(meta or {})})
    return Path(path)


def read_matrix(path: PathLike) -> Tuple[torch.Tensor, Dict[str, Any]]:
    with open(path, "rb") as f:
        values = decode_matrix(f.read())
    meta_path = sidecar_path(path)
    meta = read_json(meta_path) if meta_path.exists() else {}
    return values, meta


def save_data_matrix(path: PathLike,
                     D: DataMatrix,
                     header: Optional[Dict[str, Any]] = None,
                     **extra) -> Path:
    meta = {
        "slow_axis_s": D.slow_axis,
        "fast_axis_s": D.fast_axis,
        "header": dict(header or {}),
    }
    meta.update(extra)
    return write_matrix(path, D.values, meta)


def load_data_matrix(path: PathLike,
                     config: Optional[RadarConfig] = None) -> DataMatrix:
    """Read a data matrix; axes come from the sidecar, or from ``config``
    when the sidecar is missing."""
    values, meta = read_matrix(path)
    if "slow_axis_s" in meta:
        slow = torch.tensor(meta["slow_axis_s"], dtype=REAL_DTYPE)
        fast = torch.tensor(meta["fast_axis_s"], dtype=REAL_DTYPE)
    elif config is not None:
        slow, fast = config.slow_axis, config.fast_axis
    else:
        raise ValueError(f"{path}: no axis metadata and no radar config")
    return DataMatrix(values, slow, fast, config)


def write_csv(path: PathLike,
              frame: pd.DataFrame,
              header: Optional[Dict[str, Any]] = None) -> Path:
    """CSV with ``# key: value`` provenance lines before the header row."""
    with atomic_write(path, "w") as f:
        for key, value in (header or {}).items():
            f.write(f"# {key}: {value}\n")
        frame.to_csv(f, index=False, float_format="%.10g")
    return Path(path)


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def write_pgm(path: PathLike,
              values: np.ndarray,
              comment: Optional[str] = None,
              header: Optional[Dict[str, Any]] = None) -> Path:
    """8-bit binary greyscale image of ``values`` scaled min to max; NaN
    pixels are black."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"PGM needs a 2-D array, got {values.shape}")
    finite = np.isfinite(values)
    pixels = np.zeros(values.shape, dtype=np.uint8)
    if finite.any():
        lo, hi = values[finite].min(), values[finite].max()
        scale = 255.0 / (hi - lo) if hi > lo else 0.0
        pixels[finite] = np.rint((values[finite] - lo) * scale).astype(
            np.uint8)
    lines = ["P5"]
    if comment:
        lines.append(f"# {comment}")
    for key, value in (header or {}).items():
        lines.append(f"# {key}: {value}")
    rows, cols = values.shape
    lines += [f"{cols} {rows}", "255"]
    with atomic_write(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))
        f.write(pixels.tobytes())
    return Path(path)
