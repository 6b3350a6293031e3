"""Raw-payload volume files with a JSON sidecar header.

A volume on disk is a pair ``<stem>.json`` + ``<stem>.raw``. The header
carries dims ``[B, K, H, N]``, voxel spacing, origin, the payload dtype
(float32 or float64), the axis order (``b,k,h,n``, fastest first, so the
payload is Fortran-ordered), and the endianness (always little). Nothing
else lives in the header, and readers reject extras, so a header that
validates describes the payload completely.

All writes go through a temp file in the destination directory followed
by an atomic rename, payload before header; a crash mid-write never
leaves a readable-but-wrong pair behind.
"""

import json
import os
import tempfile

import numpy as np

from .tensor4d import Volume4D

DTYPES = {"float32": "<f4", "float64": "<f8"}
AXIS_ORDER = "b,k,h,n"
_HEADER_KEYS = {"dims", "spacing", "origin", "dtype", "axis_order", "endianness"}


def _stem(path):
    path = os.fspath(path)
    root, ext = os.path.splitext(path)
    return root if ext in (".json", ".raw") else path


def atomic_write_bytes(path, payload: bytes):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_csv(path, header, rows):
    """Write one CSV atomically; floats are rendered with full precision."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(c) for c in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _cell(c):
    if isinstance(c, (float, np.floating)):
        return repr(float(c))
    return str(c)


def write_volume(stem, vol: Volume4D, dtype: str = "float32"):
    """Write a series as header + raw payload; returns the two paths."""
    if dtype not in DTYPES:
        raise ValueError(f"dtype must be one of {sorted(DTYPES)}, got {dtype!r}")
    stem = _stem(stem)
    header = {
        "dims": list(vol.shape),
        "spacing": list(vol.spacing),
        "origin": list(vol.origin),
        "dtype": dtype,
        "axis_order": AXIS_ORDER,
        "endianness": "little",
    }
    payload = np.ravel(vol.data, order="F").astype(DTYPES[dtype]).tobytes()
    atomic_write_bytes(stem + ".raw", payload)
    atomic_write_text(stem + ".json", json.dumps(header, indent=1) + "\n")
    return stem + ".json", stem + ".raw"


def read_volume(stem) -> Volume4D:
    """Read a header + payload pair back into a float64 series.

    Raises ValueError when the header is malformed or does not match the
    payload size.
    """
    stem = _stem(stem)
    header_path = stem + ".json"
    payload_path = stem + ".raw"
    with open(header_path, "rb") as f:
        try:
            header = json.loads(f.read().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ValueError(f"{header_path}: not a valid header: {e}") from e
    if not isinstance(header, dict) or set(header) != _HEADER_KEYS:
        raise ValueError(
            f"{header_path}: header must have exactly the keys {sorted(_HEADER_KEYS)}"
        )
    dims = header["dims"]
    if (
        not isinstance(dims, list)
        or len(dims) != 4
        or any(not isinstance(d, int) or d < 1 for d in dims)
    ):
        raise ValueError(f"{header_path}: dims must be 4 positive integers, got {dims}")
    if header["dtype"] not in DTYPES:
        raise ValueError(f"{header_path}: unsupported dtype {header['dtype']!r}")
    if header["axis_order"] != AXIS_ORDER:
        raise ValueError(f"{header_path}: axis_order must be {AXIS_ORDER!r}")
    if header["endianness"] != "little":
        raise ValueError(f"{header_path}: endianness must be 'little'")
    dt = np.dtype(DTYPES[header["dtype"]])
    expected = int(np.prod(dims)) * dt.itemsize
    actual = os.path.getsize(payload_path)
    if actual != expected:
        raise ValueError(
            f"{payload_path}: payload is {actual} bytes, header implies {expected}"
        )
    flat = np.fromfile(payload_path, dtype=dt)
    data = flat.astype(np.float64).reshape(dims, order="F")
    try:
        return Volume4D(data, tuple(header["spacing"]), tuple(header["origin"]))
    except (TypeError, ValueError) as e:
        raise ValueError(f"{header_path}: {e}") from e


def write_labels(stem, labels, spacing=(1.0, 1.0, 1.0, 1.0)):
    """Store an integer label volume as a one-timepoint float series."""
    lab = np.asarray(labels)
    if lab.ndim != 3:
        raise ValueError(f"labels must be 3D, got shape {lab.shape}")
    vol = Volume4D(lab[..., None].astype(np.float64), spacing)
    return write_volume(stem, vol, dtype="float32")


def read_labels(stem):
    vol = read_volume(stem)
    if vol.shape[3] != 1:
        raise ValueError(f"label volume must have one timepoint, got {vol.shape[3]}")
    data = vol.data[..., 0]
    rounded = np.rint(data)
    if np.abs(data - rounded).max() > 1e-6 or rounded.min() < 0:
        raise ValueError("label volume must hold nonnegative integers")
    return rounded.astype(np.int64)
