"""Atomic file output: CSV tables and 16-bit PGM frames."""
from __future__ import annotations

import csv
import io
import os
import re
import tempfile
from pathlib import Path

import numpy as np


def write_atomic(path, data: bytes | str) -> Path:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(rows: list[dict], fieldnames: list[str] | None = None) -> str:
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def write_csv(path, rows: list[dict], fieldnames: list[str] | None = None) -> Path:
    return write_atomic(path, csv_text(rows, fieldnames))


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def pgm_bytes(image: np.ndarray) -> bytes:
    """Binary PGM (P5) with maxval 65535, big-endian samples."""
    img = np.clip(np.rint(image), 0, 65535).astype(">u2")
    rows, cols = img.shape
    return f"P5\n{cols} {rows}\n65535\n".encode("ascii") + img.tobytes()


def write_pgm(path, image: np.ndarray) -> Path:
    return write_atomic(path, pgm_bytes(image))


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows, maxval = (int(g) for g in m.groups())
    dtype = ">u2" if maxval > 255 else "u1"
    pixels = np.frombuffer(data, dtype=dtype, count=rows * cols, offset=m.end())
    return pixels.reshape(rows, cols).astype(np.uint16)


def frame_filename(t: float) -> str:
    """frame_<ms>p<tenths>.pgm for a trigger time in seconds."""
    tenths = int(round(t * 1e4))
    return f"frame_{tenths // 10}p{tenths % 10}.pgm"
