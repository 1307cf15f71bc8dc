"""Field file formats shared project-wide.

CSV: header line `# nx ny x0 y0 dx dy`, then one comma-separated line per
grid row (bottom row first), NaN marking masked cells.

Binary: magic bytes `MFLD1`; nx, ny as 64-bit little-endian unsigned;
x0, y0, dx, dy as little-endian doubles; then nx*ny little-endian doubles
row-major (NaN = masked).

Complex fields are stored as two scalar files suffixed `.re` and `.im`.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import ComplexField, GridSpec, ScalarField

MAGIC = b"MFLD1"
_HEADER = struct.Struct("<QQdddd")


class FieldFormatError(ValueError):
    """Raised on a malformed field file."""


def _masked_values(f: ScalarField) -> np.ndarray:
    v = f.values.astype(float).copy()
    v[~f.mask] = np.nan
    return v


def write_csv(f: ScalarField, path: str | Path) -> None:
    s = f.spec
    with open(path, "w") as fh:
        fh.write(f"# {s.nx} {s.ny} {s.x0!r} {s.y0!r} {s.dx!r} {s.dy!r}\n")
        for row in _masked_values(f):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_csv(path: str | Path) -> ScalarField:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise FieldFormatError(f"{path}: missing header line")
        parts = header[1:].split()
        if len(parts) != 6:
            raise FieldFormatError(f"{path}: header needs 6 entries, got {len(parts)}")
        nx, ny = int(parts[0]), int(parts[1])
        x0, y0, dx, dy = (float(p) for p in parts[2:])
        rows = [
            np.array([float(tok) for tok in line.split(",")])
            for line in fh
            if line.strip()
        ]
    values = np.array(rows, dtype=float)
    if values.shape != (ny, nx):
        raise FieldFormatError(f"{path}: expected {ny}x{nx} rows, got {values.shape}")
    spec = GridSpec(nx, ny, x0, y0, dx, dy)
    return ScalarField(spec, values, np.isfinite(values))


def write_binary(f: ScalarField, path: str | Path) -> None:
    s = f.spec
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(s.nx, s.ny, s.x0, s.y0, s.dx, s.dy))
        fh.write(_masked_values(f).astype("<f8").tobytes())


def read_binary(path: str | Path) -> ScalarField:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise FieldFormatError(f"{path}: bad magic bytes {magic!r}")
        nx, ny, x0, y0, dx, dy = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != nx * ny:
        raise FieldFormatError(f"{path}: expected {nx * ny} doubles, got {data.size}")
    values = data.reshape(ny, nx).astype(float)
    spec = GridSpec(nx, ny, x0, y0, dx, dy)
    return ScalarField(spec, values, np.isfinite(values))


def write_complex(f: ComplexField, path: str | Path, writer=write_binary) -> tuple[Path, Path]:
    path = Path(path)
    re_path = path.with_name(path.name + ".re")
    im_path = path.with_name(path.name + ".im")
    writer(ScalarField(f.spec, f.values.real.copy(), f.mask.copy()), re_path)
    writer(ScalarField(f.spec, f.values.imag.copy(), f.mask.copy()), im_path)
    return re_path, im_path


def read_complex(path: str | Path, reader=read_binary) -> ComplexField:
    path = Path(path)
    re = reader(path.with_name(path.name + ".re"))
    im = reader(path.with_name(path.name + ".im"))
    return ComplexField(re.spec, re.values + 1j * im.values, re.mask & im.mask)


def write_gnuplot(f: ScalarField, path: str | Path) -> None:
    """Whitespace `x y value` table with blank lines between rows."""
    xs, ys = f.spec.x(), f.spec.y()
    v = _masked_values(f)
    with open(path, "w") as fh:
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                fh.write(f"{float(x)!r} {float(y)!r} {float(v[j, i])!r}\n")
            fh.write("\n")
