"""Point-cloud file I/O: PLY (ascii / binary little-endian) and XYZ ASCII.

Formats are identified by the strings "ply-ascii", "ply-binary-le" and
"xyz". ``load_cloud`` auto-detects when no format is given (PLY magic for
.ply files, XYZ otherwise). Unknown PLY vertex properties are skipped with
a warning; faces and other trailing elements are ignored.
"""

from __future__ import annotations

import os
import warnings
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import ParseError

FORMATS = ("ply-ascii", "ply-binary-le", "xyz")

_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

_COLOR_PROPS = ("red", "green", "blue")


def detect_format(path) -> str:
    with open(path, "rb") as f:
        head = f.read(256)
    if head.startswith(b"ply"):
        return "ply-binary-le" if b"binary_little_endian" in head else "ply-ascii"
    return "xyz"


def load_cloud(path, fmt: str | None = None) -> PointCloud:
    """Load a cloud, validating that every coordinate is finite."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if fmt is None:
        fmt = detect_format(path)
    if fmt in ("ply-ascii", "ply-binary-le"):
        cloud = _load_ply(path, fmt)
    elif fmt == "xyz":
        cloud = _load_xyz(path)
    else:
        raise ParseError(f"unknown format {fmt!r}", path=path)
    return cloud


def save_cloud(cloud: PointCloud, path, fmt: str | None = None) -> None:
    path = Path(path)
    if fmt is None:
        fmt = "ply-binary-le" if path.suffix.lower() == ".ply" else "xyz"
    if fmt == "xyz":
        _save_xyz(cloud, path)
    elif fmt in ("ply-ascii", "ply-binary-le"):
        _save_ply(cloud, path, binary=(fmt == "ply-binary-le"))
    else:
        raise ParseError(f"unknown format {fmt!r}", path=path)


# ---------------------------------------------------------------------------
# XYZ

def _load_xyz(path) -> PointCloud:
    pts, cols = [], []
    with open(path, "r") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (3, 6):
                raise ParseError(
                    f"expected 3 or 6 fields, got {len(parts)}", path=path, line=lineno
                )
            try:
                xyz = [float(p) for p in parts[:3]]
            except ValueError:
                raise ParseError("bad coordinate value", path=path, line=lineno)
            if not all(np.isfinite(xyz)):
                raise ParseError("non-finite coordinate", path=path, line=lineno)
            pts.append(xyz)
            if len(parts) == 6:
                try:
                    rgb = [int(p) for p in parts[3:]]
                except ValueError:
                    raise ParseError("bad color value", path=path, line=lineno)
                if any(c < 0 or c > 255 for c in rgb):
                    raise ParseError("color channel outside [0, 255]", path=path, line=lineno)
                cols.append(rgb)
    if cols and len(cols) != len(pts):
        raise ParseError(
            f"{len(cols)} colored lines among {len(pts)} points; colors must "
            "be present on every line or none", path=path)
    points = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    colors = np.asarray(cols, dtype=np.uint8).reshape(-1, 3) if cols else None
    return PointCloud(points, colors, label=path.stem)


def _save_xyz(cloud: PointCloud, path) -> None:
    with open(path, "w") as f:
        if cloud.colors is not None:
            for (x, y, z), (r, g, b) in zip(cloud.points, cloud.colors):
                f.write(f"{x:.9g} {y:.9g} {z:.9g} {r} {g} {b}\n")
        else:
            for x, y, z in cloud.points:
                f.write(f"{x:.9g} {y:.9g} {z:.9g}\n")


# ---------------------------------------------------------------------------
# PLY

def _parse_ply_header(f, path):
    """Read the header, returning (format, elements, header_end_offset).

    elements is a list of (name, count, [(prop_name, dtype_code or
    ('list', count_code, item_code))]).
    """
    magic = f.readline()
    if magic.strip() != b"ply":
        raise ParseError("missing 'ply' magic", path=path, line=1)
    fmt = None
    elements = []
    lineno = 1
    while True:
        raw = f.readline()
        if not raw:
            raise ParseError("unexpected EOF in header", path=path, line=lineno)
        lineno += 1
        line = raw.decode("ascii", errors="replace").strip()
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        parts = line.split()
        if parts[0] == "format":
            if parts[1] == "ascii":
                fmt = "ply-ascii"
            elif parts[1] == "binary_little_endian":
                fmt = "ply-binary-le"
            else:
                raise ParseError(f"unsupported PLY format {parts[1]!r}", path=path, line=lineno)
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before any element", path=path, line=lineno)
            if parts[1] == "list":
                elements[-1][2].append((parts[4], ("list", parts[2], parts[3])))
            else:
                if parts[1] not in _PLY_DTYPES:
                    raise ParseError(f"unknown property type {parts[1]!r}", path=path, line=lineno)
                elements[-1][2].append((parts[2], _PLY_DTYPES[parts[1]]))
        elif parts[0] == "end_header":
            break
        else:
            raise ParseError(f"unrecognized header line {line!r}", path=path, line=lineno)
    if fmt is None:
        raise ParseError("header has no 'format' line", path=path)
    return fmt, elements, f.tell()


def _load_ply(path, expected_fmt) -> PointCloud:
    with open(path, "rb") as f:
        fmt, elements, data_start = _parse_ply_header(f, path)
        if fmt != expected_fmt:
            raise ParseError(
                f"file is {fmt} but {expected_fmt} was requested", path=path)
        names = [e[0] for e in elements]
        if "vertex" not in names:
            raise ParseError("no vertex element", path=path)
        vidx = names.index("vertex")
        _, count, props = elements[vidx]
        prop_names = [p for p, _ in props]
        for req in ("x", "y", "z"):
            if req not in prop_names:
                raise ParseError(f"vertex element lacks property {req!r}", path=path)
        if any(isinstance(t, tuple) for _, t in props):
            raise ParseError("list property on vertex element is unsupported", path=path)
        unknown = [p for p in prop_names if p not in ("x", "y", "z") + _COLOR_PROPS]
        if unknown:
            warnings.warn(f"{path}: skipping unknown vertex properties {unknown}")
        has_colors = all(c in prop_names for c in _COLOR_PROPS)

        if fmt == "ply-binary-le":
            for name, cnt, eprops in elements[:vidx]:
                if any(isinstance(t, tuple) for _, t in eprops):
                    raise ParseError(
                        f"cannot skip element {name!r} with list properties "
                        "preceding vertex data", path=path)
                f.seek(cnt * sum(np.dtype("<" + t).itemsize for _, t in eprops), os.SEEK_CUR)
            dtype = np.dtype([(p, "<" + t) for p, t in props])
            buf = f.read(count * dtype.itemsize)
            if len(buf) < count * dtype.itemsize:
                raise ParseError(
                    "truncated vertex data", path=path, offset=data_start + len(buf))
            rec = np.frombuffer(buf, dtype=dtype, count=count)
            pts = np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(np.float64)
            cols = None
            if has_colors:
                cols = np.column_stack([rec[c] for c in _COLOR_PROPS]).astype(np.uint8)
        else:
            for name, cnt, _ in elements[:vidx]:
                for _ in range(cnt):
                    f.readline()
            pts = np.empty((count, 3), dtype=np.float64)
            cols = np.empty((count, 3), dtype=np.uint8) if has_colors else None
            xi, yi, zi = (prop_names.index(c) for c in ("x", "y", "z"))
            ci = [prop_names.index(c) for c in _COLOR_PROPS] if has_colors else None
            for i in range(count):
                raw = f.readline()
                if not raw:
                    raise ParseError("truncated vertex data", path=path)
                fields = raw.split()
                if len(fields) < len(prop_names):
                    raise ParseError(
                        f"vertex line has {len(fields)} fields, expected "
                        f"{len(prop_names)}", path=path)
                try:
                    pts[i] = (float(fields[xi]), float(fields[yi]), float(fields[zi]))
                    if has_colors:
                        cols[i] = [int(fields[j]) for j in ci]
                except ValueError:
                    raise ParseError("bad vertex value", path=path)
    bad = ~np.isfinite(pts).all(axis=1)
    if bad.any():
        raise ParseError(
            f"non-finite coordinate at vertex {int(np.flatnonzero(bad)[0])}", path=path)
    return PointCloud(pts, cols, label=path.stem)


def _save_ply(cloud: PointCloud, path, binary: bool) -> None:
    n = len(cloud)
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {n}")
    header += ["property double x", "property double y", "property double z"]
    if cloud.colors is not None:
        header += [f"property uchar {c}" for c in _COLOR_PROPS]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            if cloud.colors is not None:
                dtype = np.dtype([("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
                                  ("red", "u1"), ("green", "u1"), ("blue", "u1")])
                rec = np.empty(n, dtype=dtype)
                rec["x"], rec["y"], rec["z"] = cloud.points.T
                rec["red"], rec["green"], rec["blue"] = cloud.colors.T
            else:
                rec = cloud.points.astype("<f8")
            f.write(rec.tobytes())
        else:
            lines = []
            if cloud.colors is not None:
                for (x, y, z), (r, g, b) in zip(cloud.points, cloud.colors):
                    lines.append(f"{x:.9g} {y:.9g} {z:.9g} {r} {g} {b}\n")
            else:
                for x, y, z in cloud.points:
                    lines.append(f"{x:.9g} {y:.9g} {z:.9g}\n")
            f.write("".join(lines).encode("ascii"))
