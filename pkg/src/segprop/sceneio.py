"""Scene, segmentation and label file I/O.

Supported formats:
  - PLY, ascii and binary_little_endian: vertex x,y,z (float32/float64),
    optional red,green,blue (uint8), optional nx,ny,nz (float32/float64),
    optional face element with vertex_indices lists of length 3.
  - Scene JSON: {"points": [[x,y,z],...], "colors": [[r,g,b],...],
    "normals": optional, "faces": optional}.
  - Point-label JSON (ground truth and pseudo labels):
    {"semantic": [int,...], "instance": [int,...]} with -1 for unlabeled.
  - Segmentation JSON (ScanNet-style): {"segIndices": [int per point]}.

Colors are stored internally in [0, 1]; 8-bit file channels are divided by
255 on load and quantized back on PLY save.  Writers accept an optional
``meta`` dict that is embedded under a "config" key (JSON) or a "comment
config ..." header line (PLY) so artifacts record what produced them.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ParseError, ValidationError
from .scene import PointLabels, Scene, Segmentation

_GRAY = 0.5

_PLY_SCALARS = {
    "float": ("<f4", 4), "float32": ("<f4", 4),
    "double": ("<f8", 8), "float64": ("<f8", 8),
    "uchar": ("<u1", 1), "uint8": ("<u1", 1),
    "char": ("<i1", 1), "int8": ("<i1", 1),
    "short": ("<i2", 2), "int16": ("<i2", 2),
    "ushort": ("<u2", 2), "uint16": ("<u2", 2),
    "int": ("<i4", 4), "int32": ("<i4", 4),
    "uint": ("<u4", 4), "uint32": ("<u4", 4),
}


def load_scene(path, format: str | None = None) -> Scene:
    """Load a scene from PLY or JSON; the format defaults to the extension."""
    path = str(path)
    if format is None:
        format = "json" if path.endswith(".json") else "ply"
    if format == "json":
        return _load_scene_json(path)
    if format == "ply":
        return _load_ply(path)
    raise ValidationError(f"unknown scene format {format!r}", field="format")


def save_scene(scene: Scene, path, format: str | None = None,
               binary: bool = False, meta: dict | None = None) -> None:
    path = str(path)
    if format is None:
        format = "json" if path.endswith(".json") else "ply"
    if format == "json":
        _save_scene_json(scene, path, meta)
    elif format == "ply":
        _save_ply(scene, path, binary=binary, meta=meta)
    else:
        raise ValidationError(f"unknown scene format {format!r}", field="format")


# ---------------------------------------------------------------------------
# JSON formats
# ---------------------------------------------------------------------------

def read_json(path):
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", line=e.lineno) from e


def write_json(obj, path) -> None:
    """Canonical JSON writer: stable key order, newline-terminated."""
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def _load_scene_json(path) -> Scene:
    data = read_json(path)
    if "points" not in data:
        raise ParseError("scene JSON missing 'points'")
    points = np.asarray(data["points"], dtype=np.float64)
    if points.size == 0:
        raise ParseError("scene has no points")
    if "colors" in data and data["colors"] is not None:
        colors = np.asarray(data["colors"], dtype=np.float64)
    else:
        colors = np.full_like(points, _GRAY)
    normals = data.get("normals")
    faces = data.get("faces")
    return Scene(points, colors,
                 None if normals is None else np.asarray(normals, dtype=np.float64),
                 None if faces is None else np.asarray(faces, dtype=np.int64))


def _save_scene_json(scene: Scene, path, meta=None) -> None:
    obj = {"points": scene.points.tolist(), "colors": scene.colors.tolist()}
    if scene.normals is not None:
        obj["normals"] = scene.normals.tolist()
    if scene.faces is not None:
        obj["faces"] = scene.faces.tolist()
    if meta is not None:
        obj["config"] = meta
    write_json(obj, path)


def load_point_labels(path) -> PointLabels:
    data = read_json(path)
    for key in ("semantic", "instance"):
        if key not in data:
            raise ParseError(f"label JSON missing {key!r}")
    return PointLabels(np.asarray(data["semantic"], dtype=np.int64),
                       np.asarray(data["instance"], dtype=np.int64))


def save_point_labels(labels: PointLabels, path, meta=None,
                      classes: dict[int, str] | None = None) -> None:
    obj = {"semantic": labels.semantic.tolist(), "instance": labels.instance.tolist()}
    if classes is not None:
        obj["classes"] = {str(k): v for k, v in classes.items()}
    if meta is not None:
        obj["config"] = meta
    write_json(obj, path)


def load_classes(path) -> dict[int, str] | None:
    data = read_json(path)
    if "classes" not in data:
        return None
    return {int(k): str(v) for k, v in data["classes"].items()}


def load_segmentation(path) -> Segmentation:
    data = read_json(path)
    if "segIndices" not in data:
        raise ParseError("segmentation JSON missing 'segIndices'")
    ids = np.asarray(data["segIndices"], dtype=np.int64)
    if ids.size == 0:
        raise ParseError("segmentation has no entries")
    return Segmentation(ids, int(ids.max()) + 1)


def save_segmentation(seg: Segmentation, path, meta=None) -> None:
    obj = {"segIndices": seg.seg_ids.tolist()}
    if meta is not None:
        obj["config"] = meta
    write_json(obj, path)


# ---------------------------------------------------------------------------
# PLY
# ---------------------------------------------------------------------------

def _load_ply(path) -> Scene:
    with open(path, "rb") as f:
        raw = f.read()

    end = raw.find(b"end_header")
    if end < 0:
        raise ParseError("PLY header missing 'end_header'")
    header_bytes = raw[:end]
    body_start = raw.index(b"\n", end) + 1
    header_lines = header_bytes.decode("ascii", errors="replace").splitlines()
    if not header_lines or header_lines[0].strip() != "ply":
        raise ParseError("not a PLY file: missing 'ply' magic", line=1)

    fmt = None
    elements = []  # (name, count, [(prop_name, type, list_count_type|None)])
    for lineno, line in enumerate(header_lines[1:], start=2):
        parts = line.strip().split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if len(parts) < 2 or parts[1] not in ("ascii", "binary_little_endian"):
                raise ParseError(f"unsupported PLY format {parts[1:2]}", line=lineno)
            fmt = parts[1]
        elif parts[0] == "element":
            if len(parts) != 3:
                raise ParseError("malformed element declaration", line=lineno)
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before any element", line=lineno)
            if parts[1] == "list":
                if len(parts) != 5:
                    raise ParseError("malformed list property", line=lineno)
                elements[-1][2].append((parts[4], parts[3], parts[2]))
            else:
                if len(parts) != 3:
                    raise ParseError("malformed property", line=lineno)
                elements[-1][2].append((parts[2], parts[1], None))
    if fmt is None:
        raise ParseError("PLY header missing 'format' line")

    parsed = {}
    if fmt == "ascii":
        text_lines = raw[body_start:].decode("ascii", errors="replace").splitlines()
        cursor = 0
        base_line = len(header_lines) + 1
        for name, count, props in elements:
            rows = []
            for i in range(count):
                if cursor >= len(text_lines):
                    raise ParseError(f"unexpected end of file in element '{name}'",
                                     line=base_line + cursor)
                fields = text_lines[cursor].split()
                rows.append(_parse_ascii_row(fields, props, base_line + cursor))
                cursor += 1
            parsed[name] = (rows, props)
    else:
        offset = body_start
        for name, count, props in elements:
            rows = []
            for _ in range(count):
                row, offset = _parse_binary_row(raw, offset, props)
                rows.append(row)
            parsed[name] = (rows, props)

    if "vertex" not in parsed:
        raise ParseError("PLY has no vertex element")
    rows, props = parsed["vertex"]
    names = [p[0] for p in props]
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise ParseError(f"vertex element missing property '{axis}'")
    if not rows:
        raise ParseError("PLY has zero vertices")

    def column(prop):
        i = names.index(prop)
        return np.array([r[i] for r in rows])

    points = np.stack([column("x"), column("y"), column("z")], axis=1).astype(np.float64)
    if all(c in names for c in ("red", "green", "blue")):
        colors = np.stack([column("red"), column("green"), column("blue")], axis=1)
        colors = colors.astype(np.float64) / 255.0
    else:
        colors = np.full_like(points, _GRAY)
    normals = None
    if all(c in names for c in ("nx", "ny", "nz")):
        normals = np.stack([column("nx"), column("ny"), column("nz")], axis=1).astype(np.float64)

    faces = None
    if "face" in parsed:
        frows, fprops = parsed["face"]
        fnames = [p[0] for p in fprops]
        key = "vertex_indices" if "vertex_indices" in fnames else "vertex_index"
        if key not in fnames:
            raise ParseError("face element missing 'vertex_indices'")
        col = fnames.index(key)
        tri = []
        for r in frows:
            idx = r[col]
            if len(idx) != 3:
                raise ParseError(f"only triangle faces supported, got {len(idx)} indices")
            tri.append(idx)
        faces = np.asarray(tri, dtype=np.int64)

    return Scene(points, colors, normals, faces)


def _parse_ascii_row(fields, props, lineno):
    row = []
    pos = 0
    for _, typ, list_count in props:
        try:
            if list_count is not None:
                n = int(fields[pos]); pos += 1
                vals = [int(v) for v in fields[pos:pos + n]]
                if len(vals) != n:
                    raise IndexError
                pos += n
                row.append(vals)
            else:
                v = fields[pos]; pos += 1
                row.append(int(v) if typ in ("uchar", "uint8", "char", "int8", "short",
                                             "ushort", "int", "int32", "uint", "uint32",
                                             "int16", "uint16") else float(v))
        except (ValueError, IndexError) as e:
            raise ParseError("malformed ascii element row", line=lineno) from e
    return row


def _parse_binary_row(raw, offset, props):
    row = []
    for _, typ, list_count in props:
        if list_count is not None:
            cdtype, csize = _ply_type(list_count, offset)
            if offset + csize > len(raw):
                raise ParseError("unexpected end of binary data", offset=offset)
            n = int(np.frombuffer(raw, dtype=cdtype, count=1, offset=offset)[0])
            offset += csize
            idtype, isize = _ply_type(typ, offset)
            if offset + n * isize > len(raw):
                raise ParseError("unexpected end of binary data", offset=offset)
            vals = np.frombuffer(raw, dtype=idtype, count=n, offset=offset)
            offset += n * isize
            row.append([int(v) for v in vals])
        else:
            dtype, size = _ply_type(typ, offset)
            if offset + size > len(raw):
                raise ParseError("unexpected end of binary data", offset=offset)
            v = np.frombuffer(raw, dtype=dtype, count=1, offset=offset)[0]
            offset += size
            row.append(v.item())
    return row, offset


def _ply_type(name, offset):
    try:
        return _PLY_SCALARS[name]
    except KeyError:
        raise ParseError(f"unsupported PLY type {name!r}", offset=offset) from None


def _save_ply(scene: Scene, path, binary=False, meta=None) -> None:
    n = scene.num_points
    has_normals = scene.normals is not None
    has_faces = scene.faces is not None
    colors8 = np.clip(np.rint(scene.colors * 255.0), 0, 255).astype(np.uint8)

    header = ["ply",
              "format binary_little_endian 1.0" if binary else "format ascii 1.0"]
    if meta is not None:
        header.append("comment config " + json.dumps(meta, sort_keys=True))
    header += [f"element vertex {n}",
               "property double x", "property double y", "property double z",
               "property uchar red", "property uchar green", "property uchar blue"]
    if has_normals:
        header += ["property double nx", "property double ny", "property double nz"]
    if has_faces:
        header += [f"element face {scene.faces.shape[0]}",
                   "property list uchar int vertex_indices"]
    header.append("end_header")

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            for i in range(n):
                f.write(struct.pack("<3d", *scene.points[i]))
                f.write(struct.pack("<3B", *colors8[i]))
                if has_normals:
                    f.write(struct.pack("<3d", *scene.normals[i]))
            if has_faces:
                for face in scene.faces:
                    f.write(struct.pack("<B3i", 3, *face))
        else:
            for i in range(n):
                parts = ["%.17g" % v for v in scene.points[i]]
                parts += [str(int(c)) for c in colors8[i]]
                if has_normals:
                    parts += ["%.17g" % v for v in scene.normals[i]]
                f.write((" ".join(parts) + "\n").encode("ascii"))
            if has_faces:
                for face in scene.faces:
                    f.write(("3 %d %d %d\n" % tuple(face)).encode("ascii"))
