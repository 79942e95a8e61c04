"""Synthetic desk-scale room generator with exact ground truth.

Rooms are axis-aligned: a floor plane, optional walls, and box/plane
furniture placed on the floor with a separation gap.  Every surface is
sampled uniformly at a target density, clamped to a per-instance point
budget.  Colors are per-class base colors with per-point jitter; normals are
emitted exactly from the generating surfaces.

The geometry is deliberately simple so expected outputs (segment counts,
connectivity, labels) are derivable in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PlacementError, ValidationError
from .scene import GroundTruth, Scene

# Class ids are fixed by this registry so they mean the same thing in every
# generated scene (required when training across scenes).
CLASS_DEFS = {
    "floor":   {"id": 0, "color": (0.48, 0.48, 0.50)},
    "wall":    {"id": 1, "color": (0.82, 0.80, 0.75)},
    "chair":   {"id": 2, "color": (0.75, 0.18, 0.16),
                "size": ((0.42, 0.60), (0.42, 0.60), (0.50, 0.90))},
    "table":   {"id": 3, "color": (0.16, 0.32, 0.72),
                "size": ((0.90, 1.40), (0.70, 1.00), (0.64, 0.78))},
    "cabinet": {"id": 4, "color": (0.16, 0.62, 0.25),
                "size": ((0.50, 0.90), (0.35, 0.55), (1.20, 1.80))},
    "sofa":    {"id": 5, "color": (0.78, 0.62, 0.12),
                "size": ((1.40, 2.00), (0.80, 1.00), (0.65, 0.90))},
    "screen":  {"id": 6, "color": (0.48, 0.14, 0.58),
                "size": ((0.80, 1.60), (0.03, 0.03), (0.90, 1.40))},
}
FURNITURE = [name for name, d in CLASS_DEFS.items() if "size" in d]


def class_names() -> dict[int, str]:
    return {d["id"]: name for name, d in CLASS_DEFS.items()}


def num_classes() -> int:
    return len(CLASS_DEFS)


@dataclass(frozen=True)
class RoomSpec:
    """What to generate: instance count per class plus sampling knobs."""

    counts: dict = field(default_factory=lambda: {"floor": 1, "chair": 2})
    extent: tuple = (4.0, 4.0, 2.4)
    seed: int = 0
    density: float = 700.0        # points per square meter
    min_points: int = 400         # per-instance clamp
    max_points: int = 2000
    min_gap: float = 0.35         # furniture AABB separation
    wall_margin: float = 0.30     # furniture distance from walls
    color_jitter: float = 0.05


def random_spec(seed: int, instances: int) -> RoomSpec:
    """RoomSpec with `instances` total instances: floor, 1-3 walls, furniture.

    The wall count and furniture mix are drawn from the seed, so different
    seeds give rooms of varying composition with the same instance count.
    """
    if instances < 3:
        raise ValidationError("need at least 3 instances (floor, wall, furniture)",
                              field="instances")
    rng = np.random.default_rng([seed, 91])
    walls = int(rng.integers(1, min(3, instances - 2) + 1))
    counts = {"floor": 1, "wall": walls}
    for _ in range(instances - 1 - walls):
        name = FURNITURE[int(rng.integers(len(FURNITURE)))]
        counts[name] = counts.get(name, 0) + 1
    return RoomSpec(counts=counts, seed=seed)


def generate_synthetic(spec: RoomSpec) -> tuple[Scene, GroundTruth]:
    """Build a room scene and its exact ground truth.

    Instances are created floor first, then walls, then furniture in registry
    order; instance ids follow creation order.  The same spec always yields a
    bit-identical scene.
    """
    for name in spec.counts:
        if name not in CLASS_DEFS:
            raise ValidationError(f"unknown class {name!r}", field="counts")
    if spec.counts.get("floor", 0) < 1:
        raise ValidationError("a room needs a floor", field="counts")
    total = sum(spec.counts.values())
    if total < 2:
        raise ValidationError("need at least floor + 1 instance", field="counts")
    if spec.counts.get("wall", 0) > 4:
        raise ValidationError("at most 4 walls", field="counts")

    rng = np.random.default_rng(spec.seed)
    sx, sy, sz = spec.extent

    chunks = []         # (points, normal, class_name)
    instance_meta = []  # (class_id, chunk start, chunk end) later
    placed_boxes = []   # AABBs of furniture footprints, for separation

    def add_instance(name, surfaces):
        # surfaces: list of (origin, u_vec, v_vec, normal); counts split by area
        areas = np.array([np.linalg.norm(np.cross(u, v)) for _, u, v, _ in surfaces])
        n_total = int(np.clip(round(float(areas.sum()) * spec.density),
                              spec.min_points, spec.max_points))
        counts = _apportion(areas, n_total)
        pts, nrm = [], []
        for (origin, u, v, normal), cnt in zip(surfaces, counts):
            if cnt == 0:
                continue
            uv = rng.random((cnt, 2))
            pts.append(origin + uv[:, :1] * u + uv[:, 1:] * v)
            nrm.append(np.tile(np.asarray(normal, dtype=np.float64), (cnt, 1)))
        chunks.append((np.concatenate(pts), np.concatenate(nrm), name))

    # Floor spans the extent.
    add_instance("floor", [(np.zeros(3), np.array([sx, 0, 0.0]), np.array([0, sy, 0.0]),
                            (0.0, 0.0, 1.0))])

    # Walls, inward-facing, in fixed order: y=0, x=sx, y=sy, x=0.
    wall_surfaces = [
        (np.array([0.0, 0, 0]), np.array([sx, 0, 0.0]), np.array([0, 0, sz]), (0.0, 1.0, 0.0)),
        (np.array([sx, 0.0, 0]), np.array([0, sy, 0.0]), np.array([0, 0, sz]), (-1.0, 0.0, 0.0)),
        (np.array([0.0, sy, 0]), np.array([sx, 0, 0.0]), np.array([0, 0, sz]), (0.0, -1.0, 0.0)),
        (np.array([0.0, 0, 0]), np.array([0, sy, 0.0]), np.array([0, 0, sz]), (1.0, 0.0, 0.0)),
    ]
    for w in range(spec.counts.get("wall", 0)):
        add_instance("wall", [wall_surfaces[w]])

    # Furniture, rejection-placed with a separation gap.
    for name in FURNITURE:
        for j in range(spec.counts.get(name, 0)):
            (wx0, wx1), (wy0, wy1), (wz0, wz1) = CLASS_DEFS[name]["size"]
            w = rng.uniform(wx0, wx1)
            d = rng.uniform(wy0, wy1)
            h = rng.uniform(wz0, wz1)
            box = _place_footprint(rng, spec, w, d, placed_boxes,
                                   f"{name} #{j} (instance {len(chunks)})")
            placed_boxes.append(box)
            x0, y0 = box[0], box[1]
            if name == "screen":
                # a standing plane: sample the front face only
                add_instance(name, [(np.array([x0, y0 + d / 2, 0.0]),
                                     np.array([w, 0, 0.0]), np.array([0, 0, h]),
                                     (0.0, 1.0, 0.0))])
            else:
                add_instance(name, _box_surfaces(x0, y0, w, d, h))

    points = np.concatenate([c[0] for c in chunks])
    normals = np.concatenate([c[1] for c in chunks])
    n = points.shape[0]

    semantic = np.empty(n, dtype=np.int64)
    instance = np.empty(n, dtype=np.int64)
    colors = np.empty((n, 3), dtype=np.float64)
    pos = 0
    for inst_id, (pts, _, name) in enumerate(chunks):
        cnt = pts.shape[0]
        sl = slice(pos, pos + cnt)
        semantic[sl] = CLASS_DEFS[name]["id"]
        instance[sl] = inst_id
        base = np.asarray(CLASS_DEFS[name]["color"])
        jitter = rng.uniform(-spec.color_jitter, spec.color_jitter, size=(cnt, 3))
        colors[sl] = np.clip(base + jitter, 0.0, 1.0)
        pos += cnt

    scene = Scene(points, colors, normals)
    return scene, GroundTruth(semantic, instance)


def _apportion(areas, n_total):
    """Largest-remainder split of n_total by area; deterministic tie-break."""
    share = areas / areas.sum() * n_total
    counts = np.floor(share).astype(int)
    rem = n_total - counts.sum()
    if rem > 0:
        frac = share - counts
        order = np.lexsort((np.arange(len(areas)), -frac))
        counts[order[:rem]] += 1
    return counts


def _box_surfaces(x0, y0, w, d, h):
    """Five faces of an axis-aligned box on the floor (no bottom), outward normals."""
    o = np.array([x0, y0, 0.0])
    ex, ey, ez = np.array([w, 0, 0.0]), np.array([0, d, 0.0]), np.array([0, 0, h])
    return [
        (o + ez, ex, ey, (0.0, 0.0, 1.0)),            # top
        (o, ex, ez, (0.0, -1.0, 0.0)),                # front  (y = y0)
        (o + ey, ex, ez, (0.0, 1.0, 0.0)),            # back
        (o, ey, ez, (-1.0, 0.0, 0.0)),                # left
        (o + ex, ey, ez, (1.0, 0.0, 0.0)),            # right
    ]


def _place_footprint(rng, spec, w, d, placed, label, retries=100):
    sx, sy, _ = spec.extent
    m = spec.wall_margin
    lo_x, hi_x = m, sx - m - w
    lo_y, hi_y = m, sy - m - d
    if hi_x < lo_x or hi_y < lo_y:
        raise PlacementError(f"room too small for {label}")
    half = spec.min_gap / 2.0
    for _ in range(retries):
        x0 = rng.uniform(lo_x, hi_x)
        y0 = rng.uniform(lo_y, hi_y)
        box = (x0, y0, x0 + w, y0 + d)
        grown = (box[0] - half, box[1] - half, box[2] + half, box[3] + half)
        if all(not _overlap(grown, (p[0] - half, p[1] - half, p[2] + half, p[3] + half))
               for p in placed):
            return box
    raise PlacementError(f"could not place {label} after {retries} attempts")


def _overlap(a, b):
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]
