"""Core geometric data types plus normal estimation and sampling utilities.

All types are immutable after construction (arrays are frozen), so they can be
shared freely across workers.  Positions are meters, colors are RGB in [0, 1],
normals are unit vectors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError

log = logging.getLogger(__name__)

_UNIT_TOL = 1e-6


def _frozen(a, dtype):
    out = np.ascontiguousarray(np.asarray(a, dtype=dtype))
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Scene:
    """A point cloud scene, optionally with normals and mesh faces.

    points : (N, 3) float64, positions in meters
    colors : (N, 3) float64, RGB in [0, 1]
    normals : (N, 3) float64 unit vectors, or None
    faces : (F, 3) int64 vertex-index triangles, or None
    """

    points: np.ndarray
    colors: np.ndarray
    normals: np.ndarray | None = None
    faces: np.ndarray | None = None

    def __post_init__(self):
        pts = _frozen(self.points, np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise ValidationError("points must be a non-empty (N, 3) array", field="points")
        cols = _frozen(self.colors, np.float64)
        if cols.shape != pts.shape:
            raise ValidationError("colors must match points in shape", field="colors")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "colors", cols)
        if self.normals is not None:
            nrm = _frozen(self.normals, np.float64)
            if nrm.shape != pts.shape:
                raise ValidationError("normals must match points in shape", field="normals")
            lens = np.linalg.norm(nrm, axis=1)
            if np.any(np.abs(lens - 1.0) > _UNIT_TOL):
                raise ValidationError("normals must be unit length", field="normals")
            object.__setattr__(self, "normals", nrm)
        if self.faces is not None:
            fcs = _frozen(self.faces, np.int64)
            if fcs.ndim != 2 or fcs.shape[1] != 3:
                raise ValidationError("faces must be an (F, 3) index array", field="faces")
            if fcs.size and (fcs.min() < 0 or fcs.max() >= pts.shape[0]):
                raise ValidationError("face indices out of range", field="faces")
            object.__setattr__(self, "faces", fcs)

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    def with_normals(self, normals: np.ndarray) -> "Scene":
        return Scene(self.points, self.colors, normals, self.faces)


@dataclass(frozen=True)
class Segmentation:
    """A partition of a scene's points into segments.

    ``seg_ids[i]`` is the segment of point i; ids are dense in
    [0, num_segments) and every id occurs at least once.
    """

    seg_ids: np.ndarray
    num_segments: int

    def __post_init__(self):
        ids = _frozen(self.seg_ids, np.int64)
        if ids.ndim != 1 or ids.shape[0] < 1:
            raise ValidationError("seg_ids must be a non-empty 1-D array", field="seg_ids")
        if ids.min() < 0 or ids.max() >= self.num_segments:
            raise ValidationError("segment ids out of range", field="seg_ids")
        present = np.unique(ids)
        if present.size != self.num_segments:
            raise ValidationError("every segment id must occur at least once", field="seg_ids")
        object.__setattr__(self, "seg_ids", ids)

    @property
    def num_points(self) -> int:
        return self.seg_ids.shape[0]

    def segment_points(self) -> list[np.ndarray]:
        """Point indices per segment, indexed by segment id."""
        order = np.argsort(self.seg_ids, kind="stable")
        bounds = np.searchsorted(self.seg_ids[order], np.arange(self.num_segments + 1))
        return [order[bounds[s]:bounds[s + 1]] for s in range(self.num_segments)]


@dataclass(frozen=True)
class PointLabels:
    """Dense per-point labels: semantic class and instance id, -1 = unlabeled.

    Used both for ground truth and for generated pseudo labels (which carry no
    -1 after the final grouping stage).
    """

    semantic: np.ndarray
    instance: np.ndarray

    def __post_init__(self):
        sem = _frozen(self.semantic, np.int64)
        ins = _frozen(self.instance, np.int64)
        if sem.ndim != 1 or sem.shape != ins.shape:
            raise ValidationError("semantic and instance must be equal-length 1-D arrays")
        if np.any((ins >= 0) & (sem < 0)):
            raise ValidationError("a point with an instance id must have a semantic class")
        object.__setattr__(self, "semantic", sem)
        object.__setattr__(self, "instance", ins)

    @property
    def num_points(self) -> int:
        return self.semantic.shape[0]


# Role-named aliases: identical layout, different provenance of the labels.
GroundTruth = PointLabels
PseudoLabels = PointLabels


def estimate_normals(scene: Scene, k: int = 12) -> Scene:
    """Per-point unit normals from a plane fit over each point's neighborhood.

    The fit uses the point itself plus its ``k`` nearest neighbors; the normal
    is the smallest principal direction of the centered covariance.  Signs are
    made deterministic: n_z >= 0, ties broken toward n_y >= 0 then n_x >= 0.
    Degenerate neighborhoods (all points coincident) fall back to (0, 0, 1)
    and are counted in a warning, not treated as failures.
    """
    if k < 3:
        raise ValidationError("k must be >= 3 for a plane fit", field="k")
    n = scene.num_points
    if n <= k:
        raise ValidationError(f"need more than k={k} points, got {n}", field="k")
    tree = cKDTree(scene.points)
    _, idx = tree.query(scene.points, k=k + 1)
    neighborhoods = scene.points[idx]  # (N, k+1, 3), self included
    centered = neighborhoods - neighborhoods.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    eigvals, eigvecs = np.linalg.eigh(cov)
    normals = eigvecs[:, :, 0].copy()  # smallest eigenvalue first

    degenerate = eigvals[:, 2] < 1e-18
    if np.any(degenerate):
        normals[degenerate] = (0.0, 0.0, 1.0)
        log.warning("estimate_normals: %d degenerate neighborhoods set to (0,0,1)",
                    int(degenerate.sum()))

    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    _orient(normals)
    return scene.with_normals(normals)


def _orient(normals, tol=1e-9):
    # Flip so the first non-negligible component among (z, y, x) is positive.
    z, y, x = normals[:, 2], normals[:, 1], normals[:, 0]
    sign = np.where(np.abs(z) > tol, np.sign(z),
                    np.where(np.abs(y) > tol, np.sign(y),
                             np.where(np.abs(x) > tol, np.sign(x), 1.0)))
    normals *= sign[:, None]


def farthest_point_sample(points: np.ndarray, m: int, seed: int) -> np.ndarray:
    """Deterministic farthest point sampling.

    The first index is drawn uniformly from ``seed``; each subsequent index
    maximizes the minimum distance to the chosen set (ties resolved to the
    lowest index).  If ``m`` exceeds the number of points, the full FPS
    permutation is padded by cycling from its start, so the result always has
    length ``m``.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n == 0:
        raise ValidationError("cannot sample from an empty point set", field="points")
    if m < 1:
        raise ValidationError("m must be >= 1", field="m")
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    chosen = [first]
    take = min(m, n)
    min_d = np.linalg.norm(points - points[first], axis=1)
    for _ in range(take - 1):
        nxt = int(np.argmax(min_d))
        chosen.append(nxt)
        np.minimum(min_d, np.linalg.norm(points - points[nxt], axis=1), out=min_d)
    out = np.array(chosen, dtype=np.int64)
    if m > n:
        reps = -(-m // n)  # ceil
        out = np.tile(out, reps)[:m]
    return out
