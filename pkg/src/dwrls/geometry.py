"""Points on the unit sphere, distances, mesh quality and point generators.

Point sets are stored as read-only ``(n, d+1)`` float arrays; ``SpherePoint``
is a thin single-point view used at API boundaries.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError

__all__ = [
    "SpherePoint",
    "PointSet",
    "MeshMetrics",
    "geodesic_distance",
    "geodesic_matrix",
    "mesh_metrics",
    "generate_points",
    "fibonacci_points",
    "spiral_points",
    "equal_area_centers",
    "rotation_matrix",
    "rotate",
    "load_points",
    "save_points",
]

DUPLICATE_TOL = 1e-12
FILE_NORM_TOL = 1e-6


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class SpherePoint:
    """A unit vector in R^{d+1}; normalized on construction."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        c = np.asarray(coords, dtype=np.float64).ravel()
        if c.size < 2:
            raise InputError("a point on S^d needs at least 2 coordinates (d >= 1)")
        norm = np.linalg.norm(c)
        if not np.isfinite(norm) or norm == 0.0:
            raise InputError("cannot normalize a zero or non-finite vector")
        object.__setattr__(self, "coords", _frozen(c / norm))

    def __setattr__(self, name, value):
        raise AttributeError("SpherePoint is immutable")

    @property
    def d(self) -> int:
        return self.coords.size - 1

    def __repr__(self):
        return f"SpherePoint({np.array2string(self.coords, precision=6)})"

    def __eq__(self, other):
        return isinstance(other, SpherePoint) and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())


def _as_coords(x) -> np.ndarray:
    if isinstance(x, SpherePoint):
        return x.coords
    if isinstance(x, PointSet):
        return x.coords
    return np.asarray(x, dtype=np.float64)


class PointSet:
    """Nonempty set of distinct points on a common sphere S^d.

    Parameters
    ----------
    coords : array_like, shape (n, d+1)
        Rows are normalized to unit length.
    label : str, optional
    check_distinct : bool
        Reject sets with two points closer than 1e-12 (chordal).
    """

    __slots__ = ("coords", "label")

    def __init__(self, coords, label: str | None = None, check_distinct: bool = True):
        c = np.array(coords, dtype=np.float64, ndmin=2)
        if c.ndim != 2 or c.shape[0] == 0:
            raise InputError("point set must be a nonempty (n, d+1) array")
        if c.shape[1] < 2:
            raise InputError("points need at least 2 coordinates (d >= 1)")
        norms = np.linalg.norm(c, axis=1)
        if not np.all(np.isfinite(norms)) or np.any(norms == 0.0):
            raise InputError("point set contains zero or non-finite rows")
        # rows already unit to rounding are kept bit-for-bit, so reloading is exact
        off = np.abs(norms - 1.0) > 4.0 * np.finfo(np.float64).eps
        if np.any(off):
            c[off] /= norms[off, None]
        if check_distinct and c.shape[0] > 1:
            dist, _ = cKDTree(c).query(c, k=2)
            if np.min(dist[:, 1]) <= DUPLICATE_TOL:
                i = int(np.argmin(dist[:, 1]))
                raise InputError("point set contains duplicate points", index=i)
        object.__setattr__(self, "coords", _frozen(c))
        object.__setattr__(self, "label", label)

    def __setattr__(self, name, value):
        raise AttributeError("PointSet is immutable")

    @classmethod
    def from_points(cls, points, label=None):
        pts = list(points)
        if not pts:
            raise InputError("point set must be nonempty")
        dims = {p.d for p in pts}
        if len(dims) != 1:
            raise InputError("all points must share the same dimension")
        return cls(np.stack([p.coords for p in pts]), label=label)

    @property
    def d(self) -> int:
        return self.coords.shape[1] - 1

    def __len__(self):
        return self.coords.shape[0]

    def __getitem__(self, i) -> SpherePoint:
        return SpherePoint(self.coords[i])

    def __iter__(self):
        for row in self.coords:
            yield SpherePoint(row)

    def subset(self, idx, label=None) -> "PointSet":
        return PointSet(self.coords[np.asarray(idx)], label=label or self.label,
                        check_distinct=False)

    def __repr__(self):
        return f"PointSet(n={len(self)}, d={self.d}, label={self.label!r})"


@dataclass(frozen=True)
class MeshMetrics:
    mesh_norm: float
    separation_radius: float
    mesh_ratio: float
    quasi_uniformity_tau: float = field(default=2.0)

    @property
    def is_quasi_uniform(self) -> bool:
        return self.mesh_ratio <= self.quasi_uniformity_tau


def _angle(a, b):
    # 2*atan2(|a-b|, |a+b|) keeps full precision for tiny and near-pi angles
    diff = np.linalg.norm(a - b, axis=-1)
    summ = np.linalg.norm(a + b, axis=-1)
    return 2.0 * np.arctan2(diff, summ)


def geodesic_distance(a, b) -> float:
    """Great-circle distance in radians, in [0, pi]."""
    ca, cb = _as_coords(a), _as_coords(b)
    if ca.shape != cb.shape:
        raise InputError("points live on spheres of different dimension",
                         shape_a=list(ca.shape), shape_b=list(cb.shape))
    ca = ca / np.linalg.norm(ca)
    cb = cb / np.linalg.norm(cb)
    return float(_angle(ca, cb))


def geodesic_matrix(x, y=None) -> np.ndarray:
    """Pairwise geodesic distances between rows of ``x`` and ``y``."""
    x = _as_coords(x)
    y = x if y is None else _as_coords(y)
    if x.shape[1] != y.shape[1]:
        raise InputError("dimension mismatch")
    return _angle(x[:, None, :], y[None, :, :])


def _chord_to_angle(chord):
    return 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))


def mesh_metrics(pts: PointSet, tau: float = 2.0, probe_factor: int = 100) -> MeshMetrics:
    """Mesh norm, separation radius and mesh ratio of a point set on S^2.

    The mesh norm is approximated from below by the largest distance from a
    Fibonacci probe grid of ``probe_factor * len(pts)`` nodes to the set.
    """
    if len(pts) < 2:
        raise InputError("mesh metrics need at least 2 points", n=len(pts))
    if pts.d != 2:
        raise InputError("probe grid is only available on S^2", d=pts.d)
    tree = cKDTree(pts.coords)
    dist, _ = tree.query(pts.coords, k=2)
    min_chord = float(np.min(dist[:, 1]))
    if min_chord <= DUPLICATE_TOL:
        raise InputError("duplicate points: separation radius is zero")
    q = 0.5 * float(_chord_to_angle(min_chord))
    probes = fibonacci_points(probe_factor * len(pts)).coords
    h = 0.0
    for start in range(0, probes.shape[0], 200_000):
        chord, _ = tree.query(probes[start:start + 200_000], k=1)
        h = max(h, float(np.max(chord)))
    h = float(_chord_to_angle(h))
    return MeshMetrics(mesh_norm=h, separation_radius=q, mesh_ratio=h / q,
                       quasi_uniformity_tau=tau)


# ---------------------------------------------------------------------------
# generators (S^2 only)

def fibonacci_points(n: int) -> PointSet:
    """Fibonacci lattice with n points."""
    if n < 1:
        raise InputError("n must be >= 1", n=n)
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    xyz = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return PointSet(xyz, label=f"fibonacci({n})", check_distinct=False)


def spiral_points(n: int) -> PointSet:
    """Generalized spiral points of Rakhmanov, Saff and Zhou."""
    if n < 1:
        raise InputError("n must be >= 1", n=n)
    if n == 1:
        return PointSet([[0.0, 0.0, 1.0]], label="spiral(1)")
    k = np.arange(n, dtype=np.float64)
    h = -1.0 + 2.0 * k / (n - 1)
    theta = np.arccos(np.clip(h, -1.0, 1.0))
    phi = np.zeros(n)
    step = 3.6 / math.sqrt(n)
    for j in range(1, n - 1):
        phi[j] = (phi[j - 1] + step / math.sqrt(1.0 - h[j] * h[j])) % (2.0 * math.pi)
    st = np.sin(theta)
    xyz = np.column_stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])
    return PointSet(xyz, label=f"spiral({n})", check_distinct=False)


def _cap_colatitude(area):
    # colatitude of the polar cap with the given area on S^2
    return 2.0 * math.asin(math.sqrt(min(area / (4.0 * math.pi), 1.0)))


def _circle_offset(n_top, n_bot):
    return (1.0 / n_bot - 1.0 / n_top) / 2.0 + math.gcd(n_top, n_bot) / (2.0 * n_top * n_bot)


def equal_area_centers(n: int) -> PointSet:
    """Centers of the n regions of the recursive zonal equal-area partition of S^2.

    Polar caps are centered at the poles; a collar region's center is the
    midpoint of its colatitude band and of its longitude arc.
    """
    if n < 1:
        raise InputError("n must be >= 1", n=n)
    if n == 1:
        return PointSet([[0.0, 0.0, 1.0]], label="equal_area(1)")
    area = 4.0 * math.pi / n
    c_polar = _cap_colatitude(area)
    if n == 2:
        n_collars = 0
    else:
        n_collars = max(1, round((math.pi - 2.0 * c_polar) / math.sqrt(area)))
    counts = [1]
    if n_collars:
        fit = (math.pi - 2.0 * c_polar) / n_collars
        ideal = []
        for c in range(n_collars):
            top = c_polar + c * fit
            bot = top + fit
            ideal.append(2.0 * math.pi * (math.cos(top) - math.cos(bot)) / area)
        carry = 0.0
        for y in ideal:
            m = int(math.floor(y + carry + 0.5))
            carry += y - m
            counts.append(m)
    counts.append(1)
    caps = [c_polar]
    subtotal = 1
    for c in range(n_collars):
        subtotal += counts[1 + c]
        caps.append(_cap_colatitude(subtotal * area))
    caps[-1] = math.pi - c_polar if n_collars else caps[-1]

    pts = [(0.0, 0.0, 1.0)]
    offset = 0.0
    for c in range(n_collars):
        top, bot = caps[c], caps[c + 1]
        colat = 0.5 * (top + bot)
        m = counts[1 + c]
        lon = ((np.arange(m) + 0.5) / m + offset) * 2.0 * math.pi
        lon = np.mod(lon, 2.0 * math.pi)
        for ph in lon:
            pts.append((math.sin(colat) * math.cos(ph), math.sin(colat) * math.sin(ph),
                        math.cos(colat)))
        offset += _circle_offset(m, counts[2 + c])
        offset -= math.floor(offset)
    pts.append((0.0, 0.0, -1.0))
    return PointSet(np.array(pts), label=f"equal_area({n})")


def generate_points(kind: str, n: int = 0, seed: int = 0, path=None, lenient=False) -> PointSet:
    """Dispatch to a named generator.

    ``kind`` is one of ``spiral``, ``fibonacci``, ``equal_area_centers`` or
    ``file`` (reads ``path``). All generators are deterministic; ``seed`` is
    accepted for interface uniformity.
    """
    del seed
    if kind == "file":
        if path is None:
            raise InputError("kind='file' needs a path")
        return load_points(path, lenient=lenient)
    if n < 1:
        raise InputError("n must be >= 1", n=n)
    if kind == "spiral":
        return spiral_points(n)
    if kind == "fibonacci":
        return fibonacci_points(n)
    if kind in ("equal_area_centers", "equal_area"):
        return equal_area_centers(n)
    raise InputError(f"unknown point generator {kind!r}",
                     choices=["spiral", "fibonacci", "equal_area_centers", "file"])


def rotation_matrix(j: int) -> np.ndarray:
    """Rotation about the z axis by j*pi/10."""
    a = j * math.pi / 10.0
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotate(pts: PointSet, j: int) -> PointSet:
    if pts.d != 2:
        raise InputError("rotations are defined on S^2 only", d=pts.d)
    if j < 0:
        raise InputError("rotation index must be >= 0", j=j)
    if j == 0:
        return pts
    out = pts.coords @ rotation_matrix(j).T
    label = f"{pts.label}@A{j}" if pts.label else None
    return PointSet(out, label=label, check_distinct=False)


# ---------------------------------------------------------------------------
# file format: CSV header x0,...,xd

def load_points(path, lenient: bool = False) -> PointSet:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"point file not found: {path}", path=str(path))
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("point file is empty", path=str(path)) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header != [f"x{i}" for i in range(len(header))]:
            raise InputError("point file header must be x0,x1,...,xd", header=header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError("wrong number of columns", line=lineno)
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise InputError("non-numeric value", line=lineno) from None
    if not rows:
        raise InputError("point file has no rows", path=str(path))
    arr = np.array(rows)
    norms = np.linalg.norm(arr, axis=1)
    if not lenient:
        bad = np.flatnonzero(np.abs(norms - 1.0) > FILE_NORM_TOL)
        if bad.size:
            raise InputError("row norms deviate from 1 (use lenient mode to accept)",
                             first_bad_row=int(bad[0]) + 2, norm=float(norms[bad[0]]))
    return PointSet(arr, label=path.stem)


def save_points(pts: PointSet, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(pts.d + 1)])
        for row in pts.coords:
            w.writerow([repr(float(v)) for v in row])
