"""Triangulations of a disk-shaped domain with a labeled embedded inclusion.

The mesher is a structured polar-grid triangulation: concentric rings with 6*i
nodes on ring i, seamed by an angular sweep, followed by red/green refinement
bands around the inclusion boundary.  Construction is fully deterministic so
that downstream outputs are reproducible byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

BACKGROUND = 0
INCLUSION = 1

_UNIT_TOL = 1e-9


class MeshError(ValueError):
    """Invalid geometry or a mesh construction failure."""


def _as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(2)
    return a


@dataclass(frozen=True)
class ShapeSpec:
    """Inclusion geometry: a disk, an ellipse, or a simple convex polygon.

    All lengths are in domain units.  Polygons must be simple and positively
    oriented; ellipse ``rotation`` is the angle of the first semi-axis in
    radians.
    """

    kind: str
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    semi_axes: tuple[float, float] = (0.0, 0.0)
    rotation: float = 0.0
    vertices: Optional[np.ndarray] = None

    @staticmethod
    def disk(center, radius: float) -> "ShapeSpec":
        if radius <= 0:
            raise MeshError("disk radius must be positive")
        c = _as_point(center)
        return ShapeSpec(kind="disk", center=(c[0], c[1]), radius=radius)

    @staticmethod
    def ellipse(center, semi_axes, rotation: float = 0.0) -> "ShapeSpec":
        a, b = float(semi_axes[0]), float(semi_axes[1])
        if a <= 0 or b <= 0:
            raise MeshError("ellipse semi-axes must be positive")
        c = _as_point(center)
        return ShapeSpec(kind="ellipse", center=(c[0], c[1]), semi_axes=(a, b),
                         rotation=float(rotation))

    @staticmethod
    def polygon(vertices) -> "ShapeSpec":
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise MeshError("polygon needs at least 3 vertices of shape (n, 2)")
        if _polygon_area(v) <= 0:
            raise MeshError("polygon must be positively oriented")
        if not _polygon_is_simple(v):
            raise MeshError("polygon must be simple (no self-intersections)")
        v = v.copy()
        v.setflags(write=False)
        c = v.mean(axis=0)
        return ShapeSpec(kind="polygon", center=(c[0], c[1]), vertices=v)

    # -- geometry queries ---------------------------------------------------

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership for an (n, 2) array of points."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.asarray(self.center)
        if self.kind == "disk":
            return np.hypot(p[:, 0] - c[0], p[:, 1] - c[1]) <= self.radius
        if self.kind == "ellipse":
            q = self._to_local(p)
            a, b = self.semi_axes
            return (q[:, 0] / a) ** 2 + (q[:, 1] / b) ** 2 <= 1.0
        v = self.vertices
        inside = np.ones(len(p), dtype=bool)
        for i in range(len(v)):
            e = v[(i + 1) % len(v)] - v[i]
            w = p - v[i]
            inside &= e[0] * w[:, 1] - e[1] * w[:, 0] >= 0.0
        return inside

    def support(self, theta: np.ndarray) -> float:
        """Support value sup_{x in shape} x . theta for a unit direction."""
        t = _as_point(theta)
        if abs(np.hypot(t[0], t[1]) - 1.0) > _UNIT_TOL:
            raise MeshError("direction must be a unit vector")
        c = np.asarray(self.center)
        if self.kind == "disk":
            return float(c @ t + self.radius)
        if self.kind == "ellipse":
            rot = self.rotation
            ct, st = math.cos(rot), math.sin(rot)
            # coordinates of theta in the ellipse frame
            tl = np.array([ct * t[0] + st * t[1], -st * t[0] + ct * t[1]])
            a, b = self.semi_axes
            return float(c @ t + math.hypot(a * tl[0], b * tl[1]))
        return float(np.max(self.vertices @ t))

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        """Unsigned distance from each point to the shape boundary.

        Exact for disks and polygons; for ellipses a dense boundary sampling
        is used (sufficient for refinement banding).
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.asarray(self.center)
        if self.kind == "disk":
            return np.abs(np.hypot(p[:, 0] - c[0], p[:, 1] - c[1]) - self.radius)
        if self.kind == "ellipse":
            bp = self.boundary_points(512)
            d2 = ((p[:, None, :] - bp[None, :, :]) ** 2).sum(axis=2)
            return np.sqrt(d2.min(axis=1))
        v = self.vertices
        best = np.full(len(p), np.inf)
        for i in range(len(v)):
            best = np.minimum(best, _point_segment_distance(p, v[i], v[(i + 1) % len(v)]))
        return best

    def boundary_points(self, n: int = 256) -> np.ndarray:
        c = np.asarray(self.center)
        if self.kind == "disk":
            ang = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
            return c + self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        if self.kind == "ellipse":
            ang = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
            a, b = self.semi_axes
            q = np.stack([a * np.cos(ang), b * np.sin(ang)], axis=1)
            ct, st = math.cos(self.rotation), math.sin(self.rotation)
            rot = np.array([[ct, -st], [st, ct]])
            return c + q @ rot.T
        v = self.vertices
        per_edge = max(2, n // len(v))
        pts = []
        for i in range(len(v)):
            s = np.linspace(0.0, 1.0, per_edge, endpoint=False)[:, None]
            pts.append(v[i] + s * (v[(i + 1) % len(v)] - v[i]))
        return np.vstack(pts)

    def max_norm(self) -> float:
        """max |x| over the shape (distance of the farthest point from origin)."""
        c = np.asarray(self.center)
        if self.kind == "disk":
            return float(np.hypot(c[0], c[1]) + self.radius)
        if self.kind == "polygon":
            return float(np.max(np.hypot(self.vertices[:, 0], self.vertices[:, 1])))
        # max |x| = max over directions of the support value
        ang = np.linspace(0.0, 2 * math.pi, 1440, endpoint=False)
        return max(self.support(np.array([math.cos(a), math.sin(a)])) for a in ang)

    def area(self) -> float:
        if self.kind == "disk":
            return math.pi * self.radius ** 2
        if self.kind == "ellipse":
            return math.pi * self.semi_axes[0] * self.semi_axes[1]
        return _polygon_area(self.vertices)

    def perimeter(self) -> float:
        if self.kind == "disk":
            return 2 * math.pi * self.radius
        if self.kind == "ellipse":
            a, b = self.semi_axes
            h = ((a - b) / (a + b)) ** 2
            return math.pi * (a + b) * (1 + 3 * h / (10 + math.sqrt(4 - 3 * h)))
        v = self.vertices
        return float(sum(np.hypot(*(v[(i + 1) % len(v)] - v[i])) for i in range(len(v))))

    def _to_local(self, p: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center)
        ct, st = math.cos(self.rotation), math.sin(self.rotation)
        d = p - c
        return np.stack([ct * d[:, 0] + st * d[:, 1],
                         -st * d[:, 0] + ct * d[:, 1]], axis=1)


def support_function_exact(shape: ShapeSpec, theta) -> float:
    """Analytic support function of the shape in a unit direction."""
    return shape.support(np.asarray(theta, dtype=float))


def _polygon_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _polygon_is_simple(v: np.ndarray) -> bool:
    n = len(v)
    segs = [(v[i], v[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_cross(*segs[i], *segs[j]):
                return False
    return True


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _point_segment_distance(p: np.ndarray, a, b) -> np.ndarray:
    ab = b - a
    t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(p[:, 0] - proj[:, 0], p[:, 1] - proj[:, 1])


# ---------------------------------------------------------------------------
# Mesh container


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of a disk with per-triangle region labels.

    ``boundary_loop`` lists the boundary node indices in counterclockwise
    order; consecutive pairs are the boundary edges.  Arrays are read-only:
    a constructed mesh is immutable and safe to share across threads.
    """

    vertices: np.ndarray          # (nv, 2) float
    triangles: np.ndarray         # (nt, 3) int, CCW
    labels: np.ndarray            # (nt,) int, BACKGROUND / INCLUSION
    boundary_loop: np.ndarray     # (nb,) int, ordered CCW
    h: float
    domain_radius: float
    inclusion: Optional[ShapeSpec] = None

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.labels, self.boundary_loop):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def boundary_edges(self) -> np.ndarray:
        """(nb, 2) index pairs of consecutive boundary nodes."""
        loop = self.boundary_loop
        return np.stack([loop, np.roll(loop, -1)], axis=1)

    @property
    def boundary_normals(self) -> np.ndarray:
        """Outward unit normal per boundary edge."""
        e = self.boundary_edges
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        n = np.stack([d[:, 1], -d[:, 0]], axis=1)
        return n / np.hypot(n[:, 0], n[:, 1])[:, None]

    @property
    def boundary_points(self) -> np.ndarray:
        return self.vertices[self.boundary_loop]

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def inclusion_area(self) -> float:
        return float(self.triangle_areas()[self.labels == INCLUSION].sum())

    def boundary_polygon_area(self) -> float:
        return _polygon_area(self.vertices[self.boundary_loop])

    def validate(self) -> None:
        """Check the structural invariants; raises MeshError on violation."""
        areas = self.triangle_areas()
        if np.any(areas <= 0):
            raise MeshError("triangle with non-positive area")
        total = float(areas.sum())
        poly = self.boundary_polygon_area()
        if abs(total - poly) > 1e-10 * max(poly, 1.0):
            raise MeshError("triangle areas do not tile the boundary polygon")
        loop = self.boundary_loop
        if len(np.unique(loop)) != len(loop):
            raise MeshError("boundary loop visits a node twice")
        if np.any((self.labels != BACKGROUND) & (self.labels != INCLUSION)):
            raise MeshError("labels must be BACKGROUND or INCLUSION")


# ---------------------------------------------------------------------------
# Structured polar mesher


def build_disk_mesh(domain_radius: float, target_h: float,
                    inclusion: Optional[ShapeSpec] = None,
                    refine_levels: int = 0) -> Mesh:
    """Triangulate the disk of the given radius with element size ~ target_h.

    Triangles are labeled by centroid membership in the inclusion; the mesh
    is refined ``refine_levels`` times in a band around the inclusion
    boundary.  The ring count is forced odd so that concentric interfaces cut
    generically through elements instead of aligning with a node ring.
    """
    if not (0 < target_h < domain_radius / 4):
        raise MeshError("target_h must lie in (0, domain_radius/4)")
    if inclusion is not None:
        gap = domain_radius - inclusion.max_norm()
        if gap < 2 * target_h:
            raise MeshError(
                f"inclusion too close to the outer boundary (gap {gap:.4g} < {2 * target_h:.4g})")

    n_rings = max(4, int(round(domain_radius / target_h)))
    if n_rings % 2 == 0:
        n_rings += 1

    verts = [np.zeros((1, 2))]
    rings = [np.array([0], dtype=np.int64)]
    offset = 1
    for i in range(1, n_rings + 1):
        m = 6 * i
        ang = 2 * math.pi * np.arange(m) / m
        r = domain_radius * i / n_rings
        verts.append(np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1))
        rings.append(offset + np.arange(m, dtype=np.int64))
        offset += m
    vertices = np.vstack(verts)

    tris = []
    first = rings[1]
    for k in range(6):
        tris.append((0, first[k], first[(k + 1) % 6]))
    for i in range(1, n_rings):
        tris.extend(_seam_rings(rings[i], rings[i + 1]))
    triangles = np.array(tris, dtype=np.int64)
    loop = rings[n_rings]

    for _ in range(max(0, refine_levels) if inclusion is not None else 0):
        marked = _band_mark(vertices, triangles, inclusion)
        if not marked.any():
            break
        vertices, triangles, loop = _refine_red_green(
            vertices, triangles, loop, marked, domain_radius)

    cents = vertices[triangles].mean(axis=1)
    if inclusion is not None:
        labels = np.where(inclusion.contains(cents), INCLUSION, BACKGROUND)
        if int((labels == INCLUSION).sum()) < 8:
            raise MeshError("target_h too coarse: fewer than 8 triangles inside the inclusion")
    else:
        labels = np.full(len(triangles), BACKGROUND, dtype=np.int64)

    mesh = Mesh(vertices=vertices, triangles=triangles,
                labels=np.asarray(labels, dtype=np.int64),
                boundary_loop=np.asarray(loop, dtype=np.int64),
                h=float(target_h), domain_radius=float(domain_radius),
                inclusion=inclusion)
    mesh.validate()
    return mesh


def _seam_rings(prev: np.ndarray, nxt: np.ndarray):
    """Triangulate the annulus between two rings by an angular two-pointer sweep."""
    np_, nn = len(prev), len(nxt)
    tris = []
    i = j = 0
    while i < np_ or j < nn:
        ai = (i + 1) / np_
        aj = (j + 1) / nn
        if j < nn and (i == np_ or aj <= ai):
            tris.append((prev[i % np_], nxt[j % nn], nxt[(j + 1) % nn]))
            j += 1
        else:
            tris.append((prev[i % np_], nxt[j % nn], prev[(i + 1) % np_]))
            i += 1
    return tris


def _band_mark(vertices, triangles, shape: ShapeSpec) -> np.ndarray:
    """Mark triangles whose centroid is within one local diameter of the shape boundary."""
    p = vertices[triangles]
    cents = p.mean(axis=1)
    e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
    size = np.hypot(e[..., 0], e[..., 1]).max(axis=0)
    return shape.boundary_distance(cents) <= size


def _refine_red_green(vertices, triangles, loop, marked, domain_radius):
    """One red/green refinement pass: marked triangles split in four, hanging
    nodes closed by bisection; new boundary nodes are projected to the circle."""
    nt = len(triangles)
    red = marked.copy()

    def edges_of(t):
        a, b, c = triangles[t]
        return [tuple(sorted((a, b))), tuple(sorted((b, c))), tuple(sorted((c, a)))]

    edge_owner: dict = {}
    for t in range(nt):
        for e in edges_of(t):
            edge_owner.setdefault(e, []).append(t)

    # closure: a triangle with 2+ split edges becomes red itself
    while True:
        split = set()
        for t in range(nt):
            if red[t]:
                split.update(edges_of(t))
        changed = False
        for t in range(nt):
            if not red[t]:
                cnt = sum(1 for e in edges_of(t) if e in split)
                if cnt >= 2:
                    red[t] = True
                    changed = True
        if not changed:
            break

    boundary_edge_set = set()
    for k in range(len(loop)):
        boundary_edge_set.add(tuple(sorted((int(loop[k]), int(loop[(k + 1) % len(loop)])))))

    verts = [vertices]
    next_id = len(vertices)
    midpoint: dict = {}
    for e in sorted(split):
        a, b = e
        m = 0.5 * (vertices[a] + vertices[b])
        if e in boundary_edge_set:
            m = m * (domain_radius / np.hypot(m[0], m[1]))
        verts.append(m[None, :])
        midpoint[e] = next_id
        next_id += 1
    new_vertices = np.vstack(verts)

    new_tris = []
    for t in range(nt):
        a, b, c = (int(x) for x in triangles[t])
        if red[t]:
            mab = midpoint[tuple(sorted((a, b)))]
            mbc = midpoint[tuple(sorted((b, c)))]
            mca = midpoint[tuple(sorted((c, a)))]
            new_tris += [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
        else:
            se = [e for e in edges_of(t) if e in midpoint]
            if not se:
                new_tris.append((a, b, c))
            else:
                e = se[0]
                m = midpoint[e]
                # bisect from the midpoint to the opposite vertex
                if e == tuple(sorted((a, b))):
                    new_tris += [(a, m, c), (m, b, c)]
                elif e == tuple(sorted((b, c))):
                    new_tris += [(b, m, a), (m, c, a)]
                else:
                    new_tris += [(c, m, b), (m, a, b)]

    new_loop = []
    for k in range(len(loop)):
        a, b = int(loop[k]), int(loop[(k + 1) % len(loop)])
        new_loop.append(a)
        e = tuple(sorted((a, b)))
        if e in midpoint:
            new_loop.append(midpoint[e])
    return new_vertices, np.array(new_tris, dtype=np.int64), np.array(new_loop, dtype=np.int64)


# ---------------------------------------------------------------------------
# Plain-text mesh exchange format


def write_mesh(mesh: Mesh, path, provenance: Optional[dict] = None) -> None:
    """Header (counts, h, radius), vertex lines, triangle+label lines, boundary edges."""
    normals = mesh.boundary_normals
    edges = mesh.boundary_edges
    with open(path, "w") as f:
        f.write("# enclosure2d mesh v1\n")
        for key, val in (provenance or {}).items():
            f.write(f"# {key}: {val}\n")
        f.write(f"{mesh.n_vertices} {mesh.n_triangles} {len(edges)} "
                f"{mesh.h:.17g} {mesh.domain_radius:.17g}\n")
        for x, y in mesh.vertices:
            f.write(f"{x:.17g} {y:.17g}\n")
        for (i, j, k), lab in zip(mesh.triangles, mesh.labels):
            f.write(f"{i} {j} {k} {lab}\n")
        for (i, j), (nx, ny) in zip(edges, normals):
            f.write(f"{i} {j} {nx:.17g} {ny:.17g}\n")


def read_mesh(path) -> Mesh:
    with open(path) as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    nv, nt, nb = (int(x) for x in lines[0].split()[:3])
    h, radius = (float(x) for x in lines[0].split()[3:5])
    vertices = np.array([[float(x) for x in ln.split()] for ln in lines[1:1 + nv]])
    tl = np.array([[int(x) for x in ln.split()] for ln in lines[1 + nv:1 + nv + nt]],
                  dtype=np.int64)
    edges = [ln.split() for ln in lines[1 + nv + nt:1 + nv + nt + nb]]
    loop = np.array([int(e[0]) for e in edges], dtype=np.int64)
    return Mesh(vertices=vertices, triangles=tl[:, :3], labels=tl[:, 3],
                boundary_loop=loop, h=h, domain_radius=radius)
