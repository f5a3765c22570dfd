"""Conforming P1 triangulations of simple polygons.

Rectilinear polygons (all edges axis-parallel, e.g. squares and
L-shapes) get an exact structured mesh: a tensor grid aligned with
every polygon vertex, each cell split into two right triangles with
alternating diagonals.  Such meshes are non-obtuse, which the discrete
comparison checks downstream rely on.  Generic simple polygons fall
back to a Delaunay mesh of boundary and interior grid points; if that
produces obtuse elements the mesh carries a ``degraded`` flag and
comparison-type assertions downgrade to reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

_GEOM_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid polygon or meshing request."""


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with Dirichlet boundary tagging.

    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counter-clockwise
    boundary_vertices : sorted int array of vertex indices on the polygon boundary
    h : max element diameter
    polygon : (np, 2) float array of the meshed polygon (closed implicitly)
    degraded : True when non-obtuseness could not be achieved
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertices: np.ndarray
    h: float
    polygon: np.ndarray
    degraded: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    @property
    def interior_vertices(self):
        mask = np.ones(self.num_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.nonzero(mask)[0]

    def element_geometry(self):
        """Per-element areas and constant P1 basis gradients.

        Returns (areas, grads) with areas shape (nt,) and grads shape
        (nt, 3, 2): grads[t, a] is the gradient of the hat function of
        local vertex a on triangle t.
        """
        if "geom" not in self._cache:
            pts = self.vertices[self.triangles]  # (nt, 3, 2)
            d1 = pts[:, 1] - pts[:, 0]
            d2 = pts[:, 2] - pts[:, 0]
            det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
            areas = 0.5 * det
            # rot90(edge opposite vertex a) / (2A)
            e0 = pts[:, 2] - pts[:, 1]
            e1 = pts[:, 0] - pts[:, 2]
            e2 = pts[:, 1] - pts[:, 0]
            grads = np.empty((self.num_triangles, 3, 2))
            for a, e in enumerate((e0, e1, e2)):
                grads[:, a, 0] = -e[:, 1]
                grads[:, a, 1] = e[:, 0]
            grads /= det[:, None, None]
            self._cache["geom"] = (areas, grads)
        return self._cache["geom"]

    def max_angle(self):
        """Largest interior angle over all elements, in degrees."""
        pts = self.vertices[self.triangles]
        worst = 0.0
        for a in range(3):
            u = pts[:, (a + 1) % 3] - pts[:, a]
            v = pts[:, (a + 2) % 3] - pts[:, a]
            cosang = np.einsum("ij,ij->i", u, v) / (
                np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
            )
            ang = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
            worst = max(worst, float(ang.max()))
        return worst


def _as_polygon(polygon):
    poly = np.asarray(polygon, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
        raise GeometryError("polygon must be a list of at least 3 points")
    if np.linalg.norm(poly[0] - poly[-1]) < _GEOM_TOL:
        poly = poly[:-1]
    return poly


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) < _GEOM_TOL:
            return 0
        return 1 if v > 0 else -1

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return o1 != o2 and o3 != o4


def _check_simple(poly):
    n = len(poly)
    for i in range(n):
        a1, a2 = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b1, b2 = poly[j], poly[(j + 1) % n]
            if _segments_intersect(a1, a2, b1, b2):
                raise GeometryError(
                    f"polygon self-intersects (edges {i} and {j})"
                )


def polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def points_in_polygon(points, poly):
    """Ray-casting test, vectorized over points."""
    pts = np.atleast_2d(points)
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    x, y = pts[:, 0], pts[:, 1]
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < np.where(crosses, xint, np.inf))
    return inside


def distance_to_segments(points, poly):
    """Exact min distance from each point to the polygon boundary."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    best = np.full(len(pts), np.inf)
    n = len(poly)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        ab = b - a
        denom = float(ab @ ab)
        t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        best = np.minimum(best, np.linalg.norm(pts - proj, axis=1))
    return best


def _is_rectilinear(poly):
    n = len(poly)
    for i in range(n):
        dx, dy = poly[(i + 1) % n] - poly[i]
        if abs(dx) > _GEOM_TOL and abs(dy) > _GEOM_TOL:
            return False
    return True


def _graded_axis(coords, h_cell):
    """Tensor-grid axis through every polygon coordinate, pitch <= h_cell."""
    coords = np.unique(coords)
    axis = [coords[0]]
    for left, right in zip(coords[:-1], coords[1:]):
        n = max(1, int(np.ceil((right - left) / h_cell - 1e-12)))
        axis.extend(np.linspace(left, right, n + 1)[1:])
    return np.array(axis)


def _build_rectilinear(poly, h_target):
    # cell pitch such that the cell diagonal stays below h_target
    h_cell = h_target / np.sqrt(2.0)
    xs = _graded_axis(poly[:, 0], h_cell)
    ys = _graded_axis(poly[:, 1], h_cell)
    nx, ny = len(xs), len(ys)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([xx.ravel(), yy.ravel()])
    on_bnd = distance_to_segments(verts, poly) < 1e-10

    def vid(i, j):
        return i * ny + j

    centers_x = 0.5 * (xs[:-1] + xs[1:])
    centers_y = 0.5 * (ys[:-1] + ys[1:])
    cx, cy = np.meshgrid(centers_x, centers_y, indexing="ij")
    keep = points_in_polygon(
        np.column_stack([cx.ravel(), cy.ravel()]), poly
    ).reshape(nx - 1, ny - 1)

    def split(v00, v10, v01, v11, main_diag):
        if main_diag:
            return [(v00, v10, v11), (v00, v11, v01)]
        return [(v00, v10, v01), (v10, v11, v01)]

    tris = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            if not keep[i, j]:
                continue
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            cand = split(v00, v10, v01, v11, (i + j) % 2 == 0)
            # an element with all vertices on the boundary starves the
            # interior (e.g. zero sub-solution floor); flip its diagonal
            if any(all(on_bnd[v] for v in t) for t in cand):
                flipped = split(v00, v10, v01, v11, (i + j) % 2 != 0)
                if not any(all(on_bnd[v] for v in t) for t in flipped):
                    cand = flipped
            tris.extend(cand)
    tris = np.array(tris, dtype=int)

    used = np.unique(tris)
    remap = -np.ones(len(verts), dtype=int)
    remap[used] = np.arange(len(used))
    return verts[used], remap[tris]


def _build_delaunay(poly, h_target):
    # boundary points spaced <= h_target/2 along each edge, interior grid
    bpts = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        length = np.linalg.norm(b - a)
        k = max(1, int(np.ceil(2.0 * length / h_target)))
        for t in np.linspace(0.0, 1.0, k + 1)[:-1]:
            bpts.append(a + t * (b - a))
    bpts = np.array(bpts)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    step = h_target / np.sqrt(2.0)
    gx = np.arange(lo[0] + step, hi[0] - 0.5 * step, step)
    gy = np.arange(lo[1] + step, hi[1] - 0.5 * step, step)
    gxx, gyy = np.meshgrid(gx, gy, indexing="ij")
    gpts = np.column_stack([gxx.ravel(), gyy.ravel()])
    if len(gpts):
        inside = points_in_polygon(gpts, poly)
        clear = distance_to_segments(gpts, poly) > 0.3 * step
        gpts = gpts[inside & clear]
    pts = np.vstack([bpts, gpts]) if len(gpts) else bpts
    tri = Delaunay(pts)
    cells = tri.simplices
    centroids = pts[cells].mean(axis=1)
    cells = cells[points_in_polygon(centroids, poly)]
    return pts, cells


def build_mesh(polygon, h_target):
    """Triangulate a simple polygon with max element diameter <= 1.5*h_target.

    Deterministic for fixed inputs.  Raises GeometryError for
    self-intersecting polygons or non-positive h_target.
    """
    if h_target <= 0:
        raise GeometryError("h_target must be positive")
    poly = _as_polygon(polygon)
    _check_simple(poly)
    if polygon_area(poly) < _GEOM_TOL:
        raise GeometryError("polygon has (near) zero area")
    # enforce counter-clockwise orientation
    x, y = poly[:, 0], poly[:, 1]
    if 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) < 0:
        poly = poly[::-1]

    if _is_rectilinear(poly):
        verts, tris = _build_rectilinear(poly, h_target)
    else:
        verts, tris = _build_delaunay(poly, h_target)

    # orient counter-clockwise
    pts = verts[tris]
    det = (pts[:, 1, 0] - pts[:, 0, 0]) * (pts[:, 2, 1] - pts[:, 0, 1]) - (
        pts[:, 1, 1] - pts[:, 0, 1]
    ) * (pts[:, 2, 0] - pts[:, 0, 0])
    flip = det < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    d = distance_to_segments(verts, poly)
    boundary = np.nonzero(d < 1e-10)[0]

    edges = np.sort(
        np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1
    )
    diam = np.linalg.norm(verts[edges[:, 0]] - verts[edges[:, 1]], axis=1).max()

    mesh = Mesh(
        vertices=verts,
        triangles=tris,
        boundary_vertices=boundary,
        h=float(diam),
        polygon=poly,
        degraded=False,
    )
    if mesh.max_angle() > 90.0 + 1e-9:
        mesh = Mesh(
            vertices=verts,
            triangles=tris,
            boundary_vertices=boundary,
            h=float(diam),
            polygon=poly,
            degraded=True,
        )
    return mesh


def locate_points(mesh, points):
    """Element index containing each point (barycentric test, KD-tree
    candidates).  Raises GeometryError for points outside the mesh."""
    from scipy.spatial import cKDTree

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if "centroid_tree" not in mesh._cache:
        centroids = mesh.vertices[mesh.triangles].mean(axis=1)
        mesh._cache["centroid_tree"] = cKDTree(centroids)
    tree = mesh._cache["centroid_tree"]
    k = min(24, mesh.num_triangles)
    _, cand = tree.query(pts, k=k)
    cand = np.atleast_2d(cand)
    out = np.full(len(pts), -1, dtype=int)
    tol = 1e-12 * max(mesh.h, 1.0)
    for j in range(cand.shape[1]):
        todo = out < 0
        if not todo.any():
            break
        tris = mesh.triangles[cand[todo, j]]
        a = mesh.vertices[tris[:, 0]]
        b = mesh.vertices[tris[:, 1]]
        c = mesh.vertices[tris[:, 2]]
        v0, v1, v2 = b - a, c - a, pts[todo] - a
        den = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
        l1 = (v2[:, 0] * v1[:, 1] - v2[:, 1] * v1[:, 0]) / den
        l2 = (v0[:, 0] * v2[:, 1] - v0[:, 1] * v2[:, 0]) / den
        ok = (l1 >= -tol) & (l2 >= -tol) & (l1 + l2 <= 1 + tol)
        idx = np.nonzero(todo)[0][ok]
        out[idx] = cand[idx, j]
    if (out < 0).any():
        raise GeometryError(
            f"{int((out < 0).sum())} point(s) outside the mesh, e.g. {pts[out < 0][0]}"
        )
    return out


def boundary_edges(mesh):
    """Edges belonging to exactly one element, as (ne, 2) index pairs."""
    tris = mesh.triangles
    edges = np.sort(
        np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1
    )
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return uniq[counts == 1]


def check_conforming(mesh):
    """True when every interior edge is shared by exactly two elements."""
    tris = mesh.triangles
    edges = np.sort(
        np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1
    )
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return bool(np.all((counts == 1) | (counts == 2)))


def save_mesh(mesh, path):
    """Plain-text export: 'v x y', 't i j k', 'b i' (plus 'p x y' polygon) lines."""
    with open(path, "w") as fh:
        for x, y in mesh.polygon:
            fh.write(f"p {x!r} {y!r}\n")
        for x, y in mesh.vertices:
            fh.write(f"v {x!r} {y!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"t {i} {j} {k}\n")
        for b in mesh.boundary_vertices:
            fh.write(f"b {b}\n")


def load_mesh(path):
    verts, tris, bnd, poly = [], [], [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            tag, rest = parts[0], parts[1:]
            if tag == "v":
                verts.append([float(rest[0]), float(rest[1])])
            elif tag == "t":
                tris.append([int(v) for v in rest[:3]])
            elif tag == "b":
                bnd.append(int(rest[0]))
            elif tag == "p":
                poly.append([float(rest[0]), float(rest[1])])
            else:
                raise GeometryError(f"unknown mesh line tag {tag!r}")
    verts = np.array(verts)
    tris = np.array(tris, dtype=int)
    edges = np.sort(
        np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1
    )
    diam = np.linalg.norm(verts[edges[:, 0]] - verts[edges[:, 1]], axis=1).max()
    mesh = Mesh(
        vertices=verts,
        triangles=tris,
        boundary_vertices=np.array(sorted(bnd), dtype=int),
        h=float(diam),
        polygon=np.array(poly),
    )
    return mesh
