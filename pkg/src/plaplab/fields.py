"""Nodal P1 fields and the exact distance-to-boundary field."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, distance_to_segments


@dataclass
class DiscreteField:
    """P1 field given by one value per mesh vertex."""

    mesh: Mesh
    nodal_values: np.ndarray

    def __post_init__(self):
        self.nodal_values = np.asarray(self.nodal_values, dtype=float)
        if self.nodal_values.shape != (self.mesh.num_vertices,):
            raise ValueError(
                f"expected {self.mesh.num_vertices} nodal values, "
                f"got {self.nodal_values.shape}"
            )

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(mesh.num_vertices))

    @classmethod
    def from_function(cls, mesh, fn):
        return cls(mesh, np.asarray(fn(mesh.vertices[:, 0], mesh.vertices[:, 1])))

    def copy(self):
        return DiscreteField(self.mesh, self.nodal_values.copy())

    def element_gradients(self):
        """Constant gradient per element, shape (nt, 2)."""
        _, grads = self.mesh.element_geometry()
        vals = self.nodal_values[self.mesh.triangles]  # (nt, 3)
        return np.einsum("ta,tad->td", vals, grads)

    def values_at_barycentric(self, bary):
        """Values at the same barycentric point of every element.

        bary : (3,) barycentric coordinates; returns shape (nt,).
        """
        vals = self.nodal_values[self.mesh.triangles]
        return vals @ np.asarray(bary)

    def sup_norm(self):
        return float(np.abs(self.nodal_values).max())

    def grad_sup_norm(self):
        return float(np.linalg.norm(self.element_gradients(), axis=1).max())

    def lp_norm(self, p, quad=None):
        """L^p(Omega) norm by element-wise quadrature (exact for p=2)."""
        from .quadrature import TRI_QUAD_DEG5, element_quad_points

        rule = quad if quad is not None else TRI_QUAD_DEG5
        _, wts, vals = element_quad_points(self.mesh, rule, self)
        return float(np.sum(wts * np.abs(vals) ** p) ** (1.0 / p))

    def vanishes_on_boundary(self, tol=0.0):
        return bool(
            np.all(np.abs(self.nodal_values[self.mesh.boundary_vertices]) <= tol)
        )

    def export_csv(self, path):
        """CSV export 'x,y,value,gx,gy' (gradients vertex-averaged)."""
        grads = self.element_gradients()
        acc = np.zeros((self.mesh.num_vertices, 2))
        cnt = np.zeros(self.mesh.num_vertices)
        for a in range(3):
            idx = self.mesh.triangles[:, a]
            np.add.at(acc, idx, grads)
            np.add.at(cnt, idx, 1.0)
        acc /= np.maximum(cnt, 1.0)[:, None]
        with open(path, "w") as fh:
            fh.write("x,y,value,gx,gy\n")
            for (x, y), v, (gx, gy) in zip(
                self.mesh.vertices, self.nodal_values, acc
            ):
                fh.write(f"{x!r},{y!r},{v!r},{gx!r},{gy!r}\n")


class DistanceField:
    """Exact distance to the polygon boundary, with nodal samples."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.nodal_values = distance_to_segments(mesh.vertices, mesh.polygon)

    def __call__(self, points):
        return distance_to_segments(points, self.mesh.polygon)

    def as_field(self):
        return DiscreteField(self.mesh, self.nodal_values)


def distance_field(mesh):
    """Distance-to-boundary field for a mesh (exact per-point evaluator)."""
    return DistanceField(mesh)
