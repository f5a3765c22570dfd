"""Executable measure theory: axis projections, interval covers, and
verifiers for the locality statements behind the reaction identification.

Sets are finite unions of axis-aligned boxes, so projections, covers,
and intersections are exact and every hypothesis is certifiable.
Almost-everywhere claims are tested as grid fractions approaching 1
under refinement.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class IntervalCover:
    """Finite list of open intervals on the real line."""

    intervals: tuple

    def __init__(self, intervals):
        ivs = tuple((float(lo), float(hi)) for lo, hi in intervals)
        for lo, hi in ivs:
            if hi < lo:
                raise ValueError(f"interval ({lo}, {hi}) reversed")
        object.__setattr__(self, "intervals", ivs)

    def merged(self):
        """Overlapping/touching intervals merged, sorted."""
        if not self.intervals:
            return ()
        ivs = sorted(self.intervals)
        out = [list(ivs[0])]
        for lo, hi in ivs[1:]:
            if lo <= out[-1][1]:
                out[-1][1] = max(out[-1][1], hi)
            else:
                out.append([lo, hi])
        return tuple((lo, hi) for lo, hi in out)

    def total_length(self):
        return float(sum(hi - lo for lo, hi in self.merged()))

    def union(self, other):
        return IntervalCover(self.intervals + other.intervals)

    def covers_points(self, points):
        pts = np.asarray(points, dtype=float)
        mask = np.zeros(pts.shape, dtype=bool)
        for lo, hi in self.intervals:
            mask |= (pts > lo) & (pts < hi)
        return mask


def cover_length(cover):
    """Total length of the merged cover: an outer-measure upper bound."""
    return cover.total_length()


@dataclass(frozen=True)
class BoxSet:
    """Finite union of axis-aligned closed boxes in R^N."""

    dimension: int
    boxes: tuple  # each box: tuple of (lo, hi) per axis

    def __init__(self, dimension, boxes):
        object.__setattr__(self, "dimension", int(dimension))
        bxs = []
        for box in boxes:
            box = tuple((float(lo), float(hi)) for lo, hi in box)
            if len(box) != dimension:
                raise ValueError(f"box {box} has wrong dimension")
            for lo, hi in box:
                if hi < lo:
                    raise ValueError(f"box side ({lo}, {hi}) has negative length")
            bxs.append(box)
        object.__setattr__(self, "boxes", tuple(bxs))

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.zeros(len(pts), dtype=bool)
        for box in self.boxes:
            inside = np.ones(len(pts), dtype=bool)
            for i, (lo, hi) in enumerate(box):
                inside &= (pts[:, i] >= lo) & (pts[:, i] <= hi)
            mask |= inside
        return mask

    def distance_to_origin(self):
        if not self.boxes:
            return np.inf
        best = np.inf
        for box in self.boxes:
            d2 = 0.0
            for lo, hi in box:
                if lo > 0:
                    d2 += lo**2
                elif hi < 0:
                    d2 += hi**2
            best = min(best, np.sqrt(d2))
        return float(best)

    def union(self, other):
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch")
        return BoxSet(self.dimension, self.boxes + other.boxes)

    def intersects_rectangle(self, rect):
        """Exact overlap test against a rectangle ((lo, hi) per axis)."""
        for box in self.boxes:
            if all(
                box[i][0] <= rect[i][1] and rect[i][0] <= box[i][1]
                for i in range(self.dimension)
            ):
                return True
        return False


def axis_project(boxset, i):
    """Exact projection of the set onto coordinate axis i, merged."""
    if not (0 <= i < boxset.dimension):
        raise ValueError(f"axis {i} out of range for dimension {boxset.dimension}")
    return IntervalCover([box[i] for box in boxset.boxes])


@dataclass
class LipschitzMap:
    """Map R^N -> R^M, locally Lipschitz away from the origin.

    The compact K is the annulus r_inner <= |x| <= r_outer.  The
    Lipschitz constant on K is supplied or estimated by dense pair
    sampling inflated by a 5% safety factor.
    """

    fn: object
    dim_in: int
    dim_out: int
    r_inner: float
    r_outer: float
    lip: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.r_inner < self.r_outer):
            raise ValueError("need 0 < r_inner < r_outer")
        if self.lip is None:
            self.lip = self._estimate_lip()

    def _sample_annulus(self, n, rng):
        x = rng.normal(size=(n, self.dim_in))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        r = self.r_inner + (self.r_outer - self.r_inner) * rng.random((n, 1))
        return x * r

    def _estimate_lip(self):
        rng = np.random.default_rng(self.seed)
        a = self._sample_annulus(10_000, rng)
        b = self._sample_annulus(10_000, rng)
        num = np.linalg.norm(self.fn(a) - self.fn(b), axis=1)
        den = np.linalg.norm(a - b, axis=1)
        keep = den > 1e-12
        return float(1.05 * np.max(num[keep] / den[keep]))

    def contains_ball(self, center, radius):
        r = float(np.linalg.norm(center))
        return r - radius >= self.r_inner and r + radius <= self.r_outer

    def dist_outside_k(self, boxset):
        """Min over box corners/faces of distance to the complement of K."""
        best = np.inf
        for box in boxset.boxes:
            corners = np.array(list(itertools.product(*box)))
            rad = np.linalg.norm(corners, axis=1)
            best = min(best, float(np.min(rad - self.r_inner)))
            best = min(best, float(np.min(self.r_outer - rad)))
        return best


@dataclass(frozen=True)
class GridField:
    """Scalar field sampled on a uniform tensor grid."""

    axes: tuple  # tuple of 1d coordinate arrays
    values: np.ndarray

    def __init__(self, axes, values):
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        values = np.asarray(values, dtype=float)
        if values.shape != tuple(len(a) for a in axes):
            raise ValueError("values shape does not match axes")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, fn, axes):
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        grids = np.meshgrid(*axes, indexing="ij")
        return cls(axes, fn(*grids))

    @property
    def dimension(self):
        return len(self.axes)

    def partial(self, i):
        """Central finite-difference partial derivative along axis i."""
        h = self.axes[i][1] - self.axes[i][0]
        return np.gradient(self.values, h, axis=i)


def _image_cluster_length(values, gap_tol):
    """Length of the value set covered by gap-clustered intervals."""
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) == 0:
        return 0.0
    splits = np.nonzero(np.diff(v) > gap_tol)[0]
    starts = np.concatenate([[0], splits + 1])
    ends = np.concatenate([splits, [len(v) - 1]])
    return float(np.sum(v[ends] - v[starts]))


@dataclass(frozen=True)
class LocalityResult:
    hypothesis_met: bool
    certified_fraction: float
    pass_fraction: float
    n_points: int
    n_fibers: int


def verify_locality(phi, D, i, tol, hypothesis_tol=1e-6, max_fibers=256):
    """Check that the i-th partial derivative vanishes a.e. on D.

    First certifies the hypothesis on sampled fibers: the image of
    every sampled fiber of D must be coverable by intervals of total
    length below hypothesis_tol.  If certification fails the result
    reports hypothesis-not-met instead of judging the derivative.
    """
    if not (0 <= i < phi.dimension):
        raise ValueError(f"axis {i} out of range")
    grids = np.meshgrid(*phi.axes, indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    in_d = D.contains(pts).reshape(phi.values.shape)

    other_axes = [k for k in range(phi.dimension) if k != i]
    other_shape = [phi.values.shape[k] for k in other_axes]
    fiber_index_sets = list(np.ndindex(*other_shape))
    stride = max(1, len(fiber_index_sets) // max_fibers)
    gap = hypothesis_tol / max(4, len(phi.axes[i]))

    certified = 0
    n_fibers = 0
    for multi in fiber_index_sets[::stride]:
        sl = [slice(None)] * phi.dimension
        for k, idx in zip(other_axes, multi):
            sl[k] = idx
        mask = in_d[tuple(sl)]
        if not mask.any():
            continue
        n_fibers += 1
        img_len = _image_cluster_length(phi.values[tuple(sl)][mask], gap)
        if img_len < hypothesis_tol:
            certified += 1
    cert_frac = certified / n_fibers if n_fibers else 1.0
    if cert_frac < 1.0:
        return LocalityResult(False, cert_frac, 0.0, int(in_d.sum()), n_fibers)

    dphi = phi.partial(i)
    sel = in_d
    npts = int(sel.sum())
    frac = float(np.mean(np.abs(dphi[sel]) < tol)) if npts else 1.0
    return LocalityResult(True, cert_frac, frac, npts, n_fibers)


@dataclass(frozen=True)
class NullProjectionReport:
    """Outcome of the covering construction for a Lipschitz image."""

    sums: tuple  # sum of image-interval lengths per output axis
    bound: float  # N * Lip_K * eps
    eps: float
    lip: float
    n_rectangles: int
    passed: bool
    covers: tuple  # per output axis, tuple of (lo, hi) image intervals


def _ball_samples(center, radius, n_radial=12, n_angular=32):
    """Deterministic polar sampling of a closed 2D disk."""
    angles = np.linspace(0.0, 2 * np.pi, n_angular, endpoint=False)
    radii = radius * np.sqrt((np.arange(n_radial) + 0.5) / n_radial)
    pts = [np.array(center)[None, :]]
    for r in radii:
        pts.append(center + r * np.column_stack([np.cos(angles), np.sin(angles)]))
    pts.append(
        center + radius * np.column_stack([np.cos(angles), np.sin(angles)])
    )
    return np.vstack(pts)


def verify_null_projection(psi, D, eps):
    """Run the rectangle/ball covering construction and check its bound.

    Covers each axis projection of D by open intervals of total length
    below eps, forms the rectangles of interval products meeting D,
    circumscribes balls, maps them, and sums the axis projections of
    the image hulls.  The sums must stay below dim * Lip_K * eps.
    """
    if D.distance_to_origin() <= 0:
        raise ValueError("the set must stay away from the origin")
    n = D.dimension
    eps_bar = psi.dist_outside_k(D) / n
    if eps >= eps_bar:
        raise ValueError(
            f"eps={eps} too large: needs eps < dist(D, complement K)/N = {eps_bar:.3e}"
        )

    axis_covers = []
    for i in range(n):
        merged = axis_project(D, i).merged()
        total = sum(hi - lo for lo, hi in merged)
        if total >= eps:
            raise ValueError(
                f"axis {i} projection has length {total} >= eps={eps}; no admissible cover"
            )
        pad = 0.25 * (eps - total) / max(1, len(merged))
        axis_covers.append(tuple((lo - pad, hi + pad) for lo, hi in merged))

    rects = []
    for combo in itertools.product(*axis_covers):
        if D.intersects_rectangle(combo):
            rects.append(combo)

    m = psi.dim_out
    sums = np.zeros(m)
    covers = [[] for _ in range(m)]
    for rect in rects:
        center = np.array([(lo + hi) / 2 for lo, hi in rect])
        radius = 0.5 * float(
            np.sqrt(sum((hi - lo) ** 2 for lo, hi in rect))
        )
        if not psi.contains_ball(center, radius):
            raise ValueError("circumscribed ball escapes K; shrink eps")
        img = psi.fn(_ball_samples(center, radius))
        for j in range(m):
            lo, hi = float(img[:, j].min()), float(img[:, j].max())
            covers[j].append((lo, hi))
            sums[j] += hi - lo

    bound = n * psi.lip * eps
    return NullProjectionReport(
        sums=tuple(float(s) for s in sums),
        bound=float(bound),
        eps=float(eps),
        lip=float(psi.lip),
        n_rectangles=len(rects),
        passed=bool(np.all(sums < bound)),
        covers=tuple(tuple(c) for c in covers),
    )


@dataclass(frozen=True)
class CounterexampleRecord:
    image_measure_estimate: float
    cell_area_bound: float
    jacobian_entry: float
    projection_lengths: tuple
    grid_extent: float
    grid_n: int


def jacobian_counterexample(n_grid=128, extent=1.0, dim=2):
    """Collapse map (x1, ..., xN) -> (x1, 0, ..., 0) on a grid.

    Its image is measure-null in R^M (it lies in a line) yet the first
    Jacobian entry is identically 1: a null image in the target does
    not force a null Jacobian.  The per-axis projection hypothesis is
    what fails here: the image projects onto a full interval on axis 1.
    """
    axes = tuple(np.linspace(-extent, extent, n_grid) for _ in range(dim))
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    img = np.zeros_like(pts)
    img[:, 0] = pts[:, 0]

    spacing = axes[0][1] - axes[0][0]
    # cover the image by dim-cubes of side = grid spacing
    distinct = np.unique(np.round(img[:, 0] / spacing))
    measure_est = len(distinct) * spacing**dim
    cell_bound = (2 * extent + spacing) * spacing ** (dim - 1)

    phi1 = GridField(axes, grids[0])
    jac_entry = float(np.median(phi1.partial(0)))

    proj = []
    for j in range(dim):
        vals = img[:, j]
        proj.append(float(vals.max() - vals.min()))
    return CounterexampleRecord(
        image_measure_estimate=float(measure_est),
        cell_area_bound=float(cell_bound),
        jacobian_entry=jac_entry,
        projection_lengths=tuple(proj),
        grid_extent=float(extent),
        grid_n=int(n_grid),
    )
