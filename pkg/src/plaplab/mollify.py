"""Truncation and mollification of the reaction terms.

The order is load-bearing: the singular scalar reaction is truncated at
the sub-solution floor FIRST and convolved afterwards, so the smoothed
reaction is finite for every argument (including negative ones the
iterates may momentarily produce).  The gradient reaction is convolved
as-is and composed with grad T(u), T(u) = max(u, usub), afterwards.

Kernels are smooth bumps; scalar convolutions split their window at
declared jumps (and at the per-point truncation kink) so fixed-order
Gauss rules see only smooth integrands.  Product-form gradient
reactions use a product bump supported in the inscribed cube of the
epsilon-ball, which tensorizes the convolution into 1D passes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GXM, _GWM = np.polynomial.legendre.leggauss(400)
_GX48, _GW48 = np.polynomial.legendre.leggauss(48)


def _bump(x):
    """exp(1/(x^2-1)) on (-1,1), zero outside; vectorized, overflow-free."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    inside = np.abs(x) < 1.0 - 1e-14
    out[inside] = np.exp(1.0 / (x[inside] ** 2 - 1.0))
    return out

# normalization of the 1D bump and its 2D radial analogue
_C1D = 1.0 / float(np.sum(_GWM * _bump(_GXM)))
_R = 0.5 * (_GXM + 1.0)
_C2D = 1.0 / float(2.0 * np.pi * np.sum(0.5 * _GWM * _R * _bump(_R)))

SCALAR = "SCALAR"
VECTOR = "VECTOR"


@dataclass(frozen=True)
class MollifierFamily:
    """Mass-one smooth kernel supported in the epsilon-ball.

    kind SCALAR: rho_eps on R.  kind VECTOR: eta_eps on R^dim, either
    the radial bump or (flavor "product") a product of 1D bumps scaled
    into the inscribed cube, which keeps supp eta_eps inside B_eps.
    """

    epsilon: float
    kind: str
    dim: int = 1
    flavor: str = "radial"

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0,1), got {self.epsilon}")
        if self.kind not in (SCALAR, VECTOR):
            raise ValueError(f"unknown kind {self.kind}")

    def density(self, x):
        if self.kind == SCALAR:
            t = np.asarray(x, dtype=float)
            return _C1D / self.epsilon * _bump(t / self.epsilon)
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if self.flavor == "radial":
            r = np.linalg.norm(pts, axis=1)
            return _C2D / self.epsilon**2 * _bump(r / self.epsilon)
        a = self.epsilon / np.sqrt(self.dim)
        out = np.ones(len(pts))
        for i in range(self.dim):
            out *= _C1D / a * _bump(pts[:, i] / a)
        return out

    def mass(self):
        """Kernel mass by dense Gauss quadrature (should be 1)."""
        e = self.epsilon
        if self.kind == SCALAR:
            return float(e * np.sum(_GWM * self.density(e * _GXM)))
        if self.flavor == "radial":
            r = 0.5 * e * (_GXM + 1.0)
            ring = _C2D / e**2 * _bump(r / e)
            return float(2 * np.pi * np.sum(0.5 * e * _GWM * r * ring))
        a = e / np.sqrt(self.dim)
        m1 = float(a * np.sum(_GWM * _C1D / a * _bump(_GXM)))
        return m1**self.dim


def make_mollifiers(epsilon, dim=2, vector_flavor="radial"):
    """The scalar/vector kernel pair at a common support radius."""
    return (
        MollifierFamily(epsilon=epsilon, kind=SCALAR),
        MollifierFamily(epsilon=epsilon, kind=VECTOR, dim=dim, flavor=vector_flavor),
    )


@dataclass(frozen=True)
class TruncatedF:
    """f clamped below at the sub-solution: evaluates f(max(floor, s))."""

    base: object  # scalar NonlinearitySpec
    subsolution: object  # DiscreteField

    def __post_init__(self):
        vals = self.subsolution.nodal_values
        interior = self.subsolution.mesh.interior_vertices
        if len(interior) and vals[interior].min() <= 0:
            raise ValueError("sub-solution must be positive at interior nodes")

    def floor_at_elements(self, rule=None):
        from .quadrature import TRI_QUAD_DEG5

        rule = rule or TRI_QUAD_DEG5
        bary, _ = rule
        nodal = self.subsolution.nodal_values[self.subsolution.mesh.triangles]
        return nodal @ bary.T

    def evaluate(self, floor_vals, s_vals):
        """f(max(floor, s)) for matching arrays."""
        m = np.maximum(np.asarray(floor_vals, dtype=float), np.asarray(s_vals, dtype=float))
        return self.base(m.ravel()).reshape(m.shape)


def truncate_f(fspec, subsolution):
    """Clamp the scalar reaction below the sub-solution floor."""
    return TruncatedF(base=fspec, subsolution=subsolution)


def _segment_matrix(lo, hi, global_breaks, extra=None):
    """Per-point sorted segment endpoints (n, m+2) clipped to [lo, hi]."""
    n = len(lo)
    cols = [lo[:, None]]
    if len(global_breaks):
        cols.append(np.clip(np.broadcast_to(global_breaks, (n, len(global_breaks))), lo[:, None], hi[:, None]))
    if extra is not None:
        cols.append(np.clip(extra, lo, hi)[:, None])
    cols.append(hi[:, None])
    return np.sort(np.concatenate(cols, axis=1), axis=1)


def _mollify_1d(fn, breaks, s, eps, extra_breaks=None, nodes=(_GX48, _GW48)):
    """Convolution (fn * rho_eps)(s), Gauss segments split at breakpoints.

    fn : vectorized callable on flat arrays
    breaks : global breakpoints of fn (jumps, piece seams)
    extra_breaks : optional per-point kink locations, shape like s
    """
    gx, gw = nodes
    s = np.asarray(s, dtype=float)
    shape = s.shape
    s = s.ravel()
    extra = None if extra_breaks is None else np.asarray(extra_breaks, dtype=float).ravel()
    lo, hi = s - eps, s + eps
    B = _segment_matrix(lo, hi, np.asarray(breaks, dtype=float), extra)
    kern = MollifierFamily(epsilon=eps, kind=SCALAR)
    out = np.zeros(len(s))
    for k in range(B.shape[1] - 1):
        a, b = B[:, k], B[:, k + 1]
        width = b - a
        active = width > 1e-300
        if not active.any():
            continue
        mid = 0.5 * (a + b)
        half = 0.5 * width
        t = mid[:, None] + half[:, None] * gx[None, :]  # (n, q)
        vals = fn(t.ravel()).reshape(t.shape)
        rho = kern.density(s[:, None] - t)
        out += half * np.einsum("q,nq,nq->n", gw, vals, rho)
    return out.reshape(shape)


@dataclass(frozen=True)
class RegularizedReactions:
    """Smoothed reaction evaluators at a fixed support radius."""

    truncated: TruncatedF
    gspec: object  # vector NonlinearitySpec
    scalar_kernel: MollifierFamily
    vector_kernel: MollifierFamily

    @property
    def epsilon(self):
        return self.scalar_kernel.epsilon

    def f_eps(self, floor_vals, s_vals):
        """Smoothed truncated scalar reaction at matching value arrays.

        The integrand f(max(floor, t)) has a per-point kink at the
        truncation floor, so the floor joins the segment breakpoints.
        """
        eps = self.scalar_kernel.epsilon
        floor = np.asarray(floor_vals, dtype=float)
        s = np.asarray(s_vals, dtype=float)
        base = self.truncated.base
        breaks = [pc.lo for pc in base.pieces if np.isfinite(pc.lo)]
        breaks += list(base.discontinuities)
        gx, gw = _GX48, _GW48
        s_flat = s.ravel()
        floor_flat = np.broadcast_to(floor, s.shape).ravel()
        lo, hi = s_flat - eps, s_flat + eps
        B = _segment_matrix(lo, hi, np.asarray(sorted(set(breaks)), dtype=float), floor_flat)
        out = np.zeros(len(s_flat))
        for k in range(B.shape[1] - 1):
            a, b = B[:, k], B[:, k + 1]
            width = b - a
            if not (width > 1e-300).any():
                continue
            mid, half = 0.5 * (a + b), 0.5 * width
            t = mid[:, None] + half[:, None] * gx[None, :]
            clamped_t = np.maximum(t, floor_flat[:, None])
            vals = base(clamped_t.ravel()).reshape(t.shape)
            rho = self.scalar_kernel.density(s_flat[:, None] - t)
            out += half * np.einsum("q,nq,nq->n", gw, vals, rho)
        return out.reshape(s.shape)

    def g_eps(self, xi):
        """Smoothed gradient reaction at points xi (n, dim)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        g = self.gspec
        if g.factors is not None and self.vector_kernel.flavor == "product":
            a = self.vector_kernel.epsilon / np.sqrt(g.arity)
            out = np.ones(len(xi))
            for i, fac in enumerate(g.factors):
                breaks = [pc.lo for pc in fac.pieces if np.isfinite(pc.lo)]
                breaks += list(fac.discontinuities)
                out *= _mollify_1d(
                    fac, np.asarray(sorted(set(breaks))), xi[:, i], a
                )
            return out
        return self._g_eps_radial(xi)

    def _g_eps_radial(self, xi):
        eps = self.vector_kernel.epsilon
        g = self.gspec
        if g.arity != 2:
            raise NotImplementedError("radial convolution implemented for N=2")
        gx, gw = _GX48, _GW48
        n = len(xi)
        segs = []
        for i in range(2):
            axis_breaks = np.asarray(g.discontinuities[i] if g.discontinuities else (), dtype=float)
            box_breaks = [pc.lo[i] for pc in g.pieces if np.isfinite(pc.lo[i])]
            breaks = np.asarray(sorted(set(axis_breaks.tolist() + box_breaks)))
            lo, hi = xi[:, i] - eps, xi[:, i] + eps
            segs.append(_segment_matrix(lo, hi, breaks))
        out = np.zeros(n)
        Bx, By = segs
        for kx in range(Bx.shape[1] - 1):
            ax, bx = Bx[:, kx], Bx[:, kx + 1]
            wx = bx - ax
            if not (wx > 1e-300).any():
                continue
            mx, hx = 0.5 * (ax + bx), 0.5 * wx
            tx = mx[:, None] + hx[:, None] * gx[None, :]  # (n, q)
            for ky in range(By.shape[1] - 1):
                ay, by = By[:, ky], By[:, ky + 1]
                wy = by - ay
                if not (wy > 1e-300).any():
                    continue
                my, hy = 0.5 * (ay + by), 0.5 * wy
                ty = my[:, None] + hy[:, None] * gx[None, :]
                pts = np.empty((n, len(gx), len(gx), 2))
                pts[..., 0] = tx[:, :, None]
                pts[..., 1] = ty[:, None, :]
                flat = pts.reshape(-1, 2)
                gvals = g(flat).reshape(n, len(gx), len(gx))
                diff = np.empty_like(pts)
                diff[..., 0] = xi[:, 0, None, None] - pts[..., 0]
                diff[..., 1] = xi[:, 1, None, None] - pts[..., 1]
                eta = self.vector_kernel.density(diff.reshape(-1, 2)).reshape(
                    n, len(gx), len(gx)
                )
                out += hx * hy * np.einsum("a,b,nab,nab->n", gw, gw, gvals, eta)
        return out


def eval_f_eps(tf, mf, x, s):
    """Spec-shaped scalar entry point: smoothed f-tilde at one (x, s).

    x may be a 2D point (located in the sub-solution's mesh) or the
    sub-solution value at x, passed directly as a float.
    """
    if np.ndim(x) == 1 and len(np.atleast_1d(x)) == 2:
        from .mesh import locate_points
        from .quadrature import _p1_values_in_elements

        elems = locate_points(tf.subsolution.mesh, np.atleast_2d(x))
        floor = _p1_values_in_elements(tf.subsolution, np.atleast_2d(x), elems)[0]
    else:
        floor = float(x)
    rx = RegularizedReactions(
        truncated=tf,
        gspec=None,
        scalar_kernel=mf,
        vector_kernel=MollifierFamily(epsilon=mf.epsilon, kind=VECTOR, dim=2),
    )
    return float(rx.f_eps(np.array([floor]), np.array([float(s)]))[0])


def eval_g_eps(gspec, mf, xi):
    """Spec-shaped vector entry point: smoothed g at one point."""
    rx = RegularizedReactions(
        truncated=None,
        gspec=gspec,
        scalar_kernel=MollifierFamily(epsilon=mf.epsilon, kind=SCALAR),
        vector_kernel=mf,
    )
    return float(rx.g_eps(np.atleast_2d(xi))[0])


@dataclass(frozen=True)
class GrowthBoundReport:
    """Sampled verification of the smoothed-reaction growth bounds."""

    violation_f: float  # max of f_eps - ((Lf+sigma)|s|^(p-1) + C d^-gamma)
    violation_g: float  # max of g_eps - ((Lg+sigma)|xi|^(p-1) + C')
    c_f: float  # the d^-gamma coefficient
    c_g: float  # the additive gradient-bound constant
    floor_slope: float  # l with usub >= l * d
    constants: dict


def _shift_constant(L, sigma, p, t_max=1e8):
    """sup_t (L + sigma/2)(t+1)^(p-1) - (L + sigma) t^(p-1) over t >= 0."""
    t = np.concatenate([[0.0], np.geomspace(1e-10, t_max, 4000)])
    vals = (L + sigma / 2.0) * (t + 1.0) ** (p - 1.0) - (L + sigma) * t ** (p - 1.0)
    return float(max(vals.max(), 0.0))


def growth_bounds_check(reactions, report, p, gamma, n_samples=10_000, seed=0,
                        scale_c_f=1.0, scale_c_g=1.0):
    """Verify the distance-weighted growth bounds of the smoothed reactions.

    Constants follow the splitting recipe: the raw scalar reaction is
    bounded by c s^-gamma + (Lf + sigma/2) s^(p-1); truncation converts
    the singular part to a sub-solution power, the sub-solution is
    bounded below by a multiple of the distance, and mollification
    costs one more additive constant.  The returned violations are the
    sampled maxima of (smoothed reaction - bound); they stay <= 0 (up
    to roundoff) when the constants are honest.  ``scale_c_f/g`` exist
    so tests can undersize a constant and watch the detector fire.
    """
    from .fields import DistanceField
    from .plap import field_quad_values

    tf = reactions.truncated
    fspec = tf.base
    gspec = reactions.gspec
    mesh = tf.subsolution.mesh
    Lf, Lg, sigma = report.Lf, report.Lg, report.sigma
    rng = np.random.default_rng(seed)

    # c with f(s) <= c s^-gamma + (Lf + sigma/2) s^(p-1), sampled sup inflated 2%
    s_grid = np.geomspace(1e-10, 1e8, 4000)
    s_grid = np.unique(np.concatenate(
        [s_grid] + [[max(j - 1e-9, 1e-12), j + 1e-9] for j in fspec.discontinuities]
    ))
    c_sigma = float(
        max(0.0, np.max(s_grid**gamma * (fspec(s_grid) - (Lf + sigma / 2) * s_grid ** (p - 1.0))))
    ) * 1.02
    ubar = tf.subsolution
    sup_ubar = ubar.sup_norm()
    c_trunc = c_sigma + (Lf + sigma / 2) * sup_ubar ** (p - 1.0 + gamma)
    cp_f = _shift_constant(Lf, sigma, p)

    dist = DistanceField(mesh)
    interior = mesh.interior_vertices
    slope = float(
        np.min(ubar.nodal_values[interior] / dist.nodal_values[interior])
    )
    poly = mesh.polygon
    diam = float(
        np.max(np.linalg.norm(poly[:, None, :] - poly[None, :, :], axis=2))
    )
    c_f = (c_trunc * slope ** (-gamma) + cp_f * diam**gamma) * scale_c_f

    # sample (x, s): quadrature points carry the truncation floor
    floor_q = tf.floor_at_elements()
    from .quadrature import element_quad_points

    pts, _, _ = element_quad_points(mesh)
    flat_floor = floor_q.ravel()
    idx = rng.integers(0, len(flat_floor), size=n_samples)
    s_samp = rng.uniform(-3.0, 3.0, size=n_samples) * (1.0 + sup_ubar)
    f_eps_vals = reactions.f_eps(flat_floor[idx], s_samp)
    d_vals = dist(pts[idx])
    bound_f = (Lf + sigma) * np.abs(s_samp) ** (p - 1.0) + c_f * d_vals ** (-gamma)
    violation_f = float(np.max(f_eps_vals - bound_f))

    # gradient reaction: c' with g <= c' + (Lg + sigma/2)|xi|^(p-1)
    dirs = rng.normal(size=(64, gspec.arity))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.concatenate([[0.0], np.geomspace(1e-6, 1e4, 400)])
    xi_grid = (dirs[None, :, :] * radii[:, None, None]).reshape(-1, gspec.arity)
    for i, axis_jumps in enumerate(gspec.discontinuities or ()):
        for c in axis_jumps:
            extra = xi_grid[: 2 * len(dirs)].copy()
            extra[:, i] = np.repeat([c - 1e-9, c + 1e-9], len(dirs))
            xi_grid = np.vstack([xi_grid, extra])
    g_vals = gspec(xi_grid)
    c_sigma_g = float(
        max(0.0, np.max(g_vals - (Lg + sigma / 2) * np.linalg.norm(xi_grid, axis=1) ** (p - 1.0)))
    ) * 1.02
    cp_g = _shift_constant(Lg, sigma, p)
    c_g = (c_sigma_g + cp_g) * scale_c_g

    xi_samp = rng.normal(size=(n_samples, gspec.arity)) * 3.0
    g_eps_vals = reactions.g_eps(xi_samp)
    bound_g = (Lg + sigma) * np.linalg.norm(xi_samp, axis=1) ** (p - 1.0) + c_g
    violation_g = float(np.max(g_eps_vals - bound_g))

    return GrowthBoundReport(
        violation_f=violation_f,
        violation_g=violation_g,
        c_f=float(c_f),
        c_g=float(c_g),
        floor_slope=slope,
        constants={
            "c_sigma": c_sigma,
            "c_trunc": c_trunc,
            "shift_f": cp_f,
            "c_sigma_g": c_sigma_g,
            "shift_g": cp_g,
            "sigma": sigma,
            "Lf": Lf,
            "Lg": Lg,
            "diam": diam,
        },
    )


def make_reactions(fspec, gspec, subsolution, epsilon):
    """Bundle truncation + kernels for one continuation step."""
    tf = truncate_f(fspec, subsolution)
    flavor = "product" if gspec.factors is not None else "radial"
    sk, vk = make_mollifiers(epsilon, dim=gspec.arity, vector_flavor=flavor)
    return RegularizedReactions(
        truncated=tf, gspec=gspec, scalar_kernel=sk, vector_kernel=vk
    )
