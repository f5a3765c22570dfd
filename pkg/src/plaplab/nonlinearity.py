"""Reaction terms, their envelopes, and machine checks of the standing
hypotheses.

A reaction is piecewise closed-form: scalar ones (argument s > 0) live
on half-open intervals, gradient ones (argument xi in R^N) on half-open
boxes.  Discontinuity sets are declared, not detected: jump locations
are structural information the hypotheses quantify over, and detecting
them from black-box callables is ill-posed.

Essential inf/sup envelopes over shrinking balls are estimated by
deterministic midpoint sampling inside each piece; declared
discontinuity points never coincide with samples, matching the
"essential" in the definitions.  Limit statements (liminf at zero,
limsup at infinity) are reported as schedule-tail values with a
monotonicity flag: a finite machine cannot certify a limit, only
evidence for one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .expressions import Expression

DEFAULT_RADII = tuple(1e-2 * 2.0 ** (-k) for k in range(8))
_TINY_RADII = tuple(1e-7 * 2.0 ** (-k) for k in range(8))
_ZERO_TOL = 1e-12
SAMPLES_PER_DIM = 64


class DomainError(ValueError):
    """Point outside the reaction's domain of definition."""


@dataclass(frozen=True)
class ScalarPiece:
    lo: float
    hi: float
    fn: object  # vectorized callable s -> values

    def __contains__(self, s):
        return self.lo <= s < self.hi


@dataclass(frozen=True)
class BoxPiece:
    lo: tuple
    hi: tuple
    fn: object  # vectorized callable (n, N) -> (n,)

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((pts >= lo) & (pts < hi), axis=1)


def _scalar_fn(expr):
    if callable(expr) and not isinstance(expr, Expression):
        return expr
    e = expr if isinstance(expr, Expression) else Expression(str(expr), ["s"])
    return lambda s: np.broadcast_to(np.asarray(e(s=s), dtype=float), np.shape(s)).copy()


def _vector_fn(expr, arity):
    if callable(expr) and not isinstance(expr, Expression):
        return expr
    names = [f"xi{i+1}" for i in range(arity)]
    e = expr if isinstance(expr, Expression) else Expression(str(expr), names)

    def fn(pts):
        pts = np.atleast_2d(pts)
        env = {n: pts[:, i] for i, n in enumerate(names)}
        return np.broadcast_to(np.asarray(e(**env), dtype=float), (len(pts),)).copy()

    return fn


@dataclass(frozen=True)
class NonlinearitySpec:
    """Piecewise-defined nonnegative reaction with declared jumps.

    arity 1: scalar reaction f on (0, inf) (or all of R for product
    factors of gradient reactions); arity N >= 2: gradient reaction g
    on R^N.  ``discontinuities`` holds jump locations: a flat tuple in
    the scalar case, one tuple per coordinate axis otherwise.
    """

    arity: int
    pieces: tuple
    discontinuities: tuple = ()
    gamma: float | None = None
    factors: tuple | None = None  # product-form fast path, vector case only
    name: str = ""

    def __post_init__(self):
        if self.gamma is not None and not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must be in (0,1), got {self.gamma}")

    # -- constructors -------------------------------------------------
    @classmethod
    def scalar(cls, pieces, jumps=(), gamma=None, name="f", domain_lo=0.0):
        """pieces: list of (lo, hi, expr); half-open [lo, hi) intervals."""
        ps = []
        prev_hi = None
        for lo, hi, expr in sorted(pieces, key=lambda t: t[0]):
            lo, hi = float(lo), float(hi)
            if prev_hi is not None and abs(lo - prev_hi) > 1e-14 * max(1, abs(lo)):
                raise ValueError(f"pieces leave a gap at [{prev_hi}, {lo})")
            ps.append(ScalarPiece(lo, hi, _scalar_fn(expr)))
            prev_hi = hi
        if ps and not np.isinf(ps[-1].hi):
            raise ValueError("scalar pieces must extend to +inf")
        if ps and ps[0].lo > domain_lo + 1e-300 and not np.isinf(domain_lo):
            raise ValueError(f"scalar pieces must start at {domain_lo}")
        return cls(
            arity=1,
            pieces=tuple(ps),
            discontinuities=tuple(sorted(float(j) for j in jumps)),
            gamma=gamma,
            name=name,
        )

    @classmethod
    def from_expression(cls, expr, gamma=None, name="f"):
        """Single-expression continuous scalar reaction on (0, inf)."""
        return cls.scalar([(0.0, np.inf, expr)], gamma=gamma, name=name)

    @classmethod
    def vector(cls, arity, pieces, jumps_per_axis=None, name="g"):
        """pieces: list of (lo_tuple, hi_tuple, expr); half-open boxes."""
        ps = tuple(
            BoxPiece(tuple(map(float, lo)), tuple(map(float, hi)), _vector_fn(e, arity))
            for lo, hi, e in pieces
        )
        jp = jumps_per_axis or [()] * arity
        if len(jp) != arity:
            raise ValueError("jumps_per_axis must have one entry per axis")
        return cls(
            arity=arity,
            pieces=ps,
            discontinuities=tuple(tuple(sorted(map(float, j))) for j in jp),
            name=name,
        )

    @classmethod
    def vector_expression(cls, arity, expr, name="g"):
        lo = (-np.inf,) * arity
        hi = (np.inf,) * arity
        return cls.vector(arity, [(lo, hi, expr)], name=name)

    @classmethod
    def product(cls, factors, name="g"):
        """Tensor product g(xi) = prod_i g_i(xi_i) of scalar factors.

        Each factor is a scalar NonlinearitySpec over all of R; the
        product keeps the factors for tensorized mollification.
        """
        factors = tuple(factors)
        arity = len(factors)
        if arity < 2:
            raise ValueError("product form needs at least two factors")

        def make_piece(combo):
            lo = tuple(pc.lo for pc in combo)
            hi = tuple(pc.hi for pc in combo)
            fns = tuple(pc.fn for pc in combo)

            def fn(pts, fns=fns):
                pts = np.atleast_2d(pts)
                out = np.ones(len(pts))
                for i, f in enumerate(fns):
                    out *= f(pts[:, i])
                return out

            return BoxPiece(lo, hi, fn)

        combos = [()]
        for fac in factors:
            combos = [c + (pc,) for c in combos for pc in fac.pieces]
        pieces = tuple(make_piece(c) for c in combos)
        jumps = tuple(fac.discontinuities for fac in factors)
        return cls(
            arity=arity,
            pieces=pieces,
            discontinuities=jumps,
            factors=factors,
            name=name,
        )

    @classmethod
    def constant(cls, value, arity=1, name=""):
        v = float(value)
        if arity == 1:
            return cls.scalar([(0.0, np.inf, lambda s: np.full(np.shape(s), v))],
                              name=name or "const")
        lo = (-np.inf,) * arity
        hi = (np.inf,) * arity
        return cls.vector(arity, [(lo, hi, lambda p: np.full(len(np.atleast_2d(p)), v))],
                          name=name or "const")

    # -- evaluation ---------------------------------------------------
    def __call__(self, x):
        if self.arity == 1:
            scalar_in = np.ndim(x) == 0
            s = np.atleast_1d(np.asarray(x, dtype=float))
            out = np.full(s.shape, np.nan)
            covered = np.zeros(s.shape, dtype=bool)
            for pc in self.pieces:
                m = (s >= pc.lo) & (s < pc.hi)
                if m.any():
                    out[m] = pc.fn(s[m])
                covered |= m
            if not covered.all():
                bad = s[~covered]
                raise DomainError(f"points outside domain, e.g. {bad.flat[0]}")
            return float(out[0]) if scalar_in else out
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(len(pts), np.nan)
        covered = np.zeros(len(pts), dtype=bool)
        for pc in self.pieces:
            m = pc.contains(pts) & ~covered
            if m.any():
                out[m] = pc.fn(pts[m])
            covered |= m
        if not covered.all():
            raise DomainError(f"points outside domain, e.g. {pts[~covered][0]}")
        return out if np.ndim(x) > 1 else out

    @property
    def domain_lo(self):
        if self.arity != 1:
            raise TypeError("domain_lo only defined for scalar reactions")
        return self.pieces[0].lo if self.pieces else 0.0

    def all_jump_points(self):
        if self.arity == 1:
            return self.discontinuities
        return tuple(p for axis in self.discontinuities for p in axis)

    def validate_sampled(self, rng=None, n=256):
        """Sampled nonnegativity per piece; raises on violation."""
        rng = rng or np.random.default_rng(0)
        if self.arity == 1:
            for pc in self.pieces:
                lo = pc.lo if np.isfinite(pc.lo) else -1e3
                lo = max(lo, 1e-9) if self.domain_lo >= 0 else lo
                hi = pc.hi if np.isfinite(pc.hi) else lo + 1e3
                if hi <= lo:
                    continue
                s = lo + (hi - lo) * (np.arange(n) + 0.5) / n
                v = pc.fn(s)
                if np.nanmin(v) < -1e-12:
                    raise ValueError(
                        f"{self.name}: negative value {np.nanmin(v)} in piece [{pc.lo},{pc.hi})"
                    )
        else:
            for pc in self.pieces:
                lo = np.array([v if np.isfinite(v) else -1e3 for v in pc.lo])
                hi = np.array([v if np.isfinite(v) else 1e3 for v in pc.hi])
                pts = lo + (hi - lo) * rng.random((n, self.arity))
                v = pc.fn(pts)
                if np.nanmin(v) < -1e-12:
                    raise ValueError(
                        f"{self.name}: negative value {np.nanmin(v)} in box piece"
                    )
        return True


@dataclass(frozen=True)
class EnvelopePair:
    """Essential inf/sup over the ball of radius ``radius_used``."""

    lower: float
    upper: float
    radius_used: float

    def __post_init__(self):
        if self.lower > self.upper + 1e-15:
            raise ValueError("envelope lower exceeds upper")


def _scalar_ball_values(spec, s, delta):
    vals = []
    excl = np.array(spec.discontinuities) if spec.discontinuities else None
    for pc in spec.pieces:
        lo = max(pc.lo, s - delta)
        hi = min(pc.hi, s + delta)
        if hi <= lo:
            continue
        pts = lo + (hi - lo) * (np.arange(SAMPLES_PER_DIM) + 0.5) / SAMPLES_PER_DIM
        if excl is not None and len(excl):
            keep = np.min(np.abs(pts[:, None] - excl[None, :]), axis=1) > 1e-14 * max(
                1.0, abs(s)
            )
            pts = pts[keep]
        if len(pts):
            vals.append(pc.fn(pts))
    if not vals:
        raise DomainError(f"ball of radius {delta} around {s} misses the domain")
    return np.concatenate(vals)


def _vector_ball_values(spec, xi, delta):
    xi = np.asarray(xi, dtype=float)
    n = SAMPLES_PER_DIM
    axes = [xi[i] - delta + 2 * delta * (np.arange(n) + 0.5) / n for i in range(spec.arity)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    pts = pts[np.linalg.norm(pts - xi, axis=1) < delta]
    for i, axis_jumps in enumerate(spec.discontinuities or ()):
        if axis_jumps:
            dists = np.min(
                np.abs(pts[:, i : i + 1] - np.array(axis_jumps)[None, :]), axis=1
            )
            pts = pts[dists > 1e-14 * max(1.0, float(np.abs(xi[i])))]
    vals = np.full(len(pts), np.nan)
    covered = np.zeros(len(pts), dtype=bool)
    for pc in spec.pieces:
        m = pc.contains(pts) & ~covered
        if m.any():
            vals[m] = pc.fn(pts[m])
        covered |= m
    vals = vals[covered]
    if not len(vals):
        raise DomainError(f"ball of radius {delta} around {xi} misses the domain")
    return vals


def envelopes_trace(spec, point, radii=DEFAULT_RADII):
    """Per-radius (delta, ess-inf, ess-sup) estimates, shrinking order."""
    radii = tuple(radii)
    if any(r2 >= r1 for r1, r2 in zip(radii, radii[1:])) or radii[-1] <= 0:
        raise ValueError("radii must be strictly decreasing and positive")
    out = []
    for delta in radii:
        if spec.arity == 1:
            s = float(point)
            if s < spec.domain_lo or (s == 0.0 and spec.domain_lo == 0.0):
                raise DomainError(f"{s} outside scalar domain")
            v = _scalar_ball_values(spec, s, delta)
        else:
            v = _vector_ball_values(spec, point, delta)
        out.append((delta, float(np.min(v)), float(np.max(v))))
    return out


def envelopes_at(spec, point, radii=DEFAULT_RADII):
    """Essential inf/sup envelopes at the final (smallest) radius."""
    trace = envelopes_trace(spec, point, radii)
    delta, lo, hi = trace[-1]
    return EnvelopePair(lower=lo, upper=hi, radius_used=delta)


def scalar_ball_envelopes(spec, s_array, delta, floor=None):
    """Vectorized ball envelopes (lo, hi) at radius delta for many points.

    Uniform midpoint sampling of each window plus its endpoints and
    one-sided probes next to every declared jump inside it.  With
    ``floor`` given (truncation at a sub-solution), samples are clamped
    from below, which reproduces the value set of f(max(floor, .))
    exactly; piecewise-monotone reactions then get exact envelopes.
    """
    s = np.asarray(s_array, dtype=float).ravel()
    offs = -delta + 2 * delta * (np.arange(SAMPLES_PER_DIM) + 0.5) / SAMPLES_PER_DIM
    shift = max(1e-12, 1e-9 * delta)
    cols = [
        s[:, None] + offs[None, :],
        (s - delta + shift)[:, None],
        (s + delta - shift)[:, None],
    ]
    for b in spec.discontinuities:
        for side in (-shift, shift):
            cols.append(np.clip(b + side, s - delta + shift, s + delta - shift)[:, None])
    pts = np.concatenate(cols, axis=1)
    if floor is not None:
        pts = np.maximum(pts, np.asarray(floor, dtype=float).ravel()[:, None])
    lo_dom = spec.domain_lo
    valid = pts > lo_dom
    vals = np.full(pts.shape, np.nan)
    if valid.any():
        vals[valid] = spec(pts[valid])
    return np.nanmin(vals, axis=1), np.nanmax(vals, axis=1)


def vector_ball_envelopes(spec, xi_array, delta, grid=16):
    """Vectorized ball envelopes at radius delta for many gradient points.

    Midpoint-grid sampling of each ball plus probes straddling every
    declared jump hyperplane crossing it.
    """
    xi = np.atleast_2d(np.asarray(xi_array, dtype=float))
    n, dim = xi.shape
    axes1 = -delta + 2 * delta * (np.arange(grid) + 0.5) / grid
    mesh_off = np.meshgrid(*([axes1] * dim), indexing="ij")
    offs = np.column_stack([m.ravel() for m in mesh_off])
    offs = offs[np.linalg.norm(offs, axis=1) < delta]
    pts = xi[:, None, :] + offs[None, :, :]  # (n, m, dim)
    extra = []
    shift = max(1e-12, 1e-9 * delta)
    for i, axis_jumps in enumerate(spec.discontinuities or ()):
        for c in axis_jumps:
            near = np.abs(xi[:, i] - c) < delta
            if not near.any():
                continue
            for side in (-shift, shift):
                probe = xi.copy()
                probe[near, i] = c + side
                extra.append(probe[:, None, :])
    # straddle jump-plane corners falling inside the ball (exact for
    # piecewise-constant reactions)
    if dim == 2 and spec.discontinuities and len(spec.discontinuities) == 2:
        for c1 in spec.discontinuities[0]:
            for c2 in spec.discontinuities[1]:
                corner = np.array([c1, c2])
                near = np.linalg.norm(xi - corner, axis=1) < delta
                if not near.any():
                    continue
                for s1 in (-shift, shift):
                    for s2 in (-shift, shift):
                        probe = xi.copy()
                        probe[near] = corner + np.array([s1, s2])
                        extra.append(probe[:, None, :])
    if extra:
        pts = np.concatenate([pts] + extra, axis=1)
    flat = pts.reshape(-1, dim)
    vals = np.full(len(flat), np.nan)
    covered = np.zeros(len(flat), dtype=bool)
    for pc in spec.pieces:
        m = pc.contains(flat) & ~covered
        if m.any():
            vals[m] = pc.fn(flat[m])
        covered |= m
    vals = np.where(covered, vals, np.nan).reshape(pts.shape[:2])
    return np.nanmin(vals, axis=1), np.nanmax(vals, axis=1)


# -- hypothesis checks ------------------------------------------------

def _tail_log_slope(values):
    """Least-squares slope of log2(values) over the last 8 entries."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v) & (v > 0)]
    if len(v) < 4:
        return 0.0
    tail = v[-8:]
    k = np.arange(len(tail), dtype=float)
    logs = np.log2(tail)
    k -= k.mean()
    return float((k @ (logs - logs.mean())) / (k @ k))


def check_hypotheses_f(spec, sample_grid=None):
    """Four booleans: local boundedness, singularity control, null jump
    set, and zero-envelope consistency (lower envelope 0 forces f = 0)."""
    if spec.arity != 1:
        raise TypeError("scalar hypothesis check on a vector reaction")
    if sample_grid is None:
        sample_grid = np.geomspace(1e-6, 100.0, 400)
        near = [
            d + off
            for d in spec.discontinuities
            for off in (-1e-3, -1e-6, 1e-6, 1e-3)
            if d + off > 0
        ]
        sample_grid = np.unique(np.concatenate([sample_grid, np.array(near)]))
    sample_grid = np.asarray(sample_grid, dtype=float)
    sample_grid = sample_grid[sample_grid > 0]

    vals = spec(sample_grid)
    flag_bounded = bool(np.all(np.isfinite(vals)))

    gamma = spec.gamma if spec.gamma is not None else 0.0
    sched = 2.0 ** (-np.arange(0, 21, dtype=float))
    sched = sched[sched > spec.domain_lo]
    sv = sched**gamma * spec(sched)  # index k corresponds to s = 2^-k -> 0
    slope = _tail_log_slope(sv)
    flag_singularity = bool(np.all(np.isfinite(sv)) and slope <= 0.02)

    # declared jump sets are finite point lists, hence Lebesgue-null
    flag_null = all(np.isfinite(d) for d in spec.discontinuities)

    flag_zeros = True
    probes = list(spec.discontinuities) + list(sample_grid[:: max(1, len(sample_grid) // 40)])
    for s in probes:
        if s <= spec.domain_lo:
            continue
        radii = tuple(min(1e-3, s / 4) * 2.0 ** (-k) for k in range(8))
        try:
            pair = envelopes_at(spec, s, radii)
        except DomainError:
            continue
        if pair.lower <= _ZERO_TOL and abs(float(spec(np.array([s]))[0])) > _ZERO_TOL:
            flag_zeros = False
            break
    return (flag_bounded, flag_singularity, flag_null, flag_zeros)


def check_hypotheses_g(spec, box_halfwidth=10.0, seed=0):
    """Three booleans: local boundedness, null axis projections of the
    jump set, and zero-envelope consistency."""
    if spec.arity < 2:
        raise TypeError("vector hypothesis check on a scalar reaction")
    from .measure import IntervalCover, cover_length

    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box_halfwidth, box_halfwidth, size=(2048, spec.arity))
    try:
        vals = spec(pts)
        flag_bounded = bool(np.all(np.isfinite(vals)))
    except DomainError:
        flag_bounded = False

    flag_proj = True
    eps = 1e-9
    for axis_jumps in spec.discontinuities:
        cover = IntervalCover([(c - eps, c + eps) for c in axis_jumps])
        if cover_length(cover) >= 1e-6:
            flag_proj = False

    flag_zeros = True
    probes = []
    for i, axis_jumps in enumerate(spec.discontinuities):
        for c in axis_jumps:
            for _ in range(4):
                q = rng.uniform(-2, 2, size=spec.arity)
                q[i] = c
                probes.append(q)
    probes.extend(rng.uniform(-2, 2, size=(16, spec.arity)))
    for xi in probes:
        radii = tuple(1e-3 * 2.0 ** (-k) for k in range(8))
        try:
            pair = envelopes_at(spec, xi, radii)
            val = float(spec(np.atleast_2d(xi))[0])
        except DomainError:
            continue
        if pair.lower <= _ZERO_TOL and abs(val) > _ZERO_TOL:
            flag_zeros = False
            break
    return (flag_bounded, flag_proj, flag_zeros)


# -- growth/smallness conditions ---------------------------------------

C0_F_BRANCH = "F_BRANCH"
C0_G_BRANCH = "G_BRANCH"
C0_FAIL = "FAIL"


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the behavior-at-zero and growth-at-infinity checks."""

    c0_branch: str
    Lf: float
    Lg: float
    sigma: float
    coercivity_margin: float
    theta: float = 0.0
    growth_ok: bool = False
    liminf_f_at_zero: float = np.inf
    liminf_monotone: bool = True
    c0_indeterminate: bool = False
    lambda1: float = np.nan
    p: float = np.nan
    hf_flags: tuple | None = None
    hg_flags: tuple | None = None

    def with_hypothesis_flags(self, hf, hg):
        return replace(self, hf_flags=tuple(hf), hg_flags=tuple(hg))


def coercivity_margin(Lf, Lg, lambda1, p, sigma):
    return 1.0 - (Lf + sigma) / lambda1 - (Lg + sigma) / lambda1 ** (1.0 / p)


def _bisect_sigma(Lf, Lg, lambda1, p):
    """Half the largest sigma keeping the margin positive (0 if none)."""
    if coercivity_margin(Lf, Lg, lambda1, p, 0.0) <= 0:
        return 0.0
    hi = 1.0
    while coercivity_margin(Lf, Lg, lambda1, p, hi) > 0 and hi < 1e12:
        hi *= 2.0
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if coercivity_margin(Lf, Lg, lambda1, p, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * lo


def check_conditions(fspec, gspec, lambda1, p, sigma=None):
    """Classify the behavior at zero and estimate the growth limits.

    Branch F: the sampled liminf of f(s)/s^(p-1) as s -> 0+ exceeds
    lambda1 (a 1e-6 relative band around lambda1 is reported as
    indeterminate and not claimed).  Branch G: the sampled inf of g
    near the origin is positive (recorded as theta).  Otherwise FAIL.
    Growth limits Lf, Lg are schedule-tail limsup estimates; the
    coercivity margin uses the given sigma, bisected by default.
    """
    if lambda1 <= 0:
        raise ValueError(f"lambda1 must be positive, got {lambda1}")

    sched = 2.0 ** (-np.arange(0, 21, dtype=float))
    fvals = fspec(sched) / sched ** (p - 1.0)
    liminf_f = float(np.min(fvals[-6:]))
    running_inf = np.minimum.accumulate(fvals)
    monotone = bool(
        running_inf[-1] >= running_inf[-2] * (1 - 1e-3) if running_inf[-2] > 0 else True
    )

    band = 1e-6 * lambda1
    indeterminate = abs(liminf_f - lambda1) <= band
    branch = C0_FAIL
    theta = 0.0
    if liminf_f > lambda1 + band:
        branch = C0_F_BRANCH
    else:
        theta_vals = []
        for r in 2.0 ** (-np.arange(0, 14, dtype=float)):
            v = _vector_ball_values(gspec, np.zeros(gspec.arity), r)
            theta_vals.append(float(np.min(v)))
        theta = theta_vals[-1]
        vanishing = _tail_log_slope(theta_vals) <= -0.02
        if theta > _ZERO_TOL and not vanishing:
            branch = C0_G_BRANCH
        else:
            theta = 0.0

    up = 2.0 ** np.arange(0, 21, dtype=float)
    Lf = float(np.max(fspec(up)[-6:] / up[-6:] ** (p - 1.0)))
    dirs = np.array(
        [[np.cos(t), np.sin(t)] for t in np.linspace(0, 2 * np.pi, 16, endpoint=False)]
    )
    if gspec.arity != 2:
        rng = np.random.default_rng(1)
        dirs = rng.normal(size=(16, gspec.arity))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    gmax = []
    for r in up[-6:]:
        gv = gspec(dirs * r)
        gmax.append(float(np.max(gv)) / r ** (p - 1.0))
    Lg = float(np.max(gmax))

    growth_ok = Lf + lambda1 ** ((p - 1.0) / p) * Lg < lambda1
    if sigma is None:
        sigma = _bisect_sigma(Lf, Lg, lambda1, p)
    margin = coercivity_margin(Lf, Lg, lambda1, p, sigma)
    return ConditionReport(
        c0_branch=branch,
        Lf=Lf,
        Lg=Lg,
        sigma=float(sigma),
        coercivity_margin=float(margin),
        theta=float(theta),
        growth_ok=bool(growth_ok),
        liminf_f_at_zero=liminf_f,
        liminf_monotone=monotone,
        c0_indeterminate=bool(indeterminate),
        lambda1=float(lambda1),
        p=float(p),
    )
