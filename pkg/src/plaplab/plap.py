"""Discrete p-Laplacian: energy, residuals, Dirichlet solves, first eigenpair.

The weak operator <A(u), v> = int k(|grad u|) grad u . grad v dx is
assembled with the smoothed coefficient k(g) = (g^2 + tau^2)^((p-2)/2);
tau > 0 removes the p < 2 singularity at critical points and the
un-smoothed operator is recovered as tau -> 0.  The nonlinear solver is
a damped Kacanov (frozen-coefficient) iteration with an energy-decrease
line search; an optional Newton step accelerates the endgame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import DiscreteField
from .quadrature import TRI_QUAD_DEG5, grad_lp_norm


class ConvergenceError(RuntimeError):
    """Nonlinear iteration failed; carries the last residual norm."""

    def __init__(self, message, residual_norm, iterations):
        super().__init__(f"{message} (residual {residual_norm:.3e} after {iterations} iterations)")
        self.residual_norm = residual_norm
        self.iterations = iterations


@dataclass(frozen=True)
class PlapConfig:
    """Solver knobs for the p-Laplacian Dirichlet problem.

    p is restricted to (1, 2) = (1, N) unless validation_mode is set,
    which unlocks p >= 2 purely so linear (p=2) oracles apply.
    """

    p: float
    tau: float | None = None  # None: auto 1e-8 * gradient scale
    tol_residual: float = 1e-10
    max_iter: int = 200
    damping: float = 1.0
    validation_mode: bool = False
    use_newton: bool = False

    def __post_init__(self):
        if self.p <= 1.0:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not self.validation_mode and not (1.0 < self.p < 2.0):
            raise ValueError(
                f"p={self.p} outside (1, 2); pass validation_mode=True to allow p >= 2"
            )
        if self.tau is not None and self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if self.tol_residual <= 0:
            raise ValueError("tol_residual must be positive")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class EigenPair:
    lambda1: float
    phi1: DiscreteField
    iterations: int = 0
    tau: float = 0.0  # gradient smoothing the iteration ran with


def assemble_stiffness(mesh, coef=None):
    """Sparse matrix K_ij = int c(x) grad psi_i . grad psi_j dx.

    coef : per-element coefficients (nt,), default 1.
    """
    areas, grads = mesh.element_geometry()
    w = areas if coef is None else areas * coef
    local = np.einsum("t,tad,tbd->tab", w, grads, grads)
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    nv = mesh.num_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()


def assemble_load_from_values(mesh, values, rule=TRI_QUAD_DEG5):
    """Load vector b_i = int f psi_i dx from per-quad-point values (nt, nq)."""
    bary, wts = rule
    areas, _ = mesh.element_geometry()
    contrib = np.einsum("t,q,tq,qa->ta", areas, wts, values, bary)
    b = np.zeros(mesh.num_vertices)
    np.add.at(b, mesh.triangles, contrib)
    return b


def assemble_load(mesh, fn, rule=TRI_QUAD_DEG5):
    """Load vector for a callable fn(points (n,2)) -> (n,)."""
    bary, _ = rule
    tri_xy = mesh.vertices[mesh.triangles]
    pts = np.einsum("qa,tad->tqd", bary, tri_xy)
    nt, nq = pts.shape[0], pts.shape[1]
    vals = np.asarray(fn(pts.reshape(-1, 2))).reshape(nt, nq)
    return assemble_load_from_values(mesh, vals, rule)


def assemble_flux_load(mesh, flux_fn, rule=TRI_QUAD_DEG5):
    """Load b_i = int F . grad psi_i dx, i.e. rhs = -div F in weak form.

    Useful for manufactured solutions of degenerate operators: the flux
    stays bounded at gradient-critical points where the strong rhs does
    not.
    """
    bary, wts = rule
    tri_xy = mesh.vertices[mesh.triangles]
    pts = np.einsum("qa,tad->tqd", bary, tri_xy)
    nt, nq = pts.shape[0], pts.shape[1]
    F = np.asarray(flux_fn(pts.reshape(-1, 2))).reshape(nt, nq, 2)
    areas, grads = mesh.element_geometry()
    contrib = np.einsum("t,q,tqd,tad->ta", areas, wts, F, grads)
    b = np.zeros(mesh.num_vertices)
    np.add.at(b, mesh.triangles, contrib)
    return b


def field_quad_values(field, rule=TRI_QUAD_DEG5):
    """P1 field values at every element quadrature point, shape (nt, nq)."""
    bary, _ = rule
    nodal = field.nodal_values[field.mesh.triangles]
    return nodal @ bary.T


def _coef(grad_norms, p, tau):
    if tau > 0.0 or p >= 2.0:
        return (grad_norms**2 + tau**2) ** ((p - 2.0) / 2.0)
    # tau = 0, p < 2: the flux |g|^(p-2) g vanishes with g, so the
    # zero-gradient coefficient contributes nothing; avoid 0**negative
    out = np.zeros_like(grad_norms)
    pos = grad_norms > 0
    out[pos] = grad_norms[pos] ** (p - 2.0)
    return out


def energy(u, p, tau=0.0):
    """Dirichlet p-energy (1/p) int (|grad u|^2 + tau^2)^(p/2) dx."""
    areas, _ = u.mesh.element_geometry()
    g = np.linalg.norm(u.element_gradients(), axis=1)
    return float(np.sum(areas * (g**2 + tau**2) ** (p / 2.0)) / p)


def apply_plap_residual(u, rhs, p, tau=0.0):
    """Galerkin residual over interior hat functions; zero on the boundary."""
    mesh = u.mesh
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (mesh.num_vertices,):
        raise TypeError(
            f"rhs has shape {rhs.shape}, expected ({mesh.num_vertices},)"
        )
    g = np.linalg.norm(u.element_gradients(), axis=1)
    K = assemble_stiffness(mesh, _coef(g, p, tau))
    r = K @ u.nodal_values - rhs
    r[mesh.boundary_vertices] = 0.0
    return r


def _dual_factor(mesh):
    """Cached factorization of the p=2 interior stiffness (dual-norm metric)."""
    if "dual_factor" not in mesh._cache:
        interior = mesh.interior_vertices
        K2 = assemble_stiffness(mesh)
        mesh._cache["dual_factor"] = spla.splu(K2[interior][:, interior].tocsc())
    return mesh._cache["dual_factor"]


def residual_dual_norm(mesh, r):
    """Discrete dual norm sqrt(r^T K2^-1 r) over interior nodes."""
    interior = mesh.interior_vertices
    ri = r[interior]
    return float(np.sqrt(abs(ri @ _dual_factor(mesh).solve(ri))))


def _interior_solve(mesh, K, b):
    interior = mesh.interior_vertices
    x = np.zeros(mesh.num_vertices)
    x[interior] = spla.spsolve(K[interior][:, interior].tocsc(), b[interior])
    return x


def _auto_tau(mesh, rhs, p):
    """Gradient scale from a single linear solve, floored away from zero."""
    K2 = assemble_stiffness(mesh)
    u2 = _interior_solve(mesh, K2, rhs)
    scale = np.linalg.norm(
        DiscreteField(mesh, u2).element_gradients(), axis=1
    ).max()
    return 1e-8 * max(float(scale), 1.0)


def solve_plap_dirichlet(rhs, cfg, init=None, mesh=None):
    """Solve <A(u), v> = rhs(v) for all interior v, u = 0 on the boundary.

    Damped Kacanov steps with an energy line search; stops when the
    residual dual norm drops below cfg.tol_residual.  Deterministic for
    fixed inputs.  Raises ConvergenceError when max_iter is exhausted.
    """
    if init is not None:
        mesh = init.mesh
    if mesh is None:
        raise TypeError("pass init or mesh")
    rhs = np.asarray(rhs, dtype=float)
    p = cfg.p
    tau_final = cfg.tau if cfg.tau is not None else _auto_tau(mesh, rhs, p)

    if init is None:
        # cold start from the linear solve; gradients of u=0 would make
        # the p<2 coefficient uniform-huge and the first step badly scaled
        u = _interior_solve(mesh, assemble_stiffness(mesh), rhs)
        taus = [tau_final] if p == 2.0 else [tau_final * 100, tau_final * 10, tau_final]
    else:
        u = init.nodal_values.copy()
        u[mesh.boundary_vertices] = 0.0
        taus = [tau_final]

    history = []
    total_iters = 0
    res = np.inf
    # below this, energy differences drown in roundoff; Kacanov steps for
    # p <= 2 minimize a touching majorant so the full step is safe anyway
    j_scale = 1.0 + abs(energy(DiscreteField(mesh, u), p, tau_final) - float(rhs @ u))
    ls_floor = np.sqrt(1e-13 * j_scale)
    for stage, tau in enumerate(taus):
        last_stage = stage == len(taus) - 1
        stage_iters = cfg.max_iter if last_stage else 3
        for _ in range(stage_iters):
            field = DiscreteField(mesh, u)
            g = np.linalg.norm(field.element_gradients(), axis=1)
            K = assemble_stiffness(mesh, _coef(g, p, tau))
            r = K @ u - rhs
            r[mesh.boundary_vertices] = 0.0
            res = residual_dual_norm(mesh, r)
            if res <= cfg.tol_residual and last_stage:
                break
            u_hat = _interior_solve(mesh, K, rhs)
            step = u_hat - u
            alpha = cfg.damping
            searched = res > ls_floor
            J0 = Jt = None
            if searched:
                J0 = energy(field, p, tau) - float(rhs @ u)
                for _ in range(40):
                    trial = u + alpha * step
                    Jt = energy(DiscreteField(mesh, trial), p, tau) - float(
                        rhs @ trial
                    )
                    if Jt <= J0 - 1e-14 * abs(J0) or alpha < 1e-8:
                        break
                    alpha *= 0.5
            u = u + alpha * step
            total_iters += 1
            history.append(
                {"residual": res, "alpha": alpha, "energy_before": J0,
                 "energy_after": Jt, "line_searched": searched, "tau": tau}
            )
            if cfg.use_newton and res < 1e-3 and p != 2.0:
                u = _newton_step(mesh, u, rhs, p, tau)
        else:
            if last_stage:
                raise ConvergenceError(
                    "Kacanov iteration did not converge", res, total_iters
                )
    out = DiscreteField(mesh, u)
    out.solve_history = history
    out.residual_norm = res
    return out


def _newton_step(mesh, u, rhs, p, tau):
    """One damped Newton step on the smoothed operator."""
    areas, grads = mesh.element_geometry()
    field = DiscreteField(mesh, u)
    gv = field.element_gradients()  # (nt, 2)
    g2 = np.einsum("td,td->t", gv, gv) + tau**2
    c0 = g2 ** ((p - 2.0) / 2.0)
    c1 = (p - 2.0) * g2 ** ((p - 4.0) / 2.0)
    # Jacobian blocks: c0 I + c1 (grad u)(grad u)^T per element
    tri = mesh.triangles
    ga = np.einsum("tad,td->ta", grads, gv)  # grad psi_a . grad u
    local = np.einsum("t,tad,tbd->tab", areas * c0, grads, grads)
    local += np.einsum("t,ta,tb->tab", areas * c1, ga, ga)
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    nv = mesh.num_vertices
    J = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    K = assemble_stiffness(mesh, c0)
    r = K @ u - rhs
    r[mesh.boundary_vertices] = 0.0
    interior = mesh.interior_vertices
    du = np.zeros(nv)
    du[interior] = spla.spsolve(J[interior][:, interior].tocsc(), -r[interior])
    J0 = energy(field, p, tau) - float(rhs @ u)
    alpha = 1.0
    for _ in range(30):
        trial = u + alpha * du
        Jt = energy(DiscreteField(mesh, trial), p, tau) - float(rhs @ trial)
        if Jt <= J0:
            return trial
        alpha *= 0.5
    return u


def lp_norm_quad(field, p, rule=TRI_QUAD_DEG5):
    """L^p norm of a P1 field by element quadrature."""
    areas, _ = field.mesh.element_geometry()
    vals = field_quad_values(field, rule)
    _, wts = rule
    return float(np.einsum("t,q,tq->", areas, wts, np.abs(vals) ** p) ** (1.0 / p))


def first_eigenpair(cfg, mesh, eig_tol=1e-8, max_outer=400, init=None):
    """First Dirichlet eigenpair by inverse power iteration.

    Each step solves A(u_new) = lam * |u|^(p-2) u, renormalizes to unit
    L^p norm, and updates lam with the Rayleigh quotient; the returned
    eigenfunction is positive in the interior with unit L^p norm.
    Results do not depend on the scaling of ``init``.
    """
    p = cfg.p
    interior = mesh.interior_vertices

    def positive_start():
        ones = assemble_load_from_values(
            mesh, np.ones((mesh.num_triangles, TRI_QUAD_DEG5[0].shape[0]))
        )
        u0 = _interior_solve(mesh, assemble_stiffness(mesh), ones)
        return u0 / lp_norm_quad(DiscreteField(mesh, u0), p)

    if init is not None:
        u = init.nodal_values.copy()
        u[mesh.boundary_vertices] = 0.0
        u = u / lp_norm_quad(DiscreteField(mesh, u), p)
    else:
        u = positive_start()
    lam = grad_lp_norm(DiscreteField(mesh, u), p) ** p
    tau = cfg.tau
    if tau is None:
        scale = DiscreteField(mesh, u).grad_sup_norm()
        tau = 1e-8 * max(scale, 1.0)
    inner_cfg = PlapConfig(
        p=p,
        tau=tau,
        tol_residual=min(cfg.tol_residual, 1e-11 * max(lam, 1.0)),
        max_iter=cfg.max_iter,
        damping=cfg.damping,
        validation_mode=cfg.validation_mode,
        use_newton=cfg.use_newton,
    )
    restarted = False
    iters = 0
    for iters in range(1, max_outer + 1):
        vals = field_quad_values(DiscreteField(mesh, u))
        rhs = lam * assemble_load_from_values(
            mesh, np.sign(vals) * np.abs(vals) ** (p - 1.0)
        )
        w = solve_plap_dirichlet(rhs, inner_cfg, init=DiscreteField(mesh, u)).nodal_values
        if w.mean() < 0:
            w = -w
        if w[interior].min() <= 0 and not restarted:
            u = positive_start()
            lam = grad_lp_norm(DiscreteField(mesh, u), p) ** p
            restarted = True
            continue
        w = w / lp_norm_quad(DiscreteField(mesh, w), p)
        lam_new = grad_lp_norm(DiscreteField(mesh, w), p) ** p
        done = abs(lam_new - lam) <= eig_tol * abs(lam)
        u, lam = w, lam_new
        if done:
            break
    else:
        raise ConvergenceError("eigen iteration did not converge", np.inf, max_outer)
    phi = DiscreteField(mesh, u)
    if phi.nodal_values[interior].min() <= 0:
        raise ConvergenceError("eigenfunction not interior-positive", np.inf, iters)
    return EigenPair(lambda1=float(lam), phi1=phi, iterations=iters, tau=tau)
