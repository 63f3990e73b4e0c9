"""P1 finite-element solver for the anisotropic p-torsion problem.

The torsion function minimises

    J(u) = ∫ F_δ(∇u)^p / p - ∫ u,    u = 0 on the boundary,

over continuous piecewise-linear functions, with F_δ(g) = sqrt(F(g)² + δ²).
Gradients are constant per triangle, so the gradient term is integrated
exactly; ∫u uses the lumped (exact for P1) mass.  The minimiser is found by
damped Newton with an Armijo line search, starting from the Euclidean p = 2
solution and, for p far from 2, walking in steps of 1/2 in 1/(p-1).

Because the discrete space is a subspace of W_0^{1,p}, the Rayleigh quotient
of any discrete function is a lower bound for T_p.  ``TorsionSolution.T`` is
that quotient evaluated at the discrete minimiser.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .anisotropy import EuclideanNorm, PolarNorm
from .errors import BadParameter, DegenerateInput, NoConvergence, OutsideBody, UnsupportedDimension
from .mesh import Mesh

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    tol: float = 1e-9
    delta: float | None = None  # None: 1e-8 * R^(q-1), R the mesh inradius scale
    max_iters: int = 200
    continuation: bool = True
    stage_tol: float = 1e-6
    armijo: float = 1e-4


@dataclass(frozen=True, eq=False)
class TorsionSolution:
    mesh: Mesh
    norm: object
    p: float
    u: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def q(self):
        return self.p / (self.p - 1.0)

    @cached_property
    def gradients(self):
        return _element_gradients(self.mesh, self.u)

    @cached_property
    def T_from_u(self):
        return float(self.mesh.lumped_mass @ self.u)

    @cached_property
    def T_from_grad(self):
        return float(self.mesh.areas @ np.asarray(self.norm(self.gradients)) ** self.p)

    @cached_property
    def T(self):
        """Discrete rigidity: the Rayleigh quotient of u (a lower bound for T_p)."""
        return _rayleigh(self.mesh, self.norm, self.p, self.u)

    @property
    def sigma(self):
        return self.T ** (self.p - 1.0)

    @cached_property
    def argmax(self):
        return int(np.argmax(self.u))

    @property
    def M(self):
        return float(self.u[self.argmax])

    @property
    def x_max(self):
        return self.mesh.nodes[self.argmax]

    def summary(self):
        """Flat record for export."""
        rec = {
            "p": self.p,
            "q": self.q,
            "norm": self.norm.name,
            "n_nodes": self.mesh.n_nodes,
            "n_triangles": self.mesh.n_triangles,
            "h": self.mesh.h,
            "T": self.T,
            "T_from_u": self.T_from_u,
            "T_from_grad": self.T_from_grad,
            "M": self.M,
            "sigma": self.sigma,
        }
        rec.update({k: v for k, v in self.diagnostics.items() if k != "history"})
        return rec


def _element_gradients(mesh, u):
    return np.einsum("tij,ti->tj", mesh.hat_gradients, u[mesh.triangles])


def _rayleigh(mesh, norm, p, psi):
    num = float(mesh.lumped_mass @ np.abs(psi))
    den = float(mesh.areas @ np.asarray(norm(_element_gradients(mesh, psi))) ** p)
    if num == 0.0 or den == 0.0:
        raise DegenerateInput("Rayleigh quotient needs a non-zero function with non-zero gradient")
    return (num**p / den) ** (1.0 / (p - 1.0))


class _Problem:
    """Discrete energy restricted to interior nodes."""

    def __init__(self, mesh, norm, p, delta):
        self.mesh, self.norm, self.p, self.delta = mesh, norm, p, delta
        self.D = mesh.hat_gradients
        self.A = mesh.areas
        self.tris = mesh.triangles
        self.mass = mesh.lumped_mass
        self.free = mesh.interior
        n = mesh.n_nodes
        index = np.full(n, -1)
        index[self.free] = np.arange(len(self.free))
        rows = np.repeat(index[self.tris], 3, axis=1).ravel()
        cols = np.tile(index[self.tris], (1, 3)).ravel()
        self._keep = (rows >= 0) & (cols >= 0)
        self._rows, self._cols = rows[self._keep], cols[self._keep]
        self.n_free = len(self.free)

    def full(self, x):
        u = np.zeros(self.mesh.n_nodes)
        u[self.free] = x
        return u

    def energy(self, x):
        g = _element_gradients(self.mesh, self.full(x))
        s = np.asarray(self.norm(g)) ** 2 + self.delta**2
        return float(self.A @ s ** (self.p / 2.0)) / self.p - float(self.mass[self.free] @ x)

    def gradient(self, x, with_hessian=False):
        p = self.p
        g = _element_gradients(self.mesh, self.full(x))
        d1, d2 = self.norm.sq_derivatives(g)
        s = np.asarray(self.norm(g)) ** 2 + self.delta**2
        c1 = s ** (p / 2.0 - 1.0)
        flux = 0.5 * c1[:, None] * d1
        local = self.A[:, None] * np.einsum("tij,tj->ti", self.D, flux)
        grad = np.zeros(self.mesh.n_nodes)
        np.add.at(grad, self.tris.ravel(), local.ravel())
        grad = grad[self.free] - self.mass[self.free]
        if not with_hessian:
            return grad
        H = 0.5 * c1[:, None, None] * d2
        if p != 2.0:
            c2 = 0.25 * (p - 2.0) * s ** (p / 2.0 - 2.0)
            H = H + c2[:, None, None] * d1[:, :, None] * d1[:, None, :]
        K_loc = self.A[:, None, None] * np.einsum("tia,tab,tjb->tij", self.D, H, self.D)
        K = sp.csr_matrix(
            (K_loc.ravel()[self._keep], (self._rows, self._cols)), shape=(self.n_free,) * 2
        )
        return grad, K

    def residual(self, grad):
        return float(np.max(np.abs(grad) / self.mass[self.free])) if len(grad) else 0.0


def _laplace_start(mesh):
    """Euclidean p = 2 torsion function: one sparse linear solve."""
    prob = _Problem(mesh, EuclideanNorm(), 2.0, 0.0)
    g, K = prob.gradient(np.zeros(prob.n_free), with_hessian=True)
    return prob.full(spla.spsolve(K.tocsc(), -g))


def _rescale(mesh, norm, p, u):
    """Best multiple c·u for the energy: c = (∫u / ∫F(∇u)^p)^(1/(p-1))."""
    a = float(mesh.areas @ np.asarray(norm(_element_gradients(mesh, u))) ** p)
    b = float(mesh.lumped_mass @ u)
    if a <= 0.0 or b <= 0.0:
        return u
    return u * (b / a) ** (1.0 / (p - 1.0))


def _newton(prob, x, tol, max_iters, armijo, history):
    E = prob.energy(x)
    res = math.inf
    for it in range(1, max_iters + 1):
        g, K = prob.gradient(x, with_hessian=True)
        res = prob.residual(g)
        history.append((prob.p, E, res))
        if res <= tol:
            return x, E, res, it - 1
        d = _descent_direction(K, g, prob)
        slope = float(g @ d)
        noise = 64.0 * np.finfo(float).eps * (abs(E) + float(prob.mass[prob.free] @ np.abs(x)))
        step = None
        if -slope > noise:
            t = 1.0
            for _ in range(40):
                E_new = prob.energy(x + t * d)
                if E_new <= E + armijo * t * slope:
                    step = t
                    break
                t *= 0.5
        if step is None:
            # energy differences are at round-off level: fall back to |∇J|
            t = 1.0
            for _ in range(20):
                if prob.residual(prob.gradient(x + t * d)) < res:
                    step = t
                    break
                t *= 0.5
        if step is None:
            raise NoConvergence(
                "line search failed",
                {"iterations": it, "residual": res, "energy": E, "p": prob.p, "u": prob.full(x)},
            )
        x_new = x + step * d
        E_new = prob.energy(x_new)
        x, E = x_new, E_new
    g = prob.gradient(x)
    res = prob.residual(g)
    if res <= tol:
        return x, E, res, max_iters
    raise NoConvergence(
        f"no convergence in {max_iters} Newton iterations (residual {res:.3e})",
        {"iterations": max_iters, "residual": res, "energy": E, "p": prob.p, "u": prob.full(x)},
    )


def _descent_direction(K, g, prob):
    K = K.tocsc()
    diag = K.diagonal()
    shift = 0.0
    for _ in range(6):
        M = K if shift == 0.0 else K + sp.diags(shift * diag)
        try:
            d = spla.spsolve(M, -g)
        except RuntimeError:
            d = None
        if d is not None and np.all(np.isfinite(d)) and float(g @ d) < 0.0:
            return d
        shift = 1e-8 if shift == 0.0 else shift * 100.0
    # near-singular Hessian: mass-preconditioned gradient step
    return -g / prob.mass[prob.free] * (prob.mass[prob.free].mean() / max(diag.mean(), 1e-300))


def _continuation_path(p, enabled):
    if not enabled or abs(1.0 / (p - 1.0) - 1.0) <= 0.5:
        return [p]
    target = 1.0 / (p - 1.0)
    n = math.ceil(abs(target - 1.0) / 0.5)
    ts = 1.0 + (target - 1.0) * np.arange(1, n + 1) / n
    return [1.0 + 1.0 / t for t in ts[:-1]] + [p]


def default_delta(mesh, p):
    q = p / (p - 1.0)
    r_scale = 2.0 * mesh.total_area / _boundary_length(mesh)
    return 1e-8 * r_scale ** (q - 1.0)


def _boundary_length(mesh):
    t = mesh.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    b = uniq[counts == 1]
    return float(np.linalg.norm(mesh.nodes[b[:, 0]] - mesh.nodes[b[:, 1]], axis=1).sum())


def solve_torsion(mesh: Mesh, norm, p: float, opts: SolverOptions | None = None, u0=None):
    """Discrete torsion function of ``mesh`` for the anisotropic p-Laplacian."""
    opts = opts or SolverOptions()
    if not (p > 1.0 and math.isfinite(p)):
        raise BadParameter(f"p must lie in (1, inf), got {p}")
    if mesh.dim != 2 or norm.dimension != 2:
        raise UnsupportedDimension("the finite-element solver works in the plane only")
    if len(mesh.interior) == 0:
        raise DegenerateInput("mesh has no interior nodes")
    delta = default_delta(mesh, p) if opts.delta is None else float(opts.delta)
    t0 = time.perf_counter()
    history = []
    u = _laplace_start(mesh) if u0 is None else np.asarray(u0, dtype=float).copy()
    stages = _continuation_path(p, opts.continuation and u0 is None)
    total = 0
    for k, pk in enumerate(stages):
        last = k == len(stages) - 1
        u = _rescale(mesh, norm, pk, u)
        prob = _Problem(mesh, norm, pk, delta)
        budget = opts.max_iters - total
        try:
            x, E, res, its = _newton(
                prob, u[prob.free], opts.tol if last else opts.stage_tol, budget, opts.armijo, history
            )
        except NoConvergence as exc:
            exc.diagnostics.update({"delta": delta, "stages": stages, "history": history})
            raise
        total += its
        u = prob.full(x)
    diagnostics = {
        "iterations": total,
        "energy": E,
        "residual": res,
        "delta": delta,
        "stages": len(stages),
        "seconds": time.perf_counter() - t0,
        "history": history,
    }
    log.debug("solve p=%g %s: %d iterations, residual %.2e", p, norm.name, total, res)
    return TorsionSolution(mesh, norm, float(p), u, diagnostics)


def residual_check(sol: TorsionSolution) -> float:
    """max_i |∫F^(p-1)(∇u)⟨F_ξ(∇u), ∇φ_i⟩ - ∫φ_i| / ∫φ_i over interior hats (δ = 0)."""
    mesh = sol.mesh
    g = sol.gradients
    f = np.asarray(sol.norm(g))
    nz = f > 0.0
    flux = np.zeros_like(g)
    flux[nz] = (f[nz] ** (sol.p - 1.0))[:, None] * sol.norm.grad(g[nz])
    local = mesh.areas[:, None] * np.einsum("tij,tj->ti", mesh.hat_gradients, flux)
    r = np.zeros(mesh.n_nodes)
    np.add.at(r, mesh.triangles.ravel(), local.ravel())
    i = mesh.interior
    return float(np.max(np.abs(r[i] - mesh.lumped_mass[i]) / mesh.lumped_mass[i]))


def with_field(sol: TorsionSolution, u) -> TorsionSolution:
    """Same mesh/norm/p, different nodal field (for perturbation checks)."""
    return TorsionSolution(sol.mesh, sol.norm, sol.p, np.asarray(u, dtype=float), {})


def rayleigh_lower_bound(mesh: Mesh, norm, p: float, psi) -> float:
    """[(∫|ψ|)^p / ∫F(∇ψ)^p]^(1/(p-1)) for a P1 field ψ vanishing on the boundary."""
    psi = np.asarray(psi, dtype=float)
    scale = np.max(np.abs(psi)) if psi.size else 0.0
    if scale == 0.0:
        raise DegenerateInput("ψ is identically zero")
    if np.max(np.abs(psi[mesh.boundary_mask]), initial=0.0) > 1e-12 * scale:
        raise BadParameter("ψ must vanish on boundary nodes")
    return _rayleigh(mesh, norm, p, psi)


def exact_wulff_solution(norm, R, p, x, x0=None):
    """u_W(x) = (R^q - F°(x - x0)^q) / (q N^(q-1)) on the Wulff shape W_R(x0)."""
    if not p > 1.0:
        raise BadParameter("p must exceed 1")
    q = p / (p - 1.0)
    n = norm.dimension
    x = np.asarray(x, dtype=float)
    if x0 is not None:
        x = x - np.asarray(x0, dtype=float)
    rho = np.asarray(PolarNorm(norm)(x))
    if np.any(rho > R * (1.0 + 1e-12)):
        raise OutsideBody("point lies outside the Wulff shape")
    rho = np.minimum(rho, R)
    return (R**q - rho**q) / (q * n ** (q - 1.0))


def exact_wulff_rigidity(norm, R, p, wulff_area):
    """T_p(W_R) = |W_R| R^q / (N^(q-1) (N + q))."""
    if not (R > 0 and wulff_area > 0 and p > 1):
        raise BadParameter("R, |W_R| must be positive and p > 1")
    q = p / (p - 1.0)
    n = norm.dimension
    return wulff_area * R**q / (n ** (q - 1.0) * (n + q))


def exact_wulff_max(norm, R, p):
    q = p / (p - 1.0)
    n = norm.dimension
    return R**q / (q * n ** (q - 1.0))


def save_solution(sol: TorsionSolution, stem):
    """Write ``<stem>.txt`` (columns ``x y u``) and ``<stem>.json`` (summary record)."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    table = np.column_stack([sol.mesh.nodes, sol.u])
    np.savetxt(stem.with_suffix(".txt"), table, fmt="%.17g", header="x y u")
    rec = {k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in sol.summary().items()}
    rec["residual_check"] = residual_check(sol)
    stem.with_suffix(".json").write_text(json.dumps(rec, indent=2, sort_keys=True, default=str) + "\n")
    return stem
