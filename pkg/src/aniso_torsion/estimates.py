"""Shape functionals Φ, Ψ and numerical checks of the torsion estimates.

All inequalities are exact in the continuum.  Each numerical check carries
an explicit slack and reports the raw margin (positive means the inequality
holds with room to spare), so discretisation error is kept apart from a
genuine violation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .anisotropy import PolarNorm, wulff_shape
from .convex_geometry import ConvexBody, anisotropic_inradius, gauge
from .errors import DegenerateInput
from .mesh import Mesh
from .torsion import (
    TorsionSolution,
    _element_gradients,
    exact_wulff_rigidity,
    rayleigh_lower_bound,
)

REPORT_VERSION = 1


# -- closed-form constants ---------------------------------------------------------


def phi_bounds(p, n=2):
    q = p / (p - 1.0)
    return q / (n ** (q - 1.0) * (n + q)), q / (q + 1.0)


def psi_bounds(p, n=2):
    q = p / (p - 1.0)
    return 1.0 / (n ** (q - 1.0) * (n + q)), 1.0 / (q + 1.0)


def max_bounds(p, R_F, n=2):
    q = p / (p - 1.0)
    return R_F**q / (q * n ** (q - 1.0)), R_F**q / q


# -- P-function ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PFunctionField:
    """P = ((p-1)/p) F(∇u)^p + u - M.

    Each triangle pairs its constant gradient with the value of u at its
    centroid (both second-order accurate there); the triangle values are then
    area-averaged to the nodes.
    """

    mesh: Mesh
    triangle_values: np.ndarray
    nodal: np.ndarray
    M: float

    @property
    def max_value(self):
        return float(self.nodal.max())

    @property
    def argmax(self):
        return int(np.argmax(self.nodal))


def p_function_field(sol: TorsionSolution, norm=None) -> PFunctionField:
    norm = norm or sol.norm
    mesh = sol.mesh
    u_c = sol.u[mesh.triangles].mean(axis=1)
    per_tri = (sol.p - 1.0) / sol.p * np.asarray(norm(sol.gradients)) ** sol.p + u_c - sol.M
    w = np.repeat(mesh.areas, 3)
    idx = mesh.triangles.ravel()
    num = np.bincount(idx, weights=w * np.repeat(per_tri, 3), minlength=mesh.n_nodes)
    den = np.bincount(idx, weights=w, minlength=mesh.n_nodes)
    return PFunctionField(mesh, per_tri, num / den, sol.M)


@dataclass(frozen=True)
class Check:
    """One inequality: ``margin >= -slack`` passes."""

    name: str
    value: float
    bound: float
    margin: float
    slack: float

    @property
    def ok(self):
        return bool(self.margin >= -self.slack)


def _lower(name, value, bound, slack):
    return Check(name, float(value), float(bound), float(value - bound), float(slack))


def _upper(name, value, bound, slack):
    return Check(name, float(value), float(bound), float(bound - value), float(slack))


def check_max_principle(field: PFunctionField, tol: float = 5e-3) -> Check:
    """max P <= tol·M (P <= 0 on convex bodies)."""
    return _upper("P_max", field.max_value, 0.0, tol * field.M)


def max_torsion_bounds(sol: TorsionSolution, R_F: float, tol: float = 2e-2):
    """R_F^q/(q N^(q-1)) <= M <= R_F^q/q, each with slack tol·R_F^q."""
    lo, hi = max_bounds(sol.p, R_F, sol.norm.dimension)
    slack = tol * R_F**sol.q
    return _lower("M_lower", sol.M, lo, slack), _upper("M_upper", sol.M, hi, slack)


# -- reports ------------------------------------------------------------------------


@dataclass
class EstimateReport:
    body: str
    norm: str
    p: float
    q: float
    n_nodes: int
    h: float
    T: float
    T_from_u: float
    T_from_grad: float
    M: float
    R_F: float
    area: float
    Phi: float
    Psi: float
    checks: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(c.ok for c in self.checks.values())

    def add(self, *checks):
        for c in checks:
            self.checks[c.name] = c
        return self

    def failed(self):
        return [k for k, c in self.checks.items() if not c.ok]

    def record(self):
        """Flat dict for CSV output."""
        rec = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("checks", "extra")}
        rec.update(self.extra)
        for k, c in self.checks.items():
            rec[f"{k}_margin"] = c.margin
            rec[f"{k}_slack"] = c.slack
            rec[f"{k}_ok"] = c.ok
        rec["ok"] = self.ok
        return rec


def phi_psi(sol: TorsionSolution, body: ConvexBody, R_F: float, slack: float = 2e-2) -> EstimateReport:
    """Φ = T/(|Ω| M), Ψ = T/(|Ω| R_F^q) and their four two-sided bounds.

    ``slack`` is absolute on the dimensionless functionals.
    """
    area = body.area
    T = sol.T
    phi = T / (area * sol.M)
    psi = T / (area * R_F**sol.q)
    n = sol.norm.dimension
    phi_lo, phi_hi = phi_bounds(sol.p, n)
    psi_lo, psi_hi = psi_bounds(sol.p, n)
    rep = EstimateReport(
        body=body.name,
        norm=sol.norm.name,
        p=sol.p,
        q=sol.q,
        n_nodes=sol.mesh.n_nodes,
        h=sol.mesh.h,
        T=T,
        T_from_u=sol.T_from_u,
        T_from_grad=sol.T_from_grad,
        M=sol.M,
        R_F=R_F,
        area=area,
        Phi=phi,
        Psi=psi,
    )
    return rep.add(
        _lower("Phi_lower", phi, phi_lo, slack),
        _upper("Phi_upper", phi, phi_hi, slack),
        _lower("Psi_lower", psi, psi_lo, slack),
        _upper("Psi_upper", psi, psi_hi, slack),
    )


def gauge_lower_bound(body: ConvexBody, norm, p: float, mesh: Mesh) -> float:
    """Rayleigh quotient of φ = (1 - K°(x)^q) / (q N^(q-1)), K° the gauge of the body.

    The body is re-centred at its centroid so the gauge is defined; every
    quantity involved is translation invariant.
    """
    q = p / (p - 1.0)
    n = norm.dimension
    c = body.centroid
    k = gauge(body.translated(-c), mesh.nodes - c)
    phi = np.maximum(1.0 - k**q, 0.0) / (q * n ** (q - 1.0))
    phi[mesh.boundary_mask] = 0.0
    return rayleigh_lower_bound(mesh, norm, p, phi)


_KAPPA: dict = {}


def wulff_measure(norm, n_vertices=720):
    """κ_F = |W_1|, from the polygonal Wulff shape (cached per norm name)."""
    key = (norm.name, n_vertices)
    if key not in _KAPPA:
        _KAPPA[key] = wulff_shape(norm, 1.0, n_vertices=n_vertices).area
    return _KAPPA[key]


def saint_venant_check(sol: TorsionSolution, norm, body: ConvexBody, p: float | None = None, R_F=None, tol=1e-2):
    """T(Ω) <= T(W_R) with |W_R| = |Ω|; for p = 2 also the stability gap.

    The stability inequality is checked in its dimensionally consistent form
    0 <= T(W_R) - T(Ω) <= |Ω| (R² - R_F²) / 8.
    """
    p = sol.p if p is None else p
    n = norm.dimension
    area = body.area
    kappa = wulff_measure(norm)
    R = (area / kappa) ** (1.0 / n)
    T_w = exact_wulff_rigidity(norm, R, p, area)
    gap = T_w - sol.T
    checks = [_upper("saint_venant", sol.T, T_w, tol * T_w)]
    extra = {"R_wulff": R, "T_wulff": T_w, "sv_gap": gap}
    if p == 2.0 and n == 2:
        if R_F is None:
            R_F, _ = anisotropic_inradius(body, norm)
        bound = area * (R * R - R_F * R_F) / 8.0
        extra["stability_bound"] = bound
        extra["stability_bound_unscaled"] = (R * R - R_F * R_F) / 8.0
        checks.append(_upper("stability", gap, bound, tol * T_w))
        checks.append(_lower("stability_nonneg", gap, 0.0, tol * T_w))
    return checks, extra


def curvature_identity_check(norm, R: float, p: float, r: float | None = None, n_dirs: int = 16) -> float:
    """|Q_p u_W + 1| on the Wulff sphere F°(x) = r, through the mean-curvature form.

    Q_p u = F^(p-2)(∇u) (∂u/∂n_F · H_F + (p-1) ∂²u/∂n_F²) with H_F = (N-1)/r,
    ∂u/∂n_F = -F(∇u) and the second derivative from the radial profile.
    """
    r = 0.5 * R if r is None else r
    if not 0.0 < r < R:
        raise DegenerateInput("radius must lie strictly between 0 and R")
    q = p / (p - 1.0)
    n = norm.dimension
    polar = PolarNorm(norm)
    th = 2.0 * np.pi * (np.arange(n_dirs) + 0.5) / n_dirs
    d = np.column_stack([np.cos(th), np.sin(th)])
    x = r * d / np.asarray(polar(d))[:, None]
    rho = np.asarray(polar(x))
    du = -(rho ** (q - 1.0)) / n ** (q - 1.0)
    grad_u = du[:, None] * polar.grad(x)
    f = np.asarray(norm(grad_u))
    dn = -f
    d2n = -(q - 1.0) * rho ** (q - 2.0) / n ** (q - 1.0)
    h_f = (n - 1.0) / rho
    qp = f ** (p - 2.0) * (dn * h_f + (p - 1.0) * d2n)
    return float(np.max(np.abs(qp + 1.0)))


def evaluate(sol: TorsionSolution, body: ConvexBody, R_F=None, slack=2e-2, p_tol=5e-3, sv_tol=1e-2):
    """Full report for one solve: Φ/Ψ, M, P-function, gauge bound, Saint-Venant."""
    if R_F is None:
        R_F, _ = anisotropic_inradius(body, sol.norm)
    rep = phi_psi(sol, body, R_F, slack)
    rep.add(*max_torsion_bounds(sol, R_F, slack))
    pf = p_function_field(sol)
    rep.add(check_max_principle(pf, p_tol))
    g = gauge_lower_bound(body, sol.norm, sol.p, sol.mesh)
    rep.add(_upper("gauge", g, sol.T, 0.0))
    checks, extra = saint_venant_check(sol, sol.norm, body, R_F=R_F, tol=sv_tol)
    rep.add(*checks)
    rep.extra.update(extra)
    rep.extra.update({"gauge_T": g, "P_max": pf.max_value})
    rep.extra["residual"] = sol.diagnostics.get("residual", math.nan)
    rep.extra["iterations"] = sol.diagnostics.get("iterations", -1)
    return rep


# -- serialisation ---------------------------------------------------------------------


def write_reports_csv(records, path, columns=None, comment=None):
    """Write flat records with a versioned header comment line."""
    records = list(records)
    if columns is None:
        columns = []
        for r in records:
            columns.extend(k for k in r if k not in columns)
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# aniso_torsion table v{REPORT_VERSION}" + (f" {comment}" if comment else "") + "\n")
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({k: _fmt(r.get(k, "")) for k in columns})
    return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def summarise(reports):
    """Aggregate: number of rows, failures, minimum margin per inequality."""
    mins: dict = {}
    failures = []
    for r in reports:
        for k, c in r.checks.items():
            mins[k] = min(mins.get(k, math.inf), c.margin)
        if not r.ok:
            failures.append({"body": r.body, "norm": r.norm, "p": r.p, "failed": r.failed()})
    return {
        "version": REPORT_VERSION,
        "rows": len(reports),
        "passed": len(reports) - len(failures),
        "failures": failures,
        "min_margins": mins,
        "ok": not failures,
    }


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "__dataclass_fields__"):
        return asdict(o)
    raise TypeError(type(o).__name__)
