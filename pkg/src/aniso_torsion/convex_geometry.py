"""Convex polygons: support function, gauge, anisotropic distance and inradius.

Bodies are stored by their vertices (counter-clockwise, strictly convex
position) and an equivalent halfspace list ⟨ν_i, x⟩ ≤ b_i with unit outward
normals ν_i.  For polygons the anisotropic distance to the boundary is exact,

    d_F(x) = min_i (b_i - ⟨ν_i, x⟩) / F(ν_i),

which turns the anisotropic inradius into a small linear program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .errors import BadBody, BadParameter, DegenerateInput, OutsideBody


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """A convex polygon with CCW ``vertices`` of shape (n, 2)."""

    vertices: np.ndarray
    name: str = "body"

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DegenerateInput("a planar body needs at least 3 vertices")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        if self.area <= 0.0:
            raise DegenerateInput("vertices must be counter-clockwise with positive area")

    @classmethod
    def from_vertices(cls, points, name="body"):
        """Convex hull of ``points`` (duplicates and collinear points dropped)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise DegenerateInput("need at least 3 planar points")
        try:
            hull = ConvexHull(pts)
        except QhullError as exc:
            raise DegenerateInput(f"hull is lower-dimensional: {exc}") from None
        v = pts[hull.vertices]  # qhull returns 2-D hulls counter-clockwise
        return cls(_drop_collinear(v), name=name)

    # -- derived geometry ------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @cached_property
    def edges(self):
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @cached_property
    def edge_lengths(self):
        return np.linalg.norm(self.edges, axis=1)

    @cached_property
    def normals(self):
        e = self.edges / self.edge_lengths[:, None]
        return np.stack([e[:, 1], -e[:, 0]], axis=1)

    @cached_property
    def offsets(self):
        return np.einsum("ij,ij->i", self.normals, self.vertices)

    @property
    def halfspaces(self):
        return self.normals, self.offsets

    @cached_property
    def area(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @cached_property
    def perimeter(self):
        return float(self.edge_lengths.sum())

    @cached_property
    def centroid(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * self.area)

    @cached_property
    def diameter(self):
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    @property
    def scale(self):
        return self.diameter

    # -- transformations -------------------------------------------------------
    def translated(self, shift):
        return ConvexBody(self.vertices + np.asarray(shift, dtype=float), name=self.name)

    def scaled(self, t):
        if not t > 0:
            raise BadParameter("scale factor must be positive")
        return ConvexBody(self.vertices * float(t), name=self.name)

    def rotated(self, A):
        return ConvexBody(self.vertices @ np.asarray(A, dtype=float).T, name=self.name)

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        slack = x @ self.normals.T - self.offsets
        return np.all(slack <= tol * self.scale, axis=-1)

    def __repr__(self):
        return f"<ConvexBody {self.name}: {self.n_vertices} vertices, area {self.area:.6g}>"


def _drop_collinear(v, rel_tol=1e-12):
    scale = np.abs(v).max() + np.ptp(v, axis=0).max()
    keep = []
    n = len(v)
    for i in range(n):
        a, b, c = v[i - 1], v[i], v[(i + 1) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cross > rel_tol * scale**2:
            keep.append(i)
    if len(keep) < 3:
        raise DegenerateInput("points are collinear")
    return v[keep]


def from_vertices(points, name="body") -> ConvexBody:
    return ConvexBody.from_vertices(points, name=name)


def support_function(body: ConvexBody, x):
    """h(x) = max_v ⟨x, v⟩ over the vertices."""
    x = np.asarray(x, dtype=float)
    return np.max(x @ body.vertices.T, axis=-1)


def gauge(body: ConvexBody, x):
    """Minkowski functional K°(x) = max_i ⟨ν_i, x⟩ / b_i.

    The origin must be an interior point of ``body``.
    """
    b = body.offsets
    if np.min(b) <= 1e-12 * body.scale:
        raise BadBody("gauge needs the origin in the interior of the body")
    x = np.asarray(x, dtype=float)
    return np.maximum(np.max(x @ body.normals.T / b, axis=-1), 0.0)


def anisotropic_distance(body: ConvexBody, norm, x):
    """d_F(x) = inf over boundary points y of F°(x - y), for x in the body."""
    x = np.asarray(x, dtype=float)
    slack = body.offsets - x @ body.normals.T
    if np.any(slack < -1e-12 * body.scale):
        raise OutsideBody("anisotropic distance is defined for points of the body")
    return np.maximum(np.min(slack / norm(body.normals), axis=-1), 0.0)


def anisotropic_inradius(body: ConvexBody, norm):
    """Largest t such that a Wulff shape W_t(x) fits in the body.

    Returns ``(R_F, centre)``.  When the optimal centres form a segment, the
    midpoint of that segment is returned.
    """
    nu, b = body.normals, body.offsets
    fnu = np.asarray(norm(nu))
    a_ub = np.column_stack([nu, fnu])
    opts = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    res = linprog(
        [0.0, 0.0, -1.0],
        A_ub=a_ub,
        b_ub=b,
        bounds=[(None, None), (None, None), (0, None)],
        method="highs",
        options=opts,
    )
    if res.status != 0:
        raise BadBody(f"inradius LP failed: {res.message}")
    t_star = float(res.x[2])
    # optimal centres: {x : ⟨ν_i,x⟩ ≤ b_i - t* F(ν_i)}, possibly a segment
    shrink = b - (t_star - 1e-10 * body.scale) * fnu
    ends = []
    for c in ([1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]):
        r = linprog(c, A_ub=nu, b_ub=shrink, bounds=[(None, None)] * 2, method="highs", options=opts)
        ends.append(r.x if r.status == 0 else res.x[:2])
    ends = np.array(ends)
    span_x = abs(ends[0, 0] - ends[1, 0])
    span_y = abs(ends[2, 1] - ends[3, 1])
    centre = 0.5 * (ends[0] + ends[1]) if span_x >= span_y else 0.5 * (ends[2] + ends[3])
    return t_star, centre


# -- shape generators -----------------------------------------------------------


def make_square(half_side=1.0):
    s = float(half_side)
    return ConvexBody([[-s, -s], [s, -s], [s, s], [-s, s]], name=f"square({2 * s:g})")


def make_rectangle(half_width, half_height, name=None):
    w, h = float(half_width), float(half_height)
    return ConvexBody(
        [[-w, -h], [w, -h], [w, h], [-w, h]], name=name or f"rectangle({2 * w:g}x{2 * h:g})"
    )


def make_thinning_rectangle(eps, a=1.0):
    """]-ε, ε[ × ]-a, a[."""
    if not 0.0 < eps < a:
        raise BadParameter(f"need 0 < eps < a, got eps={eps}, a={a}")
    return make_rectangle(eps, a, name=f"rect(eps={eps:g},a={a:g})")


def henrot_parameters(a):
    """Closed-form data of the thinning isosceles triangle τ_a.

    The triangle has its base on the x-axis and each side tangent to the
    ellipse x²/(1-a²) + (y-a)²/a² = 1 at (0,0) and (±a, y_a).
    """
    if not 0.0 < a < 1.0 / math.sqrt(2.0):
        raise BadParameter(f"need 0 < a < 1/sqrt(2), got {a}")
    y_a = a + a * math.sqrt((1.0 - 2.0 * a * a) / (1.0 - a * a))
    height = y_a + a**4 / ((1.0 - a * a) * (y_a - a))
    half_base = a + y_a * (y_a - a) * (1.0 - a * a) / a**3
    b = 2.0 * half_base
    area = 0.5 * b * height
    perimeter = b + math.sqrt(4.0 * height**2 + b * b)
    return {
        "a": a,
        "y_a": y_a,
        "height": height,
        "half_base": half_base,
        "area": area,
        "perimeter": perimeter,
        "inradius": 2.0 * area / perimeter,
        "ellipse_max": a * a * (1.0 - a * a) / 2.0,
    }


def make_henrot_triangle(a, n_ellipse=720):
    """Return ``(tau_a, E_a)``: the triangle and a polygon inscribed in the ellipse."""
    par = henrot_parameters(a)
    v1 = [0.0, par["height"]]
    v2 = [par["half_base"], 0.0]
    v3 = [-par["half_base"], 0.0]
    tau = ConvexBody([v3, v2, v1], name=f"henrot(a={a:g})")
    theta = 2.0 * np.pi * np.arange(n_ellipse) / n_ellipse
    ell = np.column_stack(
        [math.sqrt(1.0 - a * a) * np.cos(theta), a + a * np.sin(theta)]
    )
    return tau, ConvexBody.from_vertices(ell, name=f"ellipse(a={a:g})")


def random_convex_body(seed=0, n_min=8, n_max=20, radius=1.0):
    """Convex hull of 8-20 uniform points in a disk (seeded, deterministic)."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    r = radius * np.sqrt(rng.random(n))
    th = 2.0 * np.pi * rng.random(n)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    return ConvexBody.from_vertices(pts, name=f"random(seed={seed},n={n})")


# -- plain-text body files ------------------------------------------------------


def save_body(body: ConvexBody, path):
    lines = [str(body.n_vertices)] + [f"{x:.17g} {y:.17g}" for x, y in body.vertices]
    Path(path).write_text("\n".join(lines) + "\n")


def load_body(path, name=None) -> ConvexBody:
    """Read the ``nv`` / ``x y`` body format."""
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    nv = int(rows[0][0])
    if len(rows) - 1 < nv:
        raise BadParameter(f"{path}: expected {nv} vertex lines, found {len(rows) - 1}")
    pts = np.array([[float(r[0]), float(r[1])] for r in rows[1 : nv + 1]])
    return ConvexBody.from_vertices(pts, name=name or Path(path).stem)
