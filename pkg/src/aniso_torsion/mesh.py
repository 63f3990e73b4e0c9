"""Triangulations of convex polygons for the P1 solver.

Three generators:

* ``triangulate``  quality Delaunay refinement (Shewchuk's Triangle) with a
  minimum-angle and an area constraint, for bodies of moderate aspect ratio;
* ``column_mesh``  a structured mesh of stations across a long axis, for
  thinning rectangles and triangles where isotropic meshes would need
  millions of nodes;
* ``refine``       uniform red refinement; the refined P1 space contains the
  coarse one, so discrete rigidities increase monotonically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import triangle as shewchuk

from .convex_geometry import ConvexBody
from .errors import BadParameter, DegenerateInput


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_mask: np.ndarray
    h: float

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        tris = np.array(self.triangles, dtype=np.int64)
        mask = np.array(self.boundary_mask, dtype=bool)
        if nodes.ndim != 2 or tris.ndim != 2 or tris.shape[1] != 3 or mask.shape != (len(nodes),):
            raise DegenerateInput("malformed mesh arrays")
        for arr in (nodes, tris, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "boundary_mask", mask)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def dim(self):
        return self.nodes.shape[1]

    @cached_property
    def signed_areas(self):
        p = self.nodes[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self):
        return self.signed_areas

    @cached_property
    def hat_gradients(self):
        """(m, 3, 2): constant gradient of each vertex hat function per triangle."""
        p = self.nodes[self.triangles]
        # ∇φ_i = rot90(x_k - x_j) / (2|T|) for (i, j, k) cyclic
        opp = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
        rot = np.stack([-opp[..., 1], opp[..., 0]], axis=-1)
        return rot / (2.0 * self.signed_areas[:, None, None])

    @cached_property
    def lumped_mass(self):
        """∫φ_i, so that ∫u = lumped_mass · u exactly for P1 functions."""
        m = np.zeros(self.n_nodes)
        np.add.at(m, self.triangles.ravel(), np.repeat(self.areas / 3.0, 3))
        return m

    @cached_property
    def interior(self):
        return np.flatnonzero(~self.boundary_mask)

    @cached_property
    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def edge_lengths(self):
        p = self.nodes[self.triangles]
        return np.linalg.norm(np.roll(p, -1, axis=1) - p, axis=2)

    @property
    def max_edge(self):
        return float(self.edge_lengths.max())

    @cached_property
    def angles(self):
        """(m, 3) interior angles in degrees, angle at each vertex."""
        p = self.nodes[self.triangles]
        a = np.roll(p, -1, axis=1) - p
        b = np.roll(p, 1, axis=1) - p
        cos = np.einsum("tij,tij->ti", a, b) / (
            np.linalg.norm(a, axis=2) * np.linalg.norm(b, axis=2)
        )
        return np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))

    @property
    def min_angle(self):
        return float(self.angles.min())

    @property
    def total_area(self):
        return float(self.areas.sum())

    def scaled(self, t):
        return Mesh(self.nodes * t, self.triangles, self.boundary_mask, self.h * t)

    def transformed(self, A, shift=(0.0, 0.0)):
        """Image under x -> A x + shift; orientation is kept positive."""
        A = np.asarray(A, dtype=float)
        tris = self.triangles if np.linalg.det(A) > 0 else self.triangles[:, ::-1]
        return Mesh(self.nodes @ A.T + np.asarray(shift), tris, self.boundary_mask, self.h)

    def validate(self, min_area=1e-14, min_angle=None):
        if np.any(self.areas < min_area):
            raise DegenerateInput(f"triangle area below {min_area}: {self.areas.min():.3g}")
        if min_angle is not None and self.min_angle < min_angle - 1e-9:
            raise DegenerateInput(f"minimum angle {self.min_angle:.3f} < {min_angle}")
        return self

    def __repr__(self):
        return f"<Mesh {self.n_nodes} nodes, {self.n_triangles} triangles, h={self.h:.4g}>"


def _subdivided_boundary(body, h):
    pts = []
    for v, e, length in zip(body.vertices, body.edges, body.edge_lengths):
        k = max(1, math.ceil(length / h - 1e-9))
        t = np.arange(k) / k
        pts.append(v + t[:, None] * e)
    pts = np.concatenate(pts)
    n = len(pts)
    segs = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return pts, segs


def triangulate(body: ConvexBody, h: float, min_angle: float = 20.0, max_rounds: int = 8) -> Mesh:
    """Conforming quality mesh of ``body`` with target edge length ``h``.

    Guarantees: boundary nodes on the polygon, every interior angle at least
    ``min_angle`` degrees, every edge at most 1.5 h.  Deterministic.
    """
    if not (h > 0 and h < body.perimeter / 8.0):
        raise BadParameter(f"h must lie in (0, perimeter/8 = {body.perimeter / 8:.4g}), got {h}")
    pts, segs = _subdivided_boundary(body, h)
    max_area = math.sqrt(3.0) / 4.0 * h * h
    out = shewchuk.triangulate(
        {"vertices": pts, "segments": segs}, f"pq{min_angle:g}a{max_area:.17g}Q"
    )
    for _ in range(max_rounds):
        nodes, tris = out["vertices"], out["triangles"]
        p = nodes[tris]
        longest = np.linalg.norm(np.roll(p, -1, axis=1) - p, axis=2).max(axis=1)
        bad = longest > 1.5 * h
        if not bad.any():
            break
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        limits = np.where(bad, 0.5 * area, max_area)
        out = shewchuk.triangulate(
            {
                "vertices": nodes,
                "triangles": tris,
                "segments": out["segments"],
                "triangle_max_area": limits,
                "vertex_markers": out["vertex_markers"],
                "segment_markers": out["segment_markers"],
            },
            f"rpq{min_angle:g}aQ",
        )
    nodes = out["vertices"]
    tris = out["triangles"]
    mask = out["vertex_markers"].ravel() != 0
    # snap boundary nodes onto their edge to remove round-off drift
    nodes = _snap_to_boundary(body, nodes, mask)
    tris = _orient(nodes, tris)
    return Mesh(nodes, tris, mask, float(h))


def _snap_to_boundary(body, nodes, mask):
    nodes = nodes.copy()
    bn = nodes[mask]
    dist = body.offsets - bn @ body.normals.T
    k = np.argmin(np.abs(dist), axis=1)
    bn += dist[np.arange(len(bn)), k][:, None] * body.normals[k]
    nodes[mask] = bn
    return nodes


def _orient(nodes, tris):
    p = nodes[tris]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) < 0
    tris = tris.copy()
    tris[neg] = tris[neg][:, ::-1]
    return tris


def _section(body, x):
    """(y_lo, y_hi) of the vertical chord of ``body`` at abscissa x."""
    nu, b = body.normals, body.offsets
    up = nu[:, 1] > 1e-14
    lo = nu[:, 1] < -1e-14
    y_hi = np.min((b[up, None] - nu[up, 0, None] * x) / nu[up, 1, None], axis=0)
    y_lo = np.max((b[lo, None] - nu[lo, 0, None] * x) / nu[lo, 1, None], axis=0)
    return y_lo, np.maximum(y_hi, y_lo)


def column_mesh(body: ConvexBody, stations, ny: int, axis: int = 0) -> Mesh:
    """Structured mesh of ``ny`` cells across each chord at the given stations.

    ``stations`` are abscissae along ``axis`` (0: x, 1: y); the body's extreme
    coordinates and every vertex coordinate are added, so the mesh covers the
    body exactly.  Chords of zero length collapse to a single node.
    """
    if ny < 2:
        raise BadParameter("ny must be at least 2")
    if axis == 1:
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        flipped = ConvexBody.from_vertices(body.vertices[:, ::-1])
        m = column_mesh(flipped, stations, ny, axis=0)
        return m.transformed(swap)
    vx = body.vertices[:, 0]
    x0, x1 = vx.min(), vx.max()
    xs = np.concatenate([np.asarray(stations, dtype=float), vx, [x0, x1]])
    xs = np.unique(np.clip(xs, x0, x1))
    keep = np.concatenate([[True], np.diff(xs) > 1e-12 * (x1 - x0)])
    xs = xs[keep]
    xs[-1] = x1
    y_lo, y_hi = _section(body, xs)
    height = y_hi - y_lo
    tol = 1e-12 * body.diameter
    nodes, mask, cols = [], [], []
    start = 0
    for k, (x, lo, hgt) in enumerate(zip(xs, y_lo, height)):
        if hgt <= tol:
            nodes.append([[x, lo + 0.5 * hgt]])
            mask.append([True])
            cols.append(np.array([start]))
            start += 1
            continue
        ys = lo + hgt * np.arange(ny + 1) / ny
        nodes.append(np.column_stack([np.full(ny + 1, x), ys]))
        edge = k == 0 or k == len(xs) - 1
        mk = np.zeros(ny + 1, dtype=bool)
        mk[[0, -1]] = True
        if edge:
            mk[:] = True
        mask.append(mk)
        cols.append(start + np.arange(ny + 1))
        start += ny + 1
    tris = []
    centre = 0.5 * (x0 + x1)
    for k in range(len(xs) - 1):
        a, b = cols[k], cols[k + 1]
        if len(a) == 1 and len(b) == 1:
            raise DegenerateInput("two consecutive collapsed chords")
        if len(a) == 1:
            tris.extend([a[0], b[j], b[j + 1]] for j in range(ny))
        elif len(b) == 1:
            tris.extend([a[j], b[0], a[j + 1]] for j in range(ny))
        else:
            right = 0.5 * (xs[k] + xs[k + 1]) > centre
            for j in range(ny):
                # diagonals mirror about both mid-lines so symmetric bodies get symmetric meshes
                if (j < ny // 2) == right:
                    tris.extend([[a[j], b[j], b[j + 1]], [a[j], b[j + 1], a[j + 1]]])
                else:
                    tris.extend([[a[j], b[j], a[j + 1]], [b[j], b[j + 1], a[j + 1]]])
    nodes = np.concatenate(nodes)
    tris = _orient(nodes, np.array(tris, dtype=np.int64))
    spacing = float(np.max(np.diff(xs))) if len(xs) > 1 else 0.0
    return Mesh(nodes, tris, np.concatenate(mask), max(spacing, float(height.max()) / ny))


def graded_stations(x0, x1, width, ny, features=(), max_aspect=8.0, growth=0.25, floor=None):
    """Station abscissae for ``column_mesh``.

    Spacing is at most ``max_aspect * width(x) / ny`` (cells no more elongated
    than ``max_aspect``) and grows linearly, ``ds <= d0 + growth * dist``, away
    from each feature point and from both ends, with d0 the local cross
    spacing.  ``width`` is a callable giving the chord length; ``floor``
    bounds the spacing from below so tips of vanishing width terminate.
    """
    wmax = max(width(x) for x in np.linspace(x0, x1, 257))
    floor = floor if floor is not None else 1e-3 * wmax / ny
    feats = np.array([x0, x1, *features], dtype=float)
    xs = [x0]
    x = x0
    while x < x1:
        w = max(width(x), 0.0)
        d0 = max(w / ny, floor)
        dist = np.min(np.abs(feats - x))
        ds = max(min(max_aspect * d0, d0 + growth * dist), floor)
        x = min(x + ds, x1)
        if x1 - x < 0.25 * ds:
            x = x1
        xs.append(x)
    return np.array(xs)


def refine(mesh: Mesh) -> Mesh:
    """Split every triangle into four through its edge midpoints."""
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    n = mesh.n_nodes
    mids = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    nodes = np.concatenate([mesh.nodes, mids])
    mask = np.concatenate([mesh.boundary_mask, counts == 1])
    m = len(t)
    ab, bc, ca = (n + inv[:m], n + inv[m : 2 * m], n + inv[2 * m :])
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    tris = np.concatenate(
        [
            np.column_stack([a, ab, ca]),
            np.column_stack([ab, b, bc]),
            np.column_stack([ca, bc, c]),
            np.column_stack([ab, bc, ca]),
        ]
    )
    return Mesh(nodes, tris, mask, mesh.h / 2.0)


def save_mesh(mesh: Mesh, path):
    """Plain-text block format::

        # aniso_torsion mesh v1
        nodes <n>
        <x> <y> <boundary 0|1>      (n lines)
        triangles <m>
        <i> <j> <k>                 (m lines, 0-based, counter-clockwise)
        h <h>
    """
    lines = ["# aniso_torsion mesh v1", f"nodes {mesh.n_nodes}"]
    lines += [f"{x:.17g} {y:.17g} {int(b)}" for (x, y), b in zip(mesh.nodes, mesh.boundary_mask)]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines.append(f"h {mesh.h:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path) -> Mesh:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    n = int(rows[0][1])
    node_rows = rows[1 : 1 + n]
    m = int(rows[1 + n][1])
    tri_rows = rows[2 + n : 2 + n + m]
    h = float(rows[2 + n + m][1])
    nodes = np.array([[float(r[0]), float(r[1])] for r in node_rows])
    mask = np.array([r[2] == "1" for r in node_rows])
    tris = np.array([[int(v) for v in r] for r in tri_rows], dtype=np.int64)
    return Mesh(nodes, tris, mask, h)
