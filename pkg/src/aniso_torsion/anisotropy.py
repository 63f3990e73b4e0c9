"""Smooth Minkowski norms, their polars, and Wulff shapes.

A norm ``F`` acts on gradients (covectors); its polar ``F°`` measures positions.
All evaluation methods are vectorised over leading axes: an input of shape
``(..., N)`` gives an output of shape ``(...)`` (values) or ``(..., N)``
(gradients).

Four families are built in, each with a closed-form polar:

* ``EuclideanNorm``           F(ξ) = |ξ|
* ``WeightedLrNorm``          F(ξ) = (Σ w_i |ξ_i|^r)^(1/r), r > 1
* ``QuadraticNorm``           F(ξ) = sqrt(ξᵀ Q ξ), Q symmetric positive definite
* ``RotatedNorm``             F_A(ξ) = F(A ξ), A a rotation

``PolarNorm`` evaluates F° either through the closed form or by direct
maximisation of ⟨ξ, v⟩ / F(ξ) over the unit circle; the latter is the oracle
used to test the former.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BadParameter, DegenerateInput, UnsupportedDimension

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _unit_circle(n, offset=0.0):
    theta = offset + 2.0 * np.pi * np.arange(n) / n
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _golden_max(fun, lo, hi, iters=60):
    """Vectorised golden-section maximisation of ``fun`` on ``[lo, hi]``."""
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    for _ in range(iters):
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        left = fun(c) >= fun(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    x = 0.5 * (a + b)
    return x, fun(x)


class Norm:
    """Base class: a convex, even, 1-homogeneous function on R^N."""

    name: str
    kind: str
    dimension: int

    # -- subclasses implement these three -------------------------------------
    def _value(self, xi):
        raise NotImplementedError

    def _grad(self, xi):
        raise NotImplementedError

    def _hess(self, xi):
        raise NotImplementedError

    def polar(self) -> Norm:
        """Closed-form polar norm F°, itself a ``Norm``."""
        raise NotImplementedError

    # -- public API -----------------------------------------------------------
    def __call__(self, xi):
        xi = self._check(xi)
        return self._value(xi)

    def eval(self, xi):
        return self(xi)

    def grad(self, xi):
        """F_ξ(ξ). Raises ``DegenerateInput`` at ξ = 0."""
        xi = self._check(xi)
        if np.any(np.all(xi == 0.0, axis=-1)):
            raise DegenerateInput("gradient of F is undefined at the origin")
        return self._grad(xi)

    def hessian(self, xi):
        """Second derivative of F (homogeneous of degree -1)."""
        xi = self._check(xi)
        if np.any(np.all(xi == 0.0, axis=-1)):
            raise DegenerateInput("Hessian of F is undefined at the origin")
        return self._hess(xi)

    def sq_derivatives(self, g):
        """Gradient and Hessian of F(g)^2, defined everywhere.

        F^2 is 2-homogeneous, so its Hessian is 0-homogeneous and bounded;
        at g = 0 the value along e_1 is used.
        """
        g = self._check(g)
        zero = np.all(g == 0.0, axis=-1)
        safe = np.where(zero[..., None], np.eye(self.dimension)[0], g)
        f = self._value(safe)
        df = self._grad(safe)
        hf = self._hess(safe)
        d2 = 2.0 * (df[..., :, None] * df[..., None, :] + f[..., None, None] * hf)
        d1 = np.where(zero[..., None], 0.0, 2.0 * f[..., None] * df)
        return d1, d2

    @cached_property
    def _extremes(self):
        return _direction_extremes(self)

    @property
    def a_lower(self) -> float:
        """min F on the Euclidean unit sphere."""
        return self._extremes[0]

    @property
    def b_upper(self) -> float:
        """max F on the Euclidean unit sphere."""
        return self._extremes[1]

    def _check(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.dimension:
            raise UnsupportedDimension(
                f"{self.name}: expected vectors of length {self.dimension}, got {xi.shape}"
            )
        return xi

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


@dataclass(frozen=True, eq=False, repr=False)
class EuclideanNorm(Norm):
    dimension: int = 2
    kind: str = field(default="euclidean", init=False)

    @property
    def name(self):
        return "euclidean"

    def _value(self, xi):
        return np.linalg.norm(xi, axis=-1)

    def _grad(self, xi):
        return xi / np.linalg.norm(xi, axis=-1)[..., None]

    def _hess(self, xi):
        f = np.linalg.norm(xi, axis=-1)
        t = xi / f[..., None]
        eye = np.eye(self.dimension)
        return (eye - t[..., :, None] * t[..., None, :]) / f[..., None, None]

    def polar(self):
        return self


@dataclass(frozen=True, eq=False, repr=False)
class WeightedLrNorm(Norm):
    r: float
    weights: tuple
    kind: str = field(default="weighted-lr", init=False)

    def __post_init__(self):
        if not self.r > 1.0 or not math.isfinite(self.r):
            raise BadParameter(f"lr exponent must lie in (1, inf), got {self.r}")
        w = tuple(float(x) for x in self.weights)
        if len(w) < 2 or min(w) <= 0.0:
            raise BadParameter("lr weights must be positive, one per coordinate (N >= 2)")
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self):
        return len(self.weights)

    @property
    def name(self):
        return f"lr:r={self.r:g},w=" + ",".join(f"{w:g}" for w in self.weights)

    @property
    def _w(self):
        return np.asarray(self.weights)

    def _value(self, xi):
        scale = np.max(np.abs(xi), axis=-1)
        safe = np.where(scale > 0, scale, 1.0)
        t = np.abs(xi) / safe[..., None]
        return scale * np.sum(self._w * t**self.r, axis=-1) ** (1.0 / self.r)

    def _grad(self, xi):
        t = xi / self._value(xi)[..., None]
        return self._w * np.abs(t) ** (self.r - 1.0) * np.sign(t)

    def _hess(self, xi):
        f = self._value(xi)
        t = np.abs(xi) / f[..., None]
        if self.r < 2.0:
            # F is not C^2 across the coordinate axes when r < 2
            t = np.maximum(t, 1e-12)
        df = self._grad(xi)
        diag = self._w * t ** (self.r - 2.0)
        h = np.zeros(xi.shape + (self.dimension,))
        idx = np.arange(self.dimension)
        h[..., idx, idx] = diag
        h -= df[..., :, None] * df[..., None, :]
        return (self.r - 1.0) * h / f[..., None, None]

    def polar(self):
        rd = self.r / (self.r - 1.0)
        return WeightedLrNorm(rd, tuple(w ** (-1.0 / (self.r - 1.0)) for w in self.weights))


@dataclass(frozen=True, eq=False, repr=False)
class QuadraticNorm(Norm):
    Q: np.ndarray
    kind: str = field(default="quadratic", init=False)

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 2:
            raise BadParameter("Q must be a square matrix of size >= 2")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-14 * np.abs(Q).max()):
            raise BadParameter("Q must be symmetric")
        if np.linalg.eigvalsh(Q).min() <= 0.0:
            raise BadParameter("Q must be positive definite")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    @property
    def dimension(self):
        return self.Q.shape[0]

    @property
    def name(self):
        if self.dimension == 2:
            return f"quad:q11={self.Q[0, 0]:g},q12={self.Q[0, 1]:g},q22={self.Q[1, 1]:g}"
        return "quad:" + np.array2string(self.Q, separator=",").replace("\n", "")

    def _value(self, xi):
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", xi, self.Q, xi), 0.0))

    def _grad(self, xi):
        return (xi @ self.Q) / self._value(xi)[..., None]

    def _hess(self, xi):
        f = self._value(xi)
        qx = xi @ self.Q
        return (self.Q - qx[..., :, None] * qx[..., None, :] / (f * f)[..., None, None]) / f[
            ..., None, None
        ]

    def polar(self):
        return QuadraticNorm(np.linalg.inv(self.Q))

    def sq_derivatives(self, g):
        g = self._check(g)
        d2 = np.broadcast_to(2.0 * self.Q, g.shape + (self.dimension,))
        return 2.0 * g @ self.Q, d2


@dataclass(frozen=True, eq=False, repr=False)
class RotatedNorm(Norm):
    """F_A(ξ) = F(Aξ)."""

    base: Norm
    A: np.ndarray
    kind: str = field(default="rotated", init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        _check_rotation(A, self.base.dimension)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def dimension(self):
        return self.base.dimension

    @property
    def name(self):
        if self.dimension == 2:
            angle = math.atan2(self.A[1, 0], self.A[0, 0])
            return f"rot:angle={angle:.12g},base={self.base.name}"
        return f"rot:base={self.base.name}"

    def _value(self, xi):
        return self.base._value(xi @ self.A.T)

    def _grad(self, xi):
        return self.base._grad(xi @ self.A.T) @ self.A

    def _hess(self, xi):
        h = self.base._hess(xi @ self.A.T)
        return np.einsum("ki,...kl,lj->...ij", self.A, h, self.A)

    def sq_derivatives(self, g):
        g = self._check(g)
        d1, d2 = self.base.sq_derivatives(g @ self.A.T)
        return d1 @ self.A, np.einsum("ki,...kl,lj->...ij", self.A, d2, self.A)

    def polar(self):
        # (F_A)° = (F°)_A
        return RotatedNorm(self.base.polar(), self.A)


def _check_rotation(A, n):
    if A.shape != (n, n):
        raise BadParameter(f"rotation must be {n}x{n}, got {A.shape}")
    if np.abs(A.T @ A - np.eye(n)).max() > 1e-12 or abs(np.linalg.det(A) - 1.0) > 1e-12:
        raise BadParameter("matrix is not a rotation (AᵀA = I, det A = 1)")


def rotation_matrix(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotate_norm(norm: Norm, A) -> RotatedNorm:
    """Return F_A with F_A(ξ) = F(Aξ)."""
    return RotatedNorm(norm, np.asarray(A, dtype=float))


class PolarNorm:
    """The polar function F°(v) = sup_{ξ≠0} ⟨ξ, v⟩ / F(ξ).

    With ``closed_form=True`` (and a base that provides one) the polar is
    evaluated exactly; otherwise a 2-D maximisation over ``n_grid`` equally
    spaced directions followed by golden-section refinement is used. The
    fallback works for any callable 2-D norm, including another
    ``PolarNorm``, so ``PolarNorm(PolarNorm(F, closed_form=False),
    closed_form=False)`` recovers F.
    """

    kind = "polar"

    def __init__(self, base, closed_form=True, n_grid=512, rtol=1e-8):
        self.base = base
        self.dimension = base.dimension
        self.n_grid = int(n_grid)
        self.rtol = rtol
        self._closed = None
        if closed_form:
            try:
                self._closed = base.polar()
            except (AttributeError, NotImplementedError):
                self._closed = None

    @property
    def name(self):
        return f"polar({self.base.name})"

    @property
    def closed_form(self):
        return self._closed

    @cached_property
    def _grid(self):
        dirs = _unit_circle(self.n_grid)
        return dirs, 1.0 / np.asarray(self.base(dirs))

    def _maximise(self, v):
        if self.dimension != 2:
            raise UnsupportedDimension("numerical polar evaluation is implemented for N = 2")
        v = np.asarray(v, dtype=float)
        shape = v.shape[:-1]
        vf = v.reshape(-1, 2)
        dirs, inv_f = self._grid
        scores = (vf @ dirs.T) * inv_f
        k = np.argmax(scores, axis=1)
        step = 2.0 * np.pi / self.n_grid
        centre = 2.0 * np.pi * k / self.n_grid

        def ratio(theta):
            e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            return np.einsum("ij,ij->i", e, vf) / np.asarray(self.base(e))

        # bracket of one grid step either side of the best grid direction;
        # iteration count set by the requested relative tolerance on F°
        iters = max(20, int(math.ceil(math.log(max(self.rtol, 1e-16)) / math.log(_GOLDEN))) + 5)
        theta, best = _golden_max(ratio, centre - step, centre + step, iters)
        best = np.maximum(best, scores[np.arange(len(k)), k])
        zero = np.all(vf == 0.0, axis=1)
        best = np.where(zero, 0.0, best)
        return best.reshape(shape), theta.reshape(shape)

    def __call__(self, v):
        if self._closed is not None:
            return self._closed(v)
        return self._maximise(v)[0]

    def eval(self, v):
        return self(v)

    def grad(self, v):
        if self._closed is not None:
            return self._closed.grad(v)
        v = np.asarray(v, dtype=float)
        if np.any(np.all(v == 0.0, axis=-1)):
            raise DegenerateInput("gradient of F° is undefined at the origin")
        _, theta = self._maximise(v)
        e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        # envelope theorem: the maximiser ξ* gives ∇F°(v) = ξ*/F(ξ*)
        return e / np.asarray(self.base(e))[..., None]

    def __repr__(self):
        return f"<PolarNorm {self.name} closed_form={self._closed is not None}>"


def polar_eval(polar: PolarNorm, v):
    return polar(v)


def _direction_extremes(norm, n_samples=4096):
    """(min, max) of F over the Euclidean unit sphere."""
    n = norm.dimension
    if n == 2:
        dirs = _unit_circle(n_samples)
        vals = np.asarray(norm(dirs))
        step = 2.0 * np.pi / n_samples

        def along(theta):
            return np.asarray(norm(np.stack([np.cos(theta), np.sin(theta)], axis=-1)))

        th_max = 2.0 * np.pi * np.argmax(vals) / n_samples
        th_min = 2.0 * np.pi * np.argmin(vals) / n_samples
        _, hi = _golden_max(along, np.array([th_max - step]), np.array([th_max + step]))
        _, lo = _golden_max(lambda t: -along(t), np.array([th_min - step]), np.array([th_min + step]))
        return float(min(-lo[0], vals.min())), float(max(hi[0], vals.max()))
    if isinstance(norm, QuadraticNorm):
        ev = np.linalg.eigvalsh(norm.Q)
        return float(np.sqrt(ev[0])), float(np.sqrt(ev[-1]))
    if isinstance(norm, EuclideanNorm):
        return 1.0, 1.0
    rng = np.random.default_rng(0)
    dirs = rng.standard_normal((200_000, n))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    vals = np.asarray(norm(dirs))
    return float(vals.min()), float(vals.max())


@dataclass(frozen=True)
class DualityResiduals:
    """Scale-free residuals of the identities linking F and F°.

    ``euler``            ⟨F_ξ(ξ), ξ⟩ / F(ξ) - 1
    ``polar_euler``      ⟨F°_ξ(ξ), ξ⟩ / F°(ξ) - 1
    ``polar_of_grad``    F°(F_ξ(ξ)) - 1
    ``norm_of_polar_grad``  F(F°_ξ(ξ)) - 1
    ``inversion``        |F°(ξ) F_ξ(F°_ξ(ξ)) - ξ| / |ξ|
    ``inversion_dual``   |F(ξ) F°_ξ(F_ξ(ξ)) - ξ| / |ξ|
    ``gap``              F(ξ) F°(η) - |⟨ξ, η⟩|, must be >= 0
    """

    euler: np.ndarray
    polar_euler: np.ndarray
    polar_of_grad: np.ndarray
    norm_of_polar_grad: np.ndarray
    inversion: np.ndarray
    inversion_dual: np.ndarray
    gap: np.ndarray

    def max_identity_residual(self):
        return float(
            max(
                np.max(np.abs(getattr(self, k)))
                for k in (
                    "euler",
                    "polar_euler",
                    "polar_of_grad",
                    "norm_of_polar_grad",
                    "inversion",
                    "inversion_dual",
                )
            )
        )

    def ok(self, tol=1e-8, gap_tol=1e-12):
        return self.max_identity_residual() <= tol and float(np.min(self.gap)) >= -gap_tol


def verify_duality(norm, xi, eta=None, polar=None) -> DualityResiduals:
    """Evaluate the F/F° identities at ξ (batched over leading axes).

    ``eta`` defaults to F_ξ(ξ), the direction in which the Cauchy-Schwarz type
    inequality |⟨ξ,η⟩| ≤ F(ξ)F°(η) becomes an equality.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(np.all(xi == 0.0, axis=-1)):
        raise DegenerateInput("duality identities need ξ ≠ 0")
    polar = polar if polar is not None else PolarNorm(norm)
    f = np.asarray(norm(xi))
    fo = np.asarray(polar(xi))
    df = norm.grad(xi)
    dfo = polar.grad(xi)
    mag = np.linalg.norm(xi, axis=-1)
    if eta is None:
        eta = df
    eta = np.asarray(eta, dtype=float)
    return DualityResiduals(
        euler=np.sum(df * xi, axis=-1) / f - 1.0,
        polar_euler=np.sum(dfo * xi, axis=-1) / fo - 1.0,
        polar_of_grad=np.asarray(polar(df)) - 1.0,
        norm_of_polar_grad=np.asarray(norm(dfo)) - 1.0,
        inversion=np.linalg.norm(fo[..., None] * norm.grad(dfo) - xi, axis=-1) / mag,
        inversion_dual=np.linalg.norm(f[..., None] * polar.grad(df) - xi, axis=-1) / mag,
        gap=f * np.asarray(polar(eta)) - np.abs(np.sum(xi * eta, axis=-1)),
    )


def wulff_shape(norm, R=1.0, x0=(0.0, 0.0), n_vertices=720):
    """Inscribed polygon of W_R(x0) = {x : F°(x - x0) < R}.

    Vertices are x0 + R θ_k / F°(θ_k) for equally spaced unit vectors θ_k.
    """
    from .convex_geometry import ConvexBody

    if n_vertices < 16:
        raise BadParameter(f"n_vertices must be >= 16, got {n_vertices}")
    if not R > 0:
        raise BadParameter(f"R must be positive, got {R}")
    if norm.dimension != 2:
        raise UnsupportedDimension("Wulff polygons are built in the plane only")
    polar = PolarNorm(norm)
    dirs = _unit_circle(n_vertices)
    verts = np.asarray(x0, dtype=float) + R * dirs / np.asarray(polar(dirs))[:, None]
    return ConvexBody.from_vertices(verts, name=f"wulff(R={R:g},{norm.name})")


def parse_norm(spec: str) -> Norm:
    """Build a norm from its text form.

    Grammar::

        euclidean
        lr:r=<float>,w=<float>,<float>
        quad:q11=<f>,q12=<f>,q22=<f>
        rot:angle=<radians>,base=<spec>
    """
    spec = spec.strip()
    head, _, body = spec.partition(":")
    head = head.strip().lower()
    if head in ("euclidean", "euclid", "e"):
        if body.strip():
            raise BadParameter(f"euclidean norm takes no parameters: {spec!r}")
        return EuclideanNorm()
    if head == "rot":
        pre, sep, base = body.partition("base=")
        if not sep:
            raise BadParameter(f"rot norm needs base=<spec>: {spec!r}")
        params = _parse_params(pre.rstrip(", "))
        if "angle" not in params:
            raise BadParameter(f"rot norm needs angle=<radians>: {spec!r}")
        return rotate_norm(parse_norm(base), rotation_matrix(params["angle"][0]))
    params = _parse_params(body)
    try:
        if head == "lr":
            return WeightedLrNorm(params["r"][0], tuple(params.get("w", (1.0, 1.0))))
        if head == "quad":
            q11, q12, q22 = params["q11"][0], params.get("q12", [0.0])[0], params["q22"][0]
            return QuadraticNorm(np.array([[q11, q12], [q12, q22]]))
    except KeyError as exc:
        raise BadParameter(f"missing parameter {exc} in norm spec {spec!r}") from None
    raise BadParameter(f"unknown norm kind {head!r} in {spec!r}")


def _parse_params(text):
    params = {}
    key = None
    for token in filter(None, (t.strip() for t in text.split(","))):
        try:
            if "=" in token:
                key, _, val = token.partition("=")
                key = key.strip().lower()
                params[key] = [float(val)]
            elif key is not None:
                params[key].append(float(token))
            else:
                raise ValueError(token)
        except ValueError:
            raise BadParameter(f"cannot parse norm parameter {token!r}") from None
    return params
