"""Analytic constant-curvature factor manifolds and their charts.

Every model exposes the same vectorized surface: metric components,
Christoffel symbols, curvature evaluators, exponential map and geodesic
distance, all in a fixed chart per model:

* flat torus / Euclidean space: identity chart (periodic box for the torus),
* round sphere as a grid domain: latitude-longitude chart,
* round sphere as a flow target: stereographic chart with two tagged copies
  (projection from the south pole and from the north pole),
* hyperbolic space: Poincare ball.

A model carries a positive ``scale`` multiplying its metric, which divides
sectional curvature by the same factor and multiplies distances by its square
root.  Geodesics and the exponential map are unaffected by constant scaling,
so rescaled pairs reuse the unscaled closed forms.

Point arrays have shape (..., dim); all operations broadcast over leading
axes.  Chart tags are uint8 arrays, meaningful only for two-chart models.
"""

from __future__ import annotations

import numpy as np

from .errors import ChartDomainError, DegeneratePlaneError, InjectivityRadiusError

# Chart tags for the two stereographic copies.
TAG_SOUTH_PROJ = 0  # projection from the south pole, origin = north pole
TAG_NORTH_PROJ = 1  # projection from the north pole, origin = south pole

# A stereographic value switches to the other chart beyond this many radii.
STEREO_SWITCH = 2.0


def _norm_sq(x):
    return np.sum(x * x, axis=-1)


def _eye_like(x, dim):
    out = np.zeros(x.shape[:-1] + (dim, dim))
    idx = np.arange(dim)
    out[..., idx, idx] = 1.0
    return out


def _conformal_christoffel(c, dim):
    """Gamma^k_ij for a metric exp(2u) * delta with c = grad u.

    Gamma^k_ij = delta_kj c_i + delta_ki c_j - delta_ij c_k.
    Index order of the result is [k, i, j].
    """
    shape = c.shape[:-1]
    out = np.zeros(shape + (dim, dim, dim))
    idx = np.arange(dim)
    for k in range(dim):
        out[..., k, k, :] += c
        out[..., k, :, k] += c
        out[..., k, idx, idx] -= c[..., k][..., None]
    return out


class ManifoldModel:
    """Base class for the analytic factor manifolds."""

    kind = "abstract"
    n_charts = 1

    def __init__(self, dim: int, scale: float = 1.0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.dim = int(dim)
        self.scale = float(scale)

    # -- chart-independent constants ------------------------------------

    def sectional_curvature(self) -> float:
        """Constant sectional curvature, including the metric scale."""
        return self._base_curvature() / self.scale

    def _base_curvature(self) -> float:
        raise NotImplementedError

    # -- chart fields ----------------------------------------------------

    def chart_contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def require_in_chart(self, x):
        ok = self.chart_contains(np.asarray(x, dtype=float))
        if not np.all(ok):
            raise ChartDomainError(f"point outside {self.kind} chart domain")

    def metric(self, x) -> np.ndarray:
        raise NotImplementedError

    def christoffel(self, x) -> np.ndarray:
        raise NotImplementedError

    def conformal_factor(self, x):
        """Scalar w with metric = w * identity, or None if not conformal."""
        return None

    def grad_log_conformal(self, x):
        """Gradient of log(conformal factor)/2, used for Christoffel terms."""
        return None

    # -- geodesics ---------------------------------------------------------

    def exp(self, x, v, tags=None):
        """Batched exponential map; returns (point, tags)."""
        raise NotImplementedError

    def distance(self, x, y, tags_x=None, tags_y=None) -> np.ndarray:
        raise NotImplementedError

    # -- plumbing ----------------------------------------------------------

    def with_scale(self, scale: float) -> "ManifoldModel":
        raise NotImplementedError

    def descriptor(self) -> str:
        raise NotImplementedError

    def __repr__(self):
        return self.descriptor()

    def __eq__(self, other):
        return isinstance(other, ManifoldModel) and self.descriptor() == other.descriptor()

    def __hash__(self):
        return hash(self.descriptor())


class EuclideanSpace(ManifoldModel):
    kind = "euclidean"

    def _base_curvature(self):
        return 0.0

    def chart_contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.isfinite(x).all(axis=-1)

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale * _eye_like(x, self.dim)

    def christoffel(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (self.dim,) * 3)

    def conformal_factor(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.scale)

    def exp(self, x, v, tags=None):
        x = np.asarray(x, dtype=float)
        return x + v, tags

    def distance(self, x, y, tags_x=None, tags_y=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.sqrt(_norm_sq(x - y) * self.scale)

    def with_scale(self, scale):
        return EuclideanSpace(self.dim, scale)

    def descriptor(self):
        return f"euclidean:dim={self.dim}:scale={self.scale:.17g}"


class FlatTorus(ManifoldModel):
    """Flat torus in periodic box coordinates [0, L_i).

    Values of maps INTO a torus are stored unwrapped (universal cover); the
    winding bookkeeping lives with the grid map, not the model.
    """

    kind = "flat-torus"

    def __init__(self, dim, lengths, scale: float = 1.0):
        super().__init__(dim, scale)
        lengths = np.asarray(lengths, dtype=float).reshape(-1)
        if lengths.size != dim or np.any(lengths <= 0):
            raise ValueError("need one positive side length per dimension")
        self.lengths = lengths

    def _base_curvature(self):
        return 0.0

    def chart_contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.isfinite(x).all(axis=-1)

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale * _eye_like(x, self.dim)

    def christoffel(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (self.dim,) * 3)

    def conformal_factor(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.scale)

    def wrap(self, x):
        return np.mod(x, self.lengths)

    def exp(self, x, v, tags=None):
        # Unwrapped representative; callers that need box coordinates wrap.
        x = np.asarray(x, dtype=float)
        return x + v, tags

    def distance(self, x, y, tags_x=None, tags_y=None):
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        d = d - self.lengths * np.round(d / self.lengths)
        return np.sqrt(_norm_sq(d) * self.scale)

    def with_scale(self, scale):
        return FlatTorus(self.dim, self.lengths, scale)

    def descriptor(self):
        ls = ",".join(f"{v:.17g}" for v in self.lengths)
        return f"flat-torus:dim={self.dim}:lengths={ls}:scale={self.scale:.17g}"


class RoundSphere(ManifoldModel):
    """Round sphere of radius r, in one of two charts.

    chart="latlong" (dim 2 only) is the grid-domain chart (theta, phi) with
    singular pole rows; chart="stereographic" (any dim) is the two-chart
    target atlas with metric 4 r^4 / (r^2 + |x|^2)^2 * identity in both
    copies and transition x' = r^2 x / |x|^2.
    """

    kind = "sphere"

    def __init__(self, dim, radius: float, scale: float = 1.0, chart: str = "stereographic"):
        super().__init__(dim, scale)
        if radius <= 0:
            raise ValueError("radius must be positive")
        if chart not in ("latlong", "stereographic"):
            raise ValueError(f"unknown sphere chart '{chart}'")
        if chart == "latlong" and dim != 2:
            raise ValueError("latlong chart requires dim = 2")
        self.radius = float(radius)
        self.chart = chart

    @property
    def n_charts(self):
        return 2 if self.chart == "stereographic" else 1

    def _base_curvature(self):
        return 1.0 / self.radius ** 2

    # -- latlong chart ---------------------------------------------------

    def _latlong_metric(self, x):
        theta = x[..., 0]
        g = np.zeros(x.shape[:-1] + (2, 2))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = np.sin(theta) ** 2
        return self.scale * self.radius ** 2 * g

    def _latlong_christoffel(self, x):
        theta = x[..., 0]
        out = np.zeros(x.shape[:-1] + (2, 2, 2))
        sin, cos = np.sin(theta), np.cos(theta)
        out[..., 0, 1, 1] = -sin * cos
        with np.errstate(divide="ignore", invalid="ignore"):
            cot = np.where(sin != 0.0, cos / sin, 0.0)
        out[..., 1, 0, 1] = cot
        out[..., 1, 1, 0] = cot
        return out

    def _latlong_to_ambient(self, x):
        theta, phi = x[..., 0], x[..., 1]
        st = np.sin(theta)
        return self.radius * np.stack(
            [st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1
        )

    # -- stereographic chart ----------------------------------------------

    def _stereo_w(self, x):
        r2 = self.radius ** 2
        return 4.0 * r2 * r2 / (r2 + _norm_sq(x)) ** 2

    def _stereo_to_ambient(self, x, tags):
        r = self.radius
        d = r * r + _norm_sq(x)
        planar = 2.0 * r * r * x / d[..., None]
        z = r * (r * r - _norm_sq(x)) / d
        if tags is not None:
            z = np.where(np.asarray(tags) == TAG_NORTH_PROJ, -z, z)
        return np.concatenate([planar, z[..., None]], axis=-1)

    def _stereo_from_ambient(self, p, tags):
        r = self.radius
        planar, z = p[..., :-1], p[..., -1]
        sign = np.where(np.asarray(tags) == TAG_NORTH_PROJ, -1.0, 1.0)
        return r * planar / (r + sign * z)[..., None]

    def _stereo_jacobian_apply(self, x, v, tags):
        """Push a chart tangent vector to the ambient embedding."""
        r = self.radius
        d = (r * r + _norm_sq(x))[..., None]
        xv = np.sum(x * v, axis=-1)[..., None]
        planar = 2.0 * r * r * (v / d - 2.0 * x * xv / d ** 2)
        z = (-4.0 * r ** 3 * xv / d ** 2)[..., 0]
        if tags is not None:
            z = np.where(np.asarray(tags) == TAG_NORTH_PROJ, -z, z)
        return np.concatenate([planar, z[..., None]], axis=-1)

    def transition(self, x):
        """Map chart values to the opposite stereographic chart."""
        n2 = _norm_sq(x)[..., None]
        return self.radius ** 2 * x / n2

    # -- shared surface ----------------------------------------------------

    def chart_contains(self, x):
        x = np.asarray(x, dtype=float)
        if self.chart == "latlong":
            theta = x[..., 0]
            return (theta >= 0.0) & (theta <= np.pi)
        return np.isfinite(x).all(axis=-1)

    def is_pole(self, x):
        theta = np.asarray(x, dtype=float)[..., 0]
        return (theta == 0.0) | (theta == np.pi)

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        if self.chart == "latlong":
            return self._latlong_metric(x)
        w = self.scale * self._stereo_w(x)
        return w[..., None, None] * _eye_like(x, self.dim)

    def christoffel(self, x):
        x = np.asarray(x, dtype=float)
        if self.chart == "latlong":
            return self._latlong_christoffel(x)
        c = self.grad_log_conformal(x)
        return _conformal_christoffel(c, self.dim)

    def conformal_factor(self, x):
        if self.chart == "latlong":
            return None
        x = np.asarray(x, dtype=float)
        return self.scale * self._stereo_w(x)

    def grad_log_conformal(self, x):
        if self.chart == "latlong":
            return None
        x = np.asarray(x, dtype=float)
        return -2.0 * x / (self.radius ** 2 + _norm_sq(x))[..., None]

    def to_ambient(self, x, tags=None):
        x = np.asarray(x, dtype=float)
        if self.chart == "latlong":
            return self._latlong_to_ambient(x)
        return self._stereo_to_ambient(x, tags)

    def _latlong_exp(self, x, v):
        r = self.radius
        theta, phi = x[..., 0], x[..., 1]
        st, ct = np.sin(theta), np.cos(theta)
        sp, cp = np.sin(phi), np.cos(phi)
        e_theta = r * np.stack([ct * cp, ct * sp, -st], axis=-1)
        e_phi = r * np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1)
        vv = v[..., 0:1] * e_theta + v[..., 1:2] * e_phi
        p = self._latlong_to_ambient(x)
        ell = np.sqrt(_norm_sq(vv))
        if np.any(ell >= np.pi * r):
            raise InjectivityRadiusError("geodesic step reaches the antipode")
        small = ell < 1e-300
        ell_safe = np.where(small, 1.0, ell)[..., None]
        ang = (ell / r)[..., None]
        p_new = np.cos(ang) * p + np.sin(ang) * r * (vv / ell_safe)
        p_new = np.where(small[..., None], p, p_new)
        theta_new = np.arccos(np.clip(p_new[..., 2] / r, -1.0, 1.0))
        phi_new = np.mod(np.arctan2(p_new[..., 1], p_new[..., 0]), 2.0 * np.pi)
        return np.stack([theta_new, phi_new], axis=-1)

    def exp(self, x, v, tags=None):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.chart == "latlong":
            return self._latlong_exp(x, v), tags
        r = self.radius
        p = self._stereo_to_ambient(x, tags)
        vv = self._stereo_jacobian_apply(x, v, tags)
        ell = np.sqrt(_norm_sq(vv))  # unscaled metric norm of v
        if np.any(ell >= np.pi * r):
            raise InjectivityRadiusError("geodesic step reaches the antipode")
        small = ell < 1e-300
        ell_safe = np.where(small, 1.0, ell)[..., None]
        direction = vv / ell_safe
        ang = (ell / r)[..., None]
        p_new = np.cos(ang) * p + np.sin(ang) * r * direction
        p_new = np.where(small[..., None], p, p_new)
        tags = np.zeros(x.shape[:-1], dtype=np.uint8) if tags is None else np.asarray(tags).copy()
        x_new = self._stereo_from_ambient(p_new, tags)
        # Automatic chart rotation away from the far side of the projection.
        far = np.sqrt(_norm_sq(x_new)) > STEREO_SWITCH * r
        if np.any(far):
            flipped = np.where(far, 1 - tags, tags).astype(np.uint8)
            x_new = np.where(far[..., None], self._stereo_from_ambient(p_new, flipped), x_new)
            tags = flipped
        return x_new, tags

    def distance(self, x, y, tags_x=None, tags_y=None):
        p = self.to_ambient(np.asarray(x, dtype=float), tags_x)
        q = self.to_ambient(np.asarray(y, dtype=float), tags_y)
        return self.ambient_distance(p, q)

    def ambient_distance(self, p, q):
        chord = np.sqrt(_norm_sq(p - q))
        ang = 2.0 * np.arcsin(np.clip(chord / (2.0 * self.radius), 0.0, 1.0))
        return self.radius * ang * np.sqrt(self.scale)

    def with_scale(self, scale):
        return RoundSphere(self.dim, self.radius, scale, self.chart)

    def descriptor(self):
        return (f"sphere:dim={self.dim}:radius={self.radius:.17g}"
                f":chart={self.chart}:scale={self.scale:.17g}")


class HyperbolicSpace(ManifoldModel):
    """Hyperbolic space of curvature -c (c > 0) in the Poincare ball chart.

    The chart metric is 4 / (c (1 - |x|^2)^2) * identity times ``scale``.
    Geodesics use the curvature -1 hyperboloid embedding; constant rescaling
    leaves them unchanged.
    """

    kind = "hyperbolic"

    def __init__(self, dim, c: float = 1.0, scale: float = 1.0):
        super().__init__(dim, scale)
        if c <= 0:
            raise ValueError("curvature magnitude c must be positive")
        self.c = float(c)

    def _base_curvature(self):
        return -self.c

    def chart_contains(self, x):
        x = np.asarray(x, dtype=float)
        return _norm_sq(x) < 1.0

    def metric(self, x):
        w = self.conformal_factor(np.asarray(x, dtype=float))
        return w[..., None, None] * _eye_like(np.asarray(x, dtype=float), self.dim)

    def conformal_factor(self, x):
        x = np.asarray(x, dtype=float)
        n2 = _norm_sq(x)
        if np.any(n2 >= 1.0):
            raise ChartDomainError("point outside the Poincare ball")
        return self.scale * 4.0 / (self.c * (1.0 - n2) ** 2)

    def grad_log_conformal(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * x / (1.0 - _norm_sq(x))[..., None]

    def christoffel(self, x):
        return _conformal_christoffel(self.grad_log_conformal(x), self.dim)

    def _to_hyperboloid(self, x):
        s = (1.0 - _norm_sq(x))[..., None]
        t = (1.0 + _norm_sq(x))[..., None] / s
        return t[..., 0], 2.0 * x / s

    def exp(self, x, v, tags=None):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        s = (1.0 - _norm_sq(x))[..., None]
        t, big_x = self._to_hyperboloid(x)
        # Tangent push-forward for the curvature -1 normalization.
        xv = np.sum(x * v, axis=-1)[..., None]
        dt = (4.0 * xv / s ** 2)[..., 0]
        d_big = 2.0 * v / s + 4.0 * x * xv / s ** 2
        ell = np.sqrt(np.maximum(_norm_sq(d_big) - dt * dt, 0.0))
        small = ell < 1e-300
        ell_safe = np.where(small, 1.0, ell)
        ch, sh = np.cosh(ell), np.sinh(ell) / ell_safe
        t_new = ch * t + sh * dt
        big_new = ch[..., None] * big_x + sh[..., None] * d_big
        x_new = big_new / (1.0 + t_new)[..., None]
        x_new = np.where(small[..., None], x, x_new)
        return x_new, tags

    def distance(self, x, y, tags_x=None, tags_y=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        tx, bx = self._to_hyperboloid(x)
        ty, by = self._to_hyperboloid(y)
        inner = tx * ty - np.sum(bx * by, axis=-1)
        d1 = np.arccosh(np.maximum(inner, 1.0))
        return d1 / np.sqrt(self.c) * np.sqrt(self.scale)

    def with_scale(self, scale):
        return HyperbolicSpace(self.dim, self.c, scale)

    def descriptor(self):
        return f"hyperbolic:dim={self.dim}:c={self.c:.17g}:scale={self.scale:.17g}"


# -- spec-level single-point operations -------------------------------------


def metric_at(model: ManifoldModel, x) -> np.ndarray:
    """Metric components at a chart point (symmetric positive definite)."""
    x = np.asarray(x, dtype=float)
    model.require_in_chart(x)
    return model.metric(x)


def christoffel_at(model: ManifoldModel, x) -> np.ndarray:
    """Christoffel symbols Gamma^k_ij at a chart point, index order [k,i,j]."""
    x = np.asarray(x, dtype=float)
    model.require_in_chart(x)
    return model.christoffel(x)


def curvature_data_at(model: ManifoldModel, x, plane):
    """Sectional curvature of a coordinate 2-plane and the Ricci form value.

    Parameters
    ----------
    plane : pair of tangent vectors (u, v) in chart components.

    Returns
    -------
    dict with ``sectional`` (the model constant) and ``ricci``, the Ricci
    form evaluated on the first plane vector, (dim-1) * K * g(u, u).
    """
    x = np.asarray(x, dtype=float)
    model.require_in_chart(x)
    u, v = (np.asarray(w, dtype=float) for w in plane)
    g = model.metric(x)
    guu = u @ g @ u
    gvv = v @ g @ v
    guv = u @ g @ v
    gram = guu * gvv - guv * guv
    if gram <= 1e-12 * guu * gvv:
        raise DegeneratePlaneError("plane vectors are parallel")
    k = model.sectional_curvature()
    return {"sectional": k, "ricci": (model.dim - 1) * k * guu}


def exp_map(model: ManifoldModel, x, v, tag=None):
    """Geodesic exponential: gamma(1) with gamma(0)=x, gamma'(0)=v.

    Returns the chart point for single-chart models, or (point, tag) for the
    two-chart stereographic sphere.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    model.require_in_chart(x)
    if np.all(v == 0.0):
        return (x, tag) if model.n_charts > 1 else x
    tags = None
    if model.n_charts > 1:
        tags = np.asarray(tag if tag is not None else 0, dtype=np.uint8)
    y, tags_out = model.exp(x, v, tags)
    if model.n_charts > 1:
        return y, tags_out
    model.require_in_chart(y)
    return y


def parse_model(descriptor: str) -> ManifoldModel:
    """Rebuild a model from its descriptor string (inverse of .descriptor())."""
    fields = descriptor.strip().split(":")
    kind = fields[0]
    kv = {}
    for field in fields[1:]:
        key, _, val = field.partition("=")
        kv[key] = val
    dim = int(kv["dim"])
    scale = float(kv.get("scale", "1"))
    if kind == "euclidean":
        return EuclideanSpace(dim, scale)
    if kind == "flat-torus":
        lengths = [float(s) for s in kv["lengths"].split(",")]
        return FlatTorus(dim, lengths, scale)
    if kind == "sphere":
        return RoundSphere(dim, float(kv["radius"]), scale, kv.get("chart", "stereographic"))
    if kind == "hyperbolic":
        return HyperbolicSpace(dim, float(kv["c"]), scale)
    raise ValueError(f"unknown manifold kind '{kind}'")
