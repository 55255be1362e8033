"""First-order geometry of the graph of a map between factor manifolds.

The graph of f sits in the product with metric g1 - g2; its first-order
package at a node consists of the chart differential df, the pullback f*g2,
the singular-value squares lambda_i^2 (eigenvalues of f*g2 relative to g1,
sorted decreasing), the adapted orthonormal frames built from the
eigenvectors and the df image, the graph metric g1 - f*g2, and the
hyperbolic-angle factor cosh(theta) = prod (1 - lambda_i^2)^(-1/2).

Maps are sampled on structured grids over the domain chart: periodic boxes
for flat tori, latitude-longitude (with singular pole rows) for spheres.
Finite differences are 4th-order centered on periodic axes and drop to
2nd-order symmetric stencils on the rows adjacent to the poles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotSpacelikeError, PoleRowError
from .manifold import FlatTorus, ManifoldModel, RoundSphere, parse_model

# Below this, an eigenvalue of f*g2 counts as rank-deficient and its frame
# vector comes from completion rather than from the df image.
RANK_EPS = 1e-14

# Default spacelike margin: lambda_1^2 <= 1 - GUARD_DEFAULT.
GUARD_DEFAULT = 1e-3


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


class Grid:
    """Structured node lattice over the domain chart.

    Periodic grids cover a torus box with ``resolution`` nodes per axis.
    Latitude-longitude grids get ``resolution = (n_theta, n_phi)`` and carry
    ``n_theta + 1`` rows including the two singular pole rows; geometry is
    evaluated on the interior rows only.
    """

    def __init__(self, domain: ManifoldModel, resolution):
        resolution = tuple(int(r) for r in np.atleast_1d(resolution))
        if any(r < 8 for r in resolution):
            raise ValueError("resolution must be >= 8 per axis")
        self.domain = domain
        self.resolution = resolution
        if isinstance(domain, FlatTorus):
            if len(resolution) != domain.dim:
                raise ValueError("resolution rank must match domain dimension")
            self.kind = "periodic"
            self.shape = resolution
            self.spacings = tuple(domain.lengths[a] / resolution[a]
                                  for a in range(domain.dim))
            axes = [np.arange(n) * h for n, h in zip(resolution, self.spacings)]
        elif isinstance(domain, RoundSphere) and domain.chart == "latlong":
            if len(resolution) != 2:
                raise ValueError("latlong grids need (n_theta, n_phi)")
            self.kind = "latlong"
            n_theta, n_phi = resolution
            self.shape = (n_theta + 1, n_phi)
            self.spacings = (np.pi / n_theta, 2.0 * np.pi / n_phi)
            axes = [np.arange(n_theta + 1) * self.spacings[0],
                    np.arange(n_phi) * self.spacings[1]]
        else:
            raise ValueError(f"unsupported grid domain {domain.descriptor()}")
        self.m = len(self.shape)
        mesh = np.meshgrid(*axes, indexing="ij")
        self.points = np.stack(mesh, axis=-1)
        self.cell_measure = float(np.prod(self.spacings))
        self._static = None

    # -- active region ---------------------------------------------------

    @property
    def active_slice(self):
        if self.kind == "latlong":
            return (slice(1, -1),)
        return (slice(None),)

    @property
    def active_shape(self):
        if self.kind == "latlong":
            return (self.shape[0] - 2,) + self.shape[1:]
        return self.shape

    def active_points(self):
        return self.points[self.active_slice]

    def is_pole_node(self, node) -> bool:
        return self.kind == "latlong" and node[0] in (0, self.shape[0] - 1)

    def core_mask(self, band: int = 3):
        """Active-node mask excluding ``band`` rows next to each pole."""
        mask = np.ones(self.active_shape, dtype=bool)
        if self.kind == "latlong":
            mask[:band] = False
            mask[-band:] = False
        return mask

    # -- cached domain-static geometry ------------------------------------

    def static_fields(self):
        """Domain metric data on active nodes (cached; the domain is static)."""
        if self._static is None:
            pts = self.active_points()
            g1 = self.domain.metric(pts)
            gamma1 = self.domain.christoffel(pts)
            if not np.any(gamma1):
                gamma1 = None
            self._static = {
                "g1": g1,
                "g1_chol": np.linalg.cholesky(g1),
                "sqrt_det_g1": np.sqrt(np.linalg.det(g1)),
                "gamma1": gamma1,
                "inv_diag": 1.0 / np.einsum("...aa->...a", g1),
            }
        return self._static

    def quad_weights(self):
        """Chart-cell quadrature weights on active nodes.

        Periodic axes use the exact rectangle rule; on latlong grids the
        pole rows carry zero measure and interior rows a full cell, which is
        the trapezoid rule in theta for densities vanishing at the poles.
        """
        return np.full(self.active_shape, self.cell_measure)


# ---------------------------------------------------------------------------
# finite-difference stencils
# ---------------------------------------------------------------------------


def _pshift(u, axis, k, wvec=None):
    """Periodic shift u_{i+k} with winding correction on wrapped entries."""
    out = np.roll(u, -k, axis=axis)
    if wvec is not None and k != 0:
        sl = [slice(None)] * out.ndim
        if k > 0:
            sl[axis] = slice(-k, None)
            out[tuple(sl)] = out[tuple(sl)] + wvec
        else:
            sl[axis] = slice(None, -k)
            out[tuple(sl)] = out[tuple(sl)] - wvec
    return out


def d1_periodic(u, axis, h, wvec=None):
    """4th-order centered first derivative along a periodic axis.

    Grouped as symmetric differences so constant data differentiates to
    exactly zero in floating point.
    """
    s1 = _pshift(u, axis, 1, wvec) - _pshift(u, axis, -1, wvec)
    s2 = _pshift(u, axis, 2, wvec) - _pshift(u, axis, -2, wvec)
    return (8.0 * s1 - s2) / (12.0 * h)


def d2_periodic(u, axis, h, wvec=None):
    """4th-order centered second derivative along a periodic axis."""
    c1 = (_pshift(u, axis, 1, wvec) - u) + (_pshift(u, axis, -1, wvec) - u)
    c2 = (_pshift(u, axis, 2, wvec) - u) + (_pshift(u, axis, -2, wvec) - u)
    return (16.0 * c1 - c2) / (12.0 * h * h)


def d1_theta(u, h):
    """First theta-derivative on interior rows of a pole-bearing array.

    Input has pole rows 0 and -1; output covers rows 1..R-2.  Rows adjacent
    to the poles use the symmetric 2nd-order stencil through the pole value.
    """
    out = np.empty_like(u[1:-1])
    out[1:-1] = (8.0 * (u[3:-1] - u[1:-3]) - (u[4:] - u[:-4])) / (12.0 * h)
    out[0] = (u[2] - u[0]) / (2.0 * h)
    out[-1] = (u[-1] - u[-3]) / (2.0 * h)
    return out


def d2_theta(u, h):
    out = np.empty_like(u[1:-1])
    mid = u[2:-2]
    c1 = (u[3:-1] - mid) + (u[1:-3] - mid)
    c2 = (u[4:] - mid) + (u[:-4] - mid)
    out[1:-1] = (16.0 * c1 - c2) / (12.0 * h * h)
    out[0] = ((u[2] - u[1]) + (u[0] - u[1])) / (h * h)
    out[-1] = ((u[-1] - u[-2]) + (u[-3] - u[-2])) / (h * h)
    return out


def d1_active_theta(u, h):
    """Theta-derivative of a field living on interior rows only.

    Used for derived fields (fluxes, cosh theta) that are undefined at the
    poles.  End rows fall back to one-sided differences; callers should
    treat them through the validity mask returned alongside.
    """
    out = np.empty_like(u)
    valid = np.ones(u.shape[0], dtype=bool)
    if u.shape[0] >= 6:
        out[2:-2] = (-u[4:] + 8.0 * u[3:-1] - 8.0 * u[1:-3] + u[:-4]) / (12.0 * h)
    out[1] = (u[2] - u[0]) / (2.0 * h)
    out[-2] = (u[-1] - u[-3]) / (2.0 * h)
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    out[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    valid[0] = valid[-1] = False
    return out, valid


# ---------------------------------------------------------------------------
# grid maps
# ---------------------------------------------------------------------------


@dataclass
class GridMap:
    """Discretized map f: domain -> target sampled on a structured grid.

    ``values`` holds per-node chart coordinates of f in the node's active
    target chart (shape grid.shape + (n,)); ``tags`` the active chart index
    (all zero for single-chart targets).  ``winding`` applies to flat-torus
    targets only: values live on the universal cover and crossing periodic
    domain axis a shifts them by winding[:, a].
    """

    domain: ManifoldModel
    target: ManifoldModel
    grid: Grid
    values: np.ndarray
    tags: np.ndarray = None
    winding: np.ndarray = None

    def __post_init__(self):
        n = self.target.dim
        expect = self.grid.shape + (n,)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != expect:
            raise ValueError(f"values shape {self.values.shape} != {expect}")
        if self.tags is None:
            self.tags = np.zeros(self.grid.shape, dtype=np.uint8)
        self.tags = np.asarray(self.tags, dtype=np.uint8)
        if self.winding is not None:
            self.winding = np.asarray(self.winding, dtype=float)
            if self.winding.shape != (n, self.grid.m):
                raise ValueError("winding must have shape (n, m)")
            if not isinstance(self.target, FlatTorus) and np.any(self.winding):
                raise ValueError("winding requires a flat-torus target")
            if self.grid.kind != "periodic" and np.any(self.winding):
                raise ValueError("winding requires a periodic domain grid")
            if not np.any(self.winding):
                self.winding = None

    @property
    def m(self):
        return self.grid.m

    @property
    def n(self):
        return self.target.dim

    def copy(self):
        return GridMap(self.domain, self.target, self.grid,
                       self.values.copy(), self.tags.copy(),
                       None if self.winding is None else self.winding.copy())

    def active_values(self):
        return self.values[self.grid.active_slice]

    def active_tags(self):
        return self.tags[self.grid.active_slice]

    def winding_col(self, axis):
        if self.winding is None:
            return None
        col = self.winding[:, axis]
        return col if np.any(col) else None


def _aligned_reps(fmap: GridMap):
    """Value arrays re-expressed per target chart for stencil gathering.

    Returns (reps, tags): a single representation when the target has one
    chart or all nodes share a tag, otherwise one array per chart with
    off-chart nodes mapped through the transition (clamped away from its
    singular point; those entries are never selected).
    """
    if fmap.target.n_charts == 1:
        return [fmap.values], None
    tags = fmap.tags
    if np.all(tags == tags.flat[0]):
        return [fmap.values], None
    r = fmap.target.radius
    n2 = np.sum(fmap.values ** 2, axis=-1, keepdims=True)
    other = r * r * fmap.values / np.maximum(n2, (0.05 * r) ** 2)
    reps = []
    for chart in (0, 1):
        own = tags[..., None] == chart
        reps.append(np.where(own, fmap.values, other))
    return reps, tags


def jet_fields(fmap: GridMap):
    """First and second chart derivatives of f on active nodes.

    Returns (df, d2) with df[..., a, g] = d_a f^g and d2[..., a, b, g] the
    raw coordinate second differences (no connection terms), both in each
    node's active target chart.
    """
    reps, tags = _aligned_reps(fmap)
    outs = []
    for rep in reps:
        outs.append(_jet_of_rep(fmap, rep))
    if tags is None:
        return outs[0]
    sel = (tags[fmap.grid.active_slice] == 0)[..., None, None]
    df = np.where(sel, outs[0][0], outs[1][0])
    d2 = np.where(sel[..., None], outs[0][1], outs[1][1])
    return df, d2


def _jet_of_rep(fmap, u):
    grid = fmap.grid
    m, n = fmap.m, fmap.n
    hs = grid.spacings
    if grid.kind == "periodic":
        d1 = [d1_periodic(u, a, hs[a], fmap.winding_col(a)) for a in range(m)]
        df = np.stack(d1, axis=-2)
        d2 = np.empty(grid.active_shape + (m, m, n))
        for a in range(m):
            d2[..., a, a, :] = d2_periodic(u, a, hs[a], fmap.winding_col(a))
        for a in range(m):
            for b in range(a + 1, m):
                mixed = d1_periodic(d1[a], b, hs[b], None)
                d2[..., a, b, :] = mixed
                d2[..., b, a, :] = mixed
        return df, d2
    # latlong: theta rows with poles, periodic phi
    h_t, h_p = hs
    du_t = d1_theta(u, h_t)
    du_p_full = d1_periodic(u, 1, h_p)
    df = np.stack([du_t, du_p_full[1:-1]], axis=-2)
    d2 = np.empty(grid.active_shape + (2, 2, n))
    d2[..., 0, 0, :] = d2_theta(u, h_t)
    d2[..., 1, 1, :] = d2_periodic(u, 1, h_p)[1:-1]
    mixed = d1_theta(du_p_full, h_t)
    d2[..., 0, 1, :] = mixed
    d2[..., 1, 0, :] = mixed
    return df, d2


def differential_field(fmap: GridMap):
    """Chart differential df on active nodes, shape active + (m, n)."""
    return jet_fields(fmap)[0]


def differential(fmap: GridMap, node):
    """Per-node differential; raises PoleRowError on pole rows."""
    node = tuple(np.atleast_1d(node))
    if fmap.grid.is_pole_node(node):
        raise PoleRowError(f"node {node} lies on a singular pole row")
    df = differential_field(fmap)
    if fmap.grid.kind == "latlong":
        node = (node[0] - 1,) + node[1:]
    return df[node]


# ---------------------------------------------------------------------------
# pointwise first-order geometry
# ---------------------------------------------------------------------------

# Test hook: deliberately break the df(a_i) = -lambda_i a_{m+i} convention
# for the second frame vector.  Used by the mutation mode of the verify
# suite to demonstrate that the gradient-identity check catches sign faults.
_FRAME_SIGN_MUTATION = False


def set_frame_sign_mutation(enabled: bool):
    global _FRAME_SIGN_MUTATION
    _FRAME_SIGN_MUTATION = bool(enabled)


@dataclass
class PointGeometry:
    """First-order package at one node or a batch of nodes.

    Leading axes of every field are the batch shape.  ``frames_domain[..,i,:]``
    is the g1-orthonormal eigenvector a_i in chart components;
    ``frames_target[..,t,:]`` the completed g2-orthonormal frame, whose first
    rank vectors satisfy df(a_i) = -lambda_i * frames_target[i].  ``mu`` holds
    lambda_i^2 for frame vectors built from the df image and 0 for completed
    ones, so 1/sqrt(1 - mu) is the frame normalization factor everywhere.
    """

    df: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    pullback: np.ndarray
    pullback_on: np.ndarray
    lambda_sq: np.ndarray
    frames_domain: np.ndarray
    frames_target: np.ndarray
    mu: np.ndarray
    graph_metric: np.ndarray
    graph_metric_inv: np.ndarray = field(default=None)
    cosh_theta: np.ndarray = field(default=None)
    spacelike: np.ndarray = field(default=None)

    @property
    def m(self):
        return self.df.shape[-2]

    @property
    def n(self):
        return self.df.shape[-1]

    def require_spacelike(self):
        if not np.all(self.spacelike):
            worst = float(np.max(self.lambda_sq))
            raise NotSpacelikeError(
                f"graph metric not positive definite (max lambda^2 = {worst:.6g})")


def pullback_and_spectrum(g1, g2, df) -> PointGeometry:
    """Generalized eigen-decomposition of f*g2 with respect to g1.

    Accepts single points (shape (m, m), (n, n), (m, n)) or batches with
    matching leading axes.  Eigenvalues are sorted decreasing; frames follow
    the sign convention df(a_i) = -lambda_i a_{m+i} with Gram-Schmidt
    completion of the target frame against the df image.
    """
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    df = np.asarray(df, dtype=float)
    m, n = df.shape[-2], df.shape[-1]
    pullback = np.einsum("...ig,...gd,...jd->...ij", df, g2, df)
    chol = np.linalg.cholesky(g1)
    tmp = np.linalg.solve(chol, pullback)
    pullback_on = np.linalg.solve(chol, np.swapaxes(tmp, -1, -2))
    pullback_on = 0.5 * (pullback_on + np.swapaxes(pullback_on, -1, -2))
    w, y = np.linalg.eigh(pullback_on)
    lam = np.maximum(w[..., ::-1], 0.0)
    y = y[..., ::-1]
    vecs = np.linalg.solve(np.swapaxes(chol, -1, -2), y)
    frames_domain = np.swapaxes(vecs, -1, -2)  # rows are a_i

    img = np.einsum("...ik,...kg->...ig", frames_domain, df)  # df(a_i)
    frames_target = np.zeros(df.shape[:-2] + (n, n))
    mu = np.zeros(df.shape[:-2] + (n,))

    def g2dot(u, v):
        return np.einsum("...g,...gd,...d->...", u, g2, v)

    eye = np.eye(n)
    for t in range(n):
        if t < m:
            lam_t = lam[..., t]
            valid = lam_t >= RANK_EPS
            safe = np.sqrt(np.where(valid, lam_t, 1.0))
            cand = np.where(valid[..., None], -img[..., t, :] / safe[..., None], 0.0)
            mu[..., t] = np.where(valid, lam_t, 0.0)
        else:
            valid = np.zeros(df.shape[:-2], dtype=bool)
            cand = np.zeros(df.shape[:-2] + (n,))
        if not np.all(valid):
            fallback = np.zeros_like(cand)
            found = np.zeros(df.shape[:-2], dtype=bool)
            for j in range(n):
                trial = np.broadcast_to(eye[j], cand.shape).copy()
                for p in range(t):
                    prev = frames_target[..., p, :]
                    trial = trial - g2dot(trial, prev)[..., None] * prev
                good = (g2dot(trial, trial) > 0.25) & ~found
                fallback = np.where(good[..., None], trial, fallback)
                found = found | good
            cand = np.where(valid[..., None], cand, fallback)
        for p in range(t):
            prev = frames_target[..., p, :]
            cand = cand - g2dot(cand, prev)[..., None] * prev
        norm = np.sqrt(g2dot(cand, cand))
        frames_target[..., t, :] = cand / norm[..., None]

    if _FRAME_SIGN_MUTATION and n >= 2:
        frames_target[..., 1, :] = -frames_target[..., 1, :]

    graph_metric = g1 - pullback
    spacelike = lam[..., 0] < 1.0
    prod = np.prod(np.where(spacelike[..., None], 1.0 - lam, 1.0), axis=-1)
    cosh = np.where(spacelike, 1.0 / np.sqrt(prod), np.inf)
    ginv = None
    if np.all(spacelike):
        ginv = np.linalg.inv(graph_metric)
    return PointGeometry(
        df=df, g1=g1, g2=g2, pullback=pullback, pullback_on=pullback_on,
        lambda_sq=lam, frames_domain=frames_domain, frames_target=frames_target,
        mu=mu, graph_metric=graph_metric, graph_metric_inv=ginv,
        cosh_theta=cosh, spacelike=spacelike,
    )


def point_geometry(fmap: GridMap, df=None) -> PointGeometry:
    """PointGeometry batch over all active grid nodes."""
    if df is None:
        df = differential_field(fmap)
    static = fmap.grid.static_fields()
    vals = fmap.active_values()
    g2 = fmap.target.metric(vals)
    return pullback_and_spectrum(static["g1"], g2, df)


def cosh_theta(lambda_sq):
    """cosh(theta) = prod_i (1 - lambda_i^2)^(-1/2); requires spacelike data."""
    lam = np.asarray(lambda_sq, dtype=float)
    if np.any(lam >= 1.0):
        raise NotSpacelikeError("some lambda^2 >= 1")
    return 1.0 / np.sqrt(np.prod(1.0 - lam, axis=-1))


@dataclass
class SpacelikeReport:
    ok: bool
    worst_lambda_sq: float
    worst_node: tuple
    margin: float


def spacelike_check(fmap: GridMap, margin: float = GUARD_DEFAULT) -> SpacelikeReport:
    """Report whether max lambda_1^2 <= 1 - margin over active nodes."""
    pg = point_geometry(fmap)
    lam1 = pg.lambda_sq[..., 0]
    flat_idx = int(np.argmax(lam1))
    worst = float(lam1.reshape(-1)[flat_idx])
    node = np.unravel_index(flat_idx, lam1.shape)
    if fmap.grid.kind == "latlong":
        node = (node[0] + 1,) + node[1:]
    return SpacelikeReport(ok=bool(worst <= 1.0 - margin),
                           worst_lambda_sq=worst, worst_node=tuple(node),
                           margin=margin)


def wang_condition(fmap: GridMap):
    """Node-wise det(g1 + f*g2) = prod (1 + lambda_i^2) < 2 and the global verdict."""
    pg = point_geometry(fmap)
    dets = np.prod(1.0 + pg.lambda_sq, axis=-1)
    verdicts = dets < 2.0
    return {"node_verdicts": verdicts, "all_ok": bool(np.all(verdicts)),
            "dets": dets}


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

_SNAPSHOT_MAGIC = "spacegraph-snapshot"


def save_snapshot(fmap: GridMap, path):
    """Write the self-describing text snapshot (17 significant digits)."""
    res = "x".join(str(r) for r in fmap.grid.resolution)
    if fmap.winding is None:
        wind = "none"
    else:
        wind = ",".join(f"{v:.17g}" for v in fmap.winding.reshape(-1))
    header = (f"{_SNAPSHOT_MAGIC} 1 domain={fmap.domain.descriptor()} "
              f"target={fmap.target.descriptor()} grid={res} winding={wind}")
    lines = [header]
    vals = fmap.values.reshape(-1, fmap.n)
    tags = fmap.tags.reshape(-1)
    for tag, row in zip(tags, vals):
        coords = " ".join(f"{v:.17g}" for v in row)
        lines.append(f"{int(tag)} {coords}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_snapshot(path) -> GridMap:
    with open(path) as fh:
        header = fh.readline().strip()
        fields = header.split(" ")
        if fields[0] != _SNAPSHOT_MAGIC:
            raise ValueError(f"not a snapshot file: {path}")
        kv = dict(f.split("=", 1) for f in fields[2:])
        domain = parse_model(kv["domain"])
        target = parse_model(kv["target"])
        resolution = tuple(int(s) for s in kv["grid"].split("x"))
        winding = None
        if kv["winding"] != "none":
            winding = np.array([float(s) for s in kv["winding"].split(",")])
        grid = Grid(domain, resolution)
        n = target.dim
        count = int(np.prod(grid.shape))
        tags = np.empty(count, dtype=np.uint8)
        vals = np.empty((count, n))
        for i in range(count):
            parts = fh.readline().split()
            tags[i] = int(parts[0])
            vals[i] = [float(s) for s in parts[1:]]
    if winding is not None:
        winding = winding.reshape(n, grid.m)
    return GridMap(domain, target, grid, vals.reshape(grid.shape + (n,)),
                   tags.reshape(grid.shape), winding)
