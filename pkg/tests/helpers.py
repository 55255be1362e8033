"""Shared builders for grid maps and random spacelike instances."""

import numpy as np

from spacegraph.graphgeom import Grid, GridMap, pullback_and_spectrum
from spacegraph.manifold import (
    EuclideanSpace,
    FlatTorus,
    HyperbolicSpace,
    RoundSphere,
)

TWO_PI = 2.0 * np.pi


def torus_sine_map(n=32, amp=0.3):
    """T^2 -> R^2, f = amp * (sin x, sin y)."""
    domain = FlatTorus(2, [TWO_PI, TWO_PI])
    target = EuclideanSpace(2)
    grid = Grid(domain, (n, n))
    pts = grid.points
    vals = amp * np.stack([np.sin(pts[..., 0]), np.sin(pts[..., 1])], axis=-1)
    return GridMap(domain, target, grid, vals)


def torus_sine_1d(n=64, amp=0.5):
    domain = FlatTorus(1, [TWO_PI])
    target = EuclideanSpace(1)
    grid = Grid(domain, (n,))
    vals = amp * np.sin(grid.points)
    return GridMap(domain, target, grid, vals)


def torus_linear_map(a_matrix, n=16):
    """Linear map between flat tori, unwrapped values plus winding data."""
    a_matrix = np.asarray(a_matrix, dtype=float)
    domain = FlatTorus(2, [TWO_PI, TWO_PI])
    target = FlatTorus(2, [TWO_PI, TWO_PI])
    grid = Grid(domain, (n, n))
    vals = np.einsum("gk,...k->...g", a_matrix, grid.points)
    winding = a_matrix * TWO_PI
    return GridMap(domain, target, grid, vals, winding=winding)


def sphere_disk_map(n_theta=16, n_phi=32, amp=0.25, curv=1.0):
    """S^2 -> H^2 latitudinal contraction: f = amp * (p1, p2) in the ball."""
    domain = RoundSphere(2, 1.0, chart="latlong")
    target = HyperbolicSpace(2, curv)
    grid = Grid(domain, (n_theta, n_phi))
    theta = grid.points[..., 0]
    phi = grid.points[..., 1]
    st = np.sin(theta)
    vals = amp * np.stack([st * np.cos(phi), st * np.sin(phi)], axis=-1)
    return GridMap(domain, target, grid, vals)


def random_spd(rng, dim, spread=0.6):
    a = rng.normal_array((dim, dim)) * spread
    return a @ a.T + np.eye(dim)


def random_spacelike_instance(rng, m, n, lam_max=0.8):
    """Random (g1, g2, df) with largest pullback eigenvalue about lam_max."""
    g1 = random_spd(rng, m)
    g2 = random_spd(rng, n)
    df = rng.normal_array((m, n))
    pg = pullback_and_spectrum(g1, g2, df)
    top = float(pg.lambda_sq[0])
    target_top = lam_max * rng.uniform(0.3, 1.0)
    df = df * np.sqrt(target_top / max(top, 1e-30))
    return g1, g2, df
