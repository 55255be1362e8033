"""Independent numerical oracles used only by the test suite.

These deliberately avoid the code paths they check: geodesics are integrated
with a generic RK4 on the geodesic ODE, curvature comes from finite
differences of the metric, the generalized eigenproblem is solved by cyclic
Jacobi rotations, and second-fundamental-form norms come from a raw
Gram-matrix projection in the product pseudo-metric.
"""

import numpy as np


def rk4_geodesic(model, x, v, steps=64):
    """Integrate the geodesic ODE x'' + Gamma(x', x') = 0 over t in [0, 1]."""
    x = np.asarray(x, dtype=float).copy()
    v = np.asarray(v, dtype=float).copy()

    def acc(pos, vel):
        gam = model.christoffel(pos)
        return -np.einsum("kij,i,j->k", gam, vel, vel)

    h = 1.0 / steps
    for _ in range(steps):
        k1x, k1v = v, acc(x, v)
        k2x, k2v = v + 0.5 * h * k1v, acc(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k3x, k3v = v + 0.5 * h * k2v, acc(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k4x, k4v = v + h * k3v, acc(x + h * k3x, v + h * k3v)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    return x


def metric_derivative_fd(model, x, h=1e-5):
    """Centered difference d_k g_ij, shape (dim, dim, dim) indexed [k, i, j]."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    out = np.zeros((dim, dim, dim))
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = h
        out[k] = (model.metric(x + e) - model.metric(x - e)) / (2 * h)
    return out


def christoffel_fd(model, x, h=1e-5):
    """Gamma^k_ij from finite differences of the metric alone."""
    g = model.metric(np.asarray(x, dtype=float))
    ginv = np.linalg.inv(g)
    dg = metric_derivative_fd(model, x, h)
    # Gamma^k_ij = 1/2 g^{kl} (d_i g_lj + d_j g_li - d_l g_ij)
    brack = np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg
    return 0.5 * np.einsum("kl,lij->kij", ginv, brack)


def riemann_fd(model, x, h=1e-4):
    """R^l_kij = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma Gamma terms."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    gam = model.christoffel(x)
    dgam = np.zeros((dim, dim, dim, dim))  # [deriv, k, i, j]
    for d in range(dim):
        e = np.zeros(dim)
        e[d] = h
        dgam[d] = (model.christoffel(x + e) - model.christoffel(x - e)) / (2 * h)
    riem = np.zeros((dim, dim, dim, dim))  # [l, k, i, j] = R(e_i,e_j)e_k
    for l in range(dim):
        for k in range(dim):
            for i in range(dim):
                for j in range(dim):
                    riem[l, k, i, j] = (
                        dgam[i, l, j, k] - dgam[j, l, i, k]
                        + np.dot(gam[l, i, :], gam[:, j, k])
                        - np.dot(gam[l, j, :], gam[:, i, k])
                    )
    return riem


def sectional_fd(model, x, u, v, h=1e-4):
    """Sectional curvature K(u, v) from the finite-difference Riemann tensor."""
    g = model.metric(np.asarray(x, dtype=float))
    riem = riemann_fd(model, x, h)
    ruvv = np.einsum("lkij,i,j,k->l", riem, u, v, v)
    num = np.einsum("l,lm,m->", ruvv, g, u)
    den = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    return num / den


def jacobi_generalized_eigh(p, g, tol=1e-14, max_sweeps=60):
    """Solve P a = lambda G a by Cholesky reduction plus cyclic Jacobi.

    Returns eigenvalues (descending) and G-orthonormal eigenvectors as
    columns, fully independent of LAPACK's symmetric solvers.
    """
    p = np.asarray(p, dtype=float)
    g = np.asarray(g, dtype=float)
    m = p.shape[0]
    ell = np.linalg.cholesky(g)
    linv = np.linalg.solve(ell, np.eye(m))
    c = linv @ p @ linv.T
    vecs = np.eye(m)
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(m - 1):
            for j in range(i + 1, m):
                off = max(off, abs(c[i, j]))
                if abs(c[i, j]) <= tol * max(1.0, abs(c[i, i]) + abs(c[j, j])):
                    continue
                tau = (c[j, j] - c[i, i]) / (2.0 * c[i, j])
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                if tau == 0.0:
                    t = 1.0
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = t * cs
                rot = np.eye(m)
                rot[i, i] = rot[j, j] = cs
                rot[i, j] = sn
                rot[j, i] = -sn
                c = rot.T @ c @ rot
                vecs = vecs @ rot
        if off <= tol:
            break
    vals = np.diag(c).copy()
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = (linv.T @ vecs)[:, order]
    return vals, vecs


def perp_norm_sq_oracle(g1, g2, df, u):
    """Norm^2 of the normal part of (0, u) along the graph, by raw projection.

    Builds the product metric g1 (+) (-g2), the graph tangent basis
    T_i = (e_i, df(e_i)), and solves the Gram system for the tangential part.
    ``df`` has shape (m, n) with df[i] the image of the i-th chart vector.
    """
    m, n = df.shape
    gbar = np.zeros((m + n, m + n))
    gbar[:m, :m] = g1
    gbar[m:, m:] = -np.asarray(g2)
    t_basis = np.zeros((m, m + n))
    for i in range(m):
        t_basis[i, i] = 1.0
        t_basis[i, m:] = df[i]
    w = np.zeros(m + n)
    w[m:] = u
    gram = t_basis @ gbar @ t_basis.T  # equals the graph metric g1 - f*g2
    rhs = t_basis @ gbar @ w
    coef = np.linalg.solve(gram, rhs)
    perp = w - coef @ t_basis
    val = perp @ gbar @ perp
    return -val  # timelike normal: g-bar norm is negative


def norm_b_sq_oracle(g1, g2, df, hess):
    """Full ||B||^2 via the projection oracle, no adapted frames involved.

    ``hess`` has shape (m, m, n).  Uses ||B||^2 = g^{ik} g^{jl}
    <B_ij, B_kl> with the ambient projection inner products.
    """
    m, n = df.shape
    g = g1 - df @ g2 @ df.T
    ginv = np.linalg.inv(g)
    gbar = np.zeros((m + n, m + n))
    gbar[:m, :m] = g1
    gbar[m:, m:] = -np.asarray(g2)
    t_basis = np.zeros((m, m + n))
    for i in range(m):
        t_basis[i, i] = 1.0
        t_basis[i, m:] = df[i]
    gram = t_basis @ gbar @ t_basis.T
    perps = np.zeros((m, m, m + n))
    for i in range(m):
        for j in range(m):
            w = np.zeros(m + n)
            w[m:] = hess[i, j]
            coef = np.linalg.solve(gram, t_basis @ gbar @ w)
            perps[i, j] = w - coef @ t_basis
    total = 0.0
    for i in range(m):
        for j in range(m):
            for k in range(m):
                for l in range(m):
                    inner = -perps[i, j] @ gbar @ perps[k, l]
                    total += ginv[i, k] * ginv[j, l] * inner
    return total


def norm_h_sq_oracle(g1, g2, df, hess):
    """||H||^2 via trace with the graph metric plus the projection oracle."""
    g = g1 - df @ g2 @ df.T
    ginv = np.linalg.inv(g)
    w_vec = np.einsum("ij,ijg->g", ginv, hess)
    return perp_norm_sq_oracle(g1, g2, df, w_vec)
