"""Independent reference solvers used only by the tests.

``enumerate_active_sets`` solves a small box/equality QP by trying every
assignment of each variable to {free, at lower, at upper}, solving the KKT
system for each with a dense pseudo-inverse, and keeping the best point that
satisfies primal feasibility and the multiplier sign conditions. It shares no
code with the ADMM solver.
"""

import itertools

import numpy as np


def enumerate_active_sets(P, q, A, b, lower, upper, tol=1e-9):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n = P.shape[0]
    q = np.asarray(q, dtype=float)
    A = np.zeros((0, n)) if A is None else np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, n)
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float).reshape(-1)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
    m = A.shape[0]

    choices = []
    for i in range(n):
        opts = [0]
        if np.isfinite(lower[i]):
            opts.append(-1)
        if np.isfinite(upper[i]) and upper[i] != lower[i]:
            opts.append(1)
        choices.append(opts)
    patterns = np.array(list(itertools.product(*choices)), dtype=int).reshape(-1, n)
    k = len(patterns)

    # unknowns (z, nu, mu); rows: stationarity (n), equalities (m), per-variable closure (n)
    size = 2 * n + m
    K = np.zeros((k, size, size))
    rhs = np.zeros((k, size))
    K[:, :n, :n] = P
    K[:, :n, n:n + m] = A.T
    K[:, :n, n + m:] = np.eye(n)
    rhs[:, :n] = -q
    K[:, n:n + m, :n] = A
    rhs[:, n:n + m] = b
    for i in range(n):
        row = n + m + i
        free = patterns[:, i] == 0
        K[free, row, n + m + i] = 1.0
        K[~free, row, i] = 1.0
        rhs[patterns[:, i] == -1, row] = lower[i]
        rhs[patterns[:, i] == 1, row] = upper[i]

    # singular patterns (redundant or degenerate constraint sets) go through pinv
    sign, logdet = np.linalg.slogdet(K)
    singular = (sign == 0) | (logdet < -30 * size)
    sol = np.zeros((k, size))
    if (~singular).any():
        sol[~singular] = np.linalg.solve(K[~singular], rhs[~singular, :, None])[..., 0]
    if singular.any():
        sol[singular] = np.einsum("kij,kj->ki", np.linalg.pinv(K[singular]), rhs[singular])
    resid = np.abs(np.einsum("kij,kj->ki", K, sol) - rhs).max(axis=1)
    z = sol[:, :n]
    mu = sol[:, n + m:]
    scale = 1.0 + np.abs(rhs).max()
    ok = resid <= 1e-8 * scale
    ok &= np.all(z >= lower - tol * scale, axis=1) & np.all(z <= upper + tol * scale, axis=1)
    ok &= np.all(np.where(patterns == 1, mu >= -tol * scale, True), axis=1)
    ok &= np.all(np.where(patterns == -1, mu <= tol * scale, True), axis=1)
    if not ok.any():
        return None
    zs = z[ok]
    obj = 0.5 * np.einsum("ki,ij,kj->k", zs, P, zs) + zs @ q
    best = int(np.argmin(obj))
    return zs[best], float(obj[best])


def random_instance(rng, n, m_eq):
    """Random strictly convex QP with finite boxes and a feasible equality set."""
    B = rng.normal(size=(n, n))
    P = B @ B.T / n + 0.05 * np.eye(n)
    q = rng.normal(size=n) * 2.0
    lower = -rng.uniform(0.5, 2.0, size=n)
    upper = rng.uniform(0.5, 2.0, size=n)
    A = rng.normal(size=(m_eq, n))
    # rhs from an interior point keeps the instance feasible
    z_feas = lower + (upper - lower) * rng.uniform(0.2, 0.8, size=n)
    b = A @ z_feas
    return P, q, A, b, lower, upper
