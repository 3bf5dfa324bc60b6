"""
Independent reference implementations the tests compare against.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import lsq_linear

from gflbs.flows import flow_network


def cut_values(net: flow_network):
    """Capacity of every source side, enumerated."""
    n = net.node_count
    sides = np.array(list(itertools.product((False, True), repeat=n)), dtype=bool)
    sides = sides.reshape(-1, n)
    value = (sides * net.sink_caps).sum(axis=1) + (~sides * net.source_caps).sum(
        axis=1
    )
    if len(net.tails):
        st, sh = sides[:, net.tails], sides[:, net.heads]
        value += ((st & ~sh) * net.capacities).sum(axis=1)
        value += ((sh & ~st) * net.reverse_capacities).sum(axis=1)
    return sides, value


def enumerate_min_cut(net: flow_network) -> float:
    """Minimum cut capacity by enumeration of every source side."""
    return float(cut_values(net)[1].min())


def minimal_source_side(net: flow_network, tol: float = 1e-9) -> np.ndarray:
    """Intersection of the source sides of every minimum cut."""
    sides, value = cut_values(net)
    return sides[value <= value.min() + tol].all(axis=0)


def tv1d(y, lam: float) -> np.ndarray:
    """
    Exact ``argmin_f lam sum |f_i+1 - f_i| + 1/2 ||f - y||^2`` on a chain,
    by Condat's direct (taut-string like) algorithm.
    """
    y = np.asarray(y, dtype=np.float64)
    width = len(y)
    out = np.empty(width)
    if width == 0:
        return out
    k = k0 = kplus = kminus = 0
    umin, umax = lam, -lam
    vmin, vmax = y[0] - lam, y[0] + lam
    while True:
        while k == width - 1:
            if umin < 0.0:
                while True:
                    out[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = kminus = k0
                vmin = y[k]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    out[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = kplus = k0
                vmax = y[k]
                umax = -lam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                while True:
                    out[k0] = vmin
                    k0 += 1
                    if k0 > k:
                        break
                return out
        umin += y[k + 1] - vmin
        if umin < -lam:
            while True:
                out[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = kplus = kminus = k0
            vmin = y[k]
            vmax = vmin + 2 * lam
            umin, umax = lam, -lam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            while True:
                out[k0] = vmax
                k0 += 1
                if k0 > kplus:
                    break
            k = kplus = kminus = k0
            vmax = y[k]
            vmin = vmax - 2 * lam
            umin, umax = lam, -lam
            continue
        k += 1
        if umin >= lam:
            vmin += (umin - lam) / (k - k0 + 1)
            umin = lam
            kminus = k
        if umax <= -lam:
            vmax += (umax + lam) / (k - k0 + 1)
            umax = -lam
            kplus = k


def gfl_dual(m, edges, weights, lam1: float, lam2: float) -> np.ndarray:
    """
    Generalized fused lasso prox through its box-constrained dual

        min_y 1/2 ||m - A^T y||^2,  |y| <= (lam1, lam2 w),  A = [I; D]

    solved by bounded-variable least squares, ``f = m - A^T y``.
    """
    m = np.asarray(m, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
    weights = np.asarray(weights, dtype=np.float64)
    n = len(m)
    columns, bounds = [], []
    if lam1 > 0:
        columns.append(np.eye(n))
        bounds.append(np.full(n, lam1))
    keep = lam2 * weights > 0
    if keep.any():
        e = edges[keep]
        d = np.zeros((n, len(e)))
        d[e[:, 0], np.arange(len(e))] = 1.0
        d[e[:, 1], np.arange(len(e))] = -1.0
        columns.append(d)
        bounds.append(lam2 * weights[keep])
    if not columns:
        return m.copy()
    a = np.hstack(columns)
    ub = np.concatenate(bounds)
    y = lsq_linear(a, m, bounds=(-ub, ub), method="bvls", tol=1e-14).x
    return m - a @ y


def lasso_cd(a, m, tau: float, sweeps: int = 100000) -> np.ndarray:
    """Lasso by cyclic coordinate descent, run to a fixed point."""
    a = np.asarray(a, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    x = np.zeros(a.shape[1])
    norms = (a * a).sum(axis=0)
    r = m.copy()
    for _ in range(sweeps):
        change = 0.0
        for j in range(a.shape[1]):
            if norms[j] == 0:
                continue
            rho = a[:, j] @ r + norms[j] * x[j]
            new = np.sign(rho) * max(abs(rho) - tau, 0.0) / norms[j]
            if new != x[j]:
                r -= a[:, j] * (new - x[j])
                change = max(change, abs(new - x[j]))
                x[j] = new
        if change < 1e-15:
            break
    return x


def lasso_objective(a, m, tau: float, x) -> float:
    e = np.asarray(a) @ np.asarray(x) - np.asarray(m)
    return float(0.5 * e @ e + tau * np.abs(x).sum())


def rpca_alm(d, lam, mu0, beta, mu_max, tol, max_iters):
    """Inexact ALM robust PCA with LAPACK SVDs."""
    d = np.asarray(d, dtype=np.float64)
    b = np.zeros_like(d)
    f = np.zeros_like(d)
    y = np.zeros_like(d)
    mu = mu0
    norm = np.linalg.norm(d)
    for k in range(max_iters):
        u, s, vt = np.linalg.svd(d - f + y / mu, full_matrices=False)
        s = np.maximum(s - 1 / mu, 0.0)
        b = (u * s) @ vt
        t = d - b + y / mu
        f = np.sign(t) * np.maximum(np.abs(t) - lam / mu, 0.0)
        r = d - b - f
        y = y + mu * r
        mu = min(beta * mu, mu_max)
        if np.linalg.norm(r) / norm <= tol:
            return b, f, k + 1
    return b, f, max_iters
