"""Independent reference computations used to freeze test values.

Nothing here imports the package's discretizations: the slab eigenvalue
oracle is a Legendre spectral Galerkin method with Gauss quadrature, the
angular oracle diagonalizes the spheroidal operator in an associated
Legendre basis, and the curvature oracle is a direct sympy computation.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import legendre as L


def _basis(deg: int, t: np.ndarray):
    """Legendre polynomials and derivatives on [-1, 1] at points t."""
    V = np.empty((deg + 1, t.size))
    D = np.empty((deg + 1, t.size))
    for k in range(deg + 1):
        c = np.zeros(k + 1)
        c[k] = 1
        V[k] = L.legval(t, c)
        D[k] = L.legval(t, L.legder(c))
    return V, D


def galerkin_slab_eigenvalues(a: float, M: float, rb, xb, deg: int = 24, nq: int = 60, count: int = 6):
    """Neumann eigenvalues of -div(diag(Delta_r, Delta_x) grad) u = lam A u on a Kerr slab.

    Delta_r = r^2 - 2 M r + a^2, Delta_x = 1 - x^2,
    A = ((r^2+a^2)^2 Delta_x - a^2 (1-x^2)^2 Delta_r) / (Delta_r Delta_x).
    """
    tq, wq = L.leggauss(nq)
    r = 0.5 * (rb[1] - rb[0]) * (tq + 1) + rb[0]
    x = 0.5 * (xb[1] - xb[0]) * (tq + 1) + xb[0]
    jr, jx = 0.5 * (rb[1] - rb[0]), 0.5 * (xb[1] - xb[0])
    Vr, Dr_ = _basis(deg, tq)
    Vx, Dx_ = _basis(deg, tq)
    Dr_ = Dr_ / jr
    Dx_ = Dx_ / jx
    dr = r**2 - 2 * M * r + a**2
    dx = 1 - x**2
    R, X = np.meshgrid(r, x, indexing="ij")
    DR, DX = np.meshgrid(dr, dx, indexing="ij")
    A = ((R**2 + a**2) ** 2 * DX - a**2 * (1 - X**2) ** 2 * DR) / (DR * DX)
    W = np.outer(wq * jr, wq * jx)
    # tensor products: phi_{pq}(r, x) = Pr_p(r) Px_q(x)
    n = deg + 1
    K = np.zeros((n * n, n * n))
    Mm = np.zeros((n * n, n * n))
    # K = sum over quadrature of Delta_r d_r phi d_r psi + Delta_x d_x phi d_x psi
    # separable pieces: Delta_r depends on r only, Delta_x on x only
    Kr = (Dr_ * (wq * jr * dr)) @ Dr_.T
    Mr = (Vr * (wq * jr)) @ Vr.T
    Kx = (Dx_ * (wq * jx * dx)) @ Dx_.T
    Mx = (Vx * (wq * jx)) @ Vx.T
    K = np.kron(Kr, Mx) + np.kron(Mr, Kx)
    # mass with the non-separable A
    Mm = np.einsum("pi,qj,ij,si,tj->pqst", Vr, Vx, A * W, Vr, Vx, optimize=True).reshape(n * n, n * n)
    vals = sla.eigh(K, Mm, eigvals_only=True, subset_by_index=[0, count - 1])
    return vals


def spheroidal_eigenvalues(a: float, Omega: float, m: int, count: int = 4, n_basis: int = 40, nq: int = 120):
    """Kerr angular eigenvalues (Delta_x = 1 - x^2) in a normalized P_l^m basis.

    The operator is the associated Legendre operator plus a^2 Omega^2 (1 - x^2)
    minus 2 a m Omega, so only the (1 - x^2) matrix needs quadrature.
    """
    from scipy.special import lpmv

    mm = abs(m)
    ells = np.arange(mm, mm + n_basis)
    t, w = L.leggauss(nq)
    P = np.array([lpmv(mm, l, t) for l in ells])
    P /= np.sqrt((P**2) @ w)[:, None]
    V = (P * (w * (1 - t * t))) @ P.T
    H = np.diag(ells * (ells + 1.0)) + a * a * Omega * Omega * V - 2 * a * m * Omega * np.eye(n_basis)
    return np.sort(np.linalg.eigvalsh(H))[:count]


def sympy_mixed_ricci(params: dict, r, x):
    """Exact mixed Ricci tensor R^mu_nu at (r, x), coordinates (t, r, x, phi), k = 0 only."""
    import sympy as sp

    P = {k: sp.Rational(str(v)) if not isinstance(v, sp.Basic) else v for k, v in params.items()}
    a, M = P.get("a", sp.Integer(0)), P.get("M", sp.Integer(0))
    Lam, C1, C2, C3, C4, C5 = (P.get(k, sp.Integer(0)) for k in ("Lambda", "C1", "C2", "C3", "C4", "C5"))
    rs, xs = sp.symbols("r x")
    Dr = (1 - Lam * a**2 / 3 + C1 / 2) * rs**2 + (C2 - 2 * M) * rs + a**2 + C3
    Dx = (Lam * a**2 / 3 - 1 - C1 / 2) * xs**2 - C4 * xs + 1 + C5
    rho2 = rs**2 + a**2 * xs**2
    X = [sp.Symbol("t"), rs, xs, sp.Symbol("phi")]
    g = sp.zeros(4)
    g[0, 0] = (a**2 * Dx - Dr) / rho2
    g[0, 3] = g[3, 0] = (a * (1 - xs**2) * Dr - a * (rs**2 + a**2) * Dx) / rho2
    g[3, 3] = ((rs**2 + a**2) ** 2 * Dx - a**2 * (1 - xs**2) ** 2 * Dr) / rho2
    g[1, 1] = rho2 / Dr
    g[2, 2] = rho2 / Dx
    gi = g.inv()
    G = [[[sum(gi[l, s] * (sp.diff(g[s, n], X[m]) + sp.diff(g[s, m], X[n]) - sp.diff(g[m, n], X[s]))
               for s in range(4)) / 2 for n in range(4)] for m in range(4)] for l in range(4)]
    pt = {rs: sp.Rational(str(r)), xs: sp.Rational(str(x))}
    Ric = sp.zeros(4)
    for m in range(4):
        for n in range(4):
            e = sum(sp.diff(G[s][m][n], X[s]) for s in range(4)) - sum(sp.diff(G[s][m][s], X[n]) for s in range(4))
            e += sum(G[s][m][n] * G[b][s][b] for s in range(4) for b in range(4))
            e -= sum(G[b][m][s] * G[s][n][b] for s in range(4) for b in range(4))
            Ric[m, n] = sp.nsimplify(e.subs(pt))
    return gi.subs(pt) * Ric
