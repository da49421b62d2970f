"""Bounded-slab spatial operators and their spectral diagnostics.

A slab is a coordinate rectangle ``[r-, r+] x [x-, x+]`` discretized on a
vertex-centred tensor grid with trapezoidal quadrature weights.  For a fixed
azimuthal mode m the wave equation becomes

    M_A u_tt - 2 i m G_B u_t + H u = 0,

where ``H`` is the summation-by-parts flux-form discretization of
``-d_r(Delta_r d_r) - d_x(Delta_x d_x) + m^2 Phi`` with natural (reflecting)
boundary conditions, and ``M_A``, ``G_B`` are diagonal matrices of ``A`` and
``B`` times quadrature weights.  Nodes are ordered r-major: ``k = i * n_x + j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InputError, NearResonance, NotStrictSlab, SolverError, WrongMode
from .metric import CoefficientSet, SlabSpec, classify_slab, to_float

DENSE_LIMIT = 1_500


@dataclass(frozen=True)
class DiscreteSlab:
    """Grid plus sampled coefficients for one azimuthal mode.

    ``A``, ``B``, ``Phi`` are node samples of shape ``(n_r, n_x)``;
    ``Delta_r_faces`` has shape ``(n_r - 1,)`` (midpoints between r nodes),
    ``Delta_x_faces`` has shape ``(n_x - 1,)``.
    """

    r: np.ndarray
    x: np.ndarray
    A: np.ndarray
    B: np.ndarray
    Phi: np.ndarray
    Delta_r_faces: np.ndarray
    Delta_x_faces: np.ndarray
    m: int = 0
    flat: bool = False

    @property
    def n_r(self) -> int:
        return len(self.r)

    @property
    def n_x(self) -> int:
        return len(self.x)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_x)

    @property
    def size(self) -> int:
        return self.n_r * self.n_x

    @property
    def h_r(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def h_x(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights as a flat vector."""
        return np.outer(_trapezoid(self.r), _trapezoid(self.x)).ravel()

    def with_mode(self, m: int) -> "DiscreteSlab":
        return DiscreteSlab(self.r, self.x, self.A, self.B, self.Phi,
                            self.Delta_r_faces, self.Delta_x_faces, int(m), self.flat)


def _trapezoid(nodes: np.ndarray) -> np.ndarray:
    h = np.diff(nodes)
    w = np.zeros_like(nodes)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def build_slab(c: CoefficientSet, s: SlabSpec, n_r: int, n_x: int | None = None, m: int = 0,
               check_resolution: int = 128) -> DiscreteSlab:
    """Sample the Carter coefficients on a STRICT slab.

    Raises :class:`NotStrictSlab` if :func:`classify_slab` rejects the slab.
    """
    c.params.require_k0()
    n_x = n_r if n_x is None else n_x
    if n_r < 3 or n_x < 3:
        raise InputError("need at least 3 nodes per axis")
    cls = classify_slab(c, s, check_resolution)
    if not cls.strict:
        raise NotStrictSlab(f"slab rejected on {cls.offending} (grid minimum {cls.minima[cls.offending]:.3g})")
    fc = CoefficientSet(to_float(c.params)) if c.params.exact else c
    r = np.linspace(float(s.r_minus), float(s.r_plus), n_r)
    x = np.linspace(float(s.x_minus), float(s.x_plus), n_x)
    R, X = np.meshgrid(r, x, indexing="ij")
    return DiscreteSlab(
        r=r, x=x,
        A=fc.A(R, X), B=fc.B(R, X), Phi=fc.Phi(R, X),
        Delta_r_faces=fc.delta_r(0.5 * (r[1:] + r[:-1])),
        Delta_x_faces=fc.delta_x(0.5 * (x[1:] + x[:-1])),
        m=int(m),
    )


def flat_slab(n: int, bounds: Sequence[float] = (0.0, math.pi, 0.0, math.pi), m: int = 0,
              n_x: int | None = None) -> DiscreteSlab:
    """Constant-coefficient override A = Phi = Delta_r = Delta_x = 1, B = 0.

    Not a Carter member; an analytic anchor whose Neumann spectrum on
    ``[0, pi]^2`` is ``j^2 + k^2``.
    """
    n_x = n if n_x is None else n_x
    r = np.linspace(bounds[0], bounds[1], n)
    x = np.linspace(bounds[2], bounds[3], n_x)
    ones = np.ones((n, n_x))
    return DiscreteSlab(r, x, ones, np.zeros((n, n_x)), ones.copy(),
                        np.ones(n - 1), np.ones(n_x - 1), int(m), flat=True)


def _dyadic_round(v: np.ndarray, bits: int = 48) -> np.ndarray:
    """Round to a common dyadic lattice so that short sums are exact.

    Every entry becomes an integer multiple of ``2**e`` with magnitude below
    ``2**(e + bits)``; sums of up to ``2**(52 - bits)`` such numbers are then
    exact in double precision.
    """
    vmax = float(np.max(np.abs(v))) if v.size else 0.0
    if vmax == 0:
        return v.copy()
    e = math.frexp(vmax)[1] - bits
    return np.ldexp(np.round(np.ldexp(v, -e)), e)


@dataclass(frozen=True)
class OperatorPair:
    """H (sparse symmetric), M_A and G_B (stored as diagonals) for one mode."""

    H: sp.csr_matrix
    mass: np.ndarray
    gyro: np.ndarray
    slab: DiscreteSlab
    m: int

    @property
    def n(self) -> int:
        return self.mass.size

    @property
    def M(self) -> sp.dia_matrix:
        return sp.diags(self.mass)

    @property
    def G(self) -> sp.dia_matrix:
        return sp.diags(self.gyro)

    @property
    def ones(self) -> np.ndarray:
        return np.ones(self.n)

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """M_A inner product <u, v> = u^H M_A v."""
        return np.vdot(u, self.mass * v)

    def quad(self, u: np.ndarray) -> float:
        """u^H H u (real for Hermitian H)."""
        return float(np.real(np.vdot(u, self.H @ u)))


def assemble_operators(slab: DiscreteSlab, bc: str = "reflecting") -> OperatorPair:
    """Flux-form SBP assembly with the natural reflecting boundary.

    The quadratic form is

        u^T H u = sum_faces w_perp * Delta(face) * (u_+ - u_-)^2 / h
                  + m^2 sum_nodes w * Phi * u^2,

    a midpoint/trapezoid discretization of the continuous form.  Face
    coefficients are rounded to a dyadic lattice (relative change below
    1e-14) so that every row sum of the stiffness part is exact: H 1 = 0 with
    exact zeros when m = 0.
    """
    if bc != "reflecting":
        raise InputError("only the reflecting (natural Neumann) realization is supported")
    if not slab.flat:
        for name in ("A", "Phi"):
            if np.min(getattr(slab, name)) <= 0:
                raise NotStrictSlab(f"sampled {name} not positive")
        if np.min(slab.Delta_r_faces) <= 0 or np.min(slab.Delta_x_faces) <= 0:
            raise NotStrictSlab("sampled Delta not positive")
    nr, nx = slab.shape
    wr, wx = _trapezoid(slab.r), _trapezoid(slab.x)
    idx = np.arange(nr * nx).reshape(nr, nx)
    # r-faces: between (i, j) and (i+1, j)
    cr = np.outer(slab.Delta_r_faces / np.diff(slab.r), wx)
    cx = np.outer(wr, slab.Delta_x_faces / np.diff(slab.x))
    scale_bits = 48
    allc = _dyadic_round(np.concatenate([cr.ravel(), cx.ravel()]), scale_bits)
    cr = allc[: cr.size].reshape(cr.shape)
    cx = allc[cr.size:].reshape(cx.shape)
    rows, cols, vals = [], [], []
    diag = np.zeros(nr * nx)
    for a_idx, b_idx, c in ((idx[:-1, :], idx[1:, :], cr), (idx[:, :-1], idx[:, 1:], cx)):
        a_f, b_f, c_f = a_idx.ravel(), b_idx.ravel(), c.ravel()
        rows += [a_f, b_f]
        cols += [b_f, a_f]
        vals += [-c_f, -c_f]
        np.add.at(diag, a_f, c_f)
        np.add.at(diag, b_f, c_f)
    w = np.outer(wr, wx).ravel()
    m = slab.m
    if m:
        diag = diag + m * m * slab.Phi.ravel() * w
    rows.append(np.arange(nr * nx))
    cols.append(np.arange(nr * nx))
    vals.append(diag)
    H = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nr * nx, nr * nx)
    )
    H.sort_indices()
    return OperatorPair(H=H, mass=slab.A.ravel() * w, gyro=slab.B.ravel() * w, slab=slab, m=m)


# ---------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # columns, M_A-orthonormal
    residuals: np.ndarray  # ||H psi - lam M psi|| / ||M psi||

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def poincare_constant(self) -> float:
        return 1.0 / self.lambda1


def _canonicalize(vals: np.ndarray, vecs: np.ndarray, mass: np.ndarray, rtol: float = 1e-8):
    """Order eigenpairs by value, then by dominant node; fix signs."""
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    # re-orthonormalize degenerate clusters in the M inner product
    i = 0
    n = len(vals)
    scale = max(abs(vals[-1]), 1.0)
    while i < n:
        j = i + 1
        while j < n and abs(vals[j] - vals[i]) <= rtol * scale:
            j += 1
        if j - i > 1:
            block = vecs[:, i:j] * np.sqrt(mass)[:, None]
            q, _ = np.linalg.qr(block)
            block = q / np.sqrt(mass)[:, None]
            dom = np.argmax(np.abs(block), axis=0)
            sub = np.argsort(dom, kind="stable")
            vecs[:, i:j] = block[:, sub]
        i = j
    for k in range(n):
        d = np.argmax(np.abs(vecs[:, k]))
        if vecs[d, k] < 0:
            vecs[:, k] = -vecs[:, k]
    return vals, vecs


def solve_spectrum(ops: OperatorPair, count: int, tol: float = 1e-12, dense: bool | None = None) -> Spectrum:
    """Lowest ``count`` eigenpairs of H psi = lambda M_A psi (m = 0).

    Dense ``eigh`` below :data:`DENSE_LIMIT` unknowns, sparse shift-invert
    Lanczos above.  Eigenvectors are normalized in the M_A inner product.
    """
    if ops.m != 0:
        raise WrongMode("the self-adjoint spectral solve is for the m = 0 sector")
    return lowest_eigenpairs(ops, count, tol, dense)


def lowest_eigenpairs(ops: OperatorPair, count: int, tol: float = 1e-12, dense: bool | None = None) -> Spectrum:
    """Lowest eigenpairs of H psi = lambda M_A psi for any mode (H is real symmetric)."""
    if count < 1:
        raise InputError("count must be at least 1")
    n = ops.n
    count = min(count, n)
    use_dense = n < DENSE_LIMIT if dense is None else dense
    if use_dense:
        vals, vecs = sla.eigh(ops.H.toarray(), np.diag(ops.mass), subset_by_index=[0, count - 1])
    else:
        # shift slightly below zero so H - sigma M is positive definite
        diag_scale = float(np.max(ops.H.diagonal() / ops.mass))
        sigma = -1e-3 * min(1.0, diag_scale)
        try:
            vals, vecs = spla.eigsh(ops.H.tocsc(), k=count, M=ops.M.tocsc(), sigma=sigma, which="LM", tol=tol * 1e-2)
        except (spla.ArpackNoConvergence, RuntimeError) as exc:
            raise SolverError(f"shift-invert Lanczos failed: {exc}") from exc
    vals = np.asarray(vals, dtype=float)
    vecs = np.asarray(vecs, dtype=float)
    vecs = vecs / np.sqrt(np.einsum("ik,i,ik->k", vecs, ops.mass, vecs))[None, :]
    vals, vecs = _canonicalize(vals, vecs, ops.mass)
    Mv = ops.mass[:, None] * vecs
    res = np.linalg.norm(ops.H @ vecs - Mv * vals[None, :], axis=0) / np.linalg.norm(Mv, axis=0)
    return Spectrum(vals, vecs, res)


def project_constant(ops: OperatorPair, f: np.ndarray) -> np.ndarray:
    """Pi_0 f = (<f, 1>_A / <1, 1>_A) 1."""
    return np.full(ops.n, weighted_mean(ops, f))


def weighted_mean(ops: OperatorPair, f: np.ndarray):
    """The scalar <f, 1>_A / <1, 1>_A."""
    return np.dot(ops.mass, f) / np.sum(ops.mass)


def richardson(values: Sequence[float], ratio: float = 2.0, order: int = 2, levels: int | None = None) -> float:
    """Repeated Richardson extrapolation for errors in powers of h^order, h^(2 order), ...

    ``values`` are ordered coarse to fine with step ratio ``ratio``.
    """
    table = [list(map(float, values))]
    p = order
    levels = len(values) - 1 if levels is None else levels
    for _ in range(levels):
        prev = table[-1]
        f = ratio**p
        table.append([(f * prev[i + 1] - prev[i]) / (f - 1) for i in range(len(prev) - 1)])
        p += order
    return table[-1][-1]


# ---------------------------------------------------------------------------
# resolvent near zero


@dataclass(frozen=True)
class LaurentFit:
    sigmas: np.ndarray
    pole_coefficient: float | complex  # fitted scalar c with u ~ c 1 / sigma^2
    expected_pole: float | complex  # -Pi_0 f as a scalar
    pole_errors: np.ndarray  # ||sigma^2 u + Pi_0 f||_A / ||Pi_0 f||_A per sigma
    remainder_norms: np.ndarray  # ||u + Pi_0 f / sigma^2||_A per sigma
    pole_error_slope: float  # log-log slope of pole_errors vs sigma
    schur_scalars: np.ndarray  # <(H - sigma^2 M)1, 1>
    schur_expected: np.ndarray  # -sigma^2 <M 1, 1>
    solutions: list = field(repr=False, default_factory=list)


def _solve_shifted(ops: OperatorPair, sigma2: float, rhs: np.ndarray) -> np.ndarray:
    K = (ops.H - sigma2 * ops.M).tocsc()
    try:
        return spla.splu(K).solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"sparse LU failed at sigma^2={sigma2}: {exc}") from exc


def resolvent_laurent_probe(ops: OperatorPair, f: np.ndarray, sigmas: Sequence[float],
                            spectrum: Spectrum | None = None) -> LaurentFit:
    """Solve (H - sigma^2 M_A) u = M_A f and fit the sigma^{-2} pole.

    The pole coefficient is the weighted mean of ``sigma^2 u`` at the
    smallest sigma, which the threshold theory predicts to be ``-Pi_0 f``.
    ``pole_errors`` shrink like ``sigma^2`` whenever the regular part
    ``R_reg f`` is nonzero; for ``f`` constant they sit at rounding level.
    """
    if ops.m != 0:
        raise WrongMode("the threshold pole is an m = 0 statement")
    sig = np.asarray(sigmas, dtype=float)
    if np.any(sig == 0):
        raise NearResonance("sigma = 0 is the threshold itself")
    spectrum = spectrum or solve_spectrum(ops, 6)
    lam = spectrum.eigenvalues
    lam1 = lam[1]
    for s in sig:
        if abs(s) >= math.sqrt(lam1) / 2:
            raise InputError(f"|sigma| = {abs(s)} is not below sqrt(lambda_1)/2 = {math.sqrt(lam1) / 2}")
        for lj in lam[1:]:
            if abs(s * s - lj) <= 0.1 * lj:
                raise NearResonance(f"sigma^2 = {s * s} within 10% of eigenvalue {lj}")
    f = np.asarray(f)
    c0 = weighted_mean(ops, f)
    ones = ops.ones
    norm_pi = math.sqrt(np.sum(ops.mass)) * abs(c0)
    sols, pole_err, rem, fits, schur, schur_exp = [], [], [], [], [], []
    for s in sig:
        s2 = s * s
        u = _solve_shifted(ops, s2, ops.mass * f)
        sols.append(u)
        fits.append(s2 * weighted_mean(ops, u))
        diff = s2 * u + c0 * ones
        pole_err.append(math.sqrt(abs(ops.inner(diff, diff))) / norm_pi if norm_pi else np.nan)
        remainder = u + c0 * ones / s2
        rem.append(math.sqrt(abs(ops.inner(remainder, remainder))))
        schur.append(np.dot(ones, ops.H @ ones) - s2 * np.dot(ones, ops.mass * ones))
        schur_exp.append(-s2 * np.dot(ones, ops.mass * ones))
    pole_err = np.asarray(pole_err)
    slope = float(np.polyfit(np.log(sig), np.log(pole_err), 1)[0]) if np.all(pole_err > 0) else float("nan")
    return LaurentFit(sig, fits[int(np.argmin(np.abs(sig)))], -c0, pole_err, np.asarray(rem), slope,
                      np.asarray(schur), np.asarray(schur_exp), sols)


# ---------------------------------------------------------------------------
# quadratic pencil and first-order generator


@dataclass(frozen=True)
class PencilReport:
    m: int
    eigenvalues: np.ndarray  # sigma values of sigma^2 M + 2 m sigma G - H
    max_imag: float
    spectral_radius: float
    threshold_eigenvalues: np.ndarray  # m = 0: the deflated pair at sigma = 0
    kernel_dim: int | None = None  # dim Ker G (generator), m = 0
    kernel2_dim: int | None = None  # dim Ker G^2, m = 0
    chain_residual: float | None = None  # ||Gen (0, 1) - (1, 0)||, m = 0

    @property
    def relative_max_imag(self) -> float:
        return self.max_imag / self.spectral_radius


def _companion(H: np.ndarray, M: np.ndarray, G: np.ndarray, m: int):
    """First companion form: [[0, I], [H, -2mG]] z = sigma [[I, 0], [0, M]] z, z = (u, sigma u)."""
    n = H.shape[0]
    I = np.eye(n)
    Z = np.zeros((n, n))
    A = np.block([[Z, I], [H, -2 * m * G]])
    B = np.block([[I, Z], [Z, M]])
    return A, B


def generator_matrix(ops: OperatorPair) -> np.ndarray:
    """Dense first-order generator on (u, u_t): [[0, I], [-M^{-1} H, 2 i m M^{-1} G_B]]."""
    n = ops.n
    Minv = 1.0 / ops.mass
    Hd = ops.H.toarray()
    top = np.hstack([np.zeros((n, n)), np.eye(n)])
    bottom = np.hstack([-Minv[:, None] * Hd, np.diag(2j * ops.m * Minv * ops.gyro)])
    gen = np.vstack([top, bottom])
    return gen.real if ops.m == 0 else gen


def _nullity(mat: np.ndarray, rtol: float) -> int:
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s <= rtol * s[0]))


def kernel_dimensions(ops: OperatorPair, rtol: float = 1e-10) -> tuple[int, int, float]:
    """(dim Ker Gen, dim Ker Gen^2, ||Gen (0, 1) - (1, 0)||) for the dense generator."""
    gen = generator_matrix(ops)
    k1 = _nullity(gen, rtol)
    gen2 = gen @ gen
    k2 = _nullity(gen2, rtol)
    n = ops.n
    z = np.concatenate([np.zeros(n), np.ones(n)])
    target = np.concatenate([np.ones(n), np.zeros(n)])
    chain = float(np.linalg.norm(gen @ z - target))
    return k1, k2, chain


def pencil_mode_scan(ops: OperatorPair, m: int | None = None, kernel_rtol: float = 1e-10,
                     max_dense: int = 2500) -> PencilReport:
    """All eigenvalues of the quadratic pencil via a dense companion linearization.

    For m = 0 the double eigenvalue at sigma = 0 (the threshold Jordan block)
    is split off by restricting to the M_A-orthogonal complement of the
    constants; the two threshold eigenvalues are reported separately and the
    generator kernel dimensions are computed.
    """
    if m is not None and m != ops.m:
        ops = assemble_operators(ops.slab.with_mode(m))
    m = ops.m
    n = ops.n
    if n > max_dense:
        raise InputError(f"pencil scan is dense; {n} unknowns exceeds {max_dense}")
    H = ops.H.toarray()
    Mv = ops.mass
    G = np.diag(ops.gyro)
    threshold = np.array([])
    if m == 0:
        # orthonormal basis (Euclidean) of {v : 1^T M v = 0}
        q, _ = np.linalg.qr(np.column_stack([Mv, np.eye(n)[:, : n - 1]]))
        P = q[:, 1:]
        Hr = P.T @ H @ P
        Mr = P.T @ (Mv[:, None] * P)
        Gr = P.T @ G @ P
        A, B = _companion(Hr, Mr, Gr, 0)
        # threshold block: H restricted to span{1} is exactly zero
        ones = np.ones(n)
        h00 = float(ones @ (ops.H @ ones))
        m00 = float(ones @ (Mv * ones))
        threshold = np.array([math.sqrt(max(h00, 0.0) / m00)] * 2) * np.array([1.0, -1.0])
    else:
        A, B = _companion(H, np.diag(Mv), G, m)
    try:
        sig = sla.eig(A, B, right=False)
    except sla.LinAlgError as exc:
        raise SolverError(f"dense generalized eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(sig)):
        raise SolverError("non-finite pencil eigenvalues")
    radius = float(np.max(np.abs(sig)))
    max_imag = float(np.max(np.imag(sig)))
    k1 = k2 = chain = None
    if m == 0:
        k1, k2, chain = kernel_dimensions(ops, kernel_rtol)
    order = np.lexsort((np.imag(sig), np.real(sig)))
    return PencilReport(m, sig[order], max_imag, radius, threshold, k1, k2, chain)


def multiplicities(ops: OperatorPair, sigma: complex, cluster_tol: float = 1e-7,
                   rank_rtol: float = 1e-9, eigenvalues: np.ndarray | None = None) -> tuple[int, int]:
    """(algebraic, geometric) multiplicity of a pencil eigenvalue sigma.

    Algebraic multiplicity counts linearization eigenvalues within
    ``cluster_tol * spectral radius``; geometric multiplicity is the nullity
    of ``sigma^2 M + 2 m sigma G - H``.
    """
    sig = pencil_mode_scan(ops).eigenvalues if eigenvalues is None else eigenvalues
    radius = float(np.max(np.abs(sig)))
    alg = int(np.sum(np.abs(sig - sigma) <= cluster_tol * radius))
    Q = sigma**2 * np.diag(ops.mass) + 2 * ops.m * sigma * np.diag(ops.gyro) - ops.H.toarray()
    s = np.linalg.svd(Q, compute_uv=False)
    geo = int(np.sum(s <= rank_rtol * s[0]))
    return alg, geo
