"""Spatial weight matrices and the operator A = I - rho W.

Everything the model family needs from the spatial side lives here: rook
lattice construction, matrix-vector products with A and A^T, log-determinants
and quadratic forms in M (A^T A for Gaussian error kinds, A^T Sigma_tau^-1 A
for Student-t kinds), and the conditional-Gaussian partitioning used both by
oracle tests and by the missing-data samplers.

Two exact routes exist for log|det A| and tr(A^-1 W): a cached eigenvalue
decomposition of W (once per weight matrix; makes both quantities O(n) per
evaluation, which the stochastic-gradient loops rely on) and a sparse LU
factorization with sign tracking for matrices too large to decompose densely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionError, DomainError, SingularityError
from .models import ModelKind

__all__ = [
    "SpatialWeights", "Partition", "ConditionalGaussian",
    "build_rook_lattice", "apply_A", "apply_At",
    "logdet_A", "trace_AinvW", "logdet_M", "quad_form_M",
    "conditional_gaussian",
]

# Largest n for which the eigenvalues of W are precomputed densely.
_EIGEN_MAX_N = 2048
# |1 - rho*lambda| below this is treated as a singular A.
_SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class SpatialWeights:
    """Sparse n x n spatial weight matrix with zero diagonal.

    Entries are stored in coordinate form; `row_standardized` asserts that
    every nonempty row sums to one.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    row_standardized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "rows", np.asarray(self.rows, dtype=np.int64))
        object.__setattr__(self, "cols", np.asarray(self.cols, dtype=np.int64))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.n < 1:
            raise DimensionError("n must be at least 1")
        if not (self.rows.shape == self.cols.shape == self.weights.shape):
            raise DimensionError("rows, cols, weights must have equal length")
        if self.rows.size:
            if self.rows.min() < 0 or self.rows.max() >= self.n:
                raise DimensionError("row index out of range")
            if self.cols.min() < 0 or self.cols.max() >= self.n:
                raise DimensionError("col index out of range")
        if np.any(self.rows == self.cols):
            raise DomainError("diagonal entries are not allowed in W")
        if np.any(self.weights < 0):
            raise DomainError("weights must be nonnegative")
        if self.row_standardized:
            sums = np.bincount(self.rows, weights=self.weights, minlength=self.n)
            nonempty = np.bincount(self.rows, minlength=self.n) > 0
            if np.any(np.abs(sums[nonempty] - 1.0) > 1e-12):
                raise DomainError("row_standardized is set but some row sum deviates from 1")

    @cached_property
    def csr(self) -> sp.csr_matrix:
        return sp.coo_matrix(
            (self.weights, (self.rows, self.cols)), shape=(self.n, self.n)
        ).tocsr()

    @cached_property
    def csr_t(self) -> sp.csr_matrix:
        return self.csr.T.tocsr()

    @cached_property
    def eigenvalues(self) -> np.ndarray | None:
        """Eigenvalues of W, or None when n exceeds the dense-eigen cap."""
        if self.n > _EIGEN_MAX_N:
            return None
        dense = self.csr.toarray()
        if np.allclose(dense, dense.T, atol=1e-12, rtol=0.0):
            return np.linalg.eigvalsh(dense).astype(complex)
        return np.linalg.eigvals(dense)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.csr @ v

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        return self.csr_t @ v


@dataclass(frozen=True)
class Partition:
    """Split of site indices into a known ('observed') and an unknown block.

    Both index lists are sorted ascending, disjoint, and jointly cover
    0..n-1. The same type also represents a block sub-partition where the
    'observed' side holds every site outside the block being updated.
    """

    observed_idx: np.ndarray
    unobserved_idx: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observed_idx, dtype=np.int64)
        uno = np.asarray(self.unobserved_idx, dtype=np.int64)
        object.__setattr__(self, "observed_idx", obs)
        object.__setattr__(self, "unobserved_idx", uno)
        if np.any(np.diff(obs) <= 0) or np.any(np.diff(uno) <= 0):
            raise DomainError("partition index lists must be strictly ascending")
        n = obs.size + uno.size
        union = np.concatenate([obs, uno])
        if np.intersect1d(obs, uno).size:
            raise DomainError("partition blocks must be disjoint")
        if not np.array_equal(np.sort(union), np.arange(n)):
            raise DomainError("partition blocks must cover 0..n-1")

    @property
    def n(self) -> int:
        return self.observed_idx.size + self.unobserved_idx.size

    @classmethod
    def from_missing_mask(cls, missing: np.ndarray) -> "Partition":
        missing = np.asarray(missing, dtype=bool)
        idx = np.arange(missing.size)
        return cls(observed_idx=idx[~missing], unobserved_idx=idx[missing])


def build_rook_lattice(rows: int, cols: int, row_standardize: bool = True) -> SpatialWeights:
    """Rook-neighbourhood weights on a rows x cols lattice.

    Cell (i, j) neighbours its up/down/left/right cells; weights are 1, or
    1/degree when row-standardized. Site index is i*cols + j.
    """
    if rows < 1 or cols < 1:
        raise DimensionError("lattice dimensions must be at least 1x1")
    n = rows * cols
    src, dst = [], []
    for i in range(rows):
        for j in range(cols):
            site = i * cols + j
            if j + 1 < cols:
                src += [site, site + 1]
                dst += [site + 1, site]
            if i + 1 < rows:
                below = site + cols
                src += [site, below]
                dst += [below, site]
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    w = np.ones(src.size)
    if row_standardize and src.size:
        degree = np.bincount(src, minlength=n).astype(float)
        w = 1.0 / degree[src]
    return SpatialWeights(n=n, rows=src, cols=dst, weights=w,
                          row_standardized=bool(row_standardize and src.size))


def _check_rho(rho: float) -> None:
    if not -1.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (-1, 1); got {rho!r}")


def apply_A(W: SpatialWeights, rho: float, v: np.ndarray) -> np.ndarray:
    """(I - rho W) v without forming A."""
    _check_rho(rho)
    v = np.asarray(v, dtype=float)
    if v.shape[0] != W.n:
        raise DimensionError(f"vector length {v.shape[0]} does not match n = {W.n}")
    return v - rho * (W.csr @ v)


def apply_At(W: SpatialWeights, rho: float, v: np.ndarray) -> np.ndarray:
    """(I - rho W)^T v without forming A."""
    _check_rho(rho)
    v = np.asarray(v, dtype=float)
    if v.shape[0] != W.n:
        raise DimensionError(f"vector length {v.shape[0]} does not match n = {W.n}")
    return v - rho * (W.csr_t @ v)


def a_matrix(W: SpatialWeights, rho: float) -> sp.csr_matrix:
    """A = I - rho W as a sparse matrix."""
    _check_rho(rho)
    return (sp.identity(W.n, format="csr") - rho * W.csr).tocsr()


def _perm_sign(perm: np.ndarray) -> int:
    """Sign of a permutation via cycle decomposition."""
    perm = np.asarray(perm)
    seen = np.zeros(perm.size, dtype=bool)
    sign = 1
    for start in range(perm.size):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _logdet_A_splu(W: SpatialWeights, rho: float) -> float:
    lu = spla.splu(a_matrix(W, rho).tocsc())
    diag = lu.U.diagonal()
    if np.any(np.abs(diag) < _SINGULAR_TOL):
        raise SingularityError(f"A = I - rho W is singular at rho = {rho}")
    sign = _perm_sign(lu.perm_r) * _perm_sign(lu.perm_c) * int(np.prod(np.sign(diag)))
    if sign <= 0:
        raise SingularityError(f"det(I - rho W) is not positive at rho = {rho}")
    return float(np.sum(np.log(np.abs(diag))))


def logdet_A(W: SpatialWeights, rho: float) -> float:
    """log det(I - rho W); raises SingularityError on a nonpositive determinant."""
    _check_rho(rho)
    lam = W.eigenvalues
    if lam is None:
        return _logdet_A_splu(W, rho)
    factors = 1.0 - rho * lam
    if np.any(np.abs(factors) < _SINGULAR_TOL):
        raise SingularityError(f"A = I - rho W is singular at rho = {rho}")
    # complex pairs conjugate; the product is real
    det_sign = np.prod(np.sign(factors.real[np.abs(factors.imag) < 1e-14]))
    if det_sign <= 0:
        raise SingularityError(f"det(I - rho W) is not positive at rho = {rho}")
    return float(np.sum(np.log(np.abs(factors))))


def trace_AinvW(W: SpatialWeights, rho: float) -> float:
    """tr(A^-1 W), the derivative -d log det(I - rho W)/d rho."""
    _check_rho(rho)
    lam = W.eigenvalues
    if lam is not None:
        factors = 1.0 - rho * lam
        if np.any(np.abs(factors) < _SINGULAR_TOL):
            raise SingularityError(f"A = I - rho W is singular at rho = {rho}")
        return float(np.real(np.sum(lam / factors)))
    lu = spla.splu(a_matrix(W, rho).tocsc())
    total = 0.0
    block = 256
    dense_w = None
    for start in range(0, W.n, block):
        stop = min(start + block, W.n)
        if dense_w is None or dense_w.shape[1] != stop - start:
            dense_w = np.empty((W.n, stop - start))
        dense_w[:] = W.csr[:, start:stop].toarray()
        sol = lu.solve(dense_w)
        total += float(np.sum(sol[np.arange(start, stop), np.arange(stop - start)]))
    return total


def _inv_tau(kind: ModelKind, W: SpatialWeights, tau: np.ndarray | None) -> np.ndarray | None:
    if not kind.student_t:
        return None
    if tau is None:
        raise DomainError("tau is required for Student-t kinds")
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (W.n,):
        raise DimensionError("tau must have one entry per site")
    if np.any(tau <= 0):
        raise DomainError("tau must be strictly positive")
    return 1.0 / tau


def logdet_M(kind: ModelKind, W: SpatialWeights, rho: float,
             tau: np.ndarray | None = None) -> float:
    """log|M|: 2 log det A for Gaussian kinds, minus sum(log tau) for t kinds."""
    inv_tau = _inv_tau(kind, W, tau)
    out = 2.0 * logdet_A(W, rho)
    if inv_tau is not None:
        out += float(np.sum(np.log(inv_tau)))
    return out


def quad_form_M(kind: ModelKind, W: SpatialWeights, rho: float,
                tau: np.ndarray | None, r: np.ndarray) -> float:
    """r^T M r computed from matrix-vector products, never forming M."""
    inv_tau = _inv_tau(kind, W, tau)
    ar = apply_A(W, rho, r)
    if inv_tau is None:
        return float(ar @ ar)
    return float(ar @ (inv_tau * ar))


@dataclass(frozen=True)
class ConditionalGaussian:
    """Conditional distribution of the unknown block given the known block.

    For the joint N(mu, sigma^2 M^-1) the unknown block u given the known
    block o is N(mu_u + mean_offset, sigma^2 M_uu^-1), with mean_offset =
    -M_uu^-1 M_uo r_known. `chol_lower` is the lower Cholesky factor of M_uu.
    """

    mean_offset: np.ndarray
    chol_lower: np.ndarray

    def covariance(self, sigma2: float) -> np.ndarray:
        """Dense sigma^2 M_uu^-1 (intended for tests and small blocks)."""
        k = self.chol_lower.shape[0]
        inv = sla.cho_solve((self.chol_lower, True), np.eye(k))
        return sigma2 * inv

    def sample(self, sigma2: float, z: np.ndarray) -> np.ndarray:
        """mean_offset + sigma L^-T z, a draw with covariance sigma^2 M_uu^-1."""
        return self.mean_offset + np.sqrt(sigma2) * sla.solve_triangular(
            self.chol_lower, z, trans="T", lower=True)


def conditional_gaussian(kind: ModelKind, W: SpatialWeights, rho: float,
                         tau: np.ndarray | None, partition: Partition,
                         r_known: np.ndarray) -> ConditionalGaussian:
    """Partition M = A^T Sigma_tau^-1 A and condition on the known block.

    r_known is the residual over partition.observed_idx (in that order).
    Returns the mean offset -M_uu^-1 M_uo r_known and the Cholesky factor of
    M_uu; the caller adds X_u beta and scales by sigma^2.
    """
    if partition.n != W.n:
        raise DimensionError("partition does not cover this weight matrix")
    r_known = np.asarray(r_known, dtype=float)
    if r_known.shape != (partition.observed_idx.size,):
        raise DimensionError("r_known must match the observed block size")
    inv_tau = _inv_tau(kind, W, tau)
    s = inv_tau if inv_tau is not None else np.ones(W.n)
    A = a_matrix(W, rho).tocsc()
    A_u = A[:, partition.unobserved_idx]
    # M_uu = A_u^T diag(s) A_u, dense at block size
    M_uu = (A_u.T @ sp.diags(s) @ A_u).toarray()
    # M_uo r_known = A_u^T diag(s) A r_embedded with zeros in the unknown slots
    r_full = np.zeros(W.n)
    r_full[partition.observed_idx] = r_known
    m_uo_r = A_u.T @ (s * (A @ r_full))
    try:
        chol = sla.cholesky(M_uu, lower=True)
    except sla.LinAlgError as exc:
        raise SingularityError("M_uu is not positive definite") from exc
    offset = -sla.cho_solve((chol, True), m_uo_r)
    return ConditionalGaussian(mean_offset=offset, chol_lower=chol)
