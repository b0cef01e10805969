"""Small dense matrix kernels: p-norms, matrix measures and block majorants.

The matrices handled here are tiny (a few agents' worth of augmented state per
block), so everything is computed densely. Symmetric eigenvalues come from a
cyclic Jacobi iteration rather than LAPACK; numpy is used for storage only.

Supported local norms are ``p in {1, 2, inf}``. ``inf`` may be given as
``math.inf``, ``np.inf`` or the string ``"inf"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def norm_id(p) -> float:
    """Normalise a norm identifier to 1.0, 2.0 or math.inf."""
    if isinstance(p, str):
        key = p.strip().lower()
        if key in ("inf", "infty", "infinity", "oo"):
            return math.inf
        try:
            p = float(key)
        except ValueError:
            raise DomainError(f"unsupported norm {p!r}") from None
    p = float(p)
    if p not in (1.0, 2.0, math.inf):
        raise DomainError(f"only p in {{1, 2, inf}} is supported, got {p}")
    return p


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    return A


def _as_square(A) -> np.ndarray:
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"square matrix required, got {A.shape}")
    return A


def _as_eta(eta, size: int) -> np.ndarray:
    eta = np.asarray(eta, dtype=float).ravel()
    if eta.size != size:
        raise DimensionError(f"weight vector has length {eta.size}, expected {size}")
    if not np.all(eta > 0) or not np.all(np.isfinite(eta)):
        raise DomainError("weights must be finite and strictly positive")
    return eta


def symmetric_eigenvalues(S, tol: float = JACOBI_TOL,
                          max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Only the symmetric part of ``S`` is used. Iteration stops once the
    Frobenius norm of the off-diagonal part drops below ``tol`` times
    ``max(1, ||S||_F)``, or after ``max_sweeps`` sweeps.

    Returns
    -------
    ndarray
        Eigenvalues in ascending order.
    """
    a = _as_square(S)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    if n == 1:
        return a[0].copy()
    threshold = tol * max(1.0, float(np.sqrt(np.sum(a * a))))
    # plain lists: far cheaper than numpy element access at these sizes
    m = a.tolist()
    rng = range(n)
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            row = m[p]
            for q in range(p + 1, n):
                off += row[q] * row[q]
        if math.sqrt(2.0 * off) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p][q]
                if apq == 0.0:
                    continue
                theta = (m[q][q] - m[p][p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in rng:
                    mkp, mkq = m[k][p], m[k][q]
                    m[k][p] = c * mkp - s * mkq
                    m[k][q] = s * mkp + c * mkq
                rp, rq = m[p], m[q]
                for k in rng:
                    mpk, mqk = rp[k], rq[k]
                    rp[k] = c * mpk - s * mqk
                    rq[k] = s * mpk + c * mqk
                m[p][q] = m[q][p] = 0.0
    return np.sort(np.array([m[i][i] for i in rng]))


def max_symmetric_eigenvalue(S) -> float:
    return float(symmetric_eigenvalues(S)[-1])


def min_symmetric_eigenvalue(S) -> float:
    return float(symmetric_eigenvalues(S)[0])


def spectral_norm(A) -> float:
    """Largest singular value, as sqrt of the top eigenvalue of the Gram matrix."""
    A = _as_matrix(A)
    gram = A.T @ A if A.shape[1] <= A.shape[0] else A @ A.T
    return math.sqrt(max(0.0, max_symmetric_eigenvalue(gram)))


def induced_norm(A, p) -> float:
    """Induced p-norm of a (possibly rectangular) matrix."""
    A = _as_matrix(A)
    p = norm_id(p)
    if p == 1.0:
        return float(np.max(np.sum(np.abs(A), axis=0)))
    if p == math.inf:
        return float(np.max(np.sum(np.abs(A), axis=1)))
    return spectral_norm(A)


def matrix_measure(A, p) -> float:
    """Matrix measure (logarithmic norm) induced by the p-norm."""
    A = _as_square(A)
    p = norm_id(p)
    if p == 2.0:
        return max_symmetric_eigenvalue(A)
    if p == math.inf:
        off = np.sum(np.abs(A), axis=1) - np.abs(np.diag(A))
        return float(np.max(np.diag(A) + off))
    off = np.sum(np.abs(A), axis=0) - np.abs(np.diag(A))
    return float(np.max(np.diag(A) + off))


def weighted_inf_measure(A, eta) -> float:
    """max_i { A_ii + sum_{j != i} (eta_j / eta_i) |A_ij| }."""
    A = _as_square(A)
    eta = _as_eta(eta, A.shape[0])
    W = np.abs(A) * eta[None, :] / eta[:, None]
    np.fill_diagonal(W, np.diag(A))
    return float(np.max(np.sum(W, axis=1)))


def weighted_inf_norm(A, eta) -> float:
    """max_i sum_j (eta_j / eta_i) |A_ij|."""
    A = _as_square(A)
    eta = _as_eta(eta, A.shape[0])
    W = np.abs(A) * eta[None, :] / eta[:, None]
    return float(np.max(np.sum(W, axis=1)))


@dataclass(frozen=True)
class BlockPartition:
    """Split of a dimension into consecutive blocks of the given sizes."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise DimensionError(f"block sizes must be positive, got {self.sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def uniform(cls, blocks: int, size: int) -> "BlockPartition":
        return cls((size,) * blocks)

    @property
    def count(self) -> int:
        return len(self.sizes)

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    @property
    def slices(self) -> list[slice]:
        out, start = [], 0
        for s in self.sizes:
            out.append(slice(start, start + s))
            start += s
        return out

    def check(self, dim: int) -> None:
        if dim != self.dim:
            raise DimensionError(f"partition covers {self.dim} entries, object has {dim}")


@dataclass(frozen=True)
class NormSpec:
    """Composite norm: local p-norm per block, aggregated by a weighted l-inf norm."""

    local_p: float
    eta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "local_p", norm_id(self.local_p))
        eta = tuple(float(e) for e in np.asarray(self.eta, dtype=float).ravel())
        if not eta or any(not (e > 0) or not math.isfinite(e) for e in eta):
            raise DomainError("eta must be non-empty, finite and strictly positive")
        object.__setattr__(self, "eta", eta)

    @classmethod
    def uniform(cls, count: int, p=2) -> "NormSpec":
        return cls(p, (1.0,) * count)

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.eta)

    def scaled(self, c: float) -> "NormSpec":
        return NormSpec(self.local_p, tuple(c * e for e in self.eta))


def _check_conformal(A: np.ndarray, part: BlockPartition, spec: NormSpec) -> None:
    part.check(A.shape[0])
    if len(spec.eta) != part.count:
        raise DimensionError(f"{len(spec.eta)} weights for {part.count} blocks")


def aggregate_majorant(A, part: BlockPartition, spec: NormSpec) -> np.ndarray:
    """r x r matrix of induced local norms of the blocks A_ij."""
    A = _as_square(A)
    _check_conformal(A, part, spec)
    sl = part.slices
    r = part.count
    out = np.empty((r, r))
    for i in range(r):
        for j in range(r):
            out[i, j] = induced_norm(A[sl[i], sl[j]], spec.local_p)
    return out


def metzler_majorant(A, part: BlockPartition, spec: NormSpec) -> np.ndarray:
    """Aggregate majorant with block measures on the diagonal."""
    A = _as_square(A)
    _check_conformal(A, part, spec)
    sl = part.slices
    r = part.count
    out = np.empty((r, r))
    for i in range(r):
        for j in range(r):
            block = A[sl[i], sl[j]]
            out[i, j] = matrix_measure(block, spec.local_p) if i == j else induced_norm(block, spec.local_p)
    return out


def composite_vector_norm(x, part: BlockPartition, spec: NormSpec) -> float:
    """max_i ||x_i||_p / eta_i."""
    x = np.asarray(x, dtype=float).ravel()
    part.check(x.size)
    if len(spec.eta) != part.count:
        raise DimensionError(f"{len(spec.eta)} weights for {part.count} blocks")
    p = spec.local_p
    vals = [np.linalg.norm(x[s], ord=p) / e for s, e in zip(part.slices, spec.eta)]
    return float(max(vals))


def composite_measure_bound(A, part: BlockPartition, spec: NormSpec) -> float:
    """Upper bound on the composite matrix measure via the Metzler majorant."""
    return weighted_inf_measure(metzler_majorant(A, part, spec), spec.eta)


def composite_norm_bound(A, part: BlockPartition, spec: NormSpec) -> float:
    """Upper bound on the induced composite norm via the aggregate majorant."""
    return weighted_inf_norm(aggregate_majorant(A, part, spec), spec.eta)


def block_diag_composite_norm(blocks: Sequence[np.ndarray], p) -> float:
    """Induced composite norm of a block-diagonal matrix (exact: max block norm).

    The weights cancel because each output block only sees its own input block.
    """
    return max(induced_norm(b, p) for b in blocks)
