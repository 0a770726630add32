"""Dense Hermitian linear algebra kernels.

Eigendecompositions, spectral projections and subspaces, relative indices
of projection pairs, principal-angle subspace intersections, and
thresholded rank/kernel/cokernel computations.  Everything here is a pure
function on immutable values; all other modules build on these.

Numerical conventions
---------------------
* An eigenvalue with ``|lambda| <= tau_0`` (default 1e-9) is snapped to
  exactly zero and therefore belongs to ``[0, inf)`` and not ``(-inf, 0)``.
* Rank decisions use singular values: relative threshold
  ``tau_rank * sigma_max`` for general matrices, absolute threshold for
  restrictions of projections (whose singular values live in ``[0, 1]``).
* In finite dimensions every projection pair is a Fredholm pair and the
  relative index collapses to ``rank(P) - rank(Q)``; this identity is
  asserted on every call rather than treated as a discovery.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousSpectralCutError,
    ConsistencyError,
    DimensionMismatchError,
    EigendecompositionError,
)

HERMITICITY_ATOL = 1e-12
ORTHONORMALITY_ATOL = 1e-10
IDEMPOTENCY_ATOL = 1e-10
TRACE_ATOL = 1e-8
TAU_ZERO = 1e-9
TAU_GAP = 1e-7
TAU_RANK_RELATIVE = 1e-10
TAU_RANK_PAIR = 1e-8
TAU_ANGLE = 1e-9
GAP_RATIO_FLOOR = 1e3


def _matrix_hash(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()[:16]


class HermitianMatrix:
    """A square complex matrix symmetrized to be exactly Hermitian.

    Construction checks that the input deviates from its adjoint by at most
    ``atol`` (scaled by the matrix magnitude) and then stores the Hermitian
    part ``(H + H*)/2`` with write access disabled.
    """

    __slots__ = ("entries",)

    def __init__(self, entries, *, atol: float = HERMITICITY_ATOL):
        a = np.asarray(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] == 0:
            raise DimensionMismatchError("matrix dimension must be positive")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        scale = 1.0 + float(np.max(np.abs(a))) if a.size else 1.0
        deviation = float(np.max(np.abs(a - a.conj().T)))
        if deviation > atol * scale:
            raise ValueError(
                f"matrix is not Hermitian: max |H - H*| = {deviation:.3e} "
                f"exceeds {atol:.1e} * {scale:.3e}"
            )
        sym = (a + a.conj().T) / 2.0
        sym.setflags(write=False)
        self.entries = sym

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def norm2(self) -> float:
        """Spectral norm (largest absolute eigenvalue)."""
        return float(np.max(np.abs(np.linalg.eigvalsh(self.entries))))

    def __repr__(self) -> str:
        return f"HermitianMatrix(dim={self.dim}, hash={_matrix_hash(self.entries)})"


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues (ascending) and orthonormal eigenvectors of one Hermitian matrix.

    ``eigenvectors[:, j]`` belongs to ``eigenvalues[j]``.  Column phases are
    fixed so the first component of nonnegligible magnitude is real and
    positive, making the decomposition deterministic across runs.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


def eigh(h: HermitianMatrix) -> SpectralData:
    """Eigendecomposition of a Hermitian matrix with deterministic phases.

    Raises
    ------
    EigendecompositionError
        If LAPACK fails to converge, or the reconstruction ``V L V*`` does
        not reproduce the input at working precision.  The message carries
        a content hash of the offending matrix.
    """
    a = h.entries
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigendecompositionError(
            f"eigendecomposition failed for matrix {_matrix_hash(a)}: {exc}"
        ) from exc
    v = _fix_phases(v)
    scale = 1.0 + float(np.max(np.abs(w))) if w.size else 1.0
    ortho = float(np.max(np.abs(v.conj().T @ v - np.eye(h.dim))))
    recon = float(np.max(np.abs((v * w) @ v.conj().T - a)))
    if ortho > ORTHONORMALITY_ATOL or recon > ORTHONORMALITY_ATOL * scale:
        raise EigendecompositionError(
            f"eigendecomposition of matrix {_matrix_hash(a)} failed validation: "
            f"orthonormality defect {ortho:.3e}, reconstruction defect {recon:.3e}"
        )
    w = w.copy()
    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralData(eigenvalues=w, eigenvectors=v)


def _fix_phases(v: np.ndarray) -> np.ndarray:
    """Rotate each column so its first nonnegligible component is real positive."""
    v = np.array(v)
    for j in range(v.shape[1]):
        col = v[:, j]
        mags = np.abs(col)
        idx = int(np.argmax(mags > 1e-8 * mags.max())) if mags.max() > 0 else 0
        pivot = col[idx]
        if abs(pivot) > 0:
            v[:, j] = col * (pivot.conjugate() / abs(pivot))
    return v


@dataclass(frozen=True)
class Interval:
    """A real interval with independently open/closed finite endpoints.

    Infinite endpoints are always open.  Membership tests are exact on the
    already-snapped eigenvalues handed to them.
    """

    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval: lo={self.lo}, hi={self.hi}")
        if math.isinf(self.lo) and self.lo_closed:
            raise ValueError("-inf endpoint must be open")
        if math.isinf(self.hi) and self.hi_closed:
            raise ValueError("+inf endpoint must be open")

    @classmethod
    def less_than(cls, a: float) -> "Interval":
        return cls(-math.inf, a, lo_closed=False, hi_closed=False)

    @classmethod
    def at_least(cls, a: float) -> "Interval":
        return cls(a, math.inf, lo_closed=True, hi_closed=False)

    @classmethod
    def half_open(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, lo_closed=True, hi_closed=False)

    def contains(self, x: float) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo:
            return self.lo_closed
        if x == self.hi:
            return self.hi_closed
        return True

    def finite_endpoints(self) -> list[float]:
        return [e for e in (self.lo, self.hi) if math.isfinite(e)]

    def describe(self) -> str:
        lo = "[" if self.lo_closed else "("
        hi = "]" if self.hi_closed else ")"
        return f"{lo}{self.lo}, {self.hi}{hi}"


NEGATIVE_AXIS = Interval.less_than(0.0)
NONNEGATIVE_AXIS = Interval.at_least(0.0)


def snap_eigenvalues(eigenvalues: np.ndarray, tau_0: float = TAU_ZERO) -> np.ndarray:
    """Replace eigenvalues within ``tau_0`` of zero by exact zero."""
    w = np.asarray(eigenvalues, dtype=float).copy()
    w[np.abs(w) <= tau_0] = 0.0
    return w


def _select_indices(
    eigenvalues: np.ndarray,
    interval: Interval,
    tau_0: float,
    tau_gap: float,
) -> np.ndarray:
    snapped = snap_eigenvalues(eigenvalues, tau_0)
    for endpoint in interval.finite_endpoints():
        near = np.abs(snapped - endpoint) <= tau_gap
        if endpoint == 0.0:
            # the snapped-zero convention decides membership at 0 exactly
            near &= snapped != 0.0
        if np.any(near):
            bad = np.asarray(eigenvalues)[near]
            raise AmbiguousSpectralCutError(
                f"eigenvalue(s) {bad.tolist()} lie within {tau_gap:.1e} of the "
                f"interval endpoint {endpoint} of {interval.describe()}"
            )
    return np.array([interval.contains(x) for x in snapped], dtype=bool)


@dataclass(frozen=True)
class Subspace:
    """An orthonormal basis of a subspace; ``k = 0`` is a first-class value."""

    ambient_dim: int
    basis: np.ndarray  # shape (ambient_dim, k)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        if b.ndim != 2 or b.shape[0] != self.ambient_dim:
            raise DimensionMismatchError(
                f"basis shape {b.shape} incompatible with ambient dim {self.ambient_dim}"
            )
        if b.shape[1] > 0:
            defect = float(np.max(np.abs(b.conj().T @ b - np.eye(b.shape[1]))))
            if defect > ORTHONORMALITY_ATOL:
                raise ValueError(f"basis columns are not orthonormal (defect {defect:.3e})")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def empty(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, np.zeros((ambient_dim, 0), dtype=complex))

    @classmethod
    def full(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, np.eye(ambient_dim, dtype=complex))

    @classmethod
    def span(cls, vectors) -> "Subspace":
        """Orthonormalize the given column vectors (SVD-based, rank-revealing)."""
        a = np.asarray(vectors, dtype=complex)
        if a.ndim == 1:
            a = a[:, None]
        if a.shape[1] == 0:
            return cls.empty(a.shape[0])
        u, s, _ = np.linalg.svd(a, full_matrices=False)
        keep = s > TAU_RANK_RELATIVE * max(s[0], 1e-300)
        return cls(a.shape[0], u[:, keep])


@dataclass(frozen=True)
class Projection:
    """An orthogonal projection matrix together with its integer rank."""

    matrix: HermitianMatrix
    rank: int

    def __post_init__(self):
        p = self.matrix.entries
        idem = float(np.max(np.abs(p @ p - p)))
        if idem > IDEMPOTENCY_ATOL:
            raise ValueError(f"matrix is not idempotent (defect {idem:.3e})")
        tr = float(np.real(np.trace(p)))
        if abs(tr - self.rank) > TRACE_ATOL:
            raise ValueError(f"trace {tr!r} does not match declared rank {self.rank}")

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def complement(self) -> "Projection":
        return Projection(
            HermitianMatrix(np.eye(self.dim) - self.matrix.entries),
            self.dim - self.rank,
        )

    def range_basis(self) -> Subspace:
        """Orthonormal basis of the range, recovered from the eigendecomposition."""
        s = eigh(self.matrix)
        keep = s.eigenvalues > 0.5
        return Subspace(self.dim, s.eigenvectors[:, keep])


def spectral_projection(
    s: SpectralData,
    interval: Interval,
    *,
    tau_0: float = TAU_ZERO,
    tau_gap: float = TAU_GAP,
) -> Projection:
    """Orthogonal projection onto the spectral subspace for ``interval``.

    Eigenvalues within ``tau_0`` of zero count as exactly zero (so they lie
    in ``[0, inf)`` and not in ``(-inf, 0)``).  Any other eigenvalue within
    ``tau_gap`` of a finite endpoint raises ``AmbiguousSpectralCutError``.
    """
    select = _select_indices(s.eigenvalues, interval, tau_0, tau_gap)
    v = s.eigenvectors[:, select]
    p = v @ v.conj().T
    return Projection(HermitianMatrix(p), rank=int(np.count_nonzero(select)))


def spectral_subspace(
    s: SpectralData,
    interval: Interval,
    *,
    tau_0: float = TAU_ZERO,
    tau_gap: float = TAU_GAP,
) -> Subspace:
    """Orthonormal eigenbasis of the spectral subspace for ``interval``."""
    select = _select_indices(s.eigenvalues, interval, tau_0, tau_gap)
    return Subspace(s.dim, s.eigenvectors[:, select])


@dataclass(frozen=True)
class IndexReport:
    """Kernel/cokernel dimensions and index, with computation provenance."""

    ker_dim: int
    coker_dim: int
    index: int
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.index != self.ker_dim - self.coker_dim:
            raise ConsistencyError(
                f"index {self.index} != ker {self.ker_dim} - coker {self.coker_dim}"
            )

    def to_dict(self) -> dict:
        from .reporting import to_jsonable

        return {
            "ker_dim": self.ker_dim,
            "coker_dim": self.coker_dim,
            "index": self.index,
            "method": self.method,
            "diagnostics": to_jsonable(self.diagnostics),
        }


def relative_index(
    p: Projection,
    q: Projection,
    *,
    tau_rank: float = TAU_RANK_PAIR,
) -> IndexReport:
    """Relative index of the projection pair ``(P, Q)``.

    Computed from the singular values of the restriction of ``Q`` to a basis
    of ``Ran(P)`` (with codomain ``Ran(Q)``): singular values ``<= tau_rank``
    count towards the kernel.  In finite dimensions the index always equals
    ``rank(P) - rank(Q)``; that identity is asserted on every call, so a
    violation marks a genuine numerical failure rather than new information.
    """
    if p.dim != q.dim:
        raise DimensionMismatchError(f"ambient dims differ: {p.dim} vs {q.dim}")
    bp = p.range_basis().basis
    bq = q.range_basis().basis
    m = bq.conj().T @ bp  # restriction map Ran(P) -> Ran(Q) in orthonormal bases
    sigma = np.linalg.svd(m, compute_uv=False) if min(m.shape) else np.zeros(0)
    rank = int(np.count_nonzero(sigma > tau_rank))
    ker = p.rank - rank
    coker = q.rank - rank
    index = ker - coker
    if index != p.rank - q.rank:
        raise ConsistencyError(
            f"relative index {index} disagrees with rank difference "
            f"{p.rank} - {q.rank}; singular values {sigma.tolist()}"
        )
    return IndexReport(
        ker_dim=ker,
        coker_dim=coker,
        index=index,
        method="projection-pair",
        diagnostics={
            "singular_values": sigma,
            "restriction_rank": rank,
            "tau_rank": tau_rank,
        },
    )


def principal_cosines(u: Subspace, v: Subspace) -> np.ndarray:
    """Cosines of the principal angles between two subspaces (descending)."""
    if u.ambient_dim != v.ambient_dim:
        raise DimensionMismatchError(
            f"ambient dims differ: {u.ambient_dim} vs {v.ambient_dim}"
        )
    m = u.basis.conj().T @ v.basis
    if min(m.shape) == 0:
        return np.zeros(0)
    return np.clip(np.linalg.svd(m, compute_uv=False), 0.0, 1.0)


def subspace_intersection(
    u: Subspace,
    v: Subspace,
    *,
    tau_angle: float = TAU_ANGLE,
) -> Subspace:
    """Orthonormal basis of ``U ∩ V`` via principal angles.

    Directions whose principal cosine is at least ``1 - tau_angle`` are kept.
    An empty intersection is returned as a ``k = 0`` subspace.
    """
    if u.ambient_dim != v.ambient_dim:
        raise DimensionMismatchError(
            f"ambient dims differ: {u.ambient_dim} vs {v.ambient_dim}"
        )
    m = u.basis.conj().T @ v.basis
    if min(m.shape) == 0:
        return Subspace.empty(u.ambient_dim)
    lu, s, _ = np.linalg.svd(m)
    keep = np.clip(s, 0.0, 1.0) >= 1.0 - tau_angle
    return Subspace(u.ambient_dim, u.basis @ lu[:, : int(np.count_nonzero(keep))])


@dataclass(frozen=True)
class RankReport:
    """Numerical rank of a rectangular matrix with kernel/cokernel data.

    ``gap_ratio`` is ``sigma_r / sigma_{r+1}`` at the rank cut (``inf`` when
    the cut falls outside the singular spectrum); a small ratio means the
    rank decision is ill-determined, and a warning is attached rather than
    silently dropped.  Bases are ``None`` when not requested.
    """

    rank: int
    kernel: np.ndarray | None
    cokernel: np.ndarray | None
    kernel_dim: int
    cokernel_dim: int
    singular_values: np.ndarray
    gap_ratio: float
    warnings: tuple[str, ...]


def rank_kernel(
    m,
    *,
    tau_rank: float = TAU_RANK_RELATIVE,
    gap_floor: float = GAP_RATIO_FLOOR,
    compute_bases: bool = True,
) -> RankReport:
    """SVD-based rank with orthonormal kernel and cokernel bases.

    Rank counts singular values above the relative threshold
    ``tau_rank * sigma_max``.  ``compute_bases=False`` skips the full SVD and
    reports dimensions only (used by large discretized operators).
    """
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionMismatchError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    rows, cols = a.shape
    if min(rows, cols) == 0:
        kernel = np.eye(cols, dtype=complex) if compute_bases else None
        cokernel = np.eye(rows, dtype=complex) if compute_bases else None
        return RankReport(0, kernel, cokernel, cols, rows, np.zeros(0), math.inf, ())
    if compute_bases:
        u, sigma, vh = np.linalg.svd(a, full_matrices=True)
    else:
        u = vh = None
        sigma = np.linalg.svd(a, compute_uv=False)
    smax = float(sigma[0])
    rank = int(np.count_nonzero(sigma > tau_rank * smax)) if smax > 0 else 0
    if 0 < rank < sigma.shape[0] and sigma[rank] > 0:
        gap_ratio = float(sigma[rank - 1] / sigma[rank])
    else:
        gap_ratio = math.inf
    warnings: tuple[str, ...] = ()
    if gap_ratio < gap_floor:
        warnings = (
            f"ill-determined rank: singular-value gap ratio {gap_ratio:.3e} "
            f"below {gap_floor:.1e} at the rank-{rank} cut",
        )
    kernel = cokernel = None
    if compute_bases:
        kernel = np.ascontiguousarray(vh[rank:].conj().T)
        cokernel = np.ascontiguousarray(u[:, rank:])
    return RankReport(
        rank=rank,
        kernel=kernel,
        cokernel=cokernel,
        kernel_dim=cols - rank,
        cokernel_dim=rows - rank,
        singular_values=sigma,
        gap_ratio=gap_ratio,
        warnings=warnings,
    )
