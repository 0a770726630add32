"""Boundary-value indices of ``d/dt - iA`` and ``d/dt + A`` and their checks.

Two independent routes compute the index of the transport operator
``d/dt - iA`` under spectral boundary conditions (negative subspace at
``t = 0``, nonnegative at ``t = T``): the relative index of the endpoint
projection pair ``(P_<0(0), Q(0,T) P_<0(T) Q(T,0))``, and direct subspace
geometry (principal-angle intersection for the kernel, a restricted-map
rank for the cokernel).  For ``d/dt + A`` the index is computed from a
Crank-Nicolson discretization of the two-point boundary-value problem and,
independently, by ODE shooting with the non-unitary propagator.

In finite dimensions the index always collapses to
``rank P_<0(0) - rank P_<0(T)`` by dimension counting; the informative
outputs are the kernel and cokernel dimensions separately, their stability
under grid refinement, and the agreement of independent routes.  Rank
decisions on propagated subspaces use a dedicated cut (default 1e-4) that
must dominate the integrator's global error; the exact-arithmetic defaults
of :mod:`apsflow.matrixcore` are far below that error and would miscount.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousSpectralCutError,
    ConsistencyError,
    DimensionMismatchError,
    StiffnessError,
)
from .families import OperatorFamily, endpoint_regularize
from .matrixcore import (
    NEGATIVE_AXIS,
    NONNEGATIVE_AXIS,
    TAU_RANK_RELATIVE,
    TAU_ZERO,
    IndexReport,
    Subspace,
    eigh,
    principal_cosines,
    rank_kernel,
    relative_index,
    snap_eigenvalues,
    spectral_projection,
    spectral_subspace,
    subspace_intersection,
)
from .evolution import (
    NonunitaryPropagator,
    Propagator,
    evolved_projection,
    nonunitary_propagate,
)
from .spectralflow import spectral_flow

SIGMA_CUT = 1e-4  # rank cut for singular values of propagated restrictions
SHOOTING_ANGLE_TOL = 1e-6  # intersection tolerance for shot subspaces
COMPLEMENTARITY_ATOL = 1e-10
DEFAULT_GRID = 64
DEFAULT_CHECKPOINTS = 8


@dataclass(frozen=True)
class APSBoundaryData:
    """The two boundary subspaces: negative at ``t=0``, nonnegative at ``t=T``."""

    left_subspace: Subspace
    right_subspace: Subspace

    def __post_init__(self):
        if self.left_subspace.ambient_dim != self.right_subspace.ambient_dim:
            raise DimensionMismatchError("boundary subspaces have different ambient dims")


def aps_boundary_data(family: OperatorFamily, *, tau_0: float = TAU_ZERO) -> APSBoundaryData:
    """Boundary subspaces of the family, validated against their complements."""
    s0 = eigh(family.at(0.0))
    st = eigh(family.at(family.horizon))
    left = spectral_subspace(s0, NEGATIVE_AXIS, tau_0=tau_0)
    right = spectral_subspace(st, NONNEGATIVE_AXIS, tau_0=tau_0)
    left_comp = spectral_subspace(s0, NONNEGATIVE_AXIS, tau_0=tau_0)
    right_comp = spectral_subspace(st, NEGATIVE_AXIS, tau_0=tau_0)
    for a, b in ((left, left_comp), (right, right_comp)):
        if a.dimension + b.dimension != family.dim:
            raise ConsistencyError("boundary subspace dimensions do not complement")
        if a.dimension and b.dimension:
            overlap = float(np.max(np.abs(a.basis.conj().T @ b.basis)))
            if overlap > COMPLEMENTARITY_ATOL:
                raise ConsistencyError(
                    f"boundary subspace overlaps its complement (defect {overlap:.3e})"
                )
    return APSBoundaryData(left_subspace=left, right_subspace=right)


# ---------------------------------------------------------------------------
# transport operator d/dt - iA


def lorentzian_index_projection(
    family: OperatorFamily,
    propagator: Propagator,
    t_end: float | None = None,
    *,
    tau_0: float = TAU_ZERO,
    sigma_cut: float = SIGMA_CUT,
) -> IndexReport:
    """Index of ``d/dt - iA`` on ``[0, t_end]`` via the endpoint projection pair.

    Returns the relative index of ``(P_<0(0), Q(0,t) P_<0(t) Q(t,0))``; the
    kernel/cokernel dimensions come from the singular values of the
    restricted projection with the propagation-aware ``sigma_cut``.
    """
    if t_end is None:
        t_end = family.horizon
    try:
        p0 = spectral_projection(eigh(family.at(0.0)), NEGATIVE_AXIS, tau_0=tau_0)
        p_hat = evolved_projection(family, propagator, t_end, NEGATIVE_AXIS, tau_0=tau_0)
    except AmbiguousSpectralCutError as exc:
        raise AmbiguousSpectralCutError(
            f"{exc}; apply endpoint_regularize to push the offending "
            "eigenvalue away from the spectral cut"
        ) from exc
    report = relative_index(p0, p_hat, tau_rank=sigma_cut)
    diagnostics = dict(report.diagnostics)
    diagnostics["t_end"] = float(t_end)
    diagnostics["sigma_cut"] = sigma_cut
    _gray_zone_warning(diagnostics, diagnostics["singular_values"], sigma_cut)
    return IndexReport(
        ker_dim=report.ker_dim,
        coker_dim=report.coker_dim,
        index=report.index,
        method="projection-pair",
        diagnostics=diagnostics,
    )


def _gray_zone_warning(diagnostics: dict, sigma, cut: float) -> None:
    sigma = np.asarray(sigma)
    gray = sigma[(sigma > cut / 100.0) & (sigma < cut * 100.0)]
    if gray.size:
        diagnostics.setdefault("warnings", []).append(
            f"singular values {gray.tolist()} lie near the rank cut {cut:.1e}; "
            "integer dimensions may be sensitive to propagator accuracy"
        )


def lorentzian_index_subspace(
    family: OperatorFamily,
    propagator: Propagator,
    t_end: float | None = None,
    *,
    tau_0: float = TAU_ZERO,
    tau_angle: float = 1e-9,
    sigma_cut: float = SIGMA_CUT,
) -> IndexReport:
    """Index of ``d/dt - iA`` on ``[0, t_end]`` via direct subspace geometry.

    Kernel: dimension of ``H_<0(0) ∩ Q(0,t) H_>=0(t)`` by principal angles.
    Cokernel: ``rank P_<0(t)`` minus the rank of ``P_<0(t) Q(t,0)`` restricted
    to ``H_<0(0)``.  Must agree with the projection-pair route exactly.
    """
    if t_end is None:
        t_end = family.horizon
    k = propagator.index_of(t_end)
    u_t = propagator.unitaries[k]
    s0 = eigh(family.at(0.0))
    st = eigh(family.at(float(propagator.grid[k])))
    h_neg_0 = spectral_subspace(s0, NEGATIVE_AXIS, tau_0=tau_0)
    h_pos_t = spectral_subspace(st, NONNEGATIVE_AXIS, tau_0=tau_0)
    h_neg_t = spectral_subspace(st, NEGATIVE_AXIS, tau_0=tau_0)

    pulled_back = Subspace(family.dim, u_t.conj().T @ h_pos_t.basis)
    cosines = principal_cosines(h_neg_0, pulled_back)
    ker = subspace_intersection(h_neg_0, pulled_back, tau_angle=tau_angle).dimension

    restricted = h_neg_t.basis.conj().T @ u_t @ h_neg_0.basis
    if min(restricted.shape):
        sigma = np.linalg.svd(restricted, compute_uv=False)
    else:
        sigma = np.zeros(0)
    reach = int(np.count_nonzero(sigma > sigma_cut))
    coker = h_neg_t.dimension - reach

    diagnostics = {
        "t_end": float(t_end),
        "principal_cosines": cosines,
        "restriction_singular_values": sigma,
        "tau_angle": tau_angle,
        "sigma_cut": sigma_cut,
    }
    _gray_zone_warning(diagnostics, sigma, sigma_cut)
    return IndexReport(
        ker_dim=ker,
        coker_dim=coker,
        index=ker - coker,
        method="subspace-geometry",
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class CheckpointEntry:
    t: float
    index: int
    sfl: int
    ker_dim: int
    coker_dim: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "index": self.index,
            "sfl": self.sfl,
            "ker_dim": self.ker_dim,
            "coker_dim": self.coker_dim,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class LorentzianMainRecord:
    """Per-checkpoint agreement of the transport index with the spectral flow."""

    family_label: str
    checkpoints: tuple[CheckpointEntry, ...]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "family": self.family_label,
            "check": "lorentzian-main",
            "passed": self.passed,
            "checkpoints": [c.to_dict() for c in self.checkpoints],
        }


def lorentzian_main_check(
    family: OperatorFamily,
    propagator: Propagator,
    *,
    checkpoints: int = DEFAULT_CHECKPOINTS,
    tau_0: float = TAU_ZERO,
    sigma_cut: float = SIGMA_CUT,
    raise_on_mismatch: bool = True,
) -> LorentzianMainRecord:
    """Check ``index on [0, t] == spectral flow on [0, t]`` at grid checkpoints.

    Uses the projection-pair index.  The checkpoint set subsamples the grid
    (default 8 points including ``T``); any inequality is a hard failure
    carrying both integers.
    """
    grid_count = propagator.grid.shape[0] - 1
    indices = sorted(
        {max(1, round(j * grid_count / checkpoints)) for j in range(1, checkpoints + 1)}
    )
    entries = []
    for k in indices:
        t = float(propagator.grid[k])
        rep = lorentzian_index_projection(
            family, propagator, t, tau_0=tau_0, sigma_cut=sigma_cut
        )
        sfl = spectral_flow(family.restricted(0.0, t), tau_0=tau_0).value
        entries.append(
            CheckpointEntry(
                t=t,
                index=rep.index,
                sfl=sfl,
                ker_dim=rep.ker_dim,
                coker_dim=rep.coker_dim,
                passed=rep.index == sfl,
            )
        )
    record = LorentzianMainRecord(
        family_label=family.label,
        checkpoints=tuple(entries),
        passed=all(e.passed for e in entries),
    )
    if not record.passed and raise_on_mismatch:
        bad = [e for e in entries if not e.passed]
        raise ConsistencyError(
            f"family {family.label!r}: transport index != spectral flow at "
            f"checkpoints {[(e.t, e.index, e.sfl) for e in bad]}",
            record=record,
        )
    return record


# ---------------------------------------------------------------------------
# boundary-value operator d/dt + A


@dataclass(frozen=True)
class DiscretizedOperator:
    """The Crank-Nicolson two-point boundary-value matrix and its shape data."""

    matrix: np.ndarray  # (M n) x (r_left + (M-1) n + r_right)
    grid_intervals: int
    dim: int
    left_rank: int  # dim H_<0(0)
    right_rank: int  # dim H_>=0(T)

    @property
    def domain_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def codomain_dim(self) -> int:
        return self.matrix.shape[0]


def assemble_discretized_operator(
    family: OperatorFamily,
    grid_intervals: int = DEFAULT_GRID,
    *,
    tau_0: float = TAU_ZERO,
) -> DiscretizedOperator:
    """Assemble the discretized boundary-value operator for ``d/dt + A``.

    Unknowns are the slices ``f_0 ... f_M`` with ``f_0`` constrained to the
    negative subspace of ``A(0)`` and ``f_M`` to the nonnegative subspace of
    ``A(T)`` (the constrained slices are parametrized by orthonormal bases).
    Rows are the Crank-Nicolson equations
    ``(f_{k+1} - f_k)/h + A(t_{k+1/2}) (f_{k+1} + f_k)/2``.
    """
    if grid_intervals < 4:
        raise ValueError(f"need at least 4 grid intervals, got {grid_intervals}")
    n = family.dim
    m = grid_intervals
    h = family.horizon / m
    boundary = aps_boundary_data(family, tau_0=tau_0)
    b_left = boundary.left_subspace.basis
    b_right = boundary.right_subspace.basis
    r_left = b_left.shape[1]
    r_right = b_right.shape[1]
    cols = r_left + (m - 1) * n + r_right
    op = np.zeros((m * n, cols), dtype=complex)

    def col_block(k: int) -> tuple[int, np.ndarray | None]:
        """Column offset and basis for slice f_k (None = unconstrained)."""
        if k == 0:
            return 0, b_left
        if k == m:
            return r_left + (m - 1) * n, b_right
        return r_left + (k - 1) * n, None

    for k in range(m):
        mid = (k + 0.5) * h
        a_mid = family.at(mid).entries
        plus = np.eye(n) / h + a_mid / 2.0  # coefficient of f_{k+1}
        minus = -np.eye(n) / h + a_mid / 2.0  # coefficient of f_k
        for coeff, slice_idx in ((minus, k), (plus, k + 1)):
            off, basis = col_block(slice_idx)
            block = coeff if basis is None else coeff @ basis
            width = n if basis is None else basis.shape[1]
            op[k * n : (k + 1) * n, off : off + width] += block
    return DiscretizedOperator(
        matrix=op,
        grid_intervals=m,
        dim=n,
        left_rank=r_left,
        right_rank=r_right,
    )


def riemannian_index_discretized(
    family: OperatorFamily,
    grid_intervals: int = DEFAULT_GRID,
    *,
    tau_0: float = TAU_ZERO,
    tau_rank: float = TAU_RANK_RELATIVE,
    stiffness_bound: float = 40.0,
    compute_bases: bool = False,
) -> IndexReport:
    """Index of ``d/dt + A`` with spectral boundary conditions, by discretization.

    Kernel and cokernel dimensions come from the thresholded SVD of the
    assembled operator.  By dimension counting the index is forced to
    ``rank P_<0(0) - rank P_<0(T)`` regardless of the dynamics; that note is
    recorded in the diagnostics so the equality is not mistaken for a
    numerical discovery.  The informative outputs are the separate kernel
    and cokernel dimensions and their stability in the grid.
    """
    norm = family.norm_bound(65)
    if norm * family.horizon > stiffness_bound:
        raise StiffnessError(
            f"||A|| * T = {norm * family.horizon:.3g} exceeds the stiffness bound "
            f"{stiffness_bound:g} for the boundary-value discretization"
        )
    disc = assemble_discretized_operator(family, grid_intervals, tau_0=tau_0)
    report = rank_kernel(disc.matrix, tau_rank=tau_rank, compute_bases=compute_bases)
    sigma_tail = report.singular_values[max(0, report.rank - 3) :][:8]
    diagnostics = {
        "grid_intervals": disc.grid_intervals,
        "domain_dim": disc.domain_dim,
        "codomain_dim": disc.codomain_dim,
        "left_rank": disc.left_rank,
        "right_rank": disc.right_rank,
        "gap_ratio": report.gap_ratio,
        "singular_values_near_cut": sigma_tail,
        "warnings": list(report.warnings),
        "note": (
            "index = domain_dim - codomain_dim by dimension counting; the "
            "informative outputs are ker_dim and coker_dim and their grid stability"
        ),
    }
    return IndexReport(
        ker_dim=report.kernel_dim,
        coker_dim=report.cokernel_dim,
        index=report.kernel_dim - report.cokernel_dim,
        method="discretized-bvp",
        diagnostics=diagnostics,
    )


def _shot_kernel_dim(
    transfer: NonunitaryPropagator,
    start: Subspace,
    target: Subspace,
    angle_tol: float,
) -> tuple[int, np.ndarray]:
    """Dimension of ``(R(T,0) start) ∩ target`` with the image orthonormalized."""
    if start.dimension == 0:
        return 0, np.zeros(0)
    image = Subspace.span(transfer.matrices[-1] @ start.basis)
    cosines = principal_cosines(image, target)
    dim = subspace_intersection(image, target, tau_angle=angle_tol).dimension
    return dim, cosines


def riemannian_kernel_shooting(
    family: OperatorFamily,
    intervals: int = 512,
    *,
    tau_0: float = TAU_ZERO,
    angle_tol: float = SHOOTING_ANGLE_TOL,
    stiffness_bound: float = 40.0,
) -> IndexReport:
    """Kernel and cokernel of ``d/dt + A`` by ODE shooting.

    The kernel is the part of the negative subspace of ``A(0)`` transported
    by the decaying flow into the nonnegative subspace of ``A(T)``.  The
    cokernel solves the formal adjoint with swapped boundary conditions,
    which after time reversal is the same computation for the reversed
    family; the forward non-unitary propagator is reused.
    """
    boundary = aps_boundary_data(family, tau_0=tau_0)
    forward = nonunitary_propagate(
        family, intervals, stiffness_bound=stiffness_bound
    )
    ker, ker_cosines = _shot_kernel_dim(
        forward, boundary.left_subspace, boundary.right_subspace, angle_tol
    )

    reversed_family = family.time_reversed()
    rev_boundary = aps_boundary_data(reversed_family, tau_0=tau_0)
    backward = nonunitary_propagate(
        reversed_family, intervals, stiffness_bound=stiffness_bound
    )
    coker, coker_cosines = _shot_kernel_dim(
        backward, rev_boundary.left_subspace, rev_boundary.right_subspace, angle_tol
    )

    diagnostics = {
        "intervals": intervals,
        "angle_tol": angle_tol,
        "kernel_cosines": ker_cosines,
        "cokernel_cosines": coker_cosines,
        "forward_condition_max": float(np.max(forward.condition_log)),
        "backward_condition_max": float(np.max(backward.condition_log)),
        "warnings": list(forward.warnings) + list(backward.warnings),
    }
    return IndexReport(
        ker_dim=ker,
        coker_dim=coker,
        index=ker - coker,
        method="ode-shooting",
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class RiemannianMainRecord:
    """Agreement record: boundary-value index vs spectral flow, raw and regularized."""

    family_label: str
    sfl_raw: int
    index_raw: int
    regularized: bool
    sfl_regularized: int | None
    index_regularized: int | None
    passed: bool
    reports: tuple[IndexReport, ...]

    def to_dict(self) -> dict:
        return {
            "family": self.family_label,
            "check": "riemannian-main",
            "sfl": self.sfl_raw,
            "index": self.index_raw,
            "regularized": self.regularized,
            "sfl_regularized": self.sfl_regularized,
            "index_regularized": self.index_regularized,
            "passed": self.passed,
            "reports": [r.to_dict() for r in self.reports],
        }


def riemannian_main_check(
    family: OperatorFamily,
    grid_intervals: int = DEFAULT_GRID,
    *,
    tau_0: float = TAU_ZERO,
    epsilon: float = 0.1,
    raise_on_mismatch: bool = True,
) -> RiemannianMainRecord:
    """Check ``index(d/dt + A) == spectral flow`` for the boundary-value operator.

    Computes both integers for the family as given; when an endpoint is
    singular, repeats both on the endpoint-regularized family and requires
    all four integers to agree.
    """
    sfl_raw = spectral_flow(family, tau_0=tau_0).value
    rep_raw = riemannian_index_discretized(family, grid_intervals, tau_0=tau_0)
    reports = [rep_raw]
    singular_left = _endpoint_singular(family, 0.0, tau_0)
    singular_right = _endpoint_singular(family, family.horizon, tau_0)
    regularized = singular_left or singular_right
    sfl_reg = index_reg = None
    if regularized:
        reg = endpoint_regularize(family, epsilon, tau_0=tau_0)
        sfl_reg = spectral_flow(reg, tau_0=tau_0).value
        rep_reg = riemannian_index_discretized(reg, grid_intervals, tau_0=tau_0)
        index_reg = rep_reg.index
        reports.append(rep_reg)
    values = {sfl_raw, rep_raw.index} | ({sfl_reg, index_reg} if regularized else set())
    record = RiemannianMainRecord(
        family_label=family.label,
        sfl_raw=sfl_raw,
        index_raw=rep_raw.index,
        regularized=regularized,
        sfl_regularized=sfl_reg,
        index_regularized=index_reg,
        passed=len(values) == 1,
        reports=tuple(reports),
    )
    if not record.passed and raise_on_mismatch:
        raise ConsistencyError(
            f"family {family.label!r}: boundary-value index and spectral flow "
            f"disagree: sfl={sfl_raw}, index={rep_raw.index}, "
            f"regularized sfl={sfl_reg}, regularized index={index_reg}",
            record=record,
        )
    return record


def _endpoint_singular(family: OperatorFamily, t: float, tau_0: float) -> bool:
    eigs = np.linalg.eigvalsh(family.at(t).entries)
    return bool(np.any(snap_eigenvalues(eigs, tau_0) == 0.0))


def operator_triplets(disc: DiscretizedOperator) -> list[tuple[int, int, float, float]]:
    """Sparse triplet dump ``(row, col, re, im)`` of the discretized operator."""
    rows, cols = np.nonzero(disc.matrix)
    vals = disc.matrix[rows, cols]
    return [
        (int(r), int(c), float(v.real), float(v.imag))
        for r, c, v in zip(rows, cols, vals)
    ]
