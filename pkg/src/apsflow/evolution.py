"""Structure-preserving propagators and the Cauchy solver.

The unitary propagator integrates ``dU/dt = i A(t) U`` with exponential
one-step maps (each step is the exponential of a skew-Hermitian matrix,
computed through the eigendecomposition of the Hermitian generator, hence
exactly unitary up to eigensolver error).  Two schemes are provided: a
midpoint-exponential (second order) default and a fourth-order
commutator-free composition for accuracy studies.  A non-unitary variant
integrates the decaying equation ``dR/dt = -A(t) R`` under a stiffness
guard.  The 2x2 eigenline-swapping blocks admit a closed-form propagator
which serves as an exact oracle for everything else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConsistencyError,
    DimensionMismatchError,
    OffGridError,
    StiffnessError,
)
from .families import OperatorFamily, PhaseProfile, quintic_profile
from .matrixcore import (
    TAU_GAP,
    TAU_ZERO,
    HermitianMatrix,
    Interval,
    Projection,
    eigh,
    spectral_projection,
)

SCHEME_MIDPOINT = "midpoint-exponential"
SCHEME_CF4 = "fourth-order-commutator-free"
SCHEMES = (SCHEME_MIDPOINT, SCHEME_CF4)

UNITARITY_ATOL = 1e-10
ANCHOR_ATOL = 1e-12
STIFFNESS_BOUND = 40.0
CONDITION_WARNING = 1e12
COST_BUDGET = 2e10  # flop-ish budget: substeps * dim^3 before a cost note

_CF4_NODE = math.sqrt(3.0) / 6.0
_CF4_ALPHA = 0.25 + _CF4_NODE  # weight on the near node
_CF4_BETA = 0.25 - _CF4_NODE


def _expi_hermitian_batch(mats: np.ndarray, factor: complex) -> np.ndarray:
    """Batched ``exp(factor * H)`` for Hermitian ``H`` via eigendecomposition."""
    w, v = np.linalg.eigh(mats)
    phases = np.exp(factor * w)
    return np.einsum("...ij,...j,...kj->...ik", v, phases, v.conj())


@dataclass(frozen=True)
class Propagator:
    """Unitaries ``U_k ~ Q(t_k, 0)`` on a time grid.

    ``U_0`` is exactly the identity and every ``U_k`` is unitary within
    ``UNITARITY_ATOL`` (validated at construction).  ``Q(t, s)`` between
    grid points is recovered as ``U_t U_s*``.
    """

    family_label: str
    grid: np.ndarray
    unitaries: np.ndarray  # (K+1, n, n)
    step_scheme: str
    steps_per_interval: int
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        u = self.unitaries
        n = u.shape[-1]
        if not np.array_equal(u[0], np.eye(n)):
            raise ConsistencyError("propagator does not start at the identity")
        defect = self.unitarity_defect()
        if defect > UNITARITY_ATOL:
            raise ConsistencyError(
                f"propagator unitarity defect {defect:.3e} exceeds {UNITARITY_ATOL:.1e}"
            )

    @property
    def dim(self) -> int:
        return self.unitaries.shape[-1]

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def unitarity_defect(self) -> float:
        u = self.unitaries
        eye = np.eye(self.dim)
        return float(np.max(np.abs(np.einsum("kji,kjl->kil", u.conj(), u) - eye)))

    def index_of(self, t: float, *, atol: float | None = None) -> int:
        """Grid index of ``t``; raises ``OffGridError`` rather than interpolating."""
        if atol is None:
            atol = 1e-9 * max(1.0, self.horizon)
        k = int(np.argmin(np.abs(self.grid - t)))
        if abs(float(self.grid[k]) - t) > atol:
            raise OffGridError(
                f"time {t} is not on the propagator grid (nearest {self.grid[k]}); "
                "refine the grid instead of interpolating unitaries"
            )
        return k


def _substep_generators(
    family: OperatorFamily,
    grid: np.ndarray,
    steps: int,
    scheme: str,
) -> np.ndarray:
    """Stack of Hermitian generators, one (or two for CF4) per substep."""
    sub = np.linspace(grid[0], grid[-1], (grid.shape[0] - 1) * steps + 1)
    h = float(sub[1] - sub[0])
    if scheme == SCHEME_MIDPOINT:
        mids = sub[:-1] + h / 2.0
        return np.stack([family.at(float(t)).entries for t in mids])
    near = sub[:-1] + (0.5 - _CF4_NODE) * h
    far = sub[:-1] + (0.5 + _CF4_NODE) * h
    a1 = np.stack([family.at(float(t)).entries for t in near])
    a2 = np.stack([family.at(float(t)).entries for t in far])
    return np.stack([a1, a2])


def _step_factors(
    family: OperatorFamily,
    grid: np.ndarray,
    steps: int,
    scheme: str,
    factor_sign: complex,
) -> np.ndarray:
    """One-step transfer matrices for every substep, in time order."""
    h = float(grid[-1] - grid[0]) / ((grid.shape[0] - 1) * steps)
    gens = _substep_generators(family, grid, steps, scheme)
    if scheme == SCHEME_MIDPOINT:
        return _expi_hermitian_batch(gens, factor_sign * h)
    a1, a2 = gens
    first = _expi_hermitian_batch(_CF4_ALPHA * a1 + _CF4_BETA * a2, factor_sign * h)
    second = _expi_hermitian_batch(_CF4_BETA * a1 + _CF4_ALPHA * a2, factor_sign * h)
    return np.einsum("kij,kjl->kil", second, first)


def propagate(
    family: OperatorFamily,
    intervals: int = 1024,
    steps: int = 1,
    *,
    scheme: str = SCHEME_MIDPOINT,
) -> Propagator:
    """Time-ordered unitary propagator of ``dU/dt = i A(t) U`` on a uniform grid.

    ``intervals`` fixes the stored grid; each interval is integrated with
    ``steps`` substeps.  The midpoint scheme has global error ``O(h^2)``
    against the exact propagator (``O(h^4)`` for the fourth-order scheme)
    and is exact for constant families.
    """
    if intervals < 1 or steps < 1:
        raise ValueError("intervals and steps must be positive")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    grid = np.linspace(0.0, family.horizon, intervals + 1)
    factors = _step_factors(family, grid, steps, scheme, 1j)
    n = family.dim
    unitaries = np.empty((intervals + 1, n, n), dtype=complex)
    unitaries[0] = np.eye(n)
    current = np.eye(n, dtype=complex)
    for k in range(intervals):
        for j in range(steps):
            current = factors[k * steps + j] @ current
        unitaries[k + 1] = current
    notes: tuple[str, ...] = ()
    cost = intervals * steps * n**3
    if cost > COST_BUDGET:
        notes = (
            f"propagation cost {cost:.2e} (substeps x dim^3) exceeds the "
            f"budget {COST_BUDGET:.0e}; consider fewer steps or smaller families",
        )
    return Propagator(
        family_label=family.label,
        grid=grid,
        unitaries=unitaries,
        step_scheme=scheme,
        steps_per_interval=steps,
        notes=notes,
    )


def q_between(propagator: Propagator, t: float, s: float) -> np.ndarray:
    """The unitary ``Q(t, s) = U_t U_s*`` for grid times ``t`` and ``s``."""
    kt = propagator.index_of(t)
    ks = propagator.index_of(s)
    return propagator.unitaries[kt] @ propagator.unitaries[ks].conj().T


def evolved_family(family: OperatorFamily, propagator: Propagator) -> OperatorFamily:
    """The conjugated family ``t -> Q(0, t) A(t) Q(t, 0)`` on the propagator grid.

    Defined at grid points; evaluation snaps to the nearest grid time (the
    family is marked grid-discrete so downstream certificates widen their
    coverage accordingly).  Its pointwise spectrum equals that of the input,
    while its endpoint spectral projections carry the boundary-value index.
    """
    if propagator.dim != family.dim:
        raise DimensionMismatchError(
            f"propagator dim {propagator.dim} != family dim {family.dim}"
        )
    if abs(propagator.horizon - family.horizon) > 1e-9 * max(1.0, family.horizon):
        raise DimensionMismatchError(
            f"propagator horizon {propagator.horizon} != family horizon {family.horizon}"
        )
    grid = propagator.grid
    unitaries = propagator.unitaries
    ev = family.eval_fn
    dv = family.derivative_fn

    def eval_fn(t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(grid - t)))
        u = unitaries[k]
        return u.conj().T @ ev(float(grid[k])) @ u

    deriv_fn = None
    if dv is not None:

        def deriv_fn(t: float) -> np.ndarray:
            k = int(np.argmin(np.abs(grid - t)))
            u = unitaries[k]
            return u.conj().T @ dv(float(grid[k])) @ u

    return OperatorFamily(
        dim=family.dim,
        horizon=family.horizon,
        label=f"{family.label}(evolved)",
        eval_fn=eval_fn,
        derivative_fn=deriv_fn,
        smoothness="discrete",
        grid=grid,
        construction_warnings=family.construction_warnings,
    )


def evolved_projection(
    family: OperatorFamily,
    propagator: Propagator,
    t: float,
    interval: Interval,
    *,
    tau_0: float = TAU_ZERO,
    tau_gap: float = TAU_GAP,
) -> Projection:
    """The evolved spectral projection ``Q(0, t) P_I(t) Q(t, 0)`` at a grid time."""
    k = propagator.index_of(t)
    tk = float(propagator.grid[k])
    base = spectral_projection(eigh(family.at(tk)), interval, tau_0=tau_0, tau_gap=tau_gap)
    u = propagator.unitaries[k]
    mat = u.conj().T @ base.matrix.entries @ u
    return Projection(HermitianMatrix(mat), rank=base.rank)


def closed_form_swap_propagator(
    lambda1: float,
    lambda2: float,
    t: float,
    *,
    profile: PhaseProfile | None = None,
) -> np.ndarray:
    """Exact propagator ``q(t, 0)`` of one eigenline-swapping 2x2 block.

    Analytically unitary for every ``t`` in [0, 1]; at ``t = 1`` it is
    off-diagonal, carrying ``e1`` into the span of ``e2``.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    profile = profile or quintic_profile()
    phi = profile.value(t)
    c, s = math.cos(phi), math.sin(phi)
    e1 = np.exp(1j * lambda1 * t)
    e2 = np.exp(1j * lambda2 * t)
    return np.array([[e1 * c, -e1 * s], [e2 * s, e2 * c]])


def closed_form_counterexample_propagator(
    lambdas,
    t: float,
    *,
    profile: PhaseProfile | None = None,
) -> np.ndarray:
    """Blockwise closed-form propagator of the direct-sum swapping family."""
    lam = np.asarray(lambdas, dtype=float)
    out = np.zeros((2 * lam.size, 2 * lam.size), dtype=complex)
    for i, l in enumerate(lam):
        out[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = closed_form_swap_propagator(
            -l, l, t, profile=profile
        )
    return out


@dataclass(frozen=True)
class Trajectory:
    """A solution sampled on the propagator grid, anchored at ``f(s) = x``."""

    grid: np.ndarray
    values: np.ndarray  # (K+1, n)
    source: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trajectory values must be finite")

    def at_index(self, k: int) -> np.ndarray:
        return self.values[k]


def cauchy_solve(
    family: OperatorFamily,
    propagator: Propagator,
    s: float,
    x,
    g=None,
) -> Trajectory:
    """Solve ``df/dt - i A(t) f = g`` with ``f(s) = x`` on the propagator grid.

    Implements ``f(t) = Q(t, s) x + int_s^t Q(t, r) g(r) dr`` with
    trapezoidal quadrature on the grid (signed for ``t < s``).  ``g`` may be
    ``None`` (zero source), an array sampled on the grid, or a callable.
    """
    ks = propagator.index_of(s)
    grid = propagator.grid
    n = propagator.dim
    x = np.asarray(x, dtype=complex)
    if x.shape != (n,):
        raise DimensionMismatchError(f"x has shape {x.shape}, expected ({n},)")
    if g is None:
        gs = np.zeros((grid.shape[0], n), dtype=complex)
        source = f"x at t={float(grid[ks]):g}, zero source"
    elif callable(g):
        gs = np.stack([np.asarray(g(float(t)), dtype=complex) for t in grid])
        source = f"x at t={float(grid[ks]):g}, callable source"
    else:
        gs = np.asarray(g, dtype=complex)
        source = f"x at t={float(grid[ks]):g}, gridded source"
    if gs.shape != (grid.shape[0], n):
        raise DimensionMismatchError(
            f"source samples have shape {gs.shape}, expected {(grid.shape[0], n)}"
        )
    u = propagator.unitaries
    # pulled-back source d_j = U_j^* g_j; cumulative trapezoid relative to s
    pulled = np.einsum("kji,kj->ki", u.conj(), gs)
    coeff = np.empty_like(pulled)
    anchor = u[ks].conj().T @ x
    coeff[ks] = anchor
    acc = anchor.copy()
    for k in range(ks + 1, grid.shape[0]):
        w = (grid[k] - grid[k - 1]) / 2.0
        acc = acc + w * (pulled[k - 1] + pulled[k])
        coeff[k] = acc
    acc = anchor.copy()
    for k in range(ks - 1, -1, -1):
        w = (grid[k + 1] - grid[k]) / 2.0
        acc = acc - w * (pulled[k] + pulled[k + 1])
        coeff[k] = acc
    values = np.einsum("kij,kj->ki", u, coeff)
    drift = float(np.linalg.norm(values[ks] - x))
    if drift > ANCHOR_ATOL * (1.0 + float(np.linalg.norm(x))):
        raise ConsistencyError(f"solution drifts from its anchor by {drift:.3e}")
    return Trajectory(grid=grid, values=values, source=source)


def cauchy_residual(family: OperatorFamily, trajectory: Trajectory, g=None) -> float:
    """Max discrete residual of ``df/dt - i A f = g`` along the trajectory.

    Uses the midpoint discretization ``(f_{k+1} - f_k)/h - i A(t_{k+1/2})
    (f_k + f_{k+1})/2 - g_mid``; refining the grid must shrink this at
    second order.
    """
    grid = trajectory.grid
    f = trajectory.values
    if g is None:
        gs = np.zeros_like(f)
    elif callable(g):
        gs = np.stack([np.asarray(g(float(t)), dtype=complex) for t in grid])
    else:
        gs = np.asarray(g, dtype=complex)
    worst = 0.0
    for k in range(grid.shape[0] - 1):
        h = float(grid[k + 1] - grid[k])
        mid = (float(grid[k]) + float(grid[k + 1])) / 2.0
        a = family.at(mid).entries
        res = (f[k + 1] - f[k]) / h - 1j * (a @ (f[k] + f[k + 1]) / 2.0) - (gs[k] + gs[k + 1]) / 2.0
        worst = max(worst, float(np.linalg.norm(res)))
    return worst


@dataclass(frozen=True)
class NonunitaryPropagator:
    """Invertible transfer matrices ``R_k ~ R(t_k, 0)`` of the decaying equation."""

    family_label: str
    grid: np.ndarray
    matrices: np.ndarray  # (K+1, n, n)
    condition_log: np.ndarray  # (K+1,)
    warnings: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return self.matrices.shape[-1]


def nonunitary_propagate(
    family: OperatorFamily,
    intervals: int = 512,
    steps: int = 1,
    *,
    stiffness_bound: float = STIFFNESS_BOUND,
    scheme: str = SCHEME_MIDPOINT,
) -> NonunitaryPropagator:
    """Integrate ``dR/dt = -A(t) R`` with exponential midpoint steps.

    Enforces ``max_t ||A(t)|| * T <= stiffness_bound`` (default 40): beyond
    that, ``exp(+-||A|| T)`` leaves double-precision range.  The condition
    number of ``R(t_k, 0)`` is logged at every grid point and a warning is
    attached above ``1e12``.
    """
    norm = family.norm_bound(129)
    if norm * family.horizon > stiffness_bound:
        raise StiffnessError(
            f"||A|| * T = {norm * family.horizon:.3g} exceeds the stiffness bound "
            f"{stiffness_bound:g}; shrink the horizon or the spectrum"
        )
    grid = np.linspace(0.0, family.horizon, intervals + 1)
    factors = _step_factors(family, grid, steps, scheme, -1.0)
    n = family.dim
    mats = np.empty((intervals + 1, n, n), dtype=complex)
    mats[0] = np.eye(n)
    current = np.eye(n, dtype=complex)
    for k in range(intervals):
        for j in range(steps):
            current = factors[k * steps + j] @ current
        mats[k + 1] = current
    sigma = np.linalg.svd(mats, compute_uv=False)
    conds = sigma[:, 0] / np.maximum(sigma[:, -1], np.finfo(float).tiny)
    warnings: tuple[str, ...] = ()
    worst = float(np.max(conds))
    if worst > CONDITION_WARNING:
        warnings = (
            f"non-unitary propagator condition number reaches {worst:.3e} "
            f"(> {CONDITION_WARNING:.0e}); kernel counts may be unreliable",
        )
    return NonunitaryPropagator(
        family_label=family.label,
        grid=grid,
        matrices=mats,
        condition_log=conds,
        warnings=warnings,
    )


@dataclass(frozen=True)
class ConvergenceStudy:
    """Richardson refinement study of propagator accuracy."""

    family_label: str
    scheme: str
    steps: tuple[int, ...]
    deviations: tuple[float, ...]
    ratios: tuple[float, ...]
    expected_ratio: float

    def to_dict(self) -> dict:
        return {
            "family": self.family_label,
            "scheme": self.scheme,
            "steps": list(self.steps),
            "deviations": list(self.deviations),
            "ratios": list(self.ratios),
            "expected_ratio": self.expected_ratio,
        }


def convergence_study(
    family: OperatorFamily,
    *,
    scheme: str = SCHEME_MIDPOINT,
    base_intervals: int = 64,
    halvings: int = 3,
    reference_multiplier: int = 16,
) -> ConvergenceStudy:
    """Measure the convergence order of ``Q(T, 0)`` under step halving.

    Deviations are taken against a single reference at
    ``reference_multiplier`` times the finest grid; successive ratios should
    approach 4 for the midpoint scheme and 16 for the fourth-order scheme.
    """
    counts = [base_intervals * 2**j for j in range(halvings + 1)]
    reference = propagate(family, counts[-1] * reference_multiplier, scheme=scheme)
    ref = reference.unitaries[-1]
    deviations = []
    for c in counts:
        p = propagate(family, c, scheme=scheme)
        deviations.append(float(np.linalg.norm(p.unitaries[-1] - ref, 2)))
    ratios = tuple(
        deviations[j] / deviations[j + 1] if deviations[j + 1] > 0 else math.inf
        for j in range(len(deviations) - 1)
    )
    return ConvergenceStudy(
        family_label=family.label,
        scheme=scheme,
        steps=tuple(counts),
        deviations=tuple(deviations),
        ratios=ratios,
        expected_ratio=4.0 if scheme == SCHEME_MIDPOINT else 16.0,
    )


def propagator_to_payload(propagator: Propagator) -> dict:
    """JSON-ready dump: grid plus flattened complex entries (re/im pairs)."""
    u = propagator.unitaries
    flat = np.stack([u.real, u.imag], axis=-1).reshape(u.shape[0], -1)
    return {
        "family_label": propagator.family_label,
        "step_scheme": propagator.step_scheme,
        "steps_per_interval": propagator.steps_per_interval,
        "dim": propagator.dim,
        "grid": [float(t) for t in propagator.grid],
        "unitaries_re_im": [[float(x) for x in row] for row in flat],
    }


def propagator_from_payload(payload: dict) -> Propagator:
    """Rebuild a propagator from :func:`propagator_to_payload` output.

    This is the import path for replaying an externally computed propagator
    through the index pipeline; the unitarity invariant is revalidated.
    """
    grid = np.asarray(payload["grid"], dtype=float)
    n = int(payload["dim"])
    flat = np.asarray(payload["unitaries_re_im"], dtype=float).reshape(grid.shape[0], n, n, 2)
    unitaries = flat[..., 0] + 1j * flat[..., 1]
    unitaries[0] = np.eye(n)
    return Propagator(
        family_label=str(payload.get("family_label", "imported")),
        grid=grid,
        unitaries=unitaries,
        step_scheme=str(payload.get("step_scheme", SCHEME_MIDPOINT)),
        steps_per_interval=int(payload.get("steps_per_interval", 1)),
        notes=("imported",),
    )


def write_propagator(propagator: Propagator, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(propagator_to_payload(propagator), fh, sort_keys=True)
        fh.write("\n")


def read_propagator(path) -> Propagator:
    with open(path, encoding="utf-8") as fh:
        return propagator_from_payload(json.load(fh))
