"""Time-dependent Hermitian operator families and their constructors.

An :class:`OperatorFamily` is a Hermitian-matrix-valued function of time on
``[0, T]`` with an optional derivative.  This module provides the concrete
builders used throughout: constant and linear families, diagonal paths,
the 2x2 eigenline-swapping blocks and their block-diagonal direct sums,
piecewise-linear ingestion of sampled data, and the endpoint-regularizing
perturbation that pushes endpoint kernels into the positive spectrum.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DimensionMismatchError, FamilyConstructionError
from .matrixcore import TAU_ZERO, HermitianMatrix, eigh, snap_eigenvalues

DERIVATIVE_CHECK_STEP = 1e-4
_VALIDATION_SAMPLES = 9


# ---------------------------------------------------------------------------
# phase profiles for the swapping blocks


@dataclass(frozen=True)
class PhaseProfile:
    """A smooth ramp from 0 to pi/2 on [0, 1] with vanishing endpoint slope."""

    name: str
    value: Callable[[float], float]
    slope: Callable[[float], float]
    curvature: Callable[[float], float]


def quintic_profile() -> PhaseProfile:
    """Quintic smoothstep ramp; max slope 15*pi/16 (about 2.95)."""
    half_pi = math.pi / 2.0

    def value(t: float) -> float:
        return half_pi * (6 * t**5 - 15 * t**4 + 10 * t**3)

    def slope(t: float) -> float:
        return half_pi * 30.0 * t * t * (1.0 - t) ** 2

    def curvature(t: float) -> float:
        return half_pi * (120 * t**3 - 180 * t**2 + 60 * t)

    return PhaseProfile("quintic", value, slope, curvature)


def capped_slope_profile() -> PhaseProfile:
    """Smoothed-trapezoid ramp with max slope exactly 2.

    The slope ramps up over ``[0, r]``, plateaus at 2, and ramps down over
    ``[1-r, 1]`` with ``r = 1 - pi/4`` so the total rise is pi/2.
    """
    r = 1.0 - math.pi / 4.0

    def s(x: float) -> float:
        return 6 * x**5 - 15 * x**4 + 10 * x**3

    def sp(x: float) -> float:
        return 30.0 * x * x * (1.0 - x) ** 2

    def big_s(x: float) -> float:  # integral of s from 0
        return x**6 - 3 * x**5 + 2.5 * x**4

    def value(t: float) -> float:
        if t <= r:
            return 2.0 * r * big_s(t / r)
        if t <= 1.0 - r:
            return r + 2.0 * (t - r)
        return math.pi / 2.0 - 2.0 * r * big_s((1.0 - t) / r)

    def slope(t: float) -> float:
        if t <= r:
            return 2.0 * s(t / r)
        if t <= 1.0 - r:
            return 2.0
        return 2.0 * s((1.0 - t) / r)

    def curvature(t: float) -> float:
        if t <= r:
            return 2.0 * sp(t / r) / r
        if t <= 1.0 - r:
            return 0.0
        return -2.0 * sp((1.0 - t) / r) / r

    return PhaseProfile("capped-slope", value, slope, curvature)


_PROFILES = {"quintic": quintic_profile, "capped-slope": capped_slope_profile}


# ---------------------------------------------------------------------------
# the family type


@dataclass(frozen=True)
class OperatorFamily:
    """A Hermitian-matrix-valued function of time on ``[0, T]``.

    ``smoothness`` distinguishes genuinely smooth families from
    piecewise-differentiable interpolants and from grid-snapped discrete
    families (whose evaluation rounds to the nearest grid time).  Flow
    certificates downstream use it to pick a Lipschitz estimator.
    """

    dim: int
    horizon: float
    label: str
    eval_fn: Callable[[float], np.ndarray]
    derivative_fn: Callable[[float], np.ndarray] | None = None
    smoothness: str = "smooth"  # smooth | piecewise | discrete
    grid: np.ndarray | None = None  # snap targets for discrete families
    construction_warnings: tuple[str, ...] = ()

    @property
    def has_derivative(self) -> bool:
        return self.derivative_fn is not None

    def _clock(self, t: float) -> float:
        if t < -1e-12 or t > self.horizon + 1e-12:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        t = min(max(t, 0.0), self.horizon)
        if self.smoothness == "discrete" and self.grid is not None:
            t = float(self.grid[int(np.argmin(np.abs(self.grid - t)))])
        return t

    def at(self, t: float) -> HermitianMatrix:
        return HermitianMatrix(self.eval_fn(self._clock(t)))

    def derivative_at(self, t: float) -> HermitianMatrix:
        if self.derivative_fn is None:
            raise FamilyConstructionError(f"family {self.label!r} has no derivative")
        return HermitianMatrix(self.derivative_fn(self._clock(t)))

    def norm_bound(self, samples: int = 65) -> float:
        """Max spectral norm over a uniform time sample."""
        ts = np.linspace(0.0, self.horizon, samples)
        return max(self.at(t).norm2() for t in ts)

    def restricted(self, t0: float, t1: float, label: str | None = None) -> "OperatorFamily":
        """The family on ``[t0, t1]`` reparametrized to start at 0."""
        if not (0.0 <= t0 < t1 <= self.horizon + 1e-12):
            raise ValueError(f"invalid restriction [{t0}, {t1}] of [0, {self.horizon}]")
        ev = self.eval_fn
        dv = self.derivative_fn
        grid = None
        if self.grid is not None:
            keep = (self.grid >= t0 - 1e-12) & (self.grid <= t1 + 1e-12)
            grid = self.grid[keep] - t0
            if grid.size == 0:
                # window narrower than the snap spacing: defer to the
                # underlying evaluator's own snapping
                grid = None
        return OperatorFamily(
            dim=self.dim,
            horizon=t1 - t0,
            label=label or f"{self.label}|[{t0:g},{t1:g}]",
            eval_fn=lambda s: ev(t0 + s),
            derivative_fn=None if dv is None else (lambda s: dv(t0 + s)),
            smoothness=self.smoothness,
            grid=grid,
            construction_warnings=self.construction_warnings,
        )

    def time_reversed(self) -> "OperatorFamily":
        ev = self.eval_fn
        dv = self.derivative_fn
        horizon = self.horizon
        grid = None if self.grid is None else np.sort(horizon - self.grid)
        return OperatorFamily(
            dim=self.dim,
            horizon=horizon,
            label=f"{self.label}(reversed)",
            eval_fn=lambda s: ev(horizon - s),
            derivative_fn=None if dv is None else (lambda s: -dv(horizon - s)),
            smoothness=self.smoothness,
            grid=grid,
            construction_warnings=self.construction_warnings,
        )


def _norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def _validated_family(
    dim: int,
    horizon: float,
    label: str,
    eval_fn: Callable[[float], np.ndarray],
    derivative_fn: Callable[[float], np.ndarray] | None,
    *,
    smoothness: str = "smooth",
    grid: np.ndarray | None = None,
    strict: bool = False,
    extra_warnings: tuple[str, ...] = (),
) -> OperatorFamily:
    """Run construction checks and assemble the family.

    Hermiticity is enforced at sampled times.  When a derivative is present
    and the family is smooth, it is compared against a symmetric finite
    difference; the allowed defect is ``C h^2`` with ``C`` estimated from
    second differences (plus a roundoff floor).  Failures are warnings by
    default and errors under ``strict``.
    """
    if horizon <= 0:
        raise FamilyConstructionError(f"horizon must be positive, got {horizon}")
    warnings = list(extra_warnings)
    ts = np.linspace(0.0, horizon, _VALIDATION_SAMPLES)
    for t in ts:
        a = np.asarray(eval_fn(t), dtype=complex)
        if a.shape != (dim, dim):
            raise FamilyConstructionError(
                f"family {label!r}: eval at t={t} returned shape {a.shape}, expected {(dim, dim)}"
            )
        HermitianMatrix(a)  # raises if non-Hermitian beyond tolerance

    if derivative_fn is not None and smoothness == "smooth":
        h = min(DERIVATIVE_CHECK_STEP, horizon / 1000.0)
        interior = np.linspace(h, horizon - h, 5)
        worst = 0.0
        worst_tol = 1.0
        for t in interior:
            plus = np.asarray(eval_fn(t + h), dtype=complex)
            minus = np.asarray(eval_fn(t - h), dtype=complex)
            here = np.asarray(eval_fn(t), dtype=complex)
            fd = (plus - minus) / (2.0 * h)
            second = (plus - 2.0 * here + minus) / (h * h)
            c = 10.0 * max(_norm(second), 1.0)
            tol = c * h * h + 1e-8 * (1.0 + _norm(here))
            defect = _norm(fd - np.asarray(derivative_fn(t), dtype=complex))
            if defect / tol > worst / worst_tol:
                worst, worst_tol = defect, tol
        if worst > worst_tol:
            message = (
                f"family {label!r}: derivative disagrees with finite difference "
                f"(defect {worst:.3e} > allowance {worst_tol:.3e})"
            )
            if strict:
                raise FamilyConstructionError(message)
            warnings.append(message)

    return OperatorFamily(
        dim=dim,
        horizon=float(horizon),
        label=label,
        eval_fn=eval_fn,
        derivative_fn=derivative_fn,
        smoothness=smoothness,
        grid=grid,
        construction_warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# builders


def constant_family(a0: HermitianMatrix, horizon: float, *, label: str | None = None) -> OperatorFamily:
    """The family ``A(t) = A0`` with identically zero derivative."""
    entries = a0.entries
    zero = np.zeros_like(entries)
    return _validated_family(
        a0.dim,
        horizon,
        label or "constant",
        lambda t: entries,
        lambda t: zero,
    )


def linear_family(
    a0: HermitianMatrix,
    b: HermitianMatrix,
    horizon: float,
    *,
    label: str | None = None,
) -> OperatorFamily:
    """The family ``A(t) = A0 + t B`` with derivative ``B``."""
    if a0.dim != b.dim:
        raise DimensionMismatchError(f"dims differ: {a0.dim} vs {b.dim}")
    ea, eb = a0.entries, b.entries
    return _validated_family(
        a0.dim,
        horizon,
        label or "linear",
        lambda t: ea + t * eb,
        lambda t: eb,
    )


def diagonal_path_family(
    start,
    end,
    horizon: float,
    *,
    label: str | None = None,
) -> OperatorFamily:
    """Diagonal family with entries moving linearly from ``start`` to ``end``."""
    d0 = np.asarray(start, dtype=float)
    d1 = np.asarray(end, dtype=float)
    if d0.ndim != 1 or d0.shape != d1.shape:
        raise DimensionMismatchError(
            f"start/end must be equal-length vectors, got {d0.shape} and {d1.shape}"
        )
    a0 = HermitianMatrix(np.diag(d0))
    b = HermitianMatrix(np.diag((d1 - d0) / horizon))
    return linear_family(a0, b, horizon, label=label or "diagonal-path")


def _swap_block_entries(lambda1: float, lambda2: float, profile: PhaseProfile):
    delta = lambda1 - lambda2
    a = np.diag([lambda1, lambda2]).astype(complex)

    def eval_fn(t: float) -> np.ndarray:
        beta = 1j * profile.slope(t) * np.exp(1j * delta * t)
        return a + np.array([[0.0, beta], [np.conj(beta), 0.0]])

    def deriv_fn(t: float) -> np.ndarray:
        beta = 1j * (profile.curvature(t) + 1j * delta * profile.slope(t)) * np.exp(1j * delta * t)
        return np.array([[0.0, beta], [np.conj(beta), 0.0]])

    return eval_fn, deriv_fn


def swap_block_family(
    lambda1: float,
    lambda2: float,
    *,
    profile: PhaseProfile | None = None,
    label: str | None = None,
) -> OperatorFamily:
    """A 2x2 family on [0, 1] whose evolution swaps the two eigenlines.

    ``A(t) = diag(l1, l2) + b(t)`` where the off-diagonal perturbation
    ``b`` vanishes at both endpoints and is driven by a phase ramp from 0
    to pi/2.  The endpoint spectra are unchanged but transport carries
    ``e1`` into the span of ``e2``; in closed form the evolution is given
    by :func:`apsflow.evolution.closed_form_swap_propagator`.
    """
    profile = profile or quintic_profile()
    eval_fn, deriv_fn = _swap_block_entries(lambda1, lambda2, profile)
    return _validated_family(
        2,
        1.0,
        label or f"swap-block({lambda1:g},{lambda2:g})",
        eval_fn,
        deriv_fn,
    )


def counterexample_family(
    lambdas,
    *,
    profile: PhaseProfile | None = None,
    label: str | None = None,
) -> OperatorFamily:
    """Block-diagonal direct sum of swapping blocks ``diag(-l_i, +l_i)``.

    Every block's evolution exchanges its negative and positive eigenlines,
    so the boundary-value kernel and cokernel both grow linearly with the
    number of blocks while the index and the spectral flow stay zero.
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size < 1:
        raise ConfigError("lambdas must be a nonempty 1-d array")
    if np.any(lam <= 0):
        raise ConfigError(f"lambdas must be strictly positive, got {lam.tolist()}")
    if np.any(np.diff(lam) < 0):
        raise ConfigError(f"lambdas must be ascending, got {lam.tolist()}")
    profile = profile or quintic_profile()
    blocks = [_swap_block_entries(-l, l, profile) for l in lam]
    m = lam.size
    dim = 2 * m

    def eval_fn(t: float) -> np.ndarray:
        out = np.zeros((dim, dim), dtype=complex)
        for i, (ev, _) in enumerate(blocks):
            out[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = ev(t)
        return out

    def deriv_fn(t: float) -> np.ndarray:
        out = np.zeros((dim, dim), dtype=complex)
        for i, (_, dv) in enumerate(blocks):
            out[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = dv(t)
        return out

    return _validated_family(
        dim,
        1.0,
        label or f"counterexample(m={m})",
        eval_fn,
        deriv_fn,
    )


# ---------------------------------------------------------------------------
# endpoint regularization


def _bump(x: float) -> float:
    if x <= 0.0:
        return 0.0
    return math.exp(-1.0 / x)


def _plateau(u: float) -> float:
    """Smooth monotone step: 0 for u <= 0, 1 for u >= 1."""
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    a = _bump(u)
    b = _bump(1.0 - u)
    return a / (a + b)


def _plateau_slope(u: float) -> float:
    if u <= 0.0 or u >= 1.0:
        return 0.0
    a = _bump(u)
    b = _bump(1.0 - u)
    ap = a / (u * u)
    bp = b / ((1.0 - u) * (1.0 - u))
    return (ap * b + a * bp) / (a + b) ** 2


def kernel_projection(h: HermitianMatrix, *, tau_0: float = TAU_ZERO) -> np.ndarray:
    """Orthogonal projection onto the (snapped) kernel of ``h``."""
    s = eigh(h)
    keep = snap_eigenvalues(s.eigenvalues, tau_0) == 0.0
    v = s.eigenvectors[:, keep]
    return v @ v.conj().T


def endpoint_regularize(
    family: OperatorFamily,
    epsilon: float = 0.1,
    *,
    tau_0: float = TAU_ZERO,
    strict: bool = False,
) -> OperatorFamily:
    """Push endpoint kernels into the strictly positive spectrum.

    Adds ``chi(t) P0(A(0)) + chi(T - t) P0(A(T))`` where ``P0`` projects
    onto the snapped kernel and ``chi`` is a smooth plateau bump that is
    identically 1 on ``[0, eps*T/3]`` and supported in ``[0, eps*T)``.  The
    family is returned unchanged (same object) when both endpoint kernels
    are trivial; otherwise it agrees with the input exactly outside the
    two bump windows, has invertible endpoints, and keeps both the spectral
    flow and the boundary-value index of the original family.
    """
    if not 0.0 < epsilon < 0.5:
        raise ConfigError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    t_end = family.horizon
    p_left = kernel_projection(family.at(0.0), tau_0=tau_0)
    p_right = kernel_projection(family.at(t_end), tau_0=tau_0)
    rank_left = int(round(float(np.real(np.trace(p_left)))))
    rank_right = int(round(float(np.real(np.trace(p_right)))))
    if rank_left == 0 and rank_right == 0:
        return family

    window = epsilon * t_end
    scale = 2.0 * window / 3.0

    def chi(t: float) -> float:
        return _plateau((window - t) / scale)

    def chi_slope(t: float) -> float:
        return -_plateau_slope((window - t) / scale) / scale

    ev = family.eval_fn
    dv = family.derivative_fn

    def eval_fn(t: float) -> np.ndarray:
        return ev(t) + chi(t) * p_left + chi(t_end - t) * p_right

    deriv_fn = None
    if dv is not None:

        def deriv_fn(t: float) -> np.ndarray:
            return dv(t) + chi_slope(t) * p_left - chi_slope(t_end - t) * p_right

    return _validated_family(
        family.dim,
        t_end,
        f"{family.label}+endpoint-regularized",
        eval_fn,
        deriv_fn,
        smoothness=family.smoothness,
        grid=family.grid,
        strict=strict,
        extra_warnings=family.construction_warnings,
    )


# ---------------------------------------------------------------------------
# sampled data and conjugation


def sampled_family(
    times,
    matrices,
    *,
    atol: float = 1e-10,
    label: str | None = None,
) -> OperatorFamily:
    """Piecewise-linear interpolation of Hermitian samples in time.

    Entrywise linear interpolation preserves Hermiticity; the derivative is
    the piecewise-constant slope (right-continuous at the knots).  The
    result is only piecewise-differentiable, which is flagged as a
    construction warning since downstream flow certificates assume a
    continuously differentiable family between samples.
    """
    ts = np.asarray(times, dtype=float)
    if ts.ndim != 1 or ts.size < 2:
        raise ConfigError("need at least two sample times")
    if abs(ts[0]) > 1e-12:
        raise ConfigError(f"sample times must start at 0, got {ts[0]}")
    if np.any(np.diff(ts) <= 0):
        raise ConfigError("sample times must be strictly increasing")
    mats = [HermitianMatrix(m, atol=atol).entries for m in matrices]
    if len(mats) != ts.size:
        raise DimensionMismatchError(f"{ts.size} times but {len(mats)} matrices")
    dim = mats[0].shape[0]
    if any(m.shape != (dim, dim) for m in mats):
        raise DimensionMismatchError("sampled matrices have inconsistent dimensions")
    stack = np.stack(mats)
    horizon = float(ts[-1])

    def eval_fn(t: float) -> np.ndarray:
        j = int(np.searchsorted(ts, t, side="right")) - 1
        j = min(max(j, 0), ts.size - 2)
        w = (t - ts[j]) / (ts[j + 1] - ts[j])
        return (1.0 - w) * stack[j] + w * stack[j + 1]

    def deriv_fn(t: float) -> np.ndarray:
        j = int(np.searchsorted(ts, t, side="right")) - 1
        j = min(max(j, 0), ts.size - 2)
        return (stack[j + 1] - stack[j]) / (ts[j + 1] - ts[j])

    return _validated_family(
        dim,
        horizon,
        label or f"sampled({ts.size} knots)",
        eval_fn,
        deriv_fn,
        smoothness="piecewise",
        extra_warnings=(
            "sampled family is piecewise-C1: interpolation is linear between "
            "knots and the derivative jumps at knots",
        ),
    )


def unitary_conjugated_family(
    family: OperatorFamily,
    unitary_fn: Callable[[float], np.ndarray],
    *,
    atol: float = 1e-10,
    label: str | None = None,
) -> OperatorFamily:
    """The family ``t -> U(t)* A(t) U(t)`` for a pointwise-unitary ``U``.

    ``U(t)`` is checked to be unitary within ``atol`` at sampled times.  The
    conjugated family carries no derivative (the derivative of ``U`` is not
    available), so downstream Lipschitz estimates fall back to sampling.
    """
    ev = family.eval_fn
    for t in np.linspace(0.0, family.horizon, _VALIDATION_SAMPLES):
        u = np.asarray(unitary_fn(t), dtype=complex)
        if u.shape != (family.dim, family.dim):
            raise DimensionMismatchError(f"U({t}) has shape {u.shape}")
        defect = float(np.max(np.abs(u.conj().T @ u - np.eye(family.dim))))
        if defect > atol:
            raise ValueError(f"U({t}) is not unitary (defect {defect:.3e} > {atol:.1e})")

    def eval_fn(t: float) -> np.ndarray:
        u = np.asarray(unitary_fn(t), dtype=complex)
        return u.conj().T @ ev(t) @ u

    return _validated_family(
        family.dim,
        family.horizon,
        label or f"{family.label}(conjugated)",
        eval_fn,
        None,
        smoothness=family.smoothness,
        grid=family.grid,
    )


# ---------------------------------------------------------------------------
# declarative family descriptions and serialization

FAMILY_KINDS = (
    "constant",
    "linear",
    "diagonal-path",
    "swap-block",
    "counterexample",
    "custom-samples",
)


@dataclass(frozen=True)
class FamilySpec:
    """Declarative description of a family, as written in experiment configs."""

    kind: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ConfigError(f"unknown family kind {self.kind!r}; expected one of {FAMILY_KINDS}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parameters": dict(self.parameters)}


def matrix_to_pairs(entries) -> list:
    """Row-major nested list of ``[re, im]`` pairs."""
    a = np.asarray(entries, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def matrix_from_pairs(pairs) -> np.ndarray:
    a = np.asarray(pairs, dtype=float)
    if a.ndim != 3 or a.shape[2] != 2:
        raise ConfigError(f"expected an n x n x 2 array of (re, im) pairs, got shape {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def _matrix_param(params: dict, key: str) -> HermitianMatrix:
    if key in params:
        return HermitianMatrix(matrix_from_pairs(params[key]))
    diag_key = f"{key}_diagonal"
    if diag_key in params:
        return HermitianMatrix(np.diag(np.asarray(params[diag_key], dtype=float)))
    raise ConfigError(f"family parameters need {key!r} (re/im pairs) or {diag_key!r}")


def family_from_spec(spec: FamilySpec, *, strict: bool = False) -> OperatorFamily:
    """Construct the family described by ``spec``.

    Under ``strict``, construction warnings (derivative mismatches,
    piecewise smoothness flags) become errors.
    """
    p = dict(spec.parameters)
    try:
        family = _family_from_spec_params(spec.kind, p)
    except KeyError as exc:
        raise ConfigError(f"family kind {spec.kind!r} is missing parameter {exc}") from exc
    if strict and family.construction_warnings:
        raise FamilyConstructionError(
            f"family {family.label!r} carries construction warnings under strict "
            f"mode: {'; '.join(family.construction_warnings)}"
        )
    return family


def _family_from_spec_params(kind: str, p: dict) -> OperatorFamily:
    if kind == "constant":
        return constant_family(_matrix_param(p, "matrix"), float(p.get("horizon", 1.0)))
    if kind == "linear":
        return linear_family(
            _matrix_param(p, "a0"),
            _matrix_param(p, "b"),
            float(p.get("horizon", 1.0)),
        )
    if kind == "diagonal-path":
        return diagonal_path_family(p["start"], p["end"], float(p.get("horizon", 1.0)))
    if kind == "swap-block":
        profile = _PROFILES[p.get("profile", "quintic")]()
        return swap_block_family(float(p["lambda1"]), float(p["lambda2"]), profile=profile)
    if kind == "counterexample":
        profile = _PROFILES[p.get("profile", "quintic")]()
        lambdas = p.get("lambdas")
        if lambdas is None:
            lambdas = np.arange(1, int(p["m"]) + 1, dtype=float)
        return counterexample_family(lambdas, profile=profile)
    if kind == "custom-samples":
        if "path" in p:
            times, mats = read_sample_series(p["path"])
        else:
            times = p["times"]
            mats = [matrix_from_pairs(m) for m in p["matrices"]]
        return sampled_family(times, mats)
    raise ConfigError(f"unhandled family kind {kind!r}")


def write_sample_series(path, times, matrices) -> None:
    """Write a matrix time series (JSON or CSV chosen by extension).

    JSON holds ``{"times": [...], "matrices": [pairs...]}``; CSV has one
    record per time point with columns ``t, re_0_0, im_0_0, re_0_1, ...``
    in row-major order.
    """
    path = str(path)
    ts = [float(t) for t in times]
    mats = [np.asarray(m, dtype=complex) for m in matrices]
    if path.endswith(".json"):
        payload = {"times": ts, "matrices": [matrix_to_pairs(m) for m in mats]}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
        return
    n = mats[0].shape[0]
    header = ["t"]
    for j in range(n):
        for k in range(n):
            header += [f"re_{j}_{k}", f"im_{j}_{k}"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, m in zip(ts, mats):
            row = [repr(t)]
            for j in range(n):
                for k in range(n):
                    row += [repr(float(m[j, k].real)), repr(float(m[j, k].imag))]
            writer.writerow(row)


def read_sample_series(path) -> tuple[np.ndarray, list[np.ndarray]]:
    """Read a matrix time series written by :func:`write_sample_series`."""
    path = str(path)
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        times = np.asarray(payload["times"], dtype=float)
        mats = [matrix_from_pairs(m) for m in payload["matrices"]]
        return times, mats
    times = []
    mats = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = int(round(math.sqrt((len(header) - 1) / 2)))
        if 1 + 2 * n * n != len(header):
            raise ConfigError(f"CSV header of {path} does not describe a square complex matrix")
        for row in reader:
            times.append(float(row[0]))
            vals = np.asarray(row[1:], dtype=float)
            mats.append(vals[0::2].reshape(n, n) + 1j * vals[1::2].reshape(n, n))
    return np.asarray(times), mats
