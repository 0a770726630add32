"""Spectral flow via flow partitions, with endpoint-index cross-checks.

The flow of a family is computed from a partition ``0 = t_0 < ... < t_N = T``
with per-segment levels ``a_n >= 0`` that stay clear of the spectrum on the
whole segment; the flow is the telescoping sum of the dimension increments
of the spectral subspaces for ``[0, a_n)``.  Segment admissibility is
certified on a sample grid together with an eigenvalue-speed bound (Weyl:
``|d lambda / dt| <= ||A'(t)||``); segments without a certified level are
bisected.  Because any certified level yields the same telescoped integer,
agreement with the independently computed relative index of the endpoint
negative spectral projections is a real check on the certificates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, NoAdmissibleLevelError
from .families import OperatorFamily, unitary_conjugated_family
from .matrixcore import (
    NEGATIVE_AXIS,
    TAU_RANK_PAIR,
    TAU_ZERO,
    IndexReport,
    eigh,
    relative_index,
    snap_eigenvalues,
    spectral_projection,
)

GAMMA_MIN = 1e-6
MIN_SEGMENT_FRACTION = 2.0**-20
DEFAULT_SEGMENT_SAMPLES = 33


@dataclass(frozen=True)
class FlowPartition:
    """A certified flow partition: points, levels, and per-segment evidence."""

    points: np.ndarray
    levels: np.ndarray
    witness_gaps: np.ndarray  # min sampled distance from the level to the spectrum
    certificates: tuple[str, ...]  # "derivative" or "sampled", per segment
    notes: tuple[str, ...] = ()

    @property
    def segments(self) -> int:
        return self.levels.shape[0]

    def to_dict(self) -> dict:
        return {
            "points": [float(t) for t in self.points],
            "levels": [float(a) for a in self.levels],
            "witness_gaps": [float(g) for g in self.witness_gaps],
            "certificates": list(self.certificates),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class CrossingEvent:
    """Diagnostic record of an eigenvalue crossing (or dwelling near) zero."""

    t: float
    eigenvalue_index: int
    value: float
    direction: int  # +1 upward, -1 downward, 0 dwelling near zero

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "eigenvalue_index": self.eigenvalue_index,
            "lambda": self.value,
            "direction": self.direction,
        }


@dataclass(frozen=True)
class SflReport:
    """Spectral flow value with the partition and per-segment terms behind it."""

    value: int
    partition: FlowPartition
    per_segment_terms: tuple[int, ...]
    crossing_log: tuple[CrossingEvent, ...]

    def __post_init__(self):
        if self.value != sum(self.per_segment_terms):
            raise ConsistencyError(
                f"spectral flow {self.value} is not the sum of segment terms "
                f"{self.per_segment_terms}"
            )

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "per_segment_terms": list(self.per_segment_terms),
            "partition": self.partition.to_dict(),
            "crossing_log": [e.to_dict() for e in self.crossing_log],
        }


def crossing_log_to_csv(report: SflReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "eigenvalue_index", "lambda", "direction"])
        for e in report.crossing_log:
            writer.writerow([repr(e.t), e.eigenvalue_index, repr(e.value), e.direction])


def _eig_samples(family: OperatorFamily, ts: np.ndarray) -> np.ndarray:
    stack = np.stack([family.at(t).entries for t in ts])
    return np.linalg.eigvalsh(stack)


def _speed_bound(family: OperatorFamily, ts: np.ndarray) -> tuple[float, str]:
    """Max eigenvalue speed on the segment, from the derivative if available."""
    if family.has_derivative:
        stack = np.stack([family.derivative_at(t).entries for t in ts])
        return float(np.max(np.abs(np.linalg.eigvalsh(stack)))), "derivative"
    if family.smoothness == "discrete" and family.grid is not None:
        lo, hi = float(ts[0]), float(ts[-1])
        keep = (family.grid >= lo - 1e-12) & (family.grid <= hi + 1e-12)
        gts = family.grid[keep]
        if gts.size < 2:
            gts = family.grid[: 2] if family.grid.size >= 2 else ts
        best = 0.0
        prev = family.at(float(gts[0])).entries
        for j in range(1, gts.size):
            cur = family.at(float(gts[j])).entries
            dt = float(gts[j] - gts[j - 1])
            if dt > 0:
                best = max(best, float(np.max(np.abs(np.linalg.eigvalsh((cur - prev) / dt)))))
            prev = cur
        return best, "sampled"
    h = max(family.horizon * 1e-6, 1e-9)
    best = 0.0
    for t in ts:
        lo = min(max(t - h, 0.0), family.horizon - 2 * h)
        diff = (family.at(lo + 2 * h).entries - family.at(lo).entries) / (2 * h)
        best = max(best, float(np.max(np.abs(np.linalg.eigvalsh(diff)))))
    return best, "sampled"


def _candidate_level(pool: np.ndarray, margin: float) -> tuple[float, float] | None:
    """Pick a level ``a >= 0`` at distance >= margin from every pooled eigenvalue.

    Gap candidates are scored by smallness of the level (keeping the counted
    window ``[0, a)`` tight around zero), breaking ties by clearance.  The
    gap above the whole spectrum backstops with a unit-clearance level.
    """
    edges = np.concatenate(([-math.inf], pool, [math.inf]))
    best: tuple[float, float] | None = None
    for left, right in zip(edges[:-1], edges[1:]):
        lo = max(left + margin, 0.0) if math.isfinite(left) else 0.0
        hi = right - margin if math.isfinite(right) else math.inf
        if lo > hi:
            continue
        if not math.isfinite(right):
            cand = max(left, 0.0) + 1.0 if math.isfinite(left) else 1.0
            cand = max(cand, lo)
        elif not math.isfinite(left):
            cand = lo
        else:
            cand = min(max((left + right) / 2.0, lo), hi)
        clearance = float(np.min(np.abs(pool - cand))) if pool.size else math.inf
        if clearance < margin:
            continue
        if best is None or (cand, -clearance) < (best[0], -best[1]):
            best = (cand, clearance)
    return best


def build_flow_partition(
    family: OperatorFamily,
    n_samples: int = DEFAULT_SEGMENT_SAMPLES,
    *,
    gamma_min: float = GAMMA_MIN,
    delta_min: float | None = None,
) -> FlowPartition:
    """Construct a flow partition by adaptive bisection.

    Each candidate segment is sampled at ``n_samples`` uniform times; a level
    is admissible when its distance to every sampled eigenvalue exceeds
    ``gamma_min`` plus the certified excursion ``L * s/2`` (eigenvalue speed
    times half the sample spacing, inflated by half the snap spacing for
    grid-discrete families).  Segments without an admissible level are
    bisected, down to a minimal width of ``delta_min`` (default ``T * 2^-20``),
    below which the family is reported as pathological.
    """
    if n_samples < 2:
        raise ValueError(f"n_samples must be at least 2, got {n_samples}")
    horizon = family.horizon
    if delta_min is None:
        delta_min = horizon * MIN_SEGMENT_FRACTION
    notes: list[str] = []

    points = [0.0]
    levels: list[float] = []
    witness: list[float] = []
    certs: list[str] = []

    def process(t0: float, t1: float) -> None:
        ts = np.linspace(t0, t1, n_samples)
        eigs = _eig_samples(family, ts)
        speed, cert = _speed_bound(family, ts)
        spacing = (t1 - t0) / (n_samples - 1)
        coverage = spacing / 2.0
        if family.smoothness == "discrete" and family.grid is not None and family.grid.size > 1:
            coverage += float(np.max(np.diff(family.grid))) / 2.0
        margin = gamma_min + speed * coverage
        if speed * spacing > gamma_min / 2.0:
            note = (
                f"sampling resolution on [{t0:g}, {t1:g}]: speed {speed:.3g} x spacing "
                f"{spacing:.3g} exceeds gamma_min/2; levels certified with margin {margin:.3g}"
            )
            if not notes or notes[-1].split(":")[0] != note.split(":")[0]:
                notes.append(note)
        pool = np.unique(eigs.ravel())
        found = _candidate_level(pool, margin)
        if found is not None:
            level, clearance = found
            points.append(t1)
            levels.append(level)
            witness.append(clearance)
            certs.append(cert)
            return
        if (t1 - t0) / 2.0 < delta_min:
            raise NoAdmissibleLevelError(
                f"no admissible level on [{t0:g}, {t1:g}] above minimal width "
                f"{delta_min:.3g}: an eigenvalue obstructs every candidate level "
                f"at clearance {margin:.3g}"
            )
        mid = (t0 + t1) / 2.0
        process(t0, mid)
        process(mid, t1)

    process(0.0, horizon)
    return FlowPartition(
        points=np.asarray(points),
        levels=np.asarray(levels),
        witness_gaps=np.asarray(witness),
        certificates=tuple(certs),
        notes=tuple(notes),
    )


def _count_window(eigs: np.ndarray, level: float, tau_0: float) -> int:
    """Dimension of the spectral subspace for ``[0, level)`` with zero snapping."""
    snapped = snap_eigenvalues(eigs, tau_0)
    return int(np.count_nonzero((snapped >= 0.0) & (snapped < level)))


def _crossing_log(
    family: OperatorFamily,
    samples: int,
    tau_0: float,
) -> tuple[CrossingEvent, ...]:
    ts = np.linspace(0.0, family.horizon, samples)
    eigs = _eig_samples(family, ts)
    snapped = snap_eigenvalues(eigs, tau_0)
    events: list[CrossingEvent] = []
    dwelling = np.zeros(eigs.shape[1], dtype=bool)
    for j in range(1, ts.shape[0]):
        prev, cur = snapped[j - 1], snapped[j]
        for i in range(eigs.shape[1]):
            was_neg, is_neg = prev[i] < 0.0, cur[i] < 0.0
            if was_neg != is_neg:
                t_mid = float((ts[j - 1] + ts[j]) / 2.0)
                events.append(CrossingEvent(t_mid, i, float(eigs[j, i]), +1 if was_neg else -1))
        near = np.abs(eigs[j]) <= 10.0 * tau_0
        near_prev = np.abs(eigs[j - 1]) <= 10.0 * tau_0
        for i in range(eigs.shape[1]):
            if near[i] and near_prev[i] and not dwelling[i]:
                events.append(CrossingEvent(float(ts[j - 1]), i, float(eigs[j - 1, i]), 0))
        dwelling = near & near_prev
    return tuple(events)


def spectral_flow(
    family: OperatorFamily,
    n_samples: int = DEFAULT_SEGMENT_SAMPLES,
    *,
    gamma_min: float = GAMMA_MIN,
    tau_0: float = TAU_ZERO,
    delta_min: float | None = None,
    crossing_samples: int = 129,
) -> SflReport:
    """Spectral flow of the family over its full time interval.

    The value is the partition sum of dimension increments of the spectral
    windows ``[0, a_n)``; eigenvalues within ``tau_0`` of zero count as
    exactly zero (hence inside the window).
    """
    partition = build_flow_partition(
        family, n_samples, gamma_min=gamma_min, delta_min=delta_min
    )
    terms: list[int] = []
    for n in range(partition.segments):
        t_prev, t_next = partition.points[n], partition.points[n + 1]
        level = partition.levels[n]
        eig_prev = np.linalg.eigvalsh(family.at(float(t_prev)).entries)
        eig_next = np.linalg.eigvalsh(family.at(float(t_next)).entries)
        terms.append(
            _count_window(eig_next, level, tau_0) - _count_window(eig_prev, level, tau_0)
        )
    return SflReport(
        value=sum(terms),
        partition=partition,
        per_segment_terms=tuple(terms),
        crossing_log=_crossing_log(family, crossing_samples, tau_0),
    )


@dataclass(frozen=True)
class FlowIndexRecord:
    """Agreement record: spectral flow vs relative index of endpoint projections."""

    family_label: str
    sfl_value: int
    pair_index: int
    passed: bool
    sfl_report: SflReport
    index_report: IndexReport

    def to_dict(self) -> dict:
        return {
            "family": self.family_label,
            "check": "flowind",
            "sfl": self.sfl_value,
            "endpoint_pair_index": self.pair_index,
            "passed": self.passed,
            "index_report": self.index_report.to_dict(),
            "sfl_report": self.sfl_report.to_dict(),
        }


def flowind_check(
    family: OperatorFamily,
    *,
    n_samples: int = DEFAULT_SEGMENT_SAMPLES,
    gamma_min: float = GAMMA_MIN,
    tau_0: float = TAU_ZERO,
    tau_rank: float = TAU_RANK_PAIR,
    raise_on_mismatch: bool = True,
) -> FlowIndexRecord:
    """Check that the spectral flow equals the endpoint projection-pair index.

    The flow comes from the partition construction; the index from the
    relative index of the negative spectral projections at ``t = 0`` and
    ``t = T``.  On mismatch the record is raised inside a
    :class:`ConsistencyError` (or returned with ``passed=False`` when
    ``raise_on_mismatch`` is off).
    """
    report = spectral_flow(family, n_samples, gamma_min=gamma_min, tau_0=tau_0)
    p0 = spectral_projection(eigh(family.at(0.0)), NEGATIVE_AXIS, tau_0=tau_0)
    pt = spectral_projection(eigh(family.at(family.horizon)), NEGATIVE_AXIS, tau_0=tau_0)
    pair = relative_index(p0, pt, tau_rank=tau_rank)
    record = FlowIndexRecord(
        family_label=family.label,
        sfl_value=report.value,
        pair_index=pair.index,
        passed=report.value == pair.index,
        sfl_report=report,
        index_report=pair,
    )
    if not record.passed and raise_on_mismatch:
        raise ConsistencyError(
            f"family {family.label!r}: spectral flow {report.value} != "
            f"endpoint pair index {pair.index}",
            record=record,
        )
    return record


@dataclass(frozen=True)
class ConjugationRecord:
    """Agreement record for unitary-conjugation invariance of the flow."""

    family_label: str
    sfl_original: int
    sfl_conjugated: int
    max_spectrum_deviation: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "family": self.family_label,
            "check": "conjugation-invariance",
            "sfl_original": self.sfl_original,
            "sfl_conjugated": self.sfl_conjugated,
            "max_spectrum_deviation": self.max_spectrum_deviation,
            "passed": self.passed,
        }


def sfl_conjugation_invariance_check(
    family: OperatorFamily,
    unitary,
    *,
    spectrum_tol: float = 1e-10,
    n_samples: int = DEFAULT_SEGMENT_SAMPLES,
    gamma_min: float = GAMMA_MIN,
    tau_0: float = TAU_ZERO,
    spectrum_samples: int = 33,
    raise_on_mismatch: bool = True,
) -> ConjugationRecord:
    """Check that conjugating by a unitary family preserves the spectral flow.

    ``unitary`` is either a callable ``t -> U(t)`` or a propagator (in which
    case the conjugated family is the evolved family on the propagator grid).
    Pointwise spectra of the conjugated family must match the original within
    ``spectrum_tol`` at every sample.
    """
    if callable(unitary):
        conj = unitary_conjugated_family(family, unitary)
    else:
        from .evolution import evolved_family

        conj = evolved_family(family, unitary)
    base = spectral_flow(family, n_samples, gamma_min=gamma_min, tau_0=tau_0)
    other = spectral_flow(conj, n_samples, gamma_min=gamma_min, tau_0=tau_0)
    deviation = 0.0
    for t in np.linspace(0.0, family.horizon, spectrum_samples):
        w_base = np.linalg.eigvalsh(family.at(conj._clock(t)).entries)
        w_conj = np.linalg.eigvalsh(conj.at(t).entries)
        deviation = max(deviation, float(np.max(np.abs(w_base - w_conj))))
    record = ConjugationRecord(
        family_label=family.label,
        sfl_original=base.value,
        sfl_conjugated=other.value,
        max_spectrum_deviation=deviation,
        passed=(base.value == other.value) and deviation <= spectrum_tol,
    )
    if not record.passed and raise_on_mismatch:
        raise ConsistencyError(
            f"family {family.label!r}: conjugation changed the flow "
            f"({base.value} -> {other.value}) or the spectrum "
            f"(deviation {deviation:.3e} > {spectrum_tol:.1e})",
            record=record,
        )
    return record
