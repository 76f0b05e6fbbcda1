"""Exact distance metrics: dce, wdmc, dmc, dimc, dcma, low-degree oracle.

Every metric here is a marginal-weighted l1 distance from the audited
predictor to a finite (or finitely-enumerable) set of perfect predictors,
so each returns both the exact rational value and a witness achieving it.

dimc is computed through the partition generated by the group collection:
it decomposes as the sum over partition cells of cell mass times the
conditional distance to calibration on that cell.  This equals the
distance to calibration over the intersection closure of the groups, and
is the continuized variant of dmc (the limit of suprema of dmc over
shrinking neighborhoods of the ground truth); the limit definition is not
computable directly, the decomposition is.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import (
    Instance,
    Marginal,
    PredictorVec,
    Subgroup,
    SubgroupCollection,
    conditional_l1,
    group_mass,
    l1_distance,
)
from .enumeration import (
    calibrated_set,
    complete_predictor,
    is_calibrated,
    is_degree_r_multicalibrated,
    multicalibrated_set,
)

__all__ = [
    "DistanceResult",
    "GeneratedPartition",
    "LowDegreeSearchResult",
    "ProbeReport",
    "dce",
    "wdmc",
    "dmc",
    "intersection_closure",
    "generated_partition",
    "dimc",
    "dcma",
    "dmc_lowdeg_bruteforce",
    "local_min_probe",
]

CLOSURE_CEILING = 20


@dataclass(frozen=True)
class DistanceResult:
    """An exact distance together with a nearest perfect predictor."""

    value: Fraction
    witness: PredictorVec


def dce(inst: Instance, S: Subgroup, override: bool = False) -> DistanceResult:
    """Distance to calibration of the audited predictor conditioned on S.

    Minimizes the conditional l1 distance over cal(D|S).  The witness is a
    global vector agreeing with the audited predictor off S.  Ties broken
    by the lexicographically smallest restricted value vector.
    """
    f = inst.audited
    cs = calibrated_set(inst, S, override=override)
    best: Optional[Fraction] = None
    best_vals = None
    f_restricted = f.restrict(S)
    mass = group_mass(inst.marginal, S)
    for cand in cs:
        d = sum(
            (inst.marginal[x] * abs(f_restricted[j] - cand[j]) for j, x in enumerate(S.members)),
            Fraction(0),
        ) / mass
        if best is None or d < best or (d == best and cand < best_vals):
            best = d
            best_vals = cand
    witness = f.with_values({x: best_vals[j] for j, x in enumerate(S.members)})
    return DistanceResult(value=best, witness=witness)


def wdmc(inst: Instance, override: bool = False) -> tuple[Fraction, Subgroup]:
    """Worst group-mass-weighted conditional distance to calibration."""
    best_val: Optional[Fraction] = None
    best_group: Optional[Subgroup] = None
    for S in inst.groups:
        v = group_mass(inst.marginal, S) * dce(inst, S, override=override).value
        if best_val is None or v > best_val:
            best_val = v
            best_group = S
    return best_val, best_group


def dmc(inst: Instance, budget: int = 10_000_000, override: bool = False) -> DistanceResult:
    """Distance to multicalibration: min l1 distance over mcal_C(D).

    Coordinates uncovered by the groups are unconstrained in every
    multicalibrated predictor, so the witness copies the audited predictor
    there and they contribute zero.
    """
    f = inst.audited
    best: Optional[Fraction] = None
    best_witness = None
    for cand in multicalibrated_set(inst, budget=budget, override=override):
        g = complete_predictor(cand, f)
        d = l1_distance(f, g, inst.marginal)
        if best is None or d < best or (d == best and g.values < best_witness.values):
            best = d
            best_witness = g
    return DistanceResult(value=best, witness=best_witness)


def intersection_closure(C: SubgroupCollection, override: bool = False) -> SubgroupCollection:
    """All non-empty intersections of non-empty subfamilies of C."""
    if len(C) > CLOSURE_CEILING and not override:
        raise ValueError(
            f"collection size {len(C)} exceeds closure ceiling {CLOSURE_CEILING}; "
            "pass override=True to proceed"
        )
    closed: set[tuple[int, ...]] = {g.members for g in C}
    frontier = set(closed)
    while frontier:
        new: set[tuple[int, ...]] = set()
        for a in frontier:
            sa = set(a)
            for g in C:
                inter = tuple(sorted(sa & set(g.members)))
                if inter and inter not in closed:
                    new.add(inter)
        closed.update(new)
        frontier = new
    return SubgroupCollection(sorted(closed))


@dataclass(frozen=True)
class GeneratedPartition:
    """Disjoint cover of the domain by maximal sets with identical
    group-membership signatures; origin[i] lists the group indices whose
    intersection generates cell i."""

    cells: tuple[Subgroup, ...]
    origin: tuple[tuple[int, ...], ...]


def generated_partition(C: SubgroupCollection, n: int) -> GeneratedPartition:
    """Partition generated by C: each point's cell is determined by the set
    of groups containing it.  Requires C to cover the domain."""
    if not C.covers(n):
        raise ValueError("groups must cover the domain to generate a partition")
    signature: dict[tuple[int, ...], list[int]] = {}
    member_sets = [set(g.members) for g in C]
    for x in range(n):
        sig = tuple(i for i, ms in enumerate(member_sets) if x in ms)
        signature.setdefault(sig, []).append(x)
    items = sorted(signature.items(), key=lambda kv: kv[1][0])
    return GeneratedPartition(
        cells=tuple(Subgroup(xs) for _, xs in items),
        origin=tuple(sig for sig, _ in items),
    )


def dimc(inst: Instance, override: bool = False) -> DistanceResult:
    """Distance to intersection multicalibration (= continuized dmc).

    Decomposes over the generated partition: sum of cell mass times the
    conditional distance to calibration on the cell.  The witness is
    assembled cell by cell from the per-cell witnesses.
    """
    part = generated_partition(inst.groups, inst.n)
    total = Fraction(0)
    witness = inst.audited
    for cell in part.cells:
        r = dce(inst, cell, override=override)
        total += group_mass(inst.marginal, cell) * r.value
        witness = witness.with_values({x: r.witness[x] for x in cell.members})
    return DistanceResult(value=total, witness=witness)


def dcma(inst: Instance, override: bool = False) -> DistanceResult:
    """Distance to the set of globally calibrated, multiaccurate predictors."""
    from .enumeration import is_multiaccurate

    everything = Subgroup(range(inst.n))
    f = inst.audited
    best: Optional[Fraction] = None
    best_witness = None
    for cand in calibrated_set(inst, everything, override=override):
        g = PredictorVec(cand)
        if not is_multiaccurate(g, inst):
            continue
        d = l1_distance(f, g, inst.marginal)
        if best is None or d < best or (d == best and g.values < best_witness.values):
            best = d
            best_witness = g
    # p* is always calibrated and multiaccurate, so the set is non-empty.
    return DistanceResult(value=best, witness=best_witness)


@dataclass(frozen=True)
class LowDegreeSearchResult:
    """Grid brute-force distance report; threshold is the residual bound a
    grid candidate must meet to count as degree-r multicalibrated."""

    value: Fraction
    threshold: Fraction
    witness: PredictorVec
    grid_denominator: int


def dmc_lowdeg_bruteforce(inst: Instance, r: int, grid_denominator: int) -> LowDegreeSearchResult:
    """Brute-force distance to degree-r multicalibration over a uniform grid.

    The degree-r conditions define a variety that generically misses any
    finite grid, so exact-zero residuals are relaxed to conditional
    residuals of at most 1/(2 * grid_denominator).  Verification oracle
    only; refuses domains larger than 4 points.
    """
    n = inst.n
    if n > 4:
        raise ValueError("grid brute force is limited to domains of at most 4 points")
    if r < 1:
        raise ValueError("r must be >= 1")
    m = inst.marginal
    p = inst.ground_truth
    f = inst.audited
    threshold = Fraction(1, 2 * grid_denominator)
    grid = [Fraction(i, grid_denominator) for i in range(grid_denominator + 1)]

    # Groups become checkable once all their members are assigned; ordering
    # coordinates 0..n-1 makes each group checkable at its largest member.
    checkable_at: list[list[Subgroup]] = [[] for _ in range(n)]
    for S in inst.groups:
        checkable_at[S.members[-1]].append(S)
    masses = {S.members: group_mass(m, S) for S in inst.groups}

    best: list[Optional[Fraction]] = [None]
    best_vals: list[Optional[tuple[Fraction, ...]]] = [None]
    values: list[Fraction] = [Fraction(0)] * n

    def residual_ok(S: Subgroup) -> bool:
        for j in range(r):
            total = sum(
                (m[i] * values[i] ** j * (values[i] - p[i]) for i in S.members), Fraction(0)
            )
            if abs(total) > threshold * masses[S.members]:
                return False
        return True

    def rec(i: int, partial: Fraction):
        if best[0] is not None and partial >= best[0]:
            return
        if i == n:
            if best[0] is None or partial < best[0]:
                best[0] = partial
                best_vals[0] = tuple(values)
            return
        for v in grid:
            values[i] = v
            if all(residual_ok(S) for S in checkable_at[i]):
                rec(i + 1, partial + m[i] * abs(f[i] - v))

    rec(0, Fraction(0))
    if best[0] is None:  # pragma: no cover - the grid projection of p* passes
        raise RuntimeError("no grid candidate met the residual threshold")
    return LowDegreeSearchResult(
        value=best[0],
        threshold=threshold,
        witness=PredictorVec(best_vals[0]),
        grid_denominator=grid_denominator,
    )


@dataclass(frozen=True)
class ProbeReport:
    metric: str
    baseline: Fraction
    best_value: Fraction
    best_point: Optional[PredictorVec]
    decreased: bool
    trials: int


_DIRECTION_SCALE = 10**6


def local_min_probe(
    metric: str,
    inst: Instance,
    radius: Fraction,
    trials: int,
    seed: int,
) -> ProbeReport:
    """Randomly probe the loss landscape of a metric around the audited
    predictor.

    Samples rational perturbation directions of marginal-weighted l1 norm
    at most radius (coordinate magnitudes drawn uniformly then signed and
    rescaled; the result is clipped to [0,1]^X, which stays inside the
    ball), evaluates the metric exactly at each perturbed predictor, and
    reports the best observed value.  Deterministic given the seed.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    evaluate = _metric_fn(metric)
    f = inst.audited
    n = inst.n
    m = inst.marginal
    baseline = evaluate(inst)
    best_value = baseline
    best_point: Optional[PredictorVec] = None
    rng = random.Random(seed)
    zero, one = Fraction(0), Fraction(1)
    for _ in range(trials):
        mags = [Fraction(rng.randrange(0, _DIRECTION_SCALE + 1), _DIRECTION_SCALE) for _ in range(n)]
        signs = [1 if rng.random() < 0.5 else -1 for _ in range(n)]
        norm = sum((m[i] * mags[i] for i in range(n)), Fraction(0))
        if norm == 0:
            continue
        t = Fraction(rng.randrange(1, _DIRECTION_SCALE + 1), _DIRECTION_SCALE)
        scale = radius * t / norm
        perturbed = PredictorVec(
            [min(one, max(zero, f[i] + signs[i] * mags[i] * scale)) for i in range(n)]
        )
        value = evaluate(inst.with_audited(perturbed))
        if value < best_value:
            best_value = value
            best_point = perturbed
    return ProbeReport(
        metric=metric,
        baseline=baseline,
        best_value=best_value,
        best_point=best_point,
        decreased=best_value < baseline,
        trials=trials,
    )


def _metric_fn(metric: str):
    if metric == "wdmc":
        return lambda inst: wdmc(inst)[0]
    if metric == "dmc":
        return lambda inst: dmc(inst).value
    if metric == "dimc":
        return lambda inst: dimc(inst).value
    if metric == "wdma":
        from .multiaccuracy import wdma

        return lambda inst: wdma(inst)[0]
    if metric == "dma":
        from .multiaccuracy import dma

        return lambda inst: dma(inst).value
    raise ValueError(f"unknown metric {metric!r}")
