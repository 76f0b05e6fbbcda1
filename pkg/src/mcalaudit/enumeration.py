"""Enumeration of calibrated and multicalibrated predictor sets.

The set of perfectly calibrated predictors on a finite domain is finite:
every calibrated predictor is constant on the classes of some set partition
of the domain, with each class value equal to the class-conditional mean of
the ground truth.  Enumerating set partitions (Bell(n) of them) therefore
enumerates every candidate, and an exact membership check filters the rest.

Multicalibrated predictors are assembled by joining per-group calibrated
sets under agreement on overlaps.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional

from .core import Instance, PredictorVec, Subgroup, group_mass

# Bell(12) = 4,213,597; beyond this the partition stream is impractical.
PARTITION_CEILING = 12

__all__ = [
    "PARTITION_CEILING",
    "SetPartition",
    "CalibratedSet",
    "bell_number",
    "partitions",
    "is_calibrated",
    "calibrated_set",
    "multicalibrated_set",
    "complete_predictor",
    "is_multicalibrated",
    "is_multiaccurate",
    "is_degree_r_multicalibrated",
]


@dataclass(frozen=True)
class SetPartition:
    """A partition of {0..k-1} into disjoint non-empty classes.

    Classes are stored sorted by smallest element, which is the canonical
    order produced by the restricted-growth-string enumeration.
    """

    classes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for c in self.classes:
            if not c:
                raise ValueError("empty class")
            if seen & set(c):
                raise ValueError("classes must be disjoint")
            seen.update(c)
        if seen != set(range(len(seen))):
            raise ValueError("classes must cover a 0..k-1 range")
        if list(self.classes) != sorted(self.classes, key=lambda c: c[0]):
            raise ValueError("classes must be sorted by smallest element")

    @property
    def k(self) -> int:
        return sum(len(c) for c in self.classes)


@lru_cache(maxsize=None)
def bell_number(k: int) -> int:
    if k == 0:
        return 1
    # Bell triangle recurrence
    row = [1]
    for _ in range(k - 1):
        new = [row[-1]]
        for v in row:
            new.append(new[-1] + v)
        row = new
    return row[-1]


def partitions(k: int, override: bool = False) -> Iterator[SetPartition]:
    """Yield every set partition of {0..k-1} exactly once.

    Enumerates restricted growth strings: position i gets a class label in
    {0..max(labels[:i])+1}.  Canonical order, Bell(k) partitions in total.
    Refuses k > PARTITION_CEILING unless override is set.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > PARTITION_CEILING and not override:
        raise ValueError(
            f"k={k} exceeds the partition ceiling {PARTITION_CEILING} "
            f"(Bell({PARTITION_CEILING}) = {bell_number(PARTITION_CEILING)}); "
            "pass override=True to proceed anyway"
        )

    labels = [0] * k

    def emit() -> SetPartition:
        nclasses = max(labels) + 1
        classes: list[list[int]] = [[] for _ in range(nclasses)]
        for i, c in enumerate(labels):
            classes[c].append(i)
        return SetPartition(tuple(tuple(c) for c in classes))

    def rec(i: int, top: int):
        if i == k:
            yield emit()
            return
        for c in range(top + 2):
            labels[i] = c
            yield from rec(i + 1, max(top, c))

    yield from rec(1, 0) if k > 1 else iter([emit()])


def is_calibrated(f: PredictorVec, inst: Instance, S: Subgroup) -> bool:
    """Exact calibration of f on S: on each level set of f within S, the
    marginal-weighted mean of the ground truth equals the predicted value."""
    by_value: dict[Fraction, list[int]] = {}
    for i in S.members:
        by_value.setdefault(f[i], []).append(i)
    m = inst.marginal
    p = inst.ground_truth
    for v, idxs in by_value.items():
        mass = sum((m[i] for i in idxs), Fraction(0))
        mean_num = sum((m[i] * p[i] for i in idxs), Fraction(0))
        if mean_num != v * mass:
            return False
    return True


@dataclass(frozen=True)
class CalibratedSet:
    """All perfectly calibrated predictors on a subgroup, up to restriction.

    Each entry of `predictors` is a value tuple aligned with
    subgroup.members order.
    """

    predictors: tuple[tuple[Fraction, ...], ...]
    subgroup: Subgroup

    def __len__(self) -> int:
        return len(self.predictors)

    def __iter__(self):
        return iter(self.predictors)


def calibrated_set(inst: Instance, S: Subgroup, override: bool = False) -> CalibratedSet:
    """Enumerate cal(D|S) exactly.

    For each partition of S, the candidate assigns every class its
    class-conditional mean of the ground truth; the candidate survives iff
    it passes is_calibrated (classes sharing a mean merge into one level
    set, which the final check revalidates). Deduplicated.
    """
    members = S.members
    m = inst.marginal
    p = inst.ground_truth
    found: set[tuple[Fraction, ...]] = set()
    for part in partitions(len(members), override=override):
        values: list[Optional[Fraction]] = [None] * len(members)
        for cls in part.classes:
            mass = sum((m[members[j]] for j in cls), Fraction(0))
            mean = sum((m[members[j]] * p[members[j]] for j in cls), Fraction(0)) / mass
            for j in cls:
                values[j] = mean
        cand = tuple(values)
        if cand in found:
            continue
        g = inst.audited.with_values({members[j]: cand[j] for j in range(len(members))})
        if is_calibrated(g, inst, S):
            found.add(cand)
    return CalibratedSet(tuple(sorted(found)), S)


def multicalibrated_set(
    inst: Instance, budget: int = 10_000_000, override: bool = False
) -> list[tuple[Optional[Fraction], ...]]:
    """Enumerate mcal_C(D) exactly via a compatibility join.

    Computes cal(D|S_i) per group, then backtracks over tuples of per-group
    choices that agree on every overlap.  Coordinates not covered by any
    group are unconstrained and returned as None (callers substitute the
    audited predictor there, which contributes zero to any distance).

    The worst-case join size is the product of per-group Bell numbers;
    a budget refusal reports the offending bound.
    """
    groups = list(inst.groups)
    bound = 1
    for g in groups:
        bound *= bell_number(len(g))
    if bound > budget and not override:
        raise ValueError(
            f"per-group Bell-number product {bound} exceeds budget {budget}; "
            "pass override=True or raise the budget"
        )

    cal_sets = {g.members: calibrated_set(inst, g, override=override) for g in groups}

    # Join order: most overlap with already-joined coordinates first, to
    # prune inconsistent tuples early.
    ordered: list[Subgroup] = []
    remaining = groups[:]
    covered: set[int] = set()
    while remaining:
        best = max(remaining, key=lambda g: (len(covered & set(g.members)), -len(g)))
        ordered.append(best)
        remaining.remove(best)
        covered.update(best.members)

    n = inst.n
    results: set[tuple[Optional[Fraction], ...]] = set()
    assignment: list[Optional[Fraction]] = [None] * n

    def rec(gi: int):
        if gi == len(ordered):
            results.add(tuple(assignment))
            return
        S = ordered[gi]
        for cand in cal_sets[S.members]:
            touched = []
            ok = True
            for j, x in enumerate(S.members):
                cur = assignment[x]
                if cur is None:
                    assignment[x] = cand[j]
                    touched.append(x)
                elif cur != cand[j]:
                    ok = False
                    break
            if ok:
                rec(gi + 1)
            for x in touched:
                assignment[x] = None

    rec(0)
    return sorted(results, key=lambda t: tuple((v is not None, v) for v in t))


def complete_predictor(values: tuple[Optional[Fraction], ...], fallback: PredictorVec) -> PredictorVec:
    """Fill unconstrained (None) coordinates with the fallback's values."""
    return PredictorVec([fallback[i] if v is None else v for i, v in enumerate(values)])


def is_multicalibrated(f: PredictorVec, inst: Instance) -> bool:
    return all(is_calibrated(f, inst, S) for S in inst.groups)


def is_multiaccurate(f: PredictorVec, inst: Instance) -> bool:
    """Zero bias on every group: weighted sums of f and of the ground truth
    agree over each group."""
    m = inst.marginal
    p = inst.ground_truth
    for S in inst.groups:
        diff = sum((m[i] * (p[i] - f[i]) for i in S.members), Fraction(0))
        if diff != 0:
            return False
    return True


def is_degree_r_multicalibrated(f: PredictorVec, inst: Instance, r: int) -> bool:
    """Degree-r multicalibration: on every group, the residual f - p* is
    orthogonal to every polynomial weight w(f(x)) of degree < r.  Checking
    the monomials t^j for 0 <= j < r suffices by linearity."""
    if r < 1:
        raise ValueError("r must be >= 1")
    m = inst.marginal
    p = inst.ground_truth
    for S in inst.groups:
        for j in range(r):
            total = sum(
                (m[i] * f[i] ** j * (f[i] - p[i]) for i in S.members), Fraction(0)
            )
            if total != 0:
                return False
    return True
