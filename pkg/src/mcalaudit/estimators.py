"""Sampling-based interval estimators for the calibration distances.

The estimated statistic is the empirical lower distance to calibration:
the optimum of a small exact LP over 1-Lipschitz dual weight functions of
the observed (prediction, label) pairs.  It lower-bounds the conditional
distance to calibration mu and satisfies mu <= 4*sqrt(statistic), which
is what turns a median-of-batches point estimate into a two-sided
interval.

Randomness comes from numpy's PCG64 generator seeded through SeedSequence
(a fixed, portable, splittable 64-bit algorithm; see the README), so runs
are bit-for-bit reproducible given a seed.  Sampling probabilities are
rendered to float64 only to drive the draws; every statistic downstream
of the integer sample counts is computed in exact rationals.

The asymptotic constants behind the sample bounds are not pinned down by
theory; the defaults here are batch size ceil(4/eps^2) and batch count
ceil(18*ln(1/delta)) (the 18 comes from the Hoeffding bound on the median
trick), both overridable per call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .core import Instance, Subgroup, group_mass, rat, to_decimal
from .distances import generated_partition
from .multiaccuracy import LPProblem, lp_solve

__all__ = [
    "LabeledSample",
    "IntervalEstimate",
    "sample",
    "smce_empirical",
    "dce_interval",
    "dimc_interval",
]


@dataclass(frozen=True)
class LabeledSample:
    prediction: Fraction
    label: int
    group_bits: tuple[bool, ...] = ()

    def __post_init__(self):
        if not Fraction(0) <= self.prediction <= Fraction(1):
            raise ValueError("prediction must lie in [0, 1]")
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


@dataclass(frozen=True)
class IntervalEstimate:
    """Point estimate with a confidence interval [lower, 4*sqrt(a)+sqrt(b)].

    The upper endpoint is irrational in general, so it is stored as the
    exact pair (a, b) of the expression 4*sqrt(a) + sqrt(b) alongside a
    30-digit decimal rendering.
    """

    point: Fraction
    lower: Fraction
    upper_terms: tuple[Fraction, Fraction]
    upper_decimal: str
    confidence: Fraction
    samples_used: int

    @property
    def upper_float(self) -> float:
        a, b = self.upper_terms
        return 4.0 * math.sqrt(a) + math.sqrt(b)

    def contains(self, value) -> bool:
        value = rat(value)
        if value < self.lower:
            return False
        a, b = self.upper_terms
        # value <= 4 sqrt(a) + sqrt(b), decided exactly by squaring twice
        if value <= 0:
            return True
        d = value * value - 16 * a - b
        if d <= 0:
            return True
        return d * d <= 64 * a * b


def _upper_decimal(a: Fraction, b: Fraction, digits: int = 30) -> str:
    with localcontext() as ctx:
        ctx.prec = digits + 20
        val = 4 * (Decimal(a.numerator) / Decimal(a.denominator)).sqrt()
        val += (Decimal(b.numerator) / Decimal(b.denominator)).sqrt()
        ctx.prec = digits
        return str(+val)


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def sample(inst: Instance, m: int, seed) -> list[tuple[int, int]]:
    """m i.i.d. draws (x index, Bernoulli label) from the instance."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = _rng(seed)
    probs = np.array([float(p) for p in inst.marginal.probs])
    probs /= probs.sum()
    xs = rng.choice(inst.n, size=m, p=probs)
    pstar = np.array([float(v) for v in inst.ground_truth.values])
    labels = (rng.random(m) < pstar[xs]).astype(int)
    return list(zip(xs.tolist(), labels.tolist()))


def _smce_from_counts(
    values: Sequence[Fraction], n_counts: Sequence[int], label_sums: Sequence[int], m: int
) -> Fraction:
    """Exact empirical lower distance to calibration from aggregated counts.

    values must be sorted ascending; n_counts[a] samples carry prediction
    values[a], of which label_sums[a] have label 1.  Maximizes
    (1/m) sum_a w_a (label_sums[a] - n_counts[a] * values[a]) over weight
    vectors w in [-1,1] that are 1-Lipschitz across adjacent values.
    """
    d = len(values)
    coeffs = [Fraction(label_sums[a]) - n_counts[a] * values[a] for a in range(d)]
    zero = Fraction(0)
    one = Fraction(1)
    objective = tuple(-c for c in coeffs)  # maximize via negated minimize
    constraints = []
    for a in range(d - 1):
        row = [zero] * d
        row[a + 1] = one
        row[a] = -one
        gap = values[a + 1] - values[a]
        constraints.append((tuple(row), "<=", gap))
        constraints.append((tuple(-c for c in row), "<=", gap))
    bounds = tuple([(Fraction(-1), one)] * d)
    sol = lp_solve(LPProblem(objective, tuple(constraints), bounds))
    assert sol.status == "optimal"
    return -sol.optimum / m


def smce_empirical(samples) -> Fraction:
    """Empirical 1-Lipschitz-dual lower-dCE statistic of a sample list.

    Accepts (prediction, label) pairs or LabeledSample objects.
    """
    agg: dict[Fraction, list[int]] = {}
    total = 0
    for s in samples:
        if isinstance(s, LabeledSample):
            pred, label = s.prediction, s.label
        else:
            pred, label = rat(s[0]), int(s[1])
        entry = agg.setdefault(pred, [0, 0])
        entry[0] += 1
        entry[1] += label
        total += 1
    if total == 0:
        raise ValueError("at least one sample required")
    values = sorted(agg)
    n_counts = [agg[v][0] for v in values]
    label_sums = [agg[v][1] for v in values]
    return _smce_from_counts(values, n_counts, label_sums, total)


def _median(xs: list[Fraction]) -> Fraction:
    xs = sorted(xs)
    mid = len(xs) // 2
    if len(xs) % 2:
        return xs[mid]
    return (xs[mid - 1] + xs[mid]) / 2


def default_batch_size(eps: Fraction) -> int:
    return math.ceil(4 / (eps * eps))


def default_batch_count(delta: Fraction, parts: int = 1) -> int:
    return math.ceil(18 * math.log(parts / delta))


def _value_index(inst: Instance, members: Sequence[int]) -> tuple[list[Fraction], np.ndarray]:
    """Distinct audited-predictor values on the members, plus an array
    mapping each domain point to its value index (-1 off the member set)."""
    values = sorted({inst.audited[i] for i in members})
    pos = {v: a for a, v in enumerate(values)}
    idx = np.full(inst.n, -1, dtype=np.int64)
    for i in members:
        idx[i] = pos[inst.audited[i]]
    return values, idx


def _batch_statistics(
    values: list[Fraction], vi: np.ndarray, labels: np.ndarray, batch_size: int, batch_count: int
) -> list[Fraction]:
    """Exact per-batch lower-dCE statistics from index/label arrays."""
    stats = []
    d = len(values)
    for b in range(batch_count):
        rows = slice(b * batch_size, (b + 1) * batch_size)
        n_counts = np.bincount(vi[rows], minlength=d)
        s_counts = np.bincount(vi[rows], weights=labels[rows], minlength=d)
        stats.append(
            _smce_from_counts(
                values, n_counts.tolist(), [int(s) for s in s_counts.tolist()], batch_size
            )
        )
    return stats


def dce_interval(
    inst: Instance,
    S: Subgroup,
    eps,
    delta,
    seed,
    batch_size: Optional[int] = None,
    batch_count: Optional[int] = None,
) -> IntervalEstimate:
    """Median-of-batches interval for the conditional distance to
    calibration on S: [mu_hat - eps, 4*sqrt(mu_hat + eps)] at confidence
    1 - delta.  Deterministic given the seed."""
    eps, delta = rat(eps), rat(delta)
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    bs = batch_size if batch_size is not None else default_batch_size(eps)
    bc = batch_count if batch_count is not None else default_batch_count(delta)
    total = bs * bc

    rng = _rng(seed)
    members = list(S.members)
    cond = np.array([float(inst.marginal[i]) for i in members])
    cond /= cond.sum()
    xs = rng.choice(np.array(members), size=total, p=cond)
    pstar = np.array([float(v) for v in inst.ground_truth.values])
    labels = (rng.random(total) < pstar[xs]).astype(np.float64)

    values, idx = _value_index(inst, members)
    mu_hat = _median(_batch_statistics(values, idx[xs], labels, bs, bc))
    a = mu_hat + eps
    return IntervalEstimate(
        point=mu_hat,
        lower=mu_hat - eps,
        upper_terms=(a, Fraction(0)),
        upper_decimal=_upper_decimal(a, Fraction(0)),
        confidence=1 - delta,
        samples_used=total,
    )


def dimc_interval(
    inst: Instance,
    eps,
    delta,
    seed,
    batch_size: Optional[int] = None,
    batch_count: Optional[int] = None,
) -> IntervalEstimate:
    """Interval for the intersection multicalibration distance.

    Draws from the full distribution, estimates each generated-partition
    cell's mass empirically and its conditional lower-dCE by median of
    batches, and combines them as theta_hat = sum p_hat_i mu_hat_i with
    interval [theta_hat - eps, 4*sqrt(l * theta_hat) + sqrt(eps)].

    Requires eps <= gamma, the smallest exact cell mass; the total draw
    count scales with 1/gamma so that every cell receives enough samples.
    """
    eps, delta = rat(eps), rat(delta)
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    part = generated_partition(inst.groups, inst.n)
    cells = part.cells
    ell = len(cells)
    gamma = min(group_mass(inst.marginal, c) for c in cells)
    if eps > gamma:
        raise ValueError(f"eps={eps} exceeds the minimum cell mass gamma={gamma}")
    bs = batch_size if batch_size is not None else default_batch_size(eps)
    bc = batch_count if batch_count is not None else default_batch_count(delta, parts=ell)
    per_cell = bs * bc
    total = math.ceil(Fraction(2 * per_cell) / gamma)

    rng = _rng(seed)
    probs = np.array([float(p) for p in inst.marginal.probs])
    probs /= probs.sum()
    xs = rng.choice(inst.n, size=total, p=probs)
    pstar = np.array([float(v) for v in inst.ground_truth.values])
    labels = (rng.random(total) < pstar[xs]).astype(np.float64)

    cell_of = np.empty(inst.n, dtype=np.int64)
    for ci, cell in enumerate(cells):
        for x in cell.members:
            cell_of[x] = ci
    cell_ids = cell_of[xs]

    theta_hat = Fraction(0)
    for ci, cell in enumerate(cells):
        positions = np.nonzero(cell_ids == ci)[0]
        p_hat = Fraction(int(positions.size), total)
        take = positions[:per_cell]
        # Short cells fall back to fewer (but never zero) full batches.
        nb = max(1, min(bc, take.size // bs))
        size = take.size // nb
        values, idx = _value_index(inst, list(cell.members))
        stats = _batch_statistics(values, idx[xs[take]], labels[take], size, nb)
        theta_hat += p_hat * _median(stats)

    a = Fraction(ell) * theta_hat
    return IntervalEstimate(
        point=theta_hat,
        lower=theta_hat - eps,
        upper_terms=(a, eps),
        upper_decimal=_upper_decimal(a, eps),
        confidence=1 - delta,
        samples_used=total,
    )
