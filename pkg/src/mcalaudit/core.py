"""Domain model: finite domains, marginals, predictors, subgroup collections.

Everything here is exact: probabilities, predictions and distances are
`fractions.Fraction` values and no operation ever rounds.  Calibration is a
statement about exact conditional means, and several of the quantities this
package audits are discontinuous in the ground truth, so floating point is
confined to explicit reporting views (`as_floats`, `to_decimal`).

All types are immutable after construction and all operations are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_EVEN, localcontext
from fractions import Fraction
from typing import Iterable, Optional, Sequence

Rational = Fraction

__all__ = [
    "Rational",
    "rat",
    "FiniteDomain",
    "Marginal",
    "PredictorVec",
    "Subgroup",
    "SubgroupCollection",
    "Instance",
    "ValidationReport",
    "l1_distance",
    "conditional_l1",
    "group_mass",
    "validate",
    "instance_to_dict",
    "instance_from_dict",
    "dump_instance",
    "load_instance",
    "to_decimal",
]


def rat(x) -> Fraction:
    """Convert ints, "p/q" strings and decimal strings to an exact Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)  # handles both "4/5" and "0.8" exactly
    if isinstance(x, float):
        raise TypeError(f"refusing to convert float {x!r}; pass a string or Fraction")
    raise TypeError(f"cannot interpret {x!r} as a rational")


def to_decimal(x: Fraction, digits: int = 30) -> str:
    """Render a rational as a decimal string with `digits` significant digits.

    Rendering only; round-half-even. Exact values stay Fractions everywhere else.
    """
    with localcontext() as ctx:
        ctx.prec = digits
        ctx.rounding = ROUND_HALF_EVEN
        return str(Decimal(x.numerator) / Decimal(x.denominator))


@dataclass(frozen=True)
class FiniteDomain:
    """A finite feature space; points are canonically the indices 0..n-1."""

    n: int
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("domain must contain at least one point")
        if self.labels is not None and len(self.labels) != self.n:
            raise ValueError("label count must match domain size")


@dataclass(frozen=True)
class Marginal:
    """A fully supported distribution over the domain points."""

    probs: tuple[Fraction, ...]

    def __init__(self, probs: Iterable):
        object.__setattr__(self, "probs", tuple(rat(p) for p in probs))

    @property
    def n(self) -> int:
        return len(self.probs)

    def __getitem__(self, i: int) -> Fraction:
        return self.probs[i]

    @classmethod
    def uniform(cls, n: int) -> "Marginal":
        return cls([Fraction(1, n)] * n)


@dataclass(frozen=True)
class PredictorVec:
    """A predictor X -> [0,1] stored as a dense vector of rationals.

    Used for the audited predictor f, the ground truth p*, and members of
    the calibrated / multicalibrated sets.
    """

    values: tuple[Fraction, ...]

    def __init__(self, values: Iterable):
        object.__setattr__(self, "values", tuple(rat(v) for v in values))

    @property
    def n(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> Fraction:
        return self.values[i]

    def restrict(self, S: "Subgroup") -> tuple[Fraction, ...]:
        """Values on S, in S's member order."""
        return tuple(self.values[i] for i in S.members)

    def with_values(self, updates: dict[int, Fraction]) -> "PredictorVec":
        vals = list(self.values)
        for i, v in updates.items():
            vals[i] = rat(v)
        return PredictorVec(vals)

    def as_floats(self) -> list[float]:
        """Reporting view only; never used in metric computation."""
        return [float(v) for v in self.values]

    @classmethod
    def constant(cls, n: int, v) -> "PredictorVec":
        return cls([rat(v)] * n)


@dataclass(frozen=True)
class Subgroup:
    """A non-empty subset of domain indices, stored sorted and duplicate-free."""

    members: tuple[int, ...]

    def __init__(self, members: Iterable[int]):
        ms = tuple(sorted(set(int(i) for i in members)))
        if not ms:
            raise ValueError("subgroup must be non-empty")
        if ms[0] < 0:
            raise ValueError("subgroup indices must be non-negative")
        object.__setattr__(self, "members", ms)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, i: int) -> bool:
        return i in set(self.members)

    def __iter__(self):
        return iter(self.members)


@dataclass(frozen=True)
class SubgroupCollection:
    """A collection of subgroups; no two groups may have identical member sets."""

    groups: tuple[Subgroup, ...]

    def __init__(self, groups: Iterable):
        gs = tuple(g if isinstance(g, Subgroup) else Subgroup(g) for g in groups)
        if not gs:
            raise ValueError("collection must contain at least one group")
        seen = set()
        for g in gs:
            if g.members in seen:
                raise ValueError(f"duplicate group {g.members}")
            seen.add(g.members)
        object.__setattr__(self, "groups", gs)

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __getitem__(self, i: int) -> Subgroup:
        return self.groups[i]

    def covers(self, n: int) -> bool:
        covered = set()
        for g in self.groups:
            covered.update(g.members)
        return covered == set(range(n))


@dataclass(frozen=True)
class Instance:
    """A complete auditing instance.

    Labels are Bernoulli: y ~ Ber(p*(x)) with x drawn from the marginal.
    `audited` is the predictor f whose distance metrics are being measured.
    """

    domain: FiniteDomain
    marginal: Marginal
    ground_truth: PredictorVec
    groups: SubgroupCollection
    audited: PredictorVec

    @property
    def n(self) -> int:
        return self.domain.n

    def with_ground_truth(self, p: PredictorVec) -> "Instance":
        return Instance(self.domain, self.marginal, p, self.groups, self.audited)

    def with_audited(self, f: PredictorVec) -> "Instance":
        return Instance(self.domain, self.marginal, self.ground_truth, self.groups, f)

    def with_groups(self, groups: SubgroupCollection) -> "Instance":
        return Instance(self.domain, self.marginal, self.ground_truth, groups, self.audited)


def _check_dims(f: PredictorVec, g: PredictorVec, m: Marginal):
    if not (f.n == g.n == m.n):
        raise ValueError(f"dimension mismatch: f has {f.n}, g has {g.n}, marginal has {m.n}")


def l1_distance(f: PredictorVec, g: PredictorVec, m: Marginal) -> Fraction:
    """Marginal-weighted l1 distance: sum over x of m(x)*|f(x)-g(x)|."""
    _check_dims(f, g, m)
    return sum((m[i] * abs(f[i] - g[i]) for i in range(f.n)), Fraction(0))


def group_mass(m: Marginal, S: Subgroup) -> Fraction:
    """Total marginal mass of S."""
    return sum((m[i] for i in S.members), Fraction(0))


def conditional_l1(f: PredictorVec, g: PredictorVec, m: Marginal, S: Subgroup) -> Fraction:
    """l1 distance between f and g under the marginal conditioned on S."""
    _check_dims(f, g, m)
    mass = group_mass(m, S)
    total = sum((m[i] * abs(f[i] - g[i]) for i in S.members), Fraction(0))
    return total / mass


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    covers: bool
    violations: tuple[str, ...] = field(default_factory=tuple)


def validate(inst: Instance) -> ValidationReport:
    """Check all instance invariants; collects violations instead of raising.

    `covers` flags whether the groups cover the domain, which the
    intersection-multicalibration metrics require.
    """
    violations: list[str] = []
    n = inst.domain.n
    if inst.marginal.n != n:
        violations.append(f"marginal has {inst.marginal.n} entries, domain has {n}")
    else:
        if any(p <= 0 for p in inst.marginal.probs):
            violations.append("marginal must be strictly positive on every point")
        total = sum(inst.marginal.probs, Fraction(0))
        if total != 1:
            violations.append(f"marginal mass is {total}, not 1")
    for name, vec in (("p_star", inst.ground_truth), ("f", inst.audited)):
        if vec.n != n:
            violations.append(f"{name} has {vec.n} entries, domain has {n}")
        elif any(v < 0 or v > 1 for v in vec.values):
            violations.append(f"{name} has entries outside [0, 1]")
    for g in inst.groups:
        if g.members[-1] >= n:
            violations.append(f"group {g.members} references points outside the domain")
    covers = inst.groups.covers(n)
    return ValidationReport(valid=not violations, covers=covers, violations=tuple(violations))


# ---------------------------------------------------------------------------
# JSON instance format
#
#   { "n": int, "marginal": ["p/q", ...], "p_star": [...], "f": [...],
#     "groups": [[int, ...], ...] }
#
# Rationals are emitted as "num/den" strings; decimal strings are accepted on
# input and converted exactly.
# ---------------------------------------------------------------------------


def _rat_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def instance_to_dict(inst: Instance) -> dict:
    d = {
        "n": inst.domain.n,
        "marginal": [_rat_str(p) for p in inst.marginal.probs],
        "p_star": [_rat_str(v) for v in inst.ground_truth.values],
        "f": [_rat_str(v) for v in inst.audited.values],
        "groups": [list(g.members) for g in inst.groups],
    }
    if inst.domain.labels is not None:
        d["labels"] = list(inst.domain.labels)
    return d


def instance_from_dict(d: dict) -> Instance:
    n = int(d["n"])
    labels = tuple(d["labels"]) if "labels" in d else None
    return Instance(
        domain=FiniteDomain(n, labels),
        marginal=Marginal(d["marginal"]),
        ground_truth=PredictorVec(d["p_star"]),
        groups=SubgroupCollection(d["groups"]),
        audited=PredictorVec(d["f"]),
    )


def dump_instance(inst: Instance, fp=None) -> str:
    text = json.dumps(instance_to_dict(inst), indent=2, sort_keys=True)
    if fp is not None:
        fp.write(text + "\n")
    return text


def load_instance(fp) -> Instance:
    if isinstance(fp, str):
        return instance_from_dict(json.loads(fp))
    return instance_from_dict(json.load(fp))
