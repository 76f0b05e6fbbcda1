import io
import json
from fractions import Fraction

import pytest

from mcalaudit import (
    FiniteDomain,
    Instance,
    Marginal,
    PredictorVec,
    Subgroup,
    SubgroupCollection,
    conditional_l1,
    dump_instance,
    group_mass,
    instance_from_dict,
    instance_to_dict,
    l1_distance,
    load_instance,
    rat,
    validate,
)
from mcalaudit.core import to_decimal


def test_rat_accepts_ints_strings_fractions():
    assert rat(3) == Fraction(3)
    assert rat("4/5") == Fraction(4, 5)
    assert rat("0.8") == Fraction(4, 5)
    assert rat(Fraction(1, 3)) == Fraction(1, 3)


def test_rat_rejects_floats():
    with pytest.raises(TypeError):
        rat(0.8)


def test_to_decimal_rendering():
    assert to_decimal(Fraction(1, 2)) == "0.5"
    assert to_decimal(Fraction(1, 3)).startswith("0.3333333333")
    # round-half-even at the rendered precision
    assert to_decimal(Fraction(1, 8), digits=2) == "0.12"
    assert to_decimal(Fraction(3, 8), digits=2) == "0.38"


def test_subgroup_sorted_dedup_nonempty():
    s = Subgroup([2, 0, 2])
    assert s.members == (0, 2)
    assert 2 in s and 1 not in s
    with pytest.raises(ValueError):
        Subgroup([])


def test_collection_rejects_duplicate_member_sets():
    with pytest.raises(ValueError):
        SubgroupCollection([[0, 1], [1, 0]])


def test_collection_covers():
    c = SubgroupCollection([[0, 1], [1, 2]])
    assert c.covers(3)
    assert not c.covers(4)


def _toy_instance() -> Instance:
    return Instance(
        domain=FiniteDomain(3),
        marginal=Marginal(["1/2", "1/4", "1/4"]),
        ground_truth=PredictorVec(["4/5", "1/5", "1/2"]),
        groups=SubgroupCollection([[0, 1], [1, 2]]),
        audited=PredictorVec(["1/2", "1/2", "1/2"]),
    )


def test_l1_and_conditional_l1():
    inst = _toy_instance()
    d = l1_distance(inst.audited, inst.ground_truth, inst.marginal)
    assert d == Fraction(1, 2) * Fraction(3, 10) + Fraction(1, 4) * Fraction(3, 10)
    S = inst.groups[0]
    assert group_mass(inst.marginal, S) == Fraction(3, 4)
    c = conditional_l1(inst.audited, inst.ground_truth, inst.marginal, S)
    assert c == (Fraction(1, 2) * Fraction(3, 10) + Fraction(1, 4) * Fraction(3, 10)) / Fraction(3, 4)


def test_validate_flags_bad_marginal_and_range():
    inst = _toy_instance()
    bad = Instance(
        inst.domain,
        Marginal(["1/2", "1/4", "1/8"]),
        inst.ground_truth,
        inst.groups,
        inst.audited,
    )
    r = validate(bad)
    assert not r.valid and any("mass" in v for v in r.violations)

    bad2 = inst.with_audited(PredictorVec(["3/2", "1/2", "1/2"]))
    r2 = validate(bad2)
    assert not r2.valid and any("outside" in v for v in r2.violations)


def test_validate_reports_cover():
    inst = _toy_instance()
    assert validate(inst).covers
    partial = inst.with_groups(SubgroupCollection([[0, 1]]))
    r = validate(partial)
    assert r.valid and not r.covers


def test_json_round_trip_preserves_rationals():
    inst = _toy_instance()
    d = instance_to_dict(inst)
    again = instance_from_dict(json.loads(json.dumps(d)))
    assert again == inst


def test_dump_load_instance():
    inst = _toy_instance()
    buf = io.StringIO()
    dump_instance(inst, buf)
    buf.seek(0)
    assert load_instance(buf) == inst
    assert load_instance(dump_instance(inst)) == inst


def test_decimal_strings_accepted_on_input():
    d = instance_to_dict(_toy_instance())
    d["f"] = ["0.5", "0.5", "0.5"]
    inst = instance_from_dict(d)
    assert inst.audited[0] == Fraction(1, 2)


def test_with_values_and_restrict():
    v = PredictorVec(["1/2", "1/4", "3/4"])
    w = v.with_values({1: Fraction(1, 8)})
    assert w.values == (Fraction(1, 2), Fraction(1, 8), Fraction(3, 4))
    assert v.values[1] == Fraction(1, 4)  # original untouched
    assert v.restrict(Subgroup([0, 2])) == (Fraction(1, 2), Fraction(3, 4))
