from fractions import Fraction

import pytest

from mcalaudit import (
    PredictorVec,
    Subgroup,
    SubgroupCollection,
    conditional_l1,
    dce,
    dcma,
    dimc,
    dmc,
    dmc_lowdeg_bruteforce,
    generated_partition,
    intersection_closure,
    is_calibrated,
    is_multiaccurate,
    is_multicalibrated,
    l1_distance,
    local_min_probe,
    wdmc,
)
from mcalaudit.instances import (
    gen_cdmc_example,
    gen_dcma_example,
    gen_random,
    gen_ring,
    gen_three_point,
    gen_wdmc_local_min,
)


def test_dce_three_point():
    inst = gen_three_point(Fraction(1, 10))
    r1 = dce(inst, inst.groups[0])
    assert r1.value == 0  # constant 1/2 equals the pooled mean on {0,1}
    r2 = dce(inst, inst.groups[1])
    # pooled mean on {1,2} is 11/20, at conditional distance 1/20 from 1/2
    assert r2.value == Fraction(1, 20)
    assert r2.witness.values == (Fraction(1, 2), Fraction(11, 20), Fraction(11, 20))
    assert is_calibrated(r2.witness, inst, inst.groups[1])


def test_dce_witness_leaves_off_group_values():
    inst = gen_three_point(Fraction(1, 10))
    r = dce(inst, inst.groups[1])
    assert r.witness[0] == inst.audited[0]


def test_wdmc_three_point():
    inst = gen_three_point(Fraction(1, 10))
    value, group = wdmc(inst)
    assert value == Fraction(2, 3) * Fraction(1, 20) == Fraction(1, 30)
    assert group.members == (1, 2)


def test_dmc_witness_is_multicalibrated():
    for seed in range(10):
        inst = gen_random(4, 2, seed=seed)
        r = dmc(inst)
        assert is_multicalibrated(r.witness, inst)
        assert r.value == l1_distance(inst.audited, r.witness, inst.marginal)


def test_intersection_closure_adds_overlaps():
    C = SubgroupCollection([[0, 1], [1, 2]])
    closed = intersection_closure(C)
    assert {g.members for g in closed} == {(0, 1), (1, 2), (1,)}


def test_intersection_closure_ceiling():
    C = SubgroupCollection([[i] for i in range(21)])
    with pytest.raises(ValueError, match="ceiling"):
        intersection_closure(C)
    assert len(intersection_closure(C, override=True)) == 21


def test_generated_partition_three_point():
    inst = gen_three_point(0)
    part = generated_partition(inst.groups, inst.n)
    assert {c.members for c in part.cells} == {(0,), (1,), (2,)}


def test_generated_partition_requires_cover():
    C = SubgroupCollection([[0, 1]])
    with pytest.raises(ValueError, match="cover"):
        generated_partition(C, 3)


def test_generated_partition_cells_disjoint_cover():
    for seed in range(20):
        inst = gen_random(6, 3, seed=seed)
        part = generated_partition(inst.groups, inst.n)
        seen = []
        for c in part.cells:
            seen.extend(c.members)
        assert sorted(seen) == list(range(inst.n))


def test_dimc_decomposition_matches_cellwise_sum():
    inst = gen_three_point(Fraction(1, 10))
    part = generated_partition(inst.groups, inst.n)
    total = sum(
        (
            sum((inst.marginal[x] for x in c.members), Fraction(0)) * dce(inst, c).value
            for c in part.cells
        ),
        Fraction(0),
    )
    r = dimc(inst)
    assert r.value == total == Fraction(1, 3)
    for c in part.cells:
        assert is_calibrated(r.witness, inst, c)


def test_ring_instance_gap():
    inst = gen_ring(1)
    assert dmc(inst).value == 0
    assert dimc(inst).value == Fraction(3, 10)
    assert len(generated_partition(inst.groups, inst.n).cells) == 4


def test_ring_larger_blocks():
    inst = gen_ring(2)
    # the pessimistic Bell-product bound overshoots here; raise the budget
    assert dmc(inst, budget=10**9).value == 0
    assert dimc(inst).value == Fraction(3, 10)


def test_cdmc_example():
    inst = gen_cdmc_example()
    assert dimc(inst).value == 0
    assert l1_distance(inst.audited, inst.ground_truth, inst.marginal) == Fraction(3, 20)


def test_dcma_values():
    inst_p, inst_q = gen_dcma_example(Fraction(1, 100))
    rp = dcma(inst_p)
    assert rp.value == 0
    rq = dcma(inst_q)
    assert rq.value == Fraction(41, 600) > Fraction(1, 60)
    everything = Subgroup(range(inst_q.n))
    assert is_calibrated(rq.witness, inst_q, everything)
    assert is_multiaccurate(rq.witness, inst_q)


def test_lowdeg_bruteforce():
    inst = gen_three_point(Fraction(1, 10))
    r = dmc_lowdeg_bruteforce(inst, 2, 100)
    assert r.value == Fraction(8, 25) >= Fraction(3, 10)
    assert r.threshold == Fraction(1, 200)
    assert r.grid_denominator == 100
    # the witness satisfies the relaxed degree-2 residual bound it reports
    m, p = inst.marginal, inst.ground_truth
    g = r.witness
    for S in inst.groups:
        mass = sum((m[i] for i in S.members), Fraction(0))
        for j in range(2):
            total = sum((m[i] * g[i] ** j * (g[i] - p[i]) for i in S.members), Fraction(0))
            assert abs(total) <= r.threshold * mass


def test_lowdeg_bruteforce_refuses_large_domains():
    inst = gen_random(5, 2, seed=0)
    with pytest.raises(ValueError):
        dmc_lowdeg_bruteforce(inst, 2, 10)


def test_local_min_probe_deterministic_and_sound():
    inst = gen_wdmc_local_min(Fraction(1, 200), Fraction(1, 10))
    a = local_min_probe("wdmc", inst, Fraction(1, 1000), trials=100, seed=5)
    b = local_min_probe("wdmc", inst, Fraction(1, 1000), trials=100, seed=5)
    assert a == b
    assert a.baseline == Fraction(1, 200)
    assert not a.decreased
    # moving the audited predictor to the ground truth does decrease
    c = local_min_probe("wdmc", inst.with_audited(inst.ground_truth), Fraction(1, 1000), 10, 0)
    assert c.baseline == 0


def test_local_min_probe_finds_descent_when_not_minimal():
    inst = gen_three_point(Fraction(1, 10))
    probe = local_min_probe("wdmc", inst, Fraction(1, 100), trials=200, seed=1)
    assert probe.decreased
    assert probe.best_value < probe.baseline
    assert probe.best_point is not None


def test_probe_unknown_metric():
    inst = gen_three_point(0)
    with pytest.raises(ValueError):
        local_min_probe("nope", inst, Fraction(1, 100), 10, 0)


def test_dce_conditional_lipschitz_in_ground_truth():
    base = gen_random(4, 2, seed=11)
    from mcalaudit.instances import jitter_ground_truth

    i1 = jitter_ground_truth(base, seed=0)
    i2 = jitter_ground_truth(base, seed=1)
    for S in base.groups:
        shift = conditional_l1(i1.ground_truth, i2.ground_truth, base.marginal, S)
        assert abs(dce(i1, S).value - dce(i2, S).value) <= shift
