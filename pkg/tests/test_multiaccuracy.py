import random
from fractions import Fraction

import pytest

from mcalaudit import (
    LPProblem,
    PredictorVec,
    Subgroup,
    acc_projection,
    bias,
    dma,
    is_multiaccurate,
    l1_distance,
    lp_solve,
    wdma,
)
from mcalaudit.instances import gen_fibonacci, gen_random, gen_three_point
from mcalaudit.multiaccuracy import _dma_problem

F = Fraction


def test_lp_simple_optimal():
    # min -x - y  s.t.  x + y <= 3, x <= 2, y <= 2, x,y >= 0
    p = LPProblem(
        objective=(F(-1), F(-1)),
        constraints=(((F(1), F(1)), "<=", F(3)),),
        bounds=((F(0), F(2)), (F(0), F(2))),
    )
    sol = lp_solve(p)
    assert sol.status == "optimal"
    assert sol.optimum == F(-3)
    assert sum(sol.assignment) == F(3)


def test_lp_equality_and_free_variable():
    # min x  s.t.  x + y = 1, y free in [-5, 5]? use truly free y
    p = LPProblem(
        objective=(F(1), F(0)),
        constraints=(((F(1), F(1)), "=", F(1)),),
        bounds=((F(0), None), (None, None)),
    )
    sol = lp_solve(p)
    assert sol.status == "optimal"
    assert sol.optimum == F(0)
    x, y = sol.assignment
    assert x + y == F(1)


def test_lp_infeasible():
    p = LPProblem(
        objective=(F(1),),
        constraints=(((F(1),), ">=", F(2)), ((F(1),), "<=", F(1))),
        bounds=((F(0), None),),
    )
    assert lp_solve(p).status == "infeasible"


def test_lp_unbounded():
    p = LPProblem(
        objective=(F(-1),),
        constraints=(((F(0),), "<=", F(1)),),
        bounds=((F(0), None),),
    )
    assert lp_solve(p).status == "unbounded"


def test_lp_negative_lower_bound_shift():
    # min x subject to x >= -3 only
    p = LPProblem(objective=(F(1),), constraints=(), bounds=((F(-3), None),))
    sol = lp_solve(p)
    assert sol.status == "optimal"
    assert sol.optimum == F(-3)
    assert sol.assignment == (F(-3),)


def test_lp_to_json_round_trips_fields():
    import json

    p = LPProblem(
        objective=(F(1, 3),),
        constraints=(((F(2),), "<=", F(5, 7)),),
        bounds=((F(0), F(1)),),
    )
    d = json.loads(p.to_json())
    assert d["objective"] == ["1/3"]
    assert d["constraints"][0]["rhs"] == "5/7"
    assert d["bounds"] == [["0/1", "1/1"]]


def _random_lp(rng: random.Random) -> LPProblem:
    nv = rng.randrange(1, 4)
    nc = rng.randrange(1, 4)

    def coeff():
        return F(rng.randrange(-4, 5), rng.randrange(1, 4))

    constraints = tuple(
        (tuple(coeff() for _ in range(nv)), rng.choice(["<=", "=", ">="]), coeff())
        for _ in range(nc)
    )
    bounds = []
    for _ in range(nv):
        kind = rng.randrange(3)
        if kind == 0:
            bounds.append((F(0), None))
        elif kind == 1:
            bounds.append((F(-2), F(2)))
        else:
            bounds.append((None, None))
    return LPProblem(tuple(coeff() for _ in range(nv)), constraints, tuple(bounds))


def test_lp_against_scipy_reference():
    scipy_opt = pytest.importorskip("scipy.optimize")
    rng = random.Random(99)
    checked = 0
    for _ in range(40):
        p = _random_lp(rng)
        sol = lp_solve(p)
        a_ub, b_ub, a_eq, b_eq = [], [], [], []
        for coeffs, rel, rhs in p.constraints:
            row = [float(c) for c in coeffs]
            if rel == "<=":
                a_ub.append(row)
                b_ub.append(float(rhs))
            elif rel == ">=":
                a_ub.append([-v for v in row])
                b_ub.append(-float(rhs))
            else:
                a_eq.append(row)
                b_eq.append(float(rhs))
        ref = scipy_opt.linprog(
            [float(c) for c in p.objective],
            A_ub=a_ub or None,
            b_ub=b_ub or None,
            A_eq=a_eq or None,
            b_eq=b_eq or None,
            bounds=[
                (None if lo is None else float(lo), None if hi is None else float(hi))
                for lo, hi in p.bounds
            ],
            method="highs",
        )
        if ref.status == 0:
            assert sol.status == "optimal"
            assert abs(float(sol.optimum) - ref.fun) < 1e-7
            checked += 1
        elif ref.status == 2:
            assert sol.status == "infeasible"
        elif ref.status == 3:
            assert sol.status == "unbounded"
    assert checked >= 5  # the sample must include real optima


def test_bias_and_wdma_three_point():
    inst = gen_three_point(F(1, 10))
    S1, S2 = inst.groups
    assert bias(inst.audited, inst, S1) == 0
    assert bias(inst.audited, inst, S2) == F(1, 20)
    value, group = wdma(inst)
    assert value == F(2, 3) * F(1, 20)
    assert group.members == S2.members


def test_dma_zero_iff_multiaccurate():
    inst = gen_three_point(F(1, 10))
    assert dma(inst).value > 0
    at_truth = inst.with_audited(inst.ground_truth)
    assert dma(at_truth).value == 0


def test_dma_witness_properties():
    for seed in range(15):
        inst = gen_random(5, 2, seed=400 + seed)
        r = dma(inst)
        assert is_multiaccurate(r.witness, inst)
        assert r.value == l1_distance(inst.audited, r.witness, inst.marginal)
        # optimality: no multiaccurate predictor we know of is closer
        assert r.value <= l1_distance(inst.audited, inst.ground_truth, inst.marginal)


def test_dma_fibonacci_lower_bound():
    from mcalaudit.instances import fibonacci_number

    for k in (3, 4):
        eps = F(1, 4 * (k + 1) * fibonacci_number(k + 1))
        inst = gen_fibonacci(k, eps)
        assert wdma(inst)[0] == eps
        assert dma(inst).value >= F(fibonacci_number(k + 1)) * eps / 3


def test_acc_projection_matches_single_group_dma():
    for seed in range(10):
        inst = gen_random(4, 1, seed=seed, uniform_marginal=True)
        S = inst.groups[0]
        r = acc_projection(inst.audited, inst, S)
        assert r.value == bias(inst.audited, inst, S)
        assert bias(r.witness, inst, S) == 0


def test_acc_projection_no_bias_returns_input():
    inst = gen_three_point(0)
    r = acc_projection(inst.audited, inst, inst.groups[0])
    assert r.value == 0
    assert r.witness == inst.audited


def test_dma_problem_shape():
    inst = gen_three_point(0)
    p = _dma_problem(inst)
    n = inst.n
    assert len(p.objective) == 2 * n
    assert len(p.constraints) == len(inst.groups) + 2 * n
    assert all(rel == "=" for _, rel, _ in p.constraints[: len(inst.groups)])
