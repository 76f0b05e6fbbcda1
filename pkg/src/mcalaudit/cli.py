"""Command-line front end.

Subcommands: audit, enumerate, estimate, generate, landscape, verify.
Output is JSON by default; `--pretty` switches to a human-readable table.
Exact rationals appear as "num/den" strings together with 30-significant-
digit decimal renderings (round-half-even; the decimals are views only).

Exit codes: 0 success, 1 acceptance failure, 2 input error, 3 budget
refusal.  The environment variable MCAL_AUDIT_BUDGET overrides the
enumeration budget used by the multicalibration join.
"""

from __future__ import annotations

import csv
import json
import os
import sys
import time
from fractions import Fraction
from typing import Optional

import click

from .core import (
    Instance,
    PredictorVec,
    Subgroup,
    dump_instance,
    instance_from_dict,
    l1_distance,
    rat,
    to_decimal,
    validate,
)
from .distances import dce, dcma, dimc, dmc, generated_partition, local_min_probe, wdmc
from .enumeration import (
    calibrated_set,
    is_calibrated,
    is_degree_r_multicalibrated,
    is_multiaccurate,
    is_multicalibrated,
    multicalibrated_set,
)
from .estimators import dce_interval, dimc_interval
from .instances import (
    gen_cdmc_example,
    gen_dcma_example,
    gen_fibonacci,
    gen_hypercube,
    gen_random,
    gen_ring,
    gen_three_point,
    gen_wdmc_local_min,
)
from .multiaccuracy import _dma_problem, bias, dma, wdma
from .verify import run_suite

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3

DEFAULT_BUDGET = 10_000_000


def _budget() -> int:
    raw = os.environ.get("MCAL_AUDIT_BUDGET")
    if raw is None:
        return DEFAULT_BUDGET
    try:
        value = int(raw)
        if value < 1:
            raise ValueError
    except ValueError:
        raise click.ClickException(f"MCAL_AUDIT_BUDGET must be a positive integer, got {raw!r}")
    return value


def _is_budget_error(e: ValueError) -> bool:
    msg = str(e)
    return "exceeds" in msg and ("budget" in msg or "ceiling" in msg)


def _rat_json(x: Fraction) -> dict:
    return {"rational": f"{x.numerator}/{x.denominator}", "decimal": to_decimal(x)}


def _load(path: str) -> Instance:
    try:
        if path == "-":
            data = json.load(sys.stdin)
        else:
            with open(path) as fh:
                data = json.load(fh)
        inst = instance_from_dict(data)
    except (OSError, ValueError, KeyError, TypeError) as e:
        click.echo(f"error: cannot read instance: {e}", err=True)
        sys.exit(EXIT_INPUT)
    report = validate(inst)
    if not report.valid:
        for v in report.violations:
            click.echo(f"error: invalid instance: {v}", err=True)
        sys.exit(EXIT_INPUT)
    return inst


def _emit(payload: dict, output: Optional[str]):
    text = json.dumps(payload, indent=2)
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


def _parse_rat(value: str, name: str) -> Fraction:
    try:
        return rat(value)
    except (ValueError, TypeError, ZeroDivisionError) as e:
        click.echo(f"error: bad {name}: {e}", err=True)
        sys.exit(EXIT_INPUT)


def _group_by_index(inst: Instance, index: int) -> Subgroup:
    if not 0 <= index < len(inst.groups):
        click.echo(
            f"error: group index {index} out of range (instance has {len(inst.groups)} groups)",
            err=True,
        )
        sys.exit(EXIT_INPUT)
    return inst.groups[index]


@click.group()
def main():
    """Exact auditing of calibration and multicalibration distances."""


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

_ALL_METRICS = ("wdmc", "dmc", "dimc", "wdma", "dma", "dcma")


def _verify_witness(metric: str, witness: PredictorVec, inst: Instance) -> bool:
    if metric in ("dmc",):
        return is_multicalibrated(witness, inst)
    if metric == "dimc":
        cells = generated_partition(inst.groups, inst.n).cells
        return all(is_calibrated(witness, inst, c) for c in cells)
    if metric == "dma":
        return is_multiaccurate(witness, inst)
    if metric == "dcma":
        return is_calibrated(witness, inst, Subgroup(range(inst.n))) and is_multiaccurate(
            witness, inst
        )
    return True


@main.command("audit")
@click.argument("instance", type=str)
@click.option(
    "--metrics",
    default=",".join(_ALL_METRICS),
    show_default=True,
    help="Comma-separated subset of wdmc,dmc,dimc,wdma,dma,dcma.",
)
@click.option("--degree", type=int, default=1, show_default=True, help="Check degree-r membership for r = 1..DEGREE.")
@click.option("--dump-lp", type=str, default=None, help="Write the multiaccuracy-distance LP as JSON to this path.")
@click.option("--pretty", is_flag=True, help="Human-readable table instead of JSON.")
@click.option("-o", "--output", type=str, default=None, help="Write the JSON report to this path.")
def cmd_audit(instance, metrics, degree, dump_lp, pretty, output):
    """Compute distance metrics and membership flags for an instance."""
    inst = _load(instance)
    requested = [m.strip() for m in metrics.split(",") if m.strip()]
    for m in requested:
        if m not in _ALL_METRICS:
            click.echo(f"error: unknown metric {m!r}", err=True)
            sys.exit(EXIT_INPUT)
    if degree < 1:
        click.echo("error: --degree must be >= 1", err=True)
        sys.exit(EXIT_INPUT)
    budget = _budget()

    report: dict = {"metrics": {}, "membership": {}, "timing_seconds": {}}
    for m in requested:
        t0 = time.time()
        try:
            if m == "wdmc":
                value, group = wdmc(inst)
                entry = {"value": _rat_json(value), "witness_group": list(group.members)}
            elif m == "wdma":
                value, group = wdma(inst)
                entry = {"value": _rat_json(value), "witness_group": list(group.members)}
            elif m == "dmc":
                r = dmc(inst, budget=budget)
                assert _verify_witness(m, r.witness, inst)
                entry = {"value": _rat_json(r.value), "witness": [_rat_json(v) for v in r.witness.values]}
            elif m == "dimc":
                r = dimc(inst)
                assert _verify_witness(m, r.witness, inst)
                entry = {"value": _rat_json(r.value), "witness": [_rat_json(v) for v in r.witness.values]}
            elif m == "dma":
                r = dma(inst)
                assert _verify_witness(m, r.witness, inst)
                entry = {"value": _rat_json(r.value), "witness": [_rat_json(v) for v in r.witness.values]}
            else:  # dcma
                r = dcma(inst)
                assert _verify_witness(m, r.witness, inst)
                entry = {"value": _rat_json(r.value), "witness": [_rat_json(v) for v in r.witness.values]}
        except ValueError as e:
            if _is_budget_error(e):
                entry = {"refused": str(e)}
            else:
                raise
        report["metrics"][m] = entry
        report["timing_seconds"][m] = round(time.time() - t0, 6)

    f = inst.audited
    report["membership"]["calibrated_per_group"] = [
        is_calibrated(f, inst, S) for S in inst.groups
    ]
    report["membership"]["multicalibrated"] = is_multicalibrated(f, inst)
    report["membership"]["multiaccurate"] = is_multiaccurate(f, inst)
    report["membership"]["degree_r_multicalibrated"] = {
        str(r): is_degree_r_multicalibrated(f, inst, r) for r in range(1, degree + 1)
    }
    report["l1_to_ground_truth"] = _rat_json(
        l1_distance(inst.audited, inst.ground_truth, inst.marginal)
    )

    if dump_lp:
        with open(dump_lp, "w") as fh:
            fh.write(_dma_problem(inst).to_json() + "\n")

    if pretty:
        for m in requested:
            entry = report["metrics"][m]
            if "refused" in entry:
                click.echo(f"{m:6s}  REFUSED  {entry['refused']}")
            else:
                v = entry["value"]
                click.echo(f"{m:6s}  {v['rational']:>14s}  = {v['decimal']}")
        mm = report["membership"]
        click.echo(f"multicalibrated: {mm['multicalibrated']}  multiaccurate: {mm['multiaccurate']}")
    else:
        _emit(report, output)
    sys.exit(EXIT_OK)


# ---------------------------------------------------------------------------
# enumerate
# ---------------------------------------------------------------------------


@main.command("enumerate")
@click.argument("instance", type=str)
@click.option("--set", "which", type=click.Choice(["cal", "mcal"]), default="mcal", show_default=True)
@click.option("--group", type=int, default=None, help="Group index for --set cal.")
@click.option("--pretty", is_flag=True)
@click.option("-o", "--output", type=str, default=None)
def cmd_enumerate(instance, which, group, pretty, output):
    """List the calibrated set of one group, or the multicalibrated set.

    Multicalibrated entries use null for coordinates no group constrains.
    """
    inst = _load(instance)
    try:
        if which == "cal":
            if group is None:
                click.echo("error: --set cal requires --group", err=True)
                sys.exit(EXIT_INPUT)
            S = _group_by_index(inst, group)
            cs = calibrated_set(inst, S)
            rows = [[f"{v.numerator}/{v.denominator}" for v in cand] for cand in cs]
            payload = {"set": "cal", "group": list(S.members), "count": len(rows), "predictors": rows}
        else:
            mc = multicalibrated_set(inst, budget=_budget())
            rows = [
                [None if v is None else f"{v.numerator}/{v.denominator}" for v in cand]
                for cand in mc
            ]
            payload = {"set": "mcal", "count": len(rows), "predictors": rows}
    except ValueError as e:
        if _is_budget_error(e):
            click.echo(f"error: budget refusal: {e}", err=True)
            sys.exit(EXIT_BUDGET)
        raise
    if pretty:
        click.echo(f"{payload['count']} predictors")
        for row in payload["predictors"]:
            click.echo("  (" + ", ".join("free" if v is None else v for v in row) + ")")
    else:
        _emit(payload, output)
    sys.exit(EXIT_OK)


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


@main.command("estimate")
@click.argument("instance", type=str)
@click.option("--metric", type=click.Choice(["dce", "dimc"]), required=True)
@click.option("--group", type=int, default=None, help="Group index (required for dce).")
@click.option("--eps", default="1/50", show_default=True, help="Interval half-width parameter (rational).")
@click.option("--delta", default="1/20", show_default=True, help="Failure probability (rational).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trials", type=int, default=1, show_default=True, help="Independent runs with seeds seed, seed+1, ...")
@click.option("--csv", "as_csv", is_flag=True, help="Emit CSV rows instead of JSON.")
@click.option("-o", "--output", type=str, default=None)
def cmd_estimate(instance, metric, group, eps, delta, seed, trials, as_csv, output):
    """Sampling-based interval estimates; deterministic given the seed."""
    inst = _load(instance)
    eps_r = _parse_rat(eps, "--eps")
    delta_r = _parse_rat(delta, "--delta")
    if trials < 1:
        click.echo("error: --trials must be >= 1", err=True)
        sys.exit(EXIT_INPUT)
    if metric == "dce":
        if group is None:
            click.echo("error: --metric dce requires --group", err=True)
            sys.exit(EXIT_INPUT)
        S = _group_by_index(inst, group)
        runner = lambda s: dce_interval(inst, S, eps_r, delta_r, seed=s)
    else:
        runner = lambda s: dimc_interval(inst, eps_r, delta_r, seed=s)

    runs = []
    for t in range(trials):
        s = seed + t
        try:
            est = runner(s)
        except ValueError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_INPUT)
        runs.append(
            {
                "seed": s,
                "point": _rat_json(est.point),
                "lower": _rat_json(est.lower),
                "upper": est.upper_decimal,
                "confidence": _rat_json(est.confidence),
                "samples_used": est.samples_used,
            }
        )

    if as_csv:
        writer = csv.writer(open(output, "w", newline="") if output else sys.stdout)
        writer.writerow(["seed", "point", "lower", "upper", "samples_used"])
        for r in runs:
            writer.writerow(
                [r["seed"], r["point"]["decimal"], r["lower"]["decimal"], r["upper"], r["samples_used"]]
            )
    else:
        _emit({"metric": metric, "runs": runs}, output)
    sys.exit(EXIT_OK)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


@main.command("generate")
@click.option(
    "--family",
    type=click.Choice(
        ["three-point", "wdmc-local-min", "ring", "hypercube", "cdmc", "fibonacci", "dcma", "random"]
    ),
    required=True,
)
@click.option("--alpha", default="0", show_default=True, help="three-point offset (rational).")
@click.option("--eps", default="1/200", show_default=True, help="Construction parameter (rational).")
@click.option("--delta", default="1/10", show_default=True, help="Construction parameter (rational).")
@click.option("--k", type=int, default=3, show_default=True, help="fibonacci chain length / hypercube dimension count.")
@click.option("--blocks", type=int, default=1, show_default=True, help="ring block size N (4N points).")
@click.option("--target", type=str, default=None, help="hypercube: comma-separated indicator support of size n/2.")
@click.option("--variant", type=click.Choice(["before", "after"]), default="before", show_default=True, help="dcma: which of the paired ground truths to emit.")
@click.option("--n", "n_points", type=int, default=4, show_default=True, help="random: domain size.")
@click.option("--groups", "n_groups", type=int, default=2, show_default=True, help="random: group count.")
@click.option("--seed", type=int, default=0, show_default=True, help="random: seed.")
@click.option("--grid", type=int, default=20, show_default=True, help="random: value grid denominator.")
@click.option("-o", "--output", type=str, default=None)
def cmd_generate(family, alpha, eps, delta, k, blocks, target, variant, n_points, n_groups, seed, grid, output):
    """Write a named instance as JSON."""
    try:
        if family == "three-point":
            inst = gen_three_point(_parse_rat(alpha, "--alpha"))
        elif family == "wdmc-local-min":
            inst = gen_wdmc_local_min(_parse_rat(eps, "--eps"), _parse_rat(delta, "--delta"))
        elif family == "ring":
            inst = gen_ring(blocks)
        elif family == "hypercube":
            base, with_target = gen_hypercube(k)
            if target is None:
                inst = base
            else:
                inst = with_target(int(t) for t in target.split(","))
        elif family == "cdmc":
            inst = gen_cdmc_example()
        elif family == "fibonacci":
            inst = gen_fibonacci(k, _parse_rat(eps, "--eps"))
        elif family == "dcma":
            before, after = gen_dcma_example(_parse_rat(eps, "--eps"))
            inst = before if variant == "before" else after
        else:
            inst = gen_random(n_points, n_groups, seed=seed, grid_denominator=grid)
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_INPUT)
    text = dump_instance(inst)
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)
    sys.exit(EXIT_OK)


# ---------------------------------------------------------------------------
# landscape
# ---------------------------------------------------------------------------


@main.command("landscape")
@click.argument("instance", type=str)
@click.option("--metric", type=click.Choice(["wdmc", "dmc", "dimc", "wdma", "dma"]), default="wdmc", show_default=True)
@click.option("--radius", default="1/1000", show_default=True, help="Probe ball radius (rational).")
@click.option("--trials", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pretty", is_flag=True)
@click.option("-o", "--output", type=str, default=None)
def cmd_landscape(instance, metric, radius, trials, seed, pretty, output):
    """Probe a metric's landscape around the audited predictor."""
    inst = _load(instance)
    try:
        probe = local_min_probe(metric, inst, _parse_rat(radius, "--radius"), trials, seed)
    except ValueError as e:
        if _is_budget_error(e):
            click.echo(f"error: budget refusal: {e}", err=True)
            sys.exit(EXIT_BUDGET)
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_INPUT)
    payload = {
        "metric": probe.metric,
        "baseline": _rat_json(probe.baseline),
        "best_value": _rat_json(probe.best_value),
        "decreased": probe.decreased,
        "trials": probe.trials,
    }
    if probe.best_point is not None:
        payload["best_point"] = [_rat_json(v) for v in probe.best_point.values]
    if pretty:
        click.echo(
            f"{probe.metric}: baseline {payload['baseline']['rational']}, "
            f"best {payload['best_value']['rational']}, decreased: {probe.decreased}"
        )
    else:
        _emit(payload, output)
    sys.exit(EXIT_OK)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


@main.command("verify")
@click.option("--suite", type=click.Choice(["paper"]), default="paper", show_default=True)
@click.option("--pretty", is_flag=True)
@click.option("-o", "--output", type=str, default=None)
def cmd_verify(suite, pretty, output):
    """Run the acceptance suite; exit 1 if any criterion fails."""
    results = run_suite()
    all_ok = all(r.ok for r in results)
    if pretty:
        for r in results:
            status = "PASS" if r.ok else "FAIL"
            click.echo(f"{status}  {r.slug:40s} {r.elapsed:8.2f}s  {r.detail}")
        click.echo(f"{'all criteria pass' if all_ok else 'FAILURES PRESENT'}")
    else:
        _emit(
            {
                "suite": suite,
                "passed": all_ok,
                "criteria": [
                    {
                        "slug": r.slug,
                        "passed": r.passed,
                        "within_budget": r.within_budget,
                        "elapsed_seconds": round(r.elapsed, 3),
                        "limit_seconds": r.limit_seconds,
                        "detail": r.detail,
                    }
                    for r in results
                ],
            },
            output,
        )
    sys.exit(EXIT_OK if all_ok else EXIT_FAIL)


if __name__ == "__main__":
    main()
