"""The ten acceptance criteria at their stated sizes and tolerances.

Each test prints one verdict line; the same lines are repeated in the
terminal summary.  Monte Carlo criteria use 5 standard errors.
"""

import os
import time

import pytest

from indelphy.cli import main
from indelphy.experiment import ExperimentConfig, run_experiment
from indelphy.report import Check
from indelphy.validation import (check_deviation_decay, check_exact_reconstruction, check_fork_identity,
                                 check_fork_mc, check_gtr_spectral, check_nonclock, check_single_site_grid,
                                 block_checks, simulate_block_estimator)

from conftest import ACCEPTANCE_LINES

SEED = 1


def verdict(number, title, checks, elapsed=None, limit=None, extra=""):
    ok = bool(checks) and all(c.passed for c in checks)
    failed = [c for c in checks if not c.passed]
    parts = [f"{len(checks) - len(failed)}/{len(checks)} checks"]
    if elapsed is not None:
        parts.append(f"{elapsed:.1f}s")
        if limit is not None and elapsed > limit:
            ok = False
            parts.append(f"over the {limit:.0f}s budget")
    if failed:
        worst = failed[0]
        z = "" if worst.kind != "mean" else f" z={worst.z:+.1f}"
        parts.append(f"first failure {worst.name} value={worst.value:.6g} target={worst.target:.6g}{z}")
    if extra:
        parts.append(extra)
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {title} ({'; '.join(parts)})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok, "\n".join(f"{c.name}: value={c.value} target={c.target} se={c.se} {c.detail}" for c in failed)


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_criterion_01_single_site_formulas():
    checks, dt = timed(lambda: check_single_site_grid(SEED, R=100_000))
    fams = {c.family for c in checks}
    assert {"length_mean", "length_variance", "new_sites", "survival", "flip_probability"} <= fams
    ok, msg = verdict(1, "single-site formula grid", checks, dt, 120)
    assert ok, msg


def test_criterion_02_deviation_decay():
    checks, dt = timed(lambda: check_deviation_decay(SEED, R=10_000))
    ok, msg = verdict(2, "deviation decay CFN and Jukes-Cantor", checks, dt, 60)
    assert ok, msg


def test_criterion_03_fork_identity_and_mc():
    checks, dt = timed(lambda: check_fork_identity(SEED, draws=1000)
                       + check_fork_mc(SEED, R=10_000, k_r=1000, models=("cfn",)))
    ok, msg = verdict(3, "fork and clock closed forms, fork Monte Carlo", checks, dt)
    assert ok, msg


@pytest.fixture(scope="module")
def block_runs():
    t0 = time.perf_counter()
    runs = [simulate_block_estimator(SEED, k0, 1000, 0.6, diagnostics=(k0 == 10_000))
            for k0 in (1000, 10_000, 100_000)]
    return runs, time.perf_counter() - t0


def test_criterion_04_block_expectation_and_slope(block_runs):
    runs, dt = block_runs
    checks = [c for c in block_checks(runs, (10_000, 100_000)) if c.family in ("block_mean", "std_slope")]
    assert [c.family for c in checks] == ["block_mean", "block_mean", "std_slope"]
    ok, msg = verdict(4, "block estimator mean at k0=1e4,1e5 and STD slope", checks, dt, 600,
                      extra=f"slope={checks[-1].value:.3f}")
    assert ok, msg


def test_criterion_05_good_events(block_runs):
    runs, dt = block_runs
    checks = [c for c in block_checks(runs, ()) if c.family in ("good_event_frequency", "joint_block_mean")]
    assert [c.family for c in checks] == ["good_event_frequency", "joint_block_mean"]
    ok, msg = verdict(5, "good-event frequency and per-block joint survivors at k0=1e4", checks)
    assert ok, msg


def test_criterion_06_exact_reconstruction():
    checks, dt = timed(lambda: check_exact_reconstruction(SEED, n_trees=200))
    ok, msg = verdict(6, "exact reconstruction of 200 clock trees", checks, dt, 60)
    assert ok, msg


def test_criterion_07_end_to_end():
    cfg = ExperimentConfig(seed=SEED, n=8, f=0.1, g=0.3, eta=0.1, delta=0.02, lam=0.02,
                           k_r=(10_000, 100_000, 1_000_000), zeta=0.6, replicates=100,
                           workers=os.cpu_count() or 1)
    report, dt = timed(lambda: run_experiment(cfg))
    summary = "; ".join(f"k_r={s['k_r']} Buneman {s['success_buneman']:.2f} NJ {s['success_nj']:.2f}"
                        for s in report.tables["summary"])
    ok, msg = verdict(7, "end-to-end n=8 sweep", report.checks, dt, 1800, extra=summary)
    assert ok, msg


def test_criterion_08_gtr_spectral():
    checks = check_gtr_spectral(SEED, n_q=100)
    assert {c.family for c in checks} == {"gtr_spectral", "cfn_reduction"}
    ok, msg = verdict(8, "GTR spectral vector contract and CFN reduction", checks)
    assert ok, msg


def test_criterion_09_nonclock_metric():
    checks, dt = timed(lambda: check_nonclock(SEED, R=10_000, k_r=1000))
    ok, msg = verdict(9, "non-clock ratio and four-point margins", checks, dt)
    assert ok, msg


def _cli_outputs(d, tag):
    tree = d / "t.nwk"
    tree.write_text("(((a:0.2,b:0.2):0.2,c:0.4):0.1,(d:0.3,e:0.3):0.2);\n")
    (d / "truth.nwk").write_text("(((a,b),c),(d,e));\n")
    fa, anc, dist, nwk = (d / f"{tag}.{x}" for x in ("fa", "tsv", "dist", "nwk"))
    rc = [
        main(["simulate", "--tree", str(tree), "--k-r", "30000", "--eta", "0.1", "--delta", "0.02", "--lam", "0.02",
              "--seed", "11", "--out", str(fa), "--ancestry", str(anc), "--internal"]),
        main(["estimate", "--seqs", str(fa), "--out", str(dist)]),
        main(["reconstruct", "--matrix", str(dist), "--out", str(nwk)]),
        main(["experiment", "--seed", "11", "--n", "6", "--k-r", "10000,20000", "--replicates", "4",
              "--min-success", "0", "--out", str(d / f"{tag}_exp")]),
        main(["validate", "--seed", "11", "--scale", "quick", "--out", str(d / f"{tag}_val")]),
    ]
    files = [fa, anc, dist, nwk]
    for sub in (f"{tag}_exp", f"{tag}_val"):
        files += sorted(p for p in (d / sub).iterdir() if p.name != "timings.txt")
    return rc, {str(p.relative_to(d)).replace(tag, "X"): p.read_bytes() for p in files}


def test_criterion_10_determinism(tmp_path, capsys):
    rc1, first = _cli_outputs(tmp_path, "one")
    rc2, second = _cli_outputs(tmp_path, "two")
    capsys.readouterr()
    differing = sorted(k for k in first if first[k] != second.get(k))
    checks = [Check("byte_identical", name, "exact", name not in differing, 0.0, 0.0, 0.0, 2) for name in first]
    checks.append(Check("exit_codes_repeat", "", "exact", rc1 == rc2, 0.0, 0.0, 0.0, 2, f"{rc1} vs {rc2}"))
    with capsys.disabled():
        ok, msg = verdict(10, "repeated CLI commands give byte-identical outputs", checks,
                          extra=f"{len(first)} files compared")
    assert ok, msg
