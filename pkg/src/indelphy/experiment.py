"""End-to-end runs: random tree -> sequences -> distances -> topology -> score."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import analytics as an
from .estimator import EstimatorConfig, distance_matrix
from .generators import generate_bounded_rates_tree, generate_clock_tree
from .model import EdgeParams, SubstitutionModel
from .report import Check, RunReport
from .simulator import STREAM_TREES, evolve_tree, make_rng
from .topology import Topology, buneman, neighbor_joining, robinson_foulds


def model_from_name(name: str) -> SubstitutionModel:
    if name == "cfn":
        return SubstitutionModel.cfn()
    if name in ("jc", "gtr-jc"):
        return SubstitutionModel.jukes_cantor()
    raise ValueError(f"unknown model {name!r} (expected cfn or jc)")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    n: int = 8
    f: float = 0.1
    g: float = 0.3
    eta: float = 0.1
    delta: float = 0.02
    lam: float = 0.02
    eta_lo: float | None = None
    eta_hi: float | None = None
    k_r: tuple[int, ...] = (10**6,)
    k0: int | None = None
    zeta: float = 0.6
    replicates: int = 100
    model: str = "cfn"
    variant: str = "clock"
    method: str = "buneman"
    balanced: bool = False
    min_success: float = 0.95
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.f < self.g < math.inf:
            raise ValueError("need 0 < f < g < inf")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.n < 3:
            raise ValueError("n must be >= 3")
        if (self.eta_lo is None) != (self.eta_hi is None):
            raise ValueError("set both eta_lo and eta_hi for bounded rates")
        if self.eta_lo is not None and not 0 <= self.eta_lo <= self.eta_hi:
            raise ValueError("need 0 <= eta_lo <= eta_hi")
        if self.method not in ("buneman", "nj"):
            raise ValueError("method must be buneman or nj")
        if not self.k_r or any(k < 1 for k in self.k_r):
            raise ValueError("k_r values must be positive")
        EstimatorConfig(self.k0, self.zeta, self.variant)
        model_from_name(self.model)

    @classmethod
    def from_mapping(cls, d: dict) -> "ExperimentConfig":
        """Build from a mapping whose values may be strings (config file, CLI)."""
        known = {f.name for f in fields(cls)}
        kw = {}
        for key, val in d.items():
            if key not in known:
                raise ValueError(f"unknown experiment key {key!r}")
            if val is not None:
                kw[key] = _coerce(key, val)
        return cls(**kw)

    def echo(self) -> dict:
        d = asdict(self)
        d["k_r"] = ",".join(str(k) for k in self.k_r)
        d.pop("workers")
        return d


_INT = {"seed", "n", "replicates", "workers", "k0"}
_FLOAT = {"f", "g", "eta", "delta", "lam", "zeta", "min_success", "eta_lo", "eta_hi"}


def _coerce(key: str, val):
    if key == "k_r":
        if isinstance(val, str):
            return tuple(int(float(x)) for x in val.replace(",", " ").split())
        return (int(val),) if np.isscalar(val) else tuple(int(x) for x in val)
    if not isinstance(val, str):
        return val
    if val.lower() == "none":
        return None
    if key in _INT:
        return int(float(val))
    if key in _FLOAT:
        return float(val)
    if key == "balanced":
        return val.lower() in ("1", "true", "yes", "on")
    return val


def _draw_tree(cfg: ExperimentConfig, replicate: int):
    rng = make_rng(cfg.seed, STREAM_TREES, replicate)
    if cfg.eta_lo is not None:
        return generate_bounded_rates_tree(cfg.n, cfg.f, cfg.g, (cfg.eta_lo, cfg.eta_hi), cfg.delta, cfg.lam, rng,
                                           balanced=cfg.balanced)
    return generate_clock_tree(cfg.n, cfg.f, cfg.g, rng, rates=EdgeParams(0.0, cfg.eta, cfg.delta, cfg.lam),
                               balanced=cfg.balanced)


def run_replicate(cfg: ExperimentConfig, k_r: int, replicate: int) -> dict:
    """One simulate/estimate/reconstruct/score pass; errors are recorded, not raised."""
    row = {"k_r": k_r, "replicate": replicate, "rf_buneman": -1, "rf_nj": -1, "buneman_splits": -1,
           "n_infinite": -1, "k0": -1, "sup_error": math.nan, "error": ""}
    try:
        model = model_from_name(cfg.model)
        tree = _draw_tree(cfg, replicate)
        seqs = evolve_tree(tree, k_r, model, cfg.seed, replicate, track_ancestry=False, keep_internal=False)
        leaves = {tree.names[v]: seqs[v] for v in tree.leaves()}
        D = distance_matrix(leaves, EstimatorConfig(cfg.k0, cfg.zeta, cfg.variant), model)
        truth = Topology.from_phylogeny(tree)
        tb = buneman(D)
        tn = neighbor_joining(D)
        row.update(rf_buneman=robinson_foulds(tb, truth), rf_nj=robinson_foulds(tn, truth),
                   buneman_splits=len(tb.splits), n_infinite=D.n_infinite(), k0=int(D.meta.get("k0", -1)))
        if cfg.variant == "clock" and cfg.eta_lo is None:
            T = an.true_distance_matrix(tree, "clock")
            perm = [T.index(nm) for nm in D.names]
            true = T.values[np.ix_(perm, perm)]
            iu = np.triu_indices(D.n, 1)
            # distances are -2 ln(correlation); compare on the correlation scale
            row["sup_error"] = float(np.max(np.abs(np.exp(-D.values[iu] / 2) - np.exp(-true[iu] / 2))))
    except Exception as exc:  # recorded per replicate, the run continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _run_one(args):
    return run_replicate(*args)


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Replicates for each root length in ``cfg.k_r``; checks success rate and trend."""
    report = RunReport("experiment", cfg.seed, cfg.echo())
    jobs = [(cfg, k, r) for k in cfg.k_r for r in range(cfg.replicates)]
    t0 = time.perf_counter()
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            rows = list(ex.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        rows = [_run_one(j) for j in jobs]
    report.timings["replicates"] = time.perf_counter() - t0
    rows.sort(key=lambda r: (r["k_r"], r["replicate"]))
    report.tables["replicates"] = rows
    summary = []
    for k in cfg.k_r:
        rs = [r for r in rows if r["k_r"] == k]
        R = len(rs)
        succ = {m: sum(r[f"rf_{m}"] == 0 for r in rs) / R for m in ("buneman", "nj")}
        errs = [r["sup_error"] for r in rs if not math.isnan(r["sup_error"])]
        summary.append({"k_r": k, "replicates": R, "success_buneman": succ["buneman"], "success_nj": succ["nj"],
                        "failure": 1.0 - succ[cfg.method], "errors": sum(bool(r["error"]) for r in rs),
                        "mean_sup_error": float(np.mean(errs)) if errs else math.nan})
    report.tables["summary"] = summary
    top = max(summary, key=lambda s: s["k_r"])
    p = 1.0 - top["failure"]
    R = top["replicates"]
    report.checks.append(Check("topology_success", f"method={cfg.method},k_r={top['k_r']}", "bound",
                               p >= cfg.min_success, p, cfg.min_success, math.sqrt(p * (1 - p) / R), R,
                               f"NJ success {top['success_nj']:.3f}" if cfg.method == "buneman"
                               else f"Buneman success {top['success_buneman']:.3f}"))
    if len(cfg.k_r) > 1:
        ordered = sorted(summary, key=lambda s: s["k_r"])
        fails = [s["failure"] for s in ordered]
        ok = all(fails[i + 1] <= fails[i] for i in range(len(fails) - 1))
        report.checks.append(Check("failure_trend", "k_r=" + "/".join(str(s["k_r"]) for s in ordered), "trend",
                                   ok, fails[-1], fails[0], 0.0, sum(s["replicates"] for s in ordered),
                                   "failure " + "/".join(f"{x:.3f}" for x in fails)))
    n_err = sum(bool(r["error"]) for r in rows)
    report.checks.append(Check("replicate_errors", "", "exact", n_err == 0, float(n_err), 0.0, 0.0, len(rows)))
    return report
