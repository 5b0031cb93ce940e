"""Monte Carlo verification of the closed-form results.

Every function returns a list of :class:`~indelphy.report.Check`.  Random
streams are derived from ``seed`` and a per-function identifier, so each
check can be rerun in isolation with identical results.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from itertools import combinations, product

import numpy as np
from scipy import stats

from . import analytics as an
from .estimator import (block_deviations, block_normalization, epartdist, full_sequence_edist,
                        good_event_diagnostics, make_partition, nonclock_ratio)
from .generators import generate_bounded_rates_tree, generate_clock_tree
from .model import EdgeParams, SubstitutionModel, gtr_spectral_vector, random_reversible_q
from .report import Check, RunReport, bound_check, mean_check
from .simulator import (STREAM_MISC, EvolvedSequence, count_joint_survivors, derive_seed, evolve_branch,
                        evolve_tree, make_rng, sample_root_sequence)
from .topology import (Topology, buneman, diameter_bounds, four_point_defect, four_point_violation,
                       neighbor_joining, robinson_foulds)
from .tree import parse_newick

CANONICAL = EdgeParams(1.0, 0.1, 0.05, 0.02)
FORK_NEWICK = "((a:1,b:1)u:1)r;"

# one identifier per check function keeps their random streams disjoint
_ID = {name: i for i, name in enumerate([
    "root", "grid", "decay_cfn", "decay_gtr", "fork_cfn", "fork_gtr", "identity", "concentration",
    "joint", "block", "nonclock", "nonclock_trees", "spectral", "reconstruction", "diameter"])}

REQUIRED_CHECKS = (
    "root_cfn_frequency", "root_gtr_frequency",
    "length_mean", "length_variance", "new_sites", "survival", "flip_probability", "extinction",
    "mgf_normalization", "mgf_derivative", "mgf_monotone", "critical_limit",
    "deviation_decay_cfn", "deviation_decay_gtr",
    "fork_identity", "fork_cfn_mc", "fork_gtr_mc",
    "length_concentration", "length_mean_boundary", "joint_survivors",
    "block_mean", "std_slope", "concentration_trend",
    "good_event_frequency", "joint_block_mean", "block_independence", "conditional_block_mean",
    "block_variance_bound", "fourth_moment_identity",
    "nonclock_ratio", "nonclock_four_point",
    "gtr_spectral", "cfn_reduction",
    "exact_reconstruction", "buneman_nj_agreement", "diameter_bounds",
)


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


def _p(**kw) -> str:
    return ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in kw.items())


def _fork_tree(params: EdgeParams = CANONICAL):
    return parse_newick(FORK_NEWICK, rates=params)


# --------------------------------------------------------------------------
# root sequence


def check_root(seed: int, k_r: int = 100_000, pi=(0.1, 0.2, 0.3, 0.4)) -> list[Check]:
    rng = make_rng(seed, STREAM_MISC, _ID["root"])
    cfn = SubstitutionModel.cfn()
    s = sample_root_sequence(k_r, cfn, rng)
    out = [mean_check("root_cfn_frequency", _p(k_r=k_r), float(np.mean(s.states == 0)), 0.5,
                      math.sqrt(0.25 / k_r), k_r)]
    Q = np.tile(np.asarray(pi), (4, 1))
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    gtr = SubstitutionModel.gtr(Q, pi)
    g = sample_root_sequence(k_r, gtr, rng)
    freq = np.bincount(g.states, minlength=4) / k_r
    for i, p in enumerate(pi):
        out.append(mean_check("root_gtr_frequency", _p(state=i, pi=float(p)), float(freq[i]), p,
                              math.sqrt(p * (1 - p) / k_r), k_r))
    return out


# --------------------------------------------------------------------------
# single-site moments


def single_site_moments(p: EdgeParams, R: int, rng: np.random.Generator) -> dict:
    """Simulate R independent single-site lineages under CFN."""
    cfn = SubstitutionModel.cfn()
    root = sample_root_sequence(R, cfn, rng)
    out = evolve_branch(root, p, cfn, rng, boundary=False)
    K = np.bincount(out.origin, minlength=R)
    orig = out.labels <= R
    src = out.labels[orig] - 1
    survived = np.zeros(R, dtype=bool)
    survived[src] = True
    flips = out.states[orig] != root.states[src]
    return {"K": K, "survived": survived, "new": K - survived, "flips": flips}


def check_single_site_grid(seed: int, R: int = 100_000, values=(0.02, 0.1, 0.3), times=(0.5, 1.0, 2.0),
                           z_max: float = 5.0) -> list[Check]:
    out = []
    for gi, (eta, delta, lam) in enumerate(product(values, repeat=3)):
        for ti, t in enumerate(times):
            p = EdgeParams(t, eta, delta, lam)
            sim = single_site_moments(p, R, make_rng(seed, STREAM_MISC, _ID["grid"], gi, ti))
            tag = _p(eta=eta, delta=delta, lam=lam, t=t)
            K = sim["K"].astype(float)
            m, se = _mean_se(K)
            out.append(mean_check("length_mean", tag, m, an.expected_length(p), se, R, z_max))
            c = K - K.mean()
            var = float(np.mean(c * c) * R / (R - 1))
            se_var = math.sqrt(max(np.mean(c ** 4) - np.mean(c * c) ** 2, 0.0) / R)
            out.append(mean_check("length_variance", tag, var, an.length_variance(p), se_var, R, z_max))
            m, se = _mean_se(sim["new"])
            out.append(mean_check("new_sites", tag, m, an.new_sites_expectation(p), se, R, z_max))
            D = an.survival(p)
            out.append(mean_check("survival", tag, float(sim["survived"].mean()), D,
                                  math.sqrt(D * (1 - D) / R), R, z_max))
            nf = len(sim["flips"])
            fp = an.flip_probability(eta, t)
            out.append(mean_check("flip_probability", tag, float(sim["flips"].mean()), fp,
                                  math.sqrt(fp * (1 - fp) / nf), nf, z_max))
            q = an.extinction_probability(p)
            out.append(mean_check("extinction", tag, float(np.mean(K == 0)), q,
                                  math.sqrt(q * (1 - q) / R), R, z_max))
    return out


def check_mgf_properties(values=(0.02, 0.1, 0.3), times=(0.5, 1.0, 2.0)) -> list[Check]:
    out = []
    s_grid = np.linspace(0.0, 1.0, 101)
    worst_norm = worst_der = worst_mono = 0.0
    n = 0
    for (delta, lam), t in product(product(values, repeat=2), times):
        p = EdgeParams(t, 0.0, delta, lam)
        F = np.array([an.length_mgf(s, p) for s in s_grid])
        worst_mono = max(worst_mono, float(np.max(F[:-1] - F[1:], initial=0.0)))
        worst_norm = max(worst_norm, abs(an.length_mgf(1.0, p) - 1.0))
        h = 1e-5
        der = (an.length_mgf(1 + h, p) - an.length_mgf(1 - h, p)) / (2 * h)
        worst_der = max(worst_der, abs(der / an.length_factor(p) - 1.0))
        n += 1
    out.append(bound_check("mgf_normalization", "", worst_norm, 1e-12, n=n))
    out.append(bound_check("mgf_derivative", "rel_err", worst_der, 1e-6, n=n))
    out.append(bound_check("mgf_monotone", "max_decrease", worst_mono, 0.0, n=n))
    worst = 0.0
    for lam, t in product(values, times):
        for sgn in (1, -1):
            near = EdgeParams(t, 0.0, lam + sgn * 1e-7, lam)
            crit = EdgeParams(t, 0.0, lam, lam)
            for s in (0.0, 0.3, 0.7, 0.95):
                worst = max(worst, abs(an.length_mgf(s, near) - an.length_mgf(s, crit)))
    out.append(bound_check("critical_limit", "", worst, 1e-5, n=len(values) * len(times) * 8))
    return out


# --------------------------------------------------------------------------
# deviation decay and fork statistics


def check_deviation_decay(seed: int, R: int = 10_000, params: EdgeParams = CANONICAL, k_r: int = 100,
                          z_max: float = 5.0) -> list[Check]:
    out = []
    for fam, model in (("deviation_decay_cfn", SubstitutionModel.cfn()),
                       ("deviation_decay_gtr", SubstitutionModel.jukes_cantor())):
        rng = make_rng(seed, STREAM_MISC, _ID["decay_cfn" if model.kind == "cfn" else "decay_gtr"])
        if model.kind == "cfn":
            states = np.zeros(k_r, dtype=np.int8)
        else:
            states = np.full(k_r, int(np.argmax(model.w)), dtype=np.int8)
        root = EvolvedSequence(states, np.arange(1, k_r + 1, dtype=np.int64))
        d_r = float(model.site_values(states).sum())
        devs = np.empty(R)
        for r in range(R):
            leaf = evolve_branch(root, params, model, rng, track_ancestry=False)
            devs[r] = model.site_values(leaf.states).sum()
        m, se = _mean_se(devs)
        target = an.deviation_decay(params, model) * d_r
        out.append(mean_check(fam, _p(k_r=k_r, delta_r=d_r, eta=params.eta, delta=params.delta,
                                      lam=params.lam, t=params.t), m, target, se, R, z_max))
    return out


def check_fork_identity(seed: int, draws: int = 1000) -> list[Check]:
    rng = make_rng(seed, STREAM_MISC, _ID["identity"])
    worst = 0.0
    for _ in range(draws):
        eta, delta, lam = rng.uniform(0.0, 0.5, size=3)
        T = float(rng.uniform(0.1, 3.0))
        t = float(rng.uniform(0.0, T))
        k_r = float(rng.integers(1, 10**6))
        leaf = EdgeParams(t, eta, delta, lam)
        fork = an.fork_expected_distance(leaf, leaf, EdgeParams(T - t, eta, delta, lam), k_r)
        clock = an.clock_expected_distance(eta, delta, lam, t, an.kappa(k_r, delta, lam, T))
        worst = max(worst, abs(fork - clock) / max(abs(clock), 1e-300))
    return [bound_check("fork_identity", "max_rel_diff", worst, 1e-12, n=draws)]


def fork_statistics(seed: int, R: int, k_r: int, model: SubstitutionModel, params: EdgeParams = CANONICAL):
    tree = _fork_tree(params)
    a, b = tree.node_by_name("a"), tree.node_by_name("b")
    vals = np.empty(R)
    for r in range(R):
        s = evolve_tree(tree, k_r, model, seed, r, track_ancestry=False)
        vals[r] = full_sequence_edist(s[a], s[b], model)
    return vals


def check_fork_mc(seed: int, R: int = 10_000, k_r: int = 1000, z_max: float = 5.0,
                  models=("cfn", "gtr")) -> list[Check]:
    out = []
    for kind in models:
        model = SubstitutionModel.cfn() if kind == "cfn" else SubstitutionModel.jukes_cantor()
        vals = fork_statistics(derive_seed(seed, _ID[f"fork_{kind}"]), R, k_r, model)
        m, se = _mean_se(vals)
        p = CANONICAL
        target = an.fork_expected_distance(p, p, p, k_r, model)
        out.append(mean_check(f"fork_{kind}_mc", _p(k_r=k_r, eta=p.eta, delta=p.delta, lam=p.lam, t=p.t),
                              m, target, se, R, z_max))
    return out


# --------------------------------------------------------------------------
# lengths and joint survival


def check_length_concentration(seed: int, R: int = 1000, k_r: int = 10_000, params: EdgeParams = CANONICAL,
                               C: float = 1.0, max_fraction: float = 0.01, z_max: float = 5.0) -> list[Check]:
    rng = make_rng(seed, STREAM_MISC, _ID["concentration"])
    cfn = SubstitutionModel.cfn()
    K = np.empty(R)
    for r in range(R):
        root = sample_root_sequence(k_r, cfn, rng)
        K[r] = len(evolve_branch(root, params, cfn, rng, track_ancestry=False))
    M = an.length_factor(params)
    dev = np.abs(K - k_r * M) > C * math.sqrt(k_r * math.log(k_r))
    frac = float(dev.mean())
    m, se = _mean_se(K)
    tag = _p(k_r=k_r, C=C)
    return [
        bound_check("length_concentration", tag, frac, max_fraction, se=math.sqrt(max(frac * (1 - frac), 1e-12) / R), n=R),
        mean_check("length_mean_boundary", tag, m, k_r * M + an.boundary_insertions(params), se, R, z_max),
    ]


def check_joint_survivors(seed: int, R: int = 1000, k_u: int = 10_000,
                          params: EdgeParams = EdgeParams(1.0, 0.0, 0.1, 0.0), z_max: float = 5.0) -> list[Check]:
    tree = parse_newick("(a:1,b:1)u;", rates=params)
    cfn = SubstitutionModel.cfn()
    sd = derive_seed(seed, _ID["joint"])
    vals = np.empty(R)
    for r in range(R):
        s = evolve_tree(tree, k_u, cfn, sd, r)
        vals[r] = count_joint_survivors(s[1], s[2], s[0])
    m, se = _mean_se(vals)
    D = an.survival(params)
    return [mean_check("joint_survivors", _p(k_u=k_u, delta=params.delta, lam=params.lam, t=params.t),
                       m, k_u * D * D, se, R, z_max)]


# --------------------------------------------------------------------------
# block estimator


def fork_root_length(k0: int, params: EdgeParams = CANONICAL) -> int:
    """Root length giving leaves comfortably longer than ``k0`` on the canonical fork."""
    return math.ceil(1.1 * k0 / (an.length_factor(params) ** 2))


@dataclass
class BlockRun:
    k0: int
    ell: int
    L: int
    normalized: np.ndarray
    raw: np.ndarray
    diag: dict | None = None


def simulate_block_estimator(seed: int, k0: int, R: int, zeta: float = 0.6, params: EdgeParams = CANONICAL,
                             diagnostics: bool = False, c: float = 3.0) -> BlockRun:
    tree = _fork_tree(params)
    cfn = SubstitutionModel.cfn()
    part = make_partition(k0, zeta)
    k_r = fork_root_length(k0, params)
    u, a, b = (tree.node_by_name(x) for x in "uab")
    norm = block_normalization(part, cfn)
    raw = np.empty(R)
    diag = {"holds": [], "J": [], "prod": [], "ell_u": None, "D2": None, "delta_u": None,
            "interior_nonempty": None} if diagnostics else None
    sd = derive_seed(seed, _ID["block"], k0)
    for r in range(R):
        s = evolve_tree(tree, k_r, cfn, sd, r, track_ancestry=diagnostics)
        raw[r] = epartdist(s[a], s[b], part, cfn)
        if diagnostics:
            g = good_event_diagnostics(s, tree, u, a, b, part, c=c)
            diag["holds"].append(g.holds)
            diag["J"].append(g.J.astype(float))
            da = block_deviations(s[a], part, cfn)
            db = block_deviations(s[b], part, cfn)
            diag["prod"].append(da * db)
            diag.update(ell_u=g.ell_u, D2=g.D2, delta_u=g.delta_u, interior_nonempty=g.interior_nonempty)
    if diagnostics:
        for key in ("holds", "J", "prod"):
            diag[key] = np.array(diag[key])
    return BlockRun(k0, part.ell, part.L, raw * norm, raw, diag)


def block_checks(runs: list[BlockRun], mean_k0s, zeta: float = 0.6, params: EdgeParams = CANONICAL,
                 alpha: float = 0.05, z_max: float = 5.0) -> list[Check]:
    out = []
    beta = an.beta_rate(params.eta, params.delta, params.lam)
    target = math.exp(-beta * params.t)
    for run in runs:
        if run.k0 in mean_k0s:
            m, se = _mean_se(run.normalized)
            out.append(mean_check("block_mean", _p(k0=run.k0, zeta=zeta, ell=run.ell, L=run.L), m, target, se,
                                  len(run.normalized), z_max))
    ks = np.array([r.k0 for r in runs], dtype=float)
    sds = np.array([r.raw.std(ddof=1) for r in runs])
    Rs = np.array([len(r.raw) for r in runs])
    x = np.log(ks)
    slope = float(np.polyfit(x, np.log(sds), 1)[0])
    # se of log sd is about 1/sqrt(2(R-1)); propagate through the regression
    w = 1.0 / (2.0 * (Rs - 1))
    xc = x - x.mean()
    se_slope = float(math.sqrt(np.sum(xc ** 2 * w)) / np.sum(xc ** 2))
    expect = (3 * zeta - 1) / 2
    out.append(Check("std_slope", _p(k0s="/".join(str(int(k)) for k in ks), zeta=zeta), "bound",
                     abs(slope - expect) <= 0.1, slope, expect, se_slope, int(Rs.sum()),
                     "pass when |slope - (3 zeta - 1)/2| <= 0.1"))
    probs = [float(np.mean(np.abs(r.normalized - target) > r.k0 ** (-alpha))) for r in runs]
    order = np.argsort(ks)
    ps = [probs[i] for i in order]
    trend_ok = all(ps[i + 1] <= ps[i] + 1e-12 for i in range(len(ps) - 1)) and (ps[-1] < ps[0] or ps[0] == 0.0)
    out.append(Check("concentration_trend", _p(alpha=alpha, probs="/".join(f"{p:.4f}" for p in ps)), "trend",
                     bool(trend_ok), ps[-1], ps[0], 0.0, int(Rs.sum()),
                     "tail probability nonincreasing in k0"))
    for run in runs:
        if run.diag is not None:
            out += good_event_checks(run, params, z_max)
    return out


def good_event_checks(run: BlockRun, params: EdgeParams, z_max: float = 5.0, min_frequency: float = 0.99) -> list[Check]:
    d = run.diag
    R = len(d["holds"])
    tag = _p(k0=run.k0, ell_u=d["ell_u"], delta_u=d["delta_u"], interior=int(bool(d["interior_nonempty"])))
    freq = float(np.mean(d["holds"]))
    out = [bound_check("good_event_frequency", tag, freq, min_frequency, upper=False,
                       se=math.sqrt(max(freq * (1 - freq), 1e-12) / R), n=R)]
    per_rep_J = d["J"].mean(axis=1)
    m, se = _mean_se(per_rep_J)
    out.append(mean_check("joint_block_mean", tag, m, d["ell_u"] * d["D2"], se, R, z_max))
    good = d["holds"]
    prod = d["prod"][good]
    ng = len(prod)
    if ng > 2 and prod.shape[1] >= 3:
        x, y = prod[:, 0], prod[:, 2]
        cx = (x - x.mean()) * (y - y.mean())
        cov, se_cov = _mean_se(cx)
        out.append(mean_check("block_independence", tag + ",blocks=1/3", cov, 0.0, se_cov, ng, z_max))
        used = prod[:, 0::2]
        per = used.mean(axis=1)
        m, se = _mean_se(per)
        target = 0.25 * math.exp(-4 * params.eta * params.t) * math.exp(-2 * params.delta * params.t) * d["ell_u"]
        out.append(mean_check("conditional_block_mean", tag, m, target, se, ng, z_max))
        v = x.var(ddof=1)
        c = x - x.mean()
        se_v = math.sqrt(max(np.mean(c ** 4) - np.mean(c * c) ** 2, 0.0) / ng)
        out.append(bound_check("block_variance_bound", tag + ",block=1", float(v), 3.0 / 16.0 * run.ell ** 2,
                               se=se_v, n=ng, slack=3 * se_v))
    else:
        for fam in ("block_independence", "conditional_block_mean", "block_variance_bound"):
            out.append(Check(fam, tag, "bound", False, math.nan, math.nan, math.nan, ng, "too few good replicates"))
    return out


def check_fourth_moment(ells=(1, 2, 4, 16, 64, 252)) -> list[Check]:
    worst = 0.0
    for ell in ells:
        z = np.arange(ell + 1)
        pmf = stats.binom.pmf(z, ell, 0.5)
        m4 = float(np.sum(pmf * (z - ell / 2) ** 4))
        worst = max(worst, abs(m4 - (3 * ell ** 2 - 2 * ell) / 16) / max(1.0, m4))
    return [bound_check("fourth_moment_identity", "rel_err", worst, 1e-12, n=len(ells))]


def check_block_estimator(seed: int, k0s=(1000, 10_000, 100_000), mean_k0s=(10_000, 100_000),
                          diag_k0: int = 10_000, R: int = 1000, zeta: float = 0.6,
                          z_max: float = 5.0) -> list[Check]:
    runs = [simulate_block_estimator(seed, k0, R, zeta, diagnostics=(k0 == diag_k0)) for k0 in k0s]
    return block_checks(runs, mean_k0s, zeta, z_max=z_max) + check_fourth_moment()


# --------------------------------------------------------------------------
# clock-free metric


NONCLOCK_EDGES = (EdgeParams(1.0, 0.1, 0.05, 0.02), EdgeParams(1.0, 0.2, 0.05, 0.02))


def nonclock_fork_ratios(seed: int, R: int, k_r: int, edges=NONCLOCK_EDGES,
                         model: SubstitutionModel | None = None) -> np.ndarray:
    model = model or SubstitutionModel.jukes_cantor()
    tree = parse_newick("(a:1,b:1)u;")
    tree = tree.with_edges([None, edges[0], edges[1]])
    vals = np.empty(R)
    for r in range(R):
        s = evolve_tree(tree, k_r, model, seed, r, track_ancestry=False)
        vals[r] = nonclock_ratio(s[1], s[2], model)
    return vals


def check_nonclock(seed: int, R: int = 10_000, k_r: int = 1000, n_trees: int = 20, z_max: float = 5.0) -> list[Check]:
    vals = nonclock_fork_ratios(derive_seed(seed, _ID["nonclock"]), R, k_r)
    m, se = _mean_se(vals)
    target = math.exp(-sum(an.nonclock_edge_weight(e, "gtr") for e in NONCLOCK_EDGES))
    out = [mean_check("nonclock_ratio", _p(k_r=k_r, eta_a=0.1, eta_b=0.2, delta=0.05, lam=0.02), m, target, se,
                      R, z_max)]
    rng = make_rng(seed, STREAM_MISC, _ID["nonclock_trees"])
    worst_def, worst_vio, nq = 0.0, -math.inf, 0
    for _ in range(n_trees):
        t = generate_bounded_rates_tree(8, 0.1, 0.3, (0.05, 0.2), 0.02, 0.02, rng)
        D = an.true_distance_matrix(t, "nonclock")
        scale = float(D.values.max())
        for q in combinations(D.names, 4):
            worst_def = max(worst_def, four_point_defect(D, q) / scale)
            worst_vio = max(worst_vio, four_point_violation(D, q))
            nq += 1
    out.append(bound_check("nonclock_four_point", "max_rel_defect", worst_def, 1e-12, n=nq,
                           detail=f"max violation margin {worst_vio:.3g} (must be <= 0)"))
    out[-1].passed = out[-1].passed and worst_vio <= 0.0
    return out


# --------------------------------------------------------------------------
# spectral vector


def check_gtr_spectral(seed: int, n_q: int = 100, tol: float = 1e-10) -> list[Check]:
    rng = make_rng(seed, STREAM_MISC, _ID["spectral"])
    worst = [0.0, 0.0, 0.0]
    for _ in range(n_q):
        Q, pi = random_reversible_q(rng)
        w, scale = gtr_spectral_vector(Q, pi)
        Qn = Q * scale
        worst[0] = max(worst[0], float(np.max(np.abs(Qn @ w + w))))
        worst[1] = max(worst[1], abs(float(np.sum(pi * w))))
        worst[2] = max(worst[2], abs(float(np.sum(pi * w * w)) - 1.0))
    out = [bound_check("gtr_spectral", name, v, tol, n=n_q)
           for name, v in zip(("eigen_residual", "pi_orthogonality", "normalization"), worst)]
    # two-state symmetric model: w = (+1, -1), deviations are twice the CFN deviations
    two = SubstitutionModel.gtr(np.array([[-0.5, 0.5], [0.5, -0.5]]), np.array([0.5, 0.5]))
    cfn = SubstitutionModel.cfn()
    part = make_partition(10_000, 0.6)
    states = rng.integers(0, 2, size=10_000).astype(np.int8)
    other = rng.integers(0, 2, size=10_000).astype(np.int8)
    d_cfn = block_deviations(states, part, cfn)
    d_two = block_deviations(states, part, two)
    exact = bool(np.array_equal(two.w, np.array([1.0, -1.0])) and np.array_equal(d_two, 2 * d_cfn)
                 and epartdist(states, other, part, two) * block_normalization(part, two)
                 == epartdist(states, other, part, cfn) * block_normalization(part, cfn))
    out.append(Check("cfn_reduction", "", "exact", exact, float(exact), 1.0, 0.0, 1,
                     "w == (+1,-1); block deviations == 2 x CFN; normalized statistic identical"))
    return out


# --------------------------------------------------------------------------
# reconstruction


def check_exact_reconstruction(seed: int, n_trees: int = 200, n_range=(4, 32), f: float = 0.1, g: float = 0.3,
                               rates: EdgeParams = EdgeParams(0.0, 0.1, 0.02, 0.02)) -> list[Check]:
    rng = make_rng(seed, STREAM_MISC, _ID["reconstruction"])
    ok_b = ok_nj = agree = 0
    diam_ok = 0
    for _ in range(n_trees):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        t = generate_clock_tree(n, f, g, rng, rates=rates)
        D = an.true_distance_matrix(t, "clock")
        truth = Topology.from_phylogeny(t)
        tb, tn = buneman(D), neighbor_joining(D)
        ok_b += robinson_foulds(tb, truth) == 0
        ok_nj += robinson_foulds(tn, truth) == 0
        agree += robinson_foulds(tb, tn) == 0
        lo, hi = diameter_bounds(n, f, g)
        diam_ok += lo <= t.graph_diameter() <= hi
    tag = _p(n_trees=n_trees, n_min=n_range[0], n_max=n_range[1])
    return [
        Check("exact_reconstruction", tag, "exact", ok_b == n_trees, ok_b / n_trees, 1.0, 0.0, n_trees,
              f"NJ exact in {ok_nj}/{n_trees}"),
        Check("buneman_nj_agreement", tag, "exact", agree == n_trees, agree / n_trees, 1.0, 0.0, n_trees),
        Check("diameter_bounds", tag, "exact", diam_ok == n_trees, diam_ok / n_trees, 1.0, 0.0, n_trees),
    ]


# --------------------------------------------------------------------------
# grid driver


@dataclass(frozen=True)
class ValidationScale:
    grid_R: int
    decay_R: int
    fork_R: int
    concentration_R: int
    joint_R: int
    block_R: int
    block_k0s: tuple
    block_mean_k0s: tuple
    nonclock_R: int
    n_trees: int


SCALES = {
    "full": ValidationScale(100_000, 10_000, 10_000, 1000, 1000, 1000, (1000, 10_000, 100_000),
                            (10_000, 100_000), 10_000, 200),
    "quick": ValidationScale(5000, 1000, 1000, 200, 100, 60, (1000, 10_000), (10_000,), 1000, 30),
}


def validate_analytics(seed: int, scale: str = "full", z_max: float = 5.0) -> RunReport:
    """Run every check family and lock coverage against :data:`REQUIRED_CHECKS`."""
    sc = SCALES[scale]
    report = RunReport("validate", seed, {"scale": scale, "z_max": z_max, **asdict(sc)})
    steps = [
        ("root", lambda: check_root(seed)),
        ("single_site_grid", lambda: check_single_site_grid(seed, sc.grid_R, z_max=z_max)),
        ("mgf", check_mgf_properties),
        ("deviation_decay", lambda: check_deviation_decay(seed, sc.decay_R, z_max=z_max)),
        ("fork_identity", lambda: check_fork_identity(seed)),
        ("fork_mc", lambda: check_fork_mc(seed, sc.fork_R, z_max=z_max)),
        ("length_concentration", lambda: check_length_concentration(seed, sc.concentration_R, z_max=z_max)),
        ("joint_survivors", lambda: check_joint_survivors(seed, sc.joint_R, z_max=z_max)),
        ("block_estimator", lambda: check_block_estimator(seed, sc.block_k0s, sc.block_mean_k0s,
                                                          R=sc.block_R, z_max=z_max)),
        ("nonclock", lambda: check_nonclock(seed, sc.nonclock_R, z_max=z_max)),
        ("gtr_spectral", lambda: check_gtr_spectral(seed)),
        ("reconstruction", lambda: check_exact_reconstruction(seed, sc.n_trees)),
    ]
    for name, fn in steps:
        t0 = time.perf_counter()
        report.checks.extend(fn())
        report.timings[name] = time.perf_counter() - t0
    seen = {c.family for c in report.checks}
    missing = [f for f in REQUIRED_CHECKS if f not in seen]
    report.checks.append(Check("coverage_lock", "", "exact", not missing, float(len(missing)), 0.0, 0.0,
                               len(REQUIRED_CHECKS), "missing: " + ",".join(missing) if missing else ""))
    return report
