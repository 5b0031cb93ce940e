import math

import numpy as np
import pytest
from scipy import stats

from indelphy import analytics as an
from indelphy.model import EdgeParams, SubstitutionModel
from indelphy.simulator import (EvolvedSequence, SimulationCapError, compose_origin, count_joint_survivors,
                                derive_seed, evolve_branch, evolve_branch_gillespie, evolve_tree, make_rng,
                                sample_root_sequence, substitute)
from indelphy.tree import parse_newick

from conftest import CANONICAL, mean_se


def test_root_labels_are_positions(cfn, rng):
    s = sample_root_sequence(5, cfn, rng)
    assert len(s) == 5
    assert s.labels.tolist() == [1, 2, 3, 4, 5]
    with pytest.raises(ValueError):
        sample_root_sequence(0, cfn, rng)


def test_root_cfn_balanced(cfn, rng):
    s = sample_root_sequence(100_000, cfn, rng)
    assert abs(np.mean(s.states == 0) - 0.5) <= 5 * 0.5 / math.sqrt(1e5)


def test_root_gtr_matches_pi(rng):
    pi = np.array([0.1, 0.2, 0.3, 0.4])
    Q = np.tile(pi, (4, 1))
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    m = SubstitutionModel.gtr(Q, pi)
    s = sample_root_sequence(100_000, m, rng)
    freq = np.bincount(s.states, minlength=4) / 1e5
    assert np.all(np.abs(freq - pi) <= 5 * np.sqrt(pi * (1 - pi) / 1e5))


def test_zero_time_is_identity(cfn, rng):
    s = sample_root_sequence(50, cfn, rng)
    out = evolve_branch(s, EdgeParams(0.0, 1.0, 1.0, 1.0), cfn, rng)
    assert np.array_equal(out.states, s.states)
    assert np.array_equal(out.labels, s.labels)
    assert out.origin.tolist() == list(range(50))


def test_zero_rates_is_identity(cfn, rng):
    s = sample_root_sequence(50, cfn, rng)
    out = evolve_branch(s, EdgeParams(3.0), cfn, rng)
    assert np.array_equal(out.states, s.states) and np.array_equal(out.labels, s.labels)


def test_single_site_mean_length(cfn, rng):
    p = EdgeParams(1.0, 0.0, 0.2, 0.1)
    R = 100_000
    out = evolve_branch(sample_root_sequence(R, cfn, rng), p, cfn, rng, boundary=False)
    counts = np.bincount(out.origin, minlength=R)
    m, se = mean_se(counts)
    assert abs(m - math.exp(-0.1)) <= 5 * se
    assert abs(counts.var(ddof=1) - an.length_variance(p)) <= 5 * math.sqrt(np.var((counts - m) ** 2) / R)


def test_survivors_keep_parent_order(cfn, rng):
    s = sample_root_sequence(2000, cfn, rng)
    out = evolve_branch(s, CANONICAL, cfn, rng)
    assert np.all(np.diff(out.origin) >= 0)
    kept = np.isin(out.labels, s.labels)
    assert np.all(np.diff(out.labels[kept]) > 0)
    assert np.array_equal(s.labels[out.origin[kept]], out.labels[kept])
    assert np.all(out.labels[~kept] > s.labels.max())


def _length_hist(fn, R, p, seed):
    cfn = SubstitutionModel.cfn()
    K = np.empty(R, dtype=int)
    S = np.empty(R, dtype=int)
    for r in range(R):
        rng = make_rng(seed, r)
        root = sample_root_sequence(3, cfn, rng)
        out = fn(root, p, cfn, rng, label_start=100)
        K[r] = len(out)
        S[r] = np.isin(out.labels, root.labels).sum()
    return np.minimum(K, 8), S


def test_vectorized_matches_gillespie():
    p = EdgeParams(1.0, 0.3, 0.4, 0.3)
    R = 3000
    Kv, Sv = _length_hist(evolve_branch, R, p, 1)
    Kg, Sg = _length_hist(evolve_branch_gillespie, R, p, 2)
    for a, b in ((Kv, Kg), (Sv, Sg)):
        cats = np.union1d(a, b)
        table = np.array([[np.sum(a == c) for c in cats], [np.sum(b == c) for c in cats]])
        assert stats.chi2_contingency(table).pvalue > 1e-3
    cfn = SubstitutionModel.cfn()
    lengths = [len(evolve_branch(sample_root_sequence(3, cfn, make_rng(5, r)), p, cfn, make_rng(6, r)))
               for r in range(R)]
    m, se = mean_se(lengths)
    assert abs(m - (3 * an.length_factor(p) + an.boundary_insertions(p))) <= 5 * se


def test_substitution_methods_agree(jc):
    rng = make_rng(3)
    start = np.zeros(50_000, dtype=np.int8)
    a = substitute(start, 0.4, jc, rng, "events")
    b = substitute(start, 0.4, jc, rng, "matrix_exp")
    P = jc.transition_matrix(0.4)[0]
    for x in (a, b):
        freq = np.bincount(x, minlength=4) / len(x)
        assert np.all(np.abs(freq - P) <= 5 * np.sqrt(P * (1 - P) / len(x)))


def test_cap_raises(cfn, rng):
    s = sample_root_sequence(1000, cfn, rng)
    with pytest.raises(SimulationCapError):
        evolve_branch(s, EdgeParams(5.0, 0.0, 0.0, 2.0), cfn, rng, cap=5000)


def test_tree_determinism_and_stream_independence(cfn):
    t = parse_newick("((a:1,b:1):1,c:2);", rates=CANONICAL)
    x = evolve_tree(t, 500, cfn, seed=9)
    y = evolve_tree(t, 500, cfn, seed=9)
    assert all(np.array_equal(x[v].states, y[v].states) and np.array_equal(x[v].labels, y[v].labels) for v in x)
    z = evolve_tree(t, 500, cfn, seed=9, replicate=1)
    assert not np.array_equal(x[2].states, z[2].states)
    assert derive_seed(9, 1) != derive_seed(9, 2)


def test_single_edge_zero_time(cfn):
    t = parse_newick("(a:0)r;")
    out = evolve_tree(t, 100, cfn, seed=1)
    assert np.array_equal(out[0].states, out[1].states)


def test_fork_all_rates_zero(cfn):
    t = parse_newick("((a:1,b:1)u:1)r;")
    out = evolve_tree(t, 100, cfn, seed=1)
    a, b = t.node_by_name("a"), t.node_by_name("b")
    assert np.array_equal(out[a].states, out[0].states) and np.array_equal(out[b].states, out[0].states)


def test_keep_internal_false(cfn):
    t = parse_newick("((a:1,b:1)u:1,c:1)r;", rates=CANONICAL)
    out = evolve_tree(t, 100, cfn, seed=1, keep_internal=False)
    assert sorted(out) == sorted(t.leaves())


def test_fork_deviation_product(cfn):
    t = parse_newick("((a:1,b:1)u:1)r;", rates=CANONICAL)
    a, b = t.node_by_name("a"), t.node_by_name("b")
    R = 3000
    vals = np.empty(R)
    for r in range(R):
        s = evolve_tree(t, 1000, cfn, seed=4, replicate=r, track_ancestry=False, keep_internal=False)
        vals[r] = np.sum(0.5 - s[a].states) * np.sum(0.5 - s[b].states)
    m, se = mean_se(vals)
    assert abs(m - 250 * math.exp(-0.53)) <= 5 * se


def test_compose_origin(cfn):
    t = parse_newick("((a:1,b:1)u:1)r;", rates=CANONICAL)
    s = evolve_tree(t, 300, cfn, seed=2)
    a = t.node_by_name("a")
    org = compose_origin(s, t, 0, a)
    keep = np.isin(s[a].labels, s[0].labels)
    assert np.array_equal(s[0].labels[org[keep]], s[a].labels[keep])
    with pytest.raises(ValueError):
        compose_origin(s, t, a, t.node_by_name("b"))


def _fork(params, k, seed):
    t = parse_newick("(a:1,b:1)u;", rates=params)
    s = evolve_tree(t, k, SubstitutionModel.cfn(), seed=seed)
    return s[0], s[1], s[2]


def test_joint_survivors_no_deletions():
    u, a, b = _fork(EdgeParams(1.0, 0.1, 0.0, 0.3), 500, 1)
    assert count_joint_survivors(a, b, u) == 500


def test_joint_survivors_extinction():
    u, a, b = _fork(EdgeParams(1.0, 0.0, 50.0, 0.0), 500, 1)
    assert count_joint_survivors(a, b, u) == 0


def test_joint_survivors_mean():
    R, k = 300, 10_000
    vals = []
    for r in range(R):
        u, a, b = _fork(EdgeParams(1.0, 0.0, 0.1, 0.0), k, r)
        vals.append(count_joint_survivors(a, b, u))
    m, se = mean_se(vals)
    assert abs(m - k * math.exp(-0.2)) <= 5 * se


def test_joint_survivor_windows():
    u, a, b = _fork(EdgeParams(1.0, 0.0, 0.0, 0.0), 100, 1)
    assert count_joint_survivors(a, b, u, (0, 50), (25, 100)) == 25
    with pytest.raises(IndexError):
        count_joint_survivors(a, b, u, (0, 101))
    with pytest.raises(ValueError):
        count_joint_survivors(EvolvedSequence(a.states), b, u)


def test_empty_sequence_regrows_from_boundary(cfn):
    empty = EvolvedSequence(np.zeros(0, np.int8), np.zeros(0, np.int64), None)
    R = 2000
    lengths = [len(evolve_branch(empty, EdgeParams(1.0, 0.1, 0.05, 0.02), cfn, make_rng(8, r))) for r in range(R)]
    m, se = mean_se(lengths)
    assert abs(m - an.boundary_insertions(EdgeParams(1.0, 0.1, 0.05, 0.02))) <= 5 * se
    assert evolve_branch(empty, EdgeParams(1.0, 0.1, 0.05, 0.0), cfn, make_rng(8)).states.size == 0


def test_replicate_streams_are_uncorrelated():
    x = np.array([make_rng(21, 0, r).random() for r in range(4000)])
    y = np.array([make_rng(21, 1, r).random() for r in range(4000)])
    z = np.array([make_rng(21, 0, r + 1).random() for r in range(4000)])
    for a, b in ((x, y), (x, z)):
        assert abs(np.corrcoef(a, b)[0, 1]) <= 5 / np.sqrt(4000)
