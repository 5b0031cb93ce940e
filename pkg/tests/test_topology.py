import itertools
import math

import numpy as np
import pytest

from indelphy.analytics import true_distance_matrix
from indelphy.estimator import DistanceMatrix
from indelphy.generators import generate_clock_tree
from indelphy.model import EdgeParams
from indelphy.topology import (Topology, UnresolvableQuartet, buneman, diameter_bounds, four_point_defect,
                               four_point_violation, neighbor_joining, quartet_split, reconstruct_topology,
                               robinson_foulds)
from indelphy.tree import parse_newick


def additive4():
    v = np.array([[0, 2, 3, 3], [2, 0, 3, 3], [3, 3, 0, 2], [3, 3, 2, 0]], float)
    return DistanceMatrix(list("abcd"), v)


def test_additive_quartet():
    D = additive4()
    assert four_point_violation(D, "abcd") <= 0
    assert four_point_defect(D, "abcd") == 0
    assert quartet_split(D, "abcd") == (("a", "b"), ("c", "d"))


def test_all_equal_is_a_tie():
    D = DistanceMatrix(list("abcd"), np.ones((4, 4)) - np.eye(4))
    assert four_point_violation(D, "abcd") == 0
    assert quartet_split(D, "abcd") is None
    t = buneman(D)
    assert t.splits == frozenset() and t.meta["unresolved"]


def test_perturbation_by_hand():
    D = additive4()
    v = D.values.copy()
    v[0, 1] = v[1, 0] = 12.0
    P = DistanceMatrix(list("abcd"), v)
    # pairing sums: ab|cd = 14, ac|bd = 6, ad|bc = 6
    assert quartet_split(P, "abcd") is None
    v[0, 2] = v[2, 0] = 13.0
    P = DistanceMatrix(list("abcd"), v)
    # ab|cd = 14, ac|bd = 16, ad|bc = 6
    assert quartet_split(P, "abcd") == (("a", "d"), ("b", "c"))


def test_infinite_quartet_signal():
    v = additive4().values.copy()
    v[0, 3] = v[3, 0] = math.inf
    with pytest.raises(UnresolvableQuartet):
        quartet_split(DistanceMatrix(list("abcd"), v), "abcd")


def test_buneman_four_leaf():
    t = buneman(additive4())
    assert t.split_sets() == {frozenset("cd")}
    assert t.to_newick() == "(a,b,(c,d));"


@pytest.mark.parametrize("seed", range(10))
def test_round_trip_random_eight_leaf(seed):
    rng = np.random.default_rng(seed)
    tree = generate_clock_tree(8, 0.1, 0.3, rng, rates=EdgeParams(0.0, 0.1, 0.02, 0.02))
    D = true_distance_matrix(tree, "clock")
    truth = Topology.from_phylogeny(tree)
    for method in ("buneman", "nj"):
        assert robinson_foulds(reconstruct_topology(D, method), truth) == 0
    for q in itertools.combinations(D.names, 4):
        assert four_point_violation(D, q) <= 1e-12
        assert four_point_defect(D, q) <= 1e-12


def test_buneman_skips_infinite_quartets():
    tree = parse_newick("(((a:1,b:1):1,c:2):1,((d:1,e:1):1,f:2):1);", rates=EdgeParams(0, 0.1, 0, 0))
    D = true_distance_matrix(tree, "clock")
    v = D.values.copy()
    v[0, 5] = v[5, 0] = math.inf
    t = buneman(DistanceMatrix(D.names, v))
    assert t.meta["skipped_quartets"]
    truth = Topology.from_phylogeny(tree)
    assert t.splits <= truth.splits
    assert neighbor_joining(DistanceMatrix(D.names, v)).meta["replaced_infinite"]


def test_newick_round_trip_of_topology():
    t = Topology.from_newick("(((a,b),c),((d,e),f));")
    assert Topology.from_newick(t.to_newick()).splits == t.splits


def test_robinson_foulds():
    t = Topology.from_newick("((a,b),(c,d));")
    assert robinson_foulds(t, t) == 0
    assert robinson_foulds(t, Topology.from_newick("((a,c),(b,d));")) == 2
    cat = Topology.from_newick("(((((a,b),c),d),e),f);")
    bal = Topology.from_newick("(((a,b),c),((d,e),f));")
    # caterpillar: ab, abc, abcd; balanced: ab, abc, de
    assert robinson_foulds(cat, bal) == 2
    with pytest.raises(ValueError):
        robinson_foulds(t, Topology.from_newick("((a,b),(c,e));"))


def test_topology_validation():
    with pytest.raises(ValueError):
        Topology(("b", "a"), frozenset())
    with pytest.raises(ValueError):
        Topology(tuple("abcd"), frozenset({0b0110, 0b1010}))


def test_reconstruction_needs_three_taxa():
    D = DistanceMatrix(["a", "b"], np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        buneman(D)
    with pytest.raises(ValueError):
        reconstruct_topology(additive4(), "upgma")


def test_diameter_bounds():
    assert diameter_bounds(16, 0.2, 0.2) == (8.0, 8.0)
    lo, hi = diameter_bounds(16, 0.1, 0.3)
    assert lo == pytest.approx(8 / 3) and hi == pytest.approx(24)
