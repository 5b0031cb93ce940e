import pytest

from indelphy.model import EdgeParams
from indelphy.tree import NewickError, emit_newick, isclose_tree, parse_newick


def test_three_leaf_round_trip():
    t = parse_newick("(a,(b,c));")
    assert sorted(t.leaf_names()) == ["a", "b", "c"]
    assert emit_newick(t, lengths=False) == "(a,(b,c));"
    assert isclose_tree(parse_newick(emit_newick(t)), t)


def test_balanced_with_lengths():
    t = parse_newick("((a:1,b:1):1,(c:1,d:1):1);")
    assert t.is_binary()
    assert t.is_ultrametric()
    assert t.height() == 2.0
    assert all(e.t == 1.0 for e in t.edges[1:])
    assert t.graph_diameter() == 4


def test_unbalanced_parenthesis_offset():
    with pytest.raises(NewickError) as exc:
        parse_newick("(a,(b,c)")
    assert exc.value.offset == 8


@pytest.mark.parametrize("text", ["", "(a,b)", "(a,b));", "(a:x,b);", "(a,b):-1;"])
def test_malformed_inputs(text):
    with pytest.raises(NewickError):
        parse_newick(text)


def test_quoted_names_round_trip():
    t = parse_newick("('x y':0.5,b:0.25);")
    assert t.leaf_names() == ["x y", "b"]
    assert isclose_tree(parse_newick(emit_newick(t)), t)


def test_rates_applied_to_every_edge():
    p = EdgeParams(0.0, 0.1, 0.05, 0.02)
    t = parse_newick("((a:1,b:2)u:3)r;", rates=p)
    assert [e.t for e in t.edges[1:]] == [3.0, 1.0, 2.0]
    assert all(e.eta == 0.1 for e in t.edges[1:])


def test_mrca_and_paths():
    t = parse_newick("((a:1,b:1)x:1,(c:1,d:1)y:1)r;")
    a, b, c = (t.node_by_name(n) for n in "abc")
    assert t.names[t.mrca(a, b)] == "x"
    assert t.names[t.mrca(a, c)] == "r"
    assert len(t.path_edges(a, c)) == 4
    assert t.clade(t.node_by_name("x")) == frozenset({"a", "b"})
