"""Rooted phylogenies and Newick text.

A :class:`Phylogeny` stores nodes in preorder (root is node 0).  Every
non-root node owns the edge leading into it, with an :class:`EdgeParams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .model import EdgeParams


class NewickError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass
class Phylogeny:
    parent: list[int]
    children: list[list[int]]
    names: list[str | None]
    edges: list[EdgeParams | None]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.parent)
        if not (len(self.children) == len(self.names) == len(self.edges) == n):
            raise ValueError("inconsistent node arrays")
        if n == 0 or self.parent[0] != -1:
            raise ValueError("node 0 must be the root")
        for v in range(1, n):
            if not 0 <= self.parent[v] < v:
                raise ValueError("nodes must be stored in preorder")
            if self.edges[v] is None:
                raise ValueError(f"node {v} has no edge parameters")

    # structure ----------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    def leaves(self) -> list[int]:
        return [v for v in range(self.n_nodes) if not self.children[v]]

    def leaf_names(self) -> list[str]:
        return [self.names[v] for v in self.leaves()]

    def node_by_name(self, name: str) -> int:
        for v, nm in enumerate(self.names):
            if nm == name:
                return v
        raise KeyError(name)

    def postorder(self) -> list[int]:
        return list(range(self.n_nodes - 1, -1, -1))

    def is_binary(self) -> bool:
        return all(len(c) in (0, 2) for c in self.children)

    def path_to_root(self, v: int) -> list[int]:
        out = []
        while v > 0:
            out.append(v)
            v = self.parent[v]
        return out

    def path_edges(self, a: int, b: int) -> list[int]:
        """Nodes whose incoming edges form the path between ``a`` and ``b``."""
        pa = self.path_to_root(a)
        pb = self.path_to_root(b)
        sa, sb = set(pa), set(pb)
        return [v for v in pa if v not in sb] + [v for v in pb if v not in sa]

    def mrca(self, a: int, b: int) -> int:
        anc = set(self.path_to_root(a)) | {0}
        v = b
        while v not in anc:
            v = self.parent[v]
        return v

    def times_from_root(self) -> list[float]:
        out = [0.0] * self.n_nodes
        for v in range(1, self.n_nodes):
            out[v] = out[self.parent[v]] + self.edges[v].t
        return out

    def is_ultrametric(self, tol: float = 1e-9) -> bool:
        depth = self.times_from_root()
        d = [depth[v] for v in self.leaves()]
        return max(d) - min(d) <= tol * max(1.0, max(d))

    def height(self) -> float:
        depth = self.times_from_root()
        return max(depth[v] for v in self.leaves())

    def graph_diameter(self) -> int:
        """Longest leaf-to-leaf path, counted in edges."""
        down = [0] * self.n_nodes
        best = 0
        for v in self.postorder():
            kids = sorted((down[c] + 1 for c in self.children[v]), reverse=True)
            if kids:
                down[v] = kids[0]
                best = max(best, sum(kids[:2]))
        return best

    def clade(self, v: int) -> frozenset:
        out = []
        stack = [v]
        while stack:
            u = stack.pop()
            if self.children[u]:
                stack.extend(self.children[u])
            else:
                out.append(self.names[u])
        return frozenset(out)

    def topology(self):
        from .topology import Topology

        return Topology.from_phylogeny(self)

    def with_edges(self, edges: list[EdgeParams | None]) -> "Phylogeny":
        return Phylogeny(list(self.parent), [list(c) for c in self.children], list(self.names), list(edges), dict(self.meta))


# --------------------------------------------------------------------------
# Newick


def _needs_quotes(name: str) -> bool:
    return any(c in name for c in "(),:;[]' \t\n")


def _fmt_name(name: str | None) -> str:
    if not name:
        return ""
    if _needs_quotes(name):
        return "'" + name.replace("'", "''") + "'"
    return name


def _fmt_len(x: float) -> str:
    return repr(float(x))


class _Parser:
    def __init__(self, text: str):
        self.s = text
        self.i = 0

    def peek(self):
        return self.s[self.i] if self.i < len(self.s) else ""

    def skip_ws(self):
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def parse(self):
        self.skip_ws()
        if not self.s.strip():
            raise NewickError("empty input", 0)
        node = self.subtree()
        self.skip_ws()
        if self.peek() != ";":
            if self.i >= len(self.s):
                raise NewickError("missing terminating ';'", self.i)
            if self.peek() == ")":
                raise NewickError("unbalanced parenthesis", self.i)
            raise NewickError(f"unexpected {self.peek()!r}", self.i)
        self.i += 1
        self.skip_ws()
        if self.i != len(self.s):
            raise NewickError("trailing garbage after ';'", self.i)
        return node

    def subtree(self):
        self.skip_ws()
        kids = []
        if self.peek() == "(":
            open_at = self.i
            self.i += 1
            while True:
                kids.append(self.subtree())
                self.skip_ws()
                c = self.peek()
                if c == ",":
                    self.i += 1
                    continue
                if c == ")":
                    self.i += 1
                    break
                if c == "":
                    raise NewickError(f"unbalanced parenthesis (opened at {open_at})", self.i)
                raise NewickError(f"unexpected {c!r}", self.i)
        name = self.name()
        length = self.length()
        if not kids and not name:
            raise NewickError("empty leaf name", self.i)
        return [name, length, kids]

    def name(self):
        self.skip_ws()
        if self.peek() == "'":
            start = self.i
            self.i += 1
            out = []
            while True:
                if self.i >= len(self.s):
                    raise NewickError("unterminated quoted name", start)
                c = self.s[self.i]
                if c == "'":
                    if self.s[self.i + 1 : self.i + 2] == "'":
                        out.append("'")
                        self.i += 2
                        continue
                    self.i += 1
                    break
                out.append(c)
                self.i += 1
            return "".join(out)
        start = self.i
        while self.i < len(self.s) and self.s[self.i] not in "(),:;[]" and not self.s[self.i].isspace():
            self.i += 1
        return self.s[start : self.i] or None

    def length(self):
        self.skip_ws()
        if self.peek() != ":":
            return None
        self.i += 1
        self.skip_ws()
        start = self.i
        while self.i < len(self.s) and (self.s[self.i] in "+-.eE" or self.s[self.i].isdigit()):
            self.i += 1
        try:
            x = float(self.s[start : self.i])
        except ValueError:
            raise NewickError("invalid branch length", start) from None
        if not (math.isfinite(x) and x >= 0):
            raise NewickError("branch length must be finite and >= 0", start)
        return x


def parse_newick_raw(text: str):
    """Parse Newick into nested ``[name, length, children]`` lists."""
    return _Parser(text).parse()


def parse_newick(text: str, rates: EdgeParams | None = None, default_length: float = 1.0) -> Phylogeny:
    """Parse a rooted Newick tree; branch lengths become edge times.

    ``rates`` supplies eta/delta/lam for every edge (zero by default).
    Multifurcations are accepted here; simulation code checks binarity.
    """
    raw = parse_newick_raw(text)
    base = rates or EdgeParams(0.0)
    parent, children, names, edges = [], [], [], []
    stack = [(raw, -1)]
    while stack:
        node, par = stack.pop()
        name, length, kids = node
        idx = len(parent)
        parent.append(par)
        children.append([])
        names.append(name if not kids else (name or None))
        if par >= 0:
            children[par].append(idx)
            edges.append(base.replace(t=default_length if length is None else length))
        else:
            edges.append(None)
        for k in reversed(kids):
            stack.append((k, idx))
    tree = Phylogeny(parent, children, names, edges)
    if raw[1] is not None:
        tree.meta["root_length"] = raw[1]
    return tree


def emit_newick(tree: Phylogeny, lengths: bool = True) -> str:
    def rec(v):
        parts = ""
        if tree.children[v]:
            parts = "(" + ",".join(rec(c) for c in tree.children[v]) + ")"
        s = parts + _fmt_name(tree.names[v])
        if lengths and v > 0:
            s += ":" + _fmt_len(tree.edges[v].t)
        return s

    return rec(0) + ";"


def isclose_tree(a: Phylogeny, b: Phylogeny, tol: float = 1e-12) -> bool:
    if a.parent != b.parent or a.names != b.names:
        return False
    return all(
        (x is None and y is None) or math.isclose(x.t, y.t, rel_tol=tol, abs_tol=tol)
        for x, y in zip(a.edges, b.edges)
    )
