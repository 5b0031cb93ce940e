"""Unrooted topologies and distance-based reconstruction from quartet tests.

Splits are stored as integer bitmasks over the sorted leaf names, oriented
so that the first leaf is never in the mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .estimator import DistanceMatrix
from .tree import Phylogeny, _fmt_name, parse_newick

TIE_TOL = 1e-9


class UnresolvableQuartet(ValueError):
    """A quartet has an infinite pairwise distance."""


@dataclass
class Topology:
    leaves: tuple[str, ...]
    splits: frozenset[int]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.leaves = tuple(self.leaves)
        if list(self.leaves) != sorted(self.leaves) or len(set(self.leaves)) != len(self.leaves):
            raise ValueError("leaves must be unique and sorted")
        full = (1 << len(self.leaves)) - 1
        for s in self.splits:
            if s & 1 or not 0 < s < full or _popcount(s) < 2 or _popcount(full ^ s) < 2:
                raise ValueError(f"split {s:#b} is not a canonical nontrivial split")
        for s, t in combinations(self.splits, 2):
            if not compatible(s, t, len(self.leaves)):
                raise ValueError("splits are pairwise incompatible")

    @property
    def n(self) -> int:
        return len(self.leaves)

    @property
    def is_resolved(self) -> bool:
        return len(self.splits) == max(self.n - 3, 0)

    def split_sets(self) -> set[frozenset]:
        """Splits as the leaf-name set on the side without the first leaf."""
        return {frozenset(self.leaves[i] for i in range(self.n) if s >> i & 1) for s in self.splits}

    @classmethod
    def from_splits(cls, leaves, sides, meta=None) -> "Topology":
        leaves = tuple(sorted(leaves))
        pos = {nm: i for i, nm in enumerate(leaves)}
        full = (1 << len(leaves)) - 1
        out = set()
        for side in sides:
            m = 0
            for nm in side:
                m |= 1 << pos[nm]
            m = canonical(m, full)
            if _popcount(m) >= 2 and _popcount(full ^ m) >= 2:
                out.add(m)
        return cls(leaves, frozenset(out), dict(meta or {}))

    @classmethod
    def from_phylogeny(cls, tree: Phylogeny) -> "Topology":
        return cls.from_splits(tree.leaf_names(), [tree.clade(v) for v in range(1, tree.n_nodes)])

    @classmethod
    def from_newick(cls, text: str) -> "Topology":
        return cls.from_phylogeny(parse_newick(text))

    def to_newick(self) -> str:
        """Newick text rooted at the first leaf's attachment point."""
        n = self.n
        if n == 1:
            return _fmt_name(self.leaves[0]) + ";"
        top = ((1 << n) - 1) & ~1
        clusters = sorted(set(self.splits) | {top}, key=_popcount)
        kids: dict[int, list[int]] = {c: [] for c in clusters}
        for k, c in enumerate(clusters[:-1]):
            parent = next(d for d in clusters[k + 1 :] if d & c == c)
            kids[parent].append(c)

        def rec(mask: int) -> str:
            covered = 0
            items = []
            for c in kids[mask]:
                covered |= c
                items.append((_lowest(c), rec(c)))
            rest = mask & ~covered
            items += [(i, _fmt_name(self.leaves[i])) for i in range(n) if rest >> i & 1]
            items.sort()
            return "(" + ",".join(t for _, t in items) + ")"

        return "(" + _fmt_name(self.leaves[0]) + "," + rec(top)[1:-1] + ");"


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _lowest(x: int) -> int:
    return (x & -x).bit_length() - 1


def canonical(mask: int, full: int) -> int:
    return full ^ mask if mask & 1 else mask


def compatible(s: int, t: int, n: int) -> bool:
    full = (1 << n) - 1
    a, b = s, full ^ s
    c, d = t, full ^ t
    return not (a & c and a & d and b & c and b & d)


# --------------------------------------------------------------------------
# quartets


def _quartet_sums(D: DistanceMatrix, q):
    idx = [D.index(x) if isinstance(x, str) else int(x) for x in q]
    a, b, c, d = idx
    v = D.values
    if not np.all(np.isfinite(v[np.ix_(idx, idx)])):
        raise UnresolvableQuartet(f"quartet {tuple(q)} has an infinite distance")
    return idx, np.array([v[a, b] + v[c, d], v[a, c] + v[b, d], v[a, d] + v[b, c]])


def four_point_violation(D: DistanceMatrix, quartet) -> float:
    """``min_i (S_i - max_{j != i} S_j)`` over the three pairing sums.

    Never positive; 0 exactly when the two smallest sums tie.
    """
    _, s = _quartet_sums(D, quartet)
    return float(min(s[i] - max(s[j] for j in range(3) if j != i) for i in range(3)))


def four_point_defect(D: DistanceMatrix, quartet) -> float:
    """Largest pairing sum minus the second largest; 0 for an additive metric."""
    _, s = _quartet_sums(D, quartet)
    s = np.sort(s)
    return float(s[2] - s[1])


def quartet_split(D: DistanceMatrix, quartet, tol: float = TIE_TOL):
    """Pair of the quartet supported by the smallest pairing sum, or ``None`` on a tie."""
    idx, s = _quartet_sums(D, quartet)
    order = np.argsort(s, kind="stable")
    if s[order[1]] - s[order[0]] <= tol:
        return None
    q = list(quartet)
    pairs = [((q[0], q[1]), (q[2], q[3])), ((q[0], q[2]), (q[1], q[3])), ((q[0], q[3]), (q[1], q[2]))]
    return pairs[order[0]]


# --------------------------------------------------------------------------
# Buneman


def _side_support(V: np.ndarray, x: int, A: np.ndarray, B: np.ndarray, tol: float):
    """Check quartets (x, a | b, b') for a in A, b < b' in B.

    Returns (contradicted, n_evaluable).
    """
    if len(A) == 0 or len(B) < 2:
        return False, 0
    bi, bj = np.triu_indices(len(B), 1)
    b1, b2 = B[bi], B[bj]
    inner = V[x, A][:, None] + V[b1, b2][None, :]
    c1 = V[x, b1][None, :] + V[A][:, b2]
    c2 = V[x, b2][None, :] + V[A][:, b1]
    ok = np.isfinite(inner) & np.isfinite(c1) & np.isfinite(c2)
    support = inner + tol < np.minimum(c1, c2)
    return bool(np.any(ok & ~support)), int(ok.sum())


def buneman(D: DistanceMatrix, tol: float = TIE_TOL, max_candidates: int = 200_000) -> Topology:
    """Buneman tree: splits supported by every evaluable spanning quartet.

    Taxa are added one at a time; a split of the enlarged set restricts to a
    split of the smaller set, so only extensions of surviving candidates and
    the quartets containing the new taxon need checking.  Quartets with an
    infinite entry are skipped; a split needs at least one evaluable quartet.
    """
    names = sorted(D.names)
    n = len(names)
    if n < 3:
        raise ValueError("reconstruction needs at least 3 taxa")
    perm = [D.index(nm) for nm in names]
    V = D.values[np.ix_(perm, perm)]
    meta = {"method": "buneman", "skipped_quartets": bool(np.isinf(V).any())}
    # candidate: (mask over first k taxa, evaluable quartet count)
    cands = {0b001: 0, 0b010: 0, 0b100: 0}
    for x in range(3, n):
        full_prev = (1 << x) - 1
        bit = 1 << x
        new = {bit: 0}
        for mask, cnt in cands.items():
            for side_mask in (mask, full_prev ^ mask):
                A = np.array([i for i in range(x) if side_mask >> i & 1], dtype=np.intp)
                B = np.array([i for i in range(x) if not side_mask >> i & 1], dtype=np.intp)
                bad, k = _side_support(V, x, A, B, tol)
                if not bad:
                    m = side_mask | bit
                    key = min(m, ((bit << 1) - 1) ^ m)
                    new[key] = max(new.get(key, 0), cnt + k)
        if len(new) > max_candidates:
            new = {m: c for m, c in new.items() if c > 0 or _popcount(m) == 1}
            meta["pruned_candidates"] = True
        cands = new
    full = (1 << n) - 1
    out = set()
    for mask, cnt in cands.items():
        m = canonical(mask, full)
        if _popcount(m) >= 2 and _popcount(full ^ m) >= 2 and cnt > 0:
            out.add(m)
    conflicts = {x for s, t in combinations(out, 2) if not compatible(s, t, n) for x in (s, t)}
    if conflicts:
        if not meta["skipped_quartets"]:
            raise AssertionError("Buneman produced incompatible splits on a finite matrix")
        meta["dropped_conflicting_splits"] = len(conflicts)
        out -= conflicts
    meta["unresolved"] = len(out) < n - 3
    return Topology(tuple(names), frozenset(out), meta)


def reconstruct_topology(D: DistanceMatrix, method: str = "buneman") -> Topology:
    if method == "buneman":
        return buneman(D)
    if method == "nj":
        return neighbor_joining(D)
    raise ValueError(f"unknown reconstruction method {method!r}")


# --------------------------------------------------------------------------
# neighbor joining


def neighbor_joining(D: DistanceMatrix) -> Topology:
    """Saitou-Nei neighbor joining; +inf entries become 2 * max finite + 1."""
    names = sorted(D.names)
    n = len(names)
    if n < 3:
        raise ValueError("reconstruction needs at least 3 taxa")
    perm = [D.index(nm) for nm in names]
    V = D.values[np.ix_(perm, perm)].copy()
    meta = {"method": "nj"}
    if np.isinf(V).any():
        fin = V[np.isfinite(V)]
        V[np.isinf(V)] = 2.0 * (fin.max() if fin.size else 1.0) + 1.0
        meta["replaced_infinite"] = True
    clusters = [1 << i for i in range(n)]
    full = (1 << n) - 1
    splits = set()
    while len(clusters) > 3:
        m = len(clusters)
        r = V.sum(axis=1)
        Qm = (m - 2) * V - r[:, None] - r[None, :]
        np.fill_diagonal(Qm, np.inf)
        i, j = np.unravel_index(int(np.argmin(Qm)), Qm.shape)
        if i > j:
            i, j = j, i
        merged = clusters[i] | clusters[j]
        s = canonical(merged, full)
        if _popcount(s) >= 2 and _popcount(full ^ s) >= 2:
            splits.add(s)
        du = 0.5 * (V[i] + V[j] - V[i, j])
        keep = [k for k in range(m) if k not in (i, j)]
        newV = np.empty((m - 1, m - 1))
        newV[:-1, :-1] = V[np.ix_(keep, keep)]
        newV[-1, :-1] = newV[:-1, -1] = du[keep]
        newV[-1, -1] = 0.0
        V = newV
        clusters = [clusters[k] for k in keep] + [merged]
    return Topology(tuple(names), frozenset(splits), meta)


# --------------------------------------------------------------------------
# comparison and bounds


def robinson_foulds(t1: Topology, t2: Topology) -> int:
    if t1.leaves != t2.leaves:
        raise ValueError("topologies have different leaf sets")
    return len(t1.splits ^ t2.splits)


def diameter_bounds(n: int, f: float, g: float) -> tuple[float, float]:
    """Bounds on the edge-count diameter of an ultrametric tree with edge times in (f, g)."""
    if not 0 < f <= g:
        raise ValueError("need 0 < f <= g")
    lg = math.log2(n)
    return 2.0 * (f / g) * lg, 2.0 * (g / f) * lg
