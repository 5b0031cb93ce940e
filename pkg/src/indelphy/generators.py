"""Random ultrametric trees with edge times bounded in (f, g)."""

from __future__ import annotations

import numpy as np

from .model import EdgeParams
from .tree import Phylogeny


class InfeasibleTreeError(ValueError):
    pass


def _random_shape(n: int, rng: np.random.Generator, balanced: bool):
    """Nested tuples of leaf counts; ``balanced`` halves exactly."""
    if n == 1:
        return None
    if balanced:
        k = n // 2
    else:
        k = int(np.clip(round(n * rng.uniform(0.25, 0.75)), 1, n - 1))
    return (_random_shape(k, rng, balanced), _random_shape(n - k, rng, balanced))


def _build(shape):
    """Preorder parent/children arrays for a nested shape."""
    parent: list[int] = []
    children: list[list[int]] = []
    stack = [(shape, -1)]
    while stack:
        sh, p = stack.pop()
        v = len(parent)
        parent.append(p)
        children.append([])
        if p >= 0:
            children[p].append(v)
        if sh is not None:
            stack.extend((sub, v) for sub in reversed(sh))
    return parent, children


def _height_intervals(children, f, g):
    n = len(children)
    lo = [0.0] * n
    hi = [0.0] * n
    for v in range(n - 1, -1, -1):
        if children[v]:
            lo[v] = max(lo[c] + f for c in children[v])
            hi[v] = min(hi[c] + g for c in children[v])
    return lo, hi


def generate_clock_tree(n: int, f: float, g: float, rng: np.random.Generator, *,
                        rates: EdgeParams | None = None, balanced: bool = False,
                        max_tries: int = 1000) -> Phylogeny:
    """Random rooted binary ultrametric tree on leaves "1".."n" with every t_e in (f, g).

    Topologies come from recursive splitting (exact halving with
    ``balanced``); node heights are then drawn top-down uniformly inside the
    range that keeps every remaining edge feasible.  Topologies with no
    feasible heights are redrawn up to ``max_tries`` times.
    """
    if n < 2:
        raise ValueError("need at least 2 leaves")
    if not 0 < f < g:
        raise ValueError("need 0 < f < g")
    if balanced and n & (n - 1):
        raise ValueError("balanced trees need a power-of-two leaf count")
    rates = rates or EdgeParams(0.0)
    for _ in range(max_tries):
        parent, children = _build(_random_shape(n, rng, balanced))
        lo, hi = _height_intervals(children, f, g)
        if all(lo[v] < hi[v] for v in range(len(children)) if children[v]):
            break
    else:
        raise InfeasibleTreeError(
            f"no ultrametric tree with {n} leaves and edge times in ({f}, {g}) found after "
            f"{max_tries} topologies: need H*f < h*g for max/min leaf depths H, h")
    m = len(parent)
    h = [0.0] * m
    h[0] = rng.uniform(lo[0], hi[0])
    for v in range(1, m):
        hp = h[parent[v]]
        a = max(lo[v], hp - g)
        b = min(hi[v], hp - f)
        h[v] = rng.uniform(a, b) if children[v] else 0.0
    names: list[str | None] = [None] * m
    k = 0
    for v in range(m):
        if not children[v]:
            k += 1
            names[v] = str(k)
    edges = [None] + [rates.replace(t=h[parent[v]] - h[v]) for v in range(1, m)]
    tree = Phylogeny(parent, children, names, edges, {"ultrametric": True, "f": f, "g": g})
    return tree


def generate_bounded_rates_tree(n: int, f: float, g: float, eta_bounds: tuple[float, float],
                                delta: float, lam: float, rng: np.random.Generator, *,
                                balanced: bool = False, max_tries: int = 1000) -> Phylogeny:
    """Clock tree in time with per-edge eta uniform in ``eta_bounds``; shared delta and lam."""
    lo, hi = eta_bounds
    if not 0 <= lo <= hi:
        raise ValueError("need 0 <= eta_lo <= eta_hi")
    tree = generate_clock_tree(n, f, g, rng, balanced=balanced, max_tries=max_tries)
    edges = [None] + [EdgeParams(e.t, float(rng.uniform(lo, hi)), delta, lam) for e in tree.edges[1:]]
    out = tree.with_edges(edges)
    out.meta["eta_bounds"] = (lo, hi)
    return out
