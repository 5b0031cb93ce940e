"""Insertion/deletion/substitution process on a branch and on a tree.

Each site of the parent sequence owns the gap to its right.  While the site
is alive (until an Exp(delta) deletion clock rings) new sites are inserted
into that gap at rate ``lam``, immediately to the right of the owner; every
inserted site then behaves the same way for the remaining branch time.  The
gap in front of the first site is owned by nobody and inserts at rate
``lam`` for the whole branch.  With ``K`` live sites this gives exactly
``K + 1`` insertion clocks and ``K`` deletion clocks at every instant, so the
process is the one defined event-by-event in :func:`evolve_branch_gillespie`;
simulating the per-site birth-death lineages generation by generation is just
much cheaper than drawing events one at a time.

Site identity is tracked with integer labels.  A site keeps its label for
as long as it survives, inserted sites get fresh labels, so two sequences
share a label exactly when they carry descendants of the same site through
substitutions only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EdgeParams, SubstitutionModel
from .tree import Phylogeny

DEFAULT_CAP = 10**9
# fresh labels on the edge into node v start at (v + 1) << LABEL_SHIFT
LABEL_SHIFT = 40


class SimulationCapError(RuntimeError):
    """Raised when a simulated sequence would exceed the configured length cap."""


@dataclass
class EvolvedSequence:
    """States plus ancestry instrumentation for one node.

    ``labels`` are global site identities.  ``origin[j]`` is the index, in
    the parent's sequence, of the site whose lineage produced site ``j``
    (``-1`` for sites inserted in front of the first parent site).
    """

    states: np.ndarray
    labels: np.ndarray | None = None
    origin: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.states)

    def copy(self) -> "EvolvedSequence":
        return EvolvedSequence(
            self.states.copy(),
            None if self.labels is None else self.labels.copy(),
            None if self.origin is None else self.origin.copy(),
        )


# first spawn-key component separating independent uses of one base seed
STREAM_SEQUENCES = 0
STREAM_TREES = 1
STREAM_MISC = 2


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Private stream for ``key`` (e.g. replicate index, edge id) under ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))))


def derive_seed(seed: int, *key: int) -> int:
    """Integer seed for an independent sub-experiment of ``seed``."""
    ss = np.random.SeedSequence(seed, spawn_key=(STREAM_MISC,) + tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def sample_root_sequence(k_r: int, model: SubstitutionModel, rng: np.random.Generator) -> EvolvedSequence:
    if k_r < 1:
        raise ValueError("root sequence length must be >= 1")
    states = draw_stationary(model, k_r, rng)
    return EvolvedSequence(states, np.arange(1, k_r + 1, dtype=np.int64), None)


def draw_stationary(model: SubstitutionModel, n: int, rng: np.random.Generator) -> np.ndarray:
    if model.kind == "cfn":
        return rng.integers(0, 2, size=n, dtype=np.int8)
    return _categorical(np.cumsum(model.pi)[None, :], np.zeros(n, dtype=np.intp), rng).astype(np.int8)


def _categorical(cum: np.ndarray, rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(len(rows))
    c = cum[rows]
    out = (u[:, None] >= c[:, :-1]).sum(axis=1)
    return out


def substitute(states: np.ndarray, eta_t: float, model: SubstitutionModel, rng: np.random.Generator,
               method: str = "events") -> np.ndarray:
    """End states of sites that evolve for ``eta_t`` units under the model.

    ``events`` simulates individual substitution events (Poisson flip counts
    for CFN, uniformized jumps for GTR); ``matrix_exp`` samples directly from
    the transition matrix.  Both have the same distribution.
    """
    states = np.asarray(states, dtype=np.int8)
    n = len(states)
    if n == 0 or eta_t == 0:
        return states.copy()
    if model.kind == "cfn":
        if method == "events":
            flips = rng.poisson(eta_t, size=n) & 1
        elif method == "matrix_exp":
            flips = rng.random(n) < 0.5 * -np.expm1(-2.0 * eta_t)
        else:
            raise ValueError(f"unknown substitution method {method!r}")
        return (states ^ flips.astype(np.int8)).astype(np.int8)
    if method == "matrix_exp":
        cum = np.cumsum(model.transition_matrix(eta_t), axis=1)
        return _categorical(cum, states.astype(np.intp), rng).astype(np.int8)
    if method != "events":
        raise ValueError(f"unknown substitution method {method!r}")
    qmax = float(np.max(-np.diag(model.Q)))
    jump = np.eye(model.n_states) + model.Q / qmax
    cum = np.cumsum(jump, axis=1)
    counts = rng.poisson(eta_t * qmax, size=n)
    out = states.astype(np.intp)
    for step in range(int(counts.max(initial=0))):
        idx = np.flatnonzero(counts > step)
        out[idx] = _categorical(cum, out[idx], rng)
    return out.astype(np.int8)


def _sibling_ranks(parent: np.ndarray, times: np.ndarray):
    """Sort children by parent then latest birth first; return (order, rank)."""
    order = np.lexsort((-times, parent))
    p = parent[order]
    n = len(p)
    first = np.ones(n, dtype=bool)
    first[1:] = p[1:] != p[:-1]
    start_idx = np.maximum.accumulate(np.where(first, np.arange(n), 0))
    rank = np.arange(n) - start_idx
    return order, rank


def evolve_branch(seq: EvolvedSequence, params: EdgeParams, model: SubstitutionModel,
                  rng: np.random.Generator, *, boundary: bool = True, label_start: int | None = None,
                  substitution: str = "events", track_ancestry: bool = True,
                  cap: int = DEFAULT_CAP) -> EvolvedSequence:
    """Run the branch process for time ``params.t`` starting from ``seq``.

    ``boundary=False`` switches off the insertion clock in front of the first
    site, which turns the output into a concatenation of independent
    single-site branching processes (the setting of the closed-form length
    formulas).
    """
    K = len(seq)
    tau = params.t
    lam, delta = params.lam, params.delta
    if tau == 0 or (params.eta == 0 and lam == 0 and delta == 0):
        out = seq.copy()
        out.origin = np.arange(K, dtype=np.int64) if track_ancestry else None
        if not track_ancestry:
            out.labels = None
        return out

    # generation 0: the K parent sites
    if delta > 0:
        death = rng.exponential(1.0 / delta, size=K)
        end0 = np.minimum(death, tau)
        alive0 = death > tau
    else:
        end0 = np.full(K, tau)
        alive0 = np.ones(K, dtype=bool)

    desc_root, desc_alive, desc_paths = [], [], []
    total = K
    if lam > 0:
        use_boundary = boundary
        n_par = K + (1 if use_boundary else 0)
        start = np.zeros(n_par)
        end = end0 if not use_boundary else np.concatenate(([tau], end0))
        root = np.arange(K, dtype=np.int64) if not use_boundary else np.arange(-1, K, dtype=np.int64)
        path = root[:, None]
        while True:
            nb = rng.poisson(lam * (end - start))
            n_new = int(nb.sum())
            if n_new == 0:
                break
            total += n_new
            if total > cap:
                raise SimulationCapError(
                    f"sequence length exceeded cap {cap} (lam={lam}, delta={delta}, t={tau}); "
                    "supercritical branch, raise the cap or shorten the branch")
            par = np.repeat(np.arange(len(nb)), nb)
            born = start[par] + rng.random(n_new) * (end - start)[par]
            order, rank = _sibling_ranks(par, born)
            par = par[order]
            born = born[order]
            if delta > 0:
                d = born + rng.exponential(1.0 / delta, size=n_new)
                e = np.minimum(d, tau)
                alive = d > tau
            else:
                e = np.full(n_new, tau)
                alive = np.ones(n_new, dtype=bool)
            path = np.column_stack((path[par], rank))
            root = root[par]
            desc_root.append(root)
            desc_alive.append(alive)
            desc_paths.append(path)
            start, end = born, e

    if desc_root:
        depth = max(p.shape[1] for p in desc_paths)
        padded = np.concatenate(
            [np.pad(p, ((0, 0), (0, depth - p.shape[1])), constant_values=-1) for p in desc_paths])
        d_alive = np.concatenate(desc_alive)
        keep = np.flatnonzero(d_alive)
        padded = padded[keep]
        srt = np.lexsort(tuple(padded[:, j] for j in range(depth - 1, -1, -1)))
        d_root = padded[srt, 0]
        o_idx = np.flatnonzero(alive0)
        # parent-sequence sites precede their own lineage in the merge
        keys = np.concatenate((o_idx, d_root))
        merged = np.argsort(keys, kind="stable")
        is_orig = merged < len(o_idx)
    else:
        o_idx = np.flatnonzero(alive0)
        keys = o_idx
        merged = np.arange(len(o_idx))
        is_orig = np.ones(len(o_idx), dtype=bool)

    n_out = len(merged)
    states = np.empty(n_out, dtype=np.int8)
    n_orig = len(o_idx)
    orig_pos = np.flatnonzero(is_orig)
    new_pos = np.flatnonzero(~is_orig)
    states[orig_pos] = substitute(seq.states[o_idx], params.eta * tau, model, rng, substitution)
    states[new_pos] = draw_stationary(model, len(new_pos), rng)
    if not track_ancestry:
        return EvolvedSequence(states)
    origin = keys[merged].astype(np.int64)
    labels = np.empty(n_out, dtype=np.int64)
    if seq.labels is not None:
        labels[orig_pos] = seq.labels[o_idx]
    else:
        labels[orig_pos] = o_idx
    if label_start is None:
        label_start = (int(seq.labels.max()) + 1 if seq.labels is not None and K else K)
    labels[new_pos] = label_start + np.arange(len(new_pos), dtype=np.int64)
    del n_orig
    return EvolvedSequence(states, labels, origin)


def evolve_branch_gillespie(seq: EvolvedSequence, params: EdgeParams, model: SubstitutionModel,
                            rng: np.random.Generator, *, boundary: bool = True,
                            label_start: int | None = None) -> EvolvedSequence:
    """Event-by-event reference simulation with a single aggregate clock.

    Next event after Exp((K + 1) lam + K (delta + eta')); category and
    position are then drawn uniformly.  GTR substitutions use uniformization
    (every site jumps at rate ``eta * qmax`` through ``I + Q / qmax``).
    Quadratic in length, meant for small inputs and as a test oracle.
    """
    states = [int(s) for s in seq.states]
    labels = list(seq.labels) if seq.labels is not None else list(range(len(states)))
    origin = list(range(len(states)))
    if label_start is None:
        label_start = (max(labels) + 1) if labels else len(states)
    next_label = label_start
    lam, delta = params.lam, params.delta
    if model.kind == "cfn":
        sub_rate = params.eta
        jump_cum = None
    else:
        qmax = float(np.max(-np.diag(model.Q)))
        sub_rate = params.eta * qmax
        jump_cum = np.cumsum(np.eye(model.n_states) + model.Q / qmax, axis=1)
    pi_cum = np.cumsum(model.pi)
    remaining = params.t
    while True:
        K = len(states)
        n_gaps = K + 1 if boundary else K
        r_ins, r_del, r_sub = n_gaps * lam, K * delta, K * sub_rate
        total = r_ins + r_del + r_sub
        if total <= 0:
            break
        wait = rng.exponential(1.0 / total)
        if wait > remaining:
            break
        remaining -= wait
        u = rng.random() * total
        if u < r_ins:
            g = int(rng.integers(n_gaps))
            # gap g sits after site g-1 (boundary) or after site g (no boundary)
            left = g - 1 if boundary else g
            if model.kind == "cfn":
                st = int(rng.integers(2))
            else:
                st = int(np.searchsorted(pi_cum, rng.random(), side="right"))
            org = origin[left] if left >= 0 else -1
            states.insert(left + 1, min(st, model.n_states - 1))
            labels.insert(left + 1, next_label)
            origin.insert(left + 1, org)
            next_label += 1
        elif u < r_ins + r_del:
            j = int(rng.integers(K))
            del states[j], labels[j], origin[j]
        else:
            j = int(rng.integers(K))
            if model.kind == "cfn":
                states[j] = 1 - states[j]
            else:
                states[j] = int(np.searchsorted(jump_cum[states[j]], rng.random(), side="right"))
                states[j] = min(states[j], model.n_states - 1)
    return EvolvedSequence(np.array(states, dtype=np.int8), np.array(labels, dtype=np.int64),
                           np.array(origin, dtype=np.int64))


def evolve_tree(tree: Phylogeny, k_r: int, model: SubstitutionModel, seed: int, replicate: int = 0, *,
                root: EvolvedSequence | None = None, boundary: bool = True, track_ancestry: bool = True,
                keep_internal: bool = True, substitution: str = "events",
                cap: int = DEFAULT_CAP) -> dict[int, EvolvedSequence]:
    """Sequences at every node (or only the leaves with ``keep_internal=False``).

    The root and each edge draw from independent streams keyed by
    ``(replicate, node index)`` under ``seed``, so results do not depend on
    traversal order.
    """
    if any(len(c) > 2 for c in tree.children):
        raise ValueError("evolve_tree expects at most two children per node")
    if root is None:
        root = sample_root_sequence(k_r, model, make_rng(seed, STREAM_SEQUENCES, replicate, 0))
    out = {0: root}
    pending = {v: len(tree.children[v]) for v in range(tree.n_nodes)}
    for v in range(1, tree.n_nodes):
        p = tree.parent[v]
        out[v] = evolve_branch(out[p], tree.edges[v], model, make_rng(seed, STREAM_SEQUENCES, replicate, v),
                               boundary=boundary, label_start=(v + 1) << LABEL_SHIFT,
                               substitution=substitution, track_ancestry=track_ancestry, cap=cap)
        pending[p] -= 1
        if not keep_internal and pending[p] == 0 and tree.children[p]:
            del out[p]
    return out


def compose_origin(seqs: dict[int, EvolvedSequence], tree: Phylogeny, ancestor: int, node: int) -> np.ndarray:
    """Index into ``ancestor``'s sequence of the lineage behind each site of ``node``.

    Sites inserted in front of every ancestral lineage map to -1.
    """
    path = []
    v = node
    while v != ancestor:
        if v <= 0:
            raise ValueError(f"node {ancestor} is not an ancestor of {node}")
        path.append(v)
        v = tree.parent[v]
    if not path:
        return np.arange(len(seqs[node]), dtype=np.int64)
    org = seqs[path[0]].origin.copy()
    for v in path[1:]:
        up = seqs[v].origin
        org = np.where(org >= 0, up[np.maximum(org, 0)], -1)
    return org


def _window(n: int, window) -> slice:
    if window is None:
        return slice(0, n)
    lo, hi = window
    if lo < 0 or hi > n or lo > hi:
        raise IndexError(f"window {window} out of bounds for length {n}")
    return slice(lo, hi)


def count_joint_survivors(seq_a: EvolvedSequence, seq_b: EvolvedSequence, reference: EvolvedSequence,
                          window_a=None, window_b=None) -> int:
    """Sites of ``reference`` with a surviving copy in both windows.

    Windows are ``(start, stop)`` with Python slice semantics.
    """
    for s in (seq_a, seq_b, reference):
        if s.labels is None:
            raise ValueError("ancestry labels required")
    la = seq_a.labels[_window(len(seq_a), window_a)]
    lb = seq_b.labels[_window(len(seq_b), window_b)]
    ref = reference.labels
    shared = np.intersect1d(la, lb, assume_unique=True)
    return int(np.isin(shared, ref, assume_unique=True).sum())
