"""Alignment-free distance estimators.

The central statistic correlates block-level state deviations of two leaf
sequences.  Only the first ``k0`` sites of each sequence are used: they are
cut into ``L`` blocks of length ``ell = ceil(k0 ** zeta)`` and the products
of matching deviations are averaged over every other block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .model import SubstitutionModel, gtr_spectral_vector  # noqa: F401  (re-exported)
from .simulator import EvolvedSequence, compose_origin

VARIANTS = ("clock", "nonclock", "full", "hamming")


class ShortSequenceError(ValueError):
    """A sequence is shorter than the estimator's prefix length."""


# --------------------------------------------------------------------------
# partition


def _ceil_power(k0: int, zeta: float) -> int:
    x = float(k0) ** zeta
    r = round(x)
    # k0 ** zeta can land a few ulps above an exact integer (e.g. 1e5 ** 0.6)
    if abs(x - r) <= 1e-9 * max(1.0, x):
        return int(r)
    return math.ceil(x)


@dataclass(frozen=True)
class BlockPartition:
    k0: int
    zeta: float
    ell: int
    L: int

    def block_range(self, i: int) -> tuple[int, int]:
        """0-based half-open site range of 1-based block ``i``."""
        if not 1 <= i <= self.L:
            raise IndexError(f"block {i} outside 1..{self.L}")
        return (i - 1) * self.ell, i * self.ell

    @property
    def used_blocks(self) -> list[int]:
        """1-based indices of the blocks that enter the estimator."""
        return list(range(1, self.L, 2))

    @property
    def n_sites(self) -> int:
        return self.L * self.ell


def make_partition(k0: int, zeta: float = 0.6) -> BlockPartition:
    if not 0.5 < zeta < 1.0:
        raise ValueError(f"zeta={zeta} must satisfy 1/2 < zeta < 1")
    if k0 < 1:
        raise ValueError("k0 must be positive")
    ell = _ceil_power(int(k0), zeta)
    L = int(k0) // ell
    L -= L % 2
    if L < 2:
        raise ValueError(f"sequence too short for block estimator (k0={k0}, zeta={zeta}: ell={ell}, L={L})")
    return BlockPartition(int(k0), float(zeta), ell, L)


# --------------------------------------------------------------------------
# statistics


def _states(seq) -> np.ndarray:
    return seq.states if isinstance(seq, EvolvedSequence) else np.asarray(seq)


def block_deviations(seq, partition: BlockPartition, model: SubstitutionModel) -> np.ndarray:
    """Per-block sum of site values over the first ``L * ell`` sites.

    CFN: zeros minus half the block length.  GTR: sum of ``w[state]``.
    """
    s = _states(seq)
    if len(s) < partition.k0:
        raise ShortSequenceError(f"sequence length {len(s)} < k0={partition.k0}")
    vals = model.site_values(s[: partition.n_sites])
    return vals.reshape(partition.L, partition.ell).sum(axis=1)


def epartdist(seq_a, seq_b, partition: BlockPartition, model: SubstitutionModel) -> float:
    """Average of ``dev_a[i] * dev_b[i]`` over odd 1-based blocks."""
    da = block_deviations(seq_a, partition, model)[0::2]
    db = block_deviations(seq_b, partition, model)[0::2]
    return float(2.0 / partition.L * np.dot(da, db))


def block_normalization(partition: BlockPartition, model: SubstitutionModel) -> float:
    """Multiplier turning ``epartdist`` into a correlation in (-1, 1]: 4/ell for CFN."""
    return 1.0 / (partition.ell * model.weight_second_moment)


def _neg_log(x: float, eps_log: float) -> float:
    if not x > eps_log:
        return math.inf
    return -math.log(x)


def clock_correct(stat: float, partition: BlockPartition, model: SubstitutionModel | None = None,
                  eps_log: float = 1e-12) -> float:
    """``-2 ln(stat * 4 / ell)``; +inf when the normalized statistic is <= eps_log."""
    model = model or SubstitutionModel.cfn()
    return 2.0 * _neg_log(stat * block_normalization(partition, model), eps_log)


def full_sequence_edist(seq_a, seq_b, model: SubstitutionModel) -> float:
    """Product of whole-sequence deviations."""
    return float(model.site_values(_states(seq_a)).sum() * model.site_values(_states(seq_b)).sum())


def nonclock_ratio(seq_a, seq_b, model: SubstitutionModel) -> float:
    """Whole-sequence correlation ``edist / (E[x^2] sqrt(K_a K_b))``."""
    ka, kb = len(_states(seq_a)), len(_states(seq_b))
    if ka == 0 or kb == 0:
        return 0.0
    return full_sequence_edist(seq_a, seq_b, model) / (model.weight_second_moment * math.sqrt(ka * kb))


def nonclock_distance(seq_a, seq_b, partition: BlockPartition | None, model: SubstitutionModel, *,
                      method: str = "block", eps_log: float = 1e-12) -> float:
    """Clock-free additive distance estimate.

    ``block`` uses the normalized block statistic, ``full`` the
    whole-sequence ratio of :func:`nonclock_ratio`.  Both target the path
    sum of :func:`indelphy.analytics.nonclock_edge_weight`.
    """
    if method == "full":
        if partition is not None:
            k0 = partition.k0
            if min(len(_states(seq_a)), len(_states(seq_b))) < k0:
                return math.inf
        return _neg_log(nonclock_ratio(seq_a, seq_b, model), eps_log)
    if method != "block":
        raise ValueError(f"unknown method {method!r}")
    try:
        stat = epartdist(seq_a, seq_b, partition, model)
    except ShortSequenceError:
        return math.inf
    return _neg_log(stat * block_normalization(partition, model), eps_log)


def hamming_corrected_distance(seq_a, seq_b, eps_log: float = 1e-12) -> float:
    """``-1/2 ln(1 - 2h)`` for the mismatch fraction ``h`` of equal-length sequences."""
    a, b = _states(seq_a), _states(seq_b)
    if len(a) != len(b):
        raise ValueError(f"Hamming distance needs equal lengths, got {len(a)} and {len(b)}")
    if len(a) == 0:
        raise ValueError("empty sequences")
    h = float(np.mean(a != b))
    return 0.5 * _neg_log(1.0 - 2.0 * h, eps_log)


# --------------------------------------------------------------------------
# distance matrices


@dataclass
class DistanceMatrix:
    names: list[str]
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = len(self.names)
        if self.values.shape != (n, n):
            raise ValueError("matrix shape does not match names")
        if len(set(self.names)) != n:
            raise ValueError("duplicate taxon names")
        if np.any(np.diag(self.values) != 0):
            raise ValueError("diagonal must be zero")
        if not np.array_equal(self.values, self.values.T):
            raise ValueError("matrix must be symmetric")
        if np.any(np.isnan(self.values)) or np.any(self.values == -np.inf):
            raise ValueError("entries must be finite or +inf")

    @property
    def n(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def get(self, a: str, b: str) -> float:
        return float(self.values[self.index(a), self.index(b)])

    def shifted(self, c: float) -> "DistanceMatrix":
        v = self.values + c
        np.fill_diagonal(v, 0.0)
        return DistanceMatrix(list(self.names), v, dict(self.meta))

    def n_infinite(self) -> int:
        return int(np.isinf(self.values).sum() // 2)


@dataclass(frozen=True)
class EstimatorConfig:
    k0: int | None = None
    zeta: float = 0.6
    variant: str = "clock"
    eps_log: float = 1e-12
    delta_u_c: float = 3.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0.5 < self.zeta < 1.0:
            raise ValueError(f"zeta={self.zeta} must satisfy 1/2 < zeta < 1")


def distance_matrix(sequences: dict, config: EstimatorConfig | None = None,
                    model: SubstitutionModel | None = None) -> DistanceMatrix:
    """Pairwise estimates for ``{name: states or EvolvedSequence}``.

    ``k0`` defaults to the shortest sequence length; pairs with a sequence
    shorter than ``k0`` get +inf.
    """
    config = config or EstimatorConfig()
    model = model or SubstitutionModel.cfn()
    names = list(sequences)
    if len(names) < 2:
        raise ValueError("distance_matrix needs at least 2 sequences")
    states = [_states(sequences[nm]) for nm in names]
    lengths = [len(s) for s in states]
    n = len(names)
    D = np.zeros((n, n))
    meta = {"variant": config.variant, "zeta": config.zeta, "eps_log": config.eps_log}
    if config.variant == "hamming":
        for i, j in combinations(range(n), 2):
            D[i, j] = D[j, i] = hamming_corrected_distance(states[i], states[j], config.eps_log)
        meta["normalization"] = "hamming"
        return DistanceMatrix(names, D, meta)
    k0 = config.k0 if config.k0 is not None else min(lengths)
    meta["k0"] = int(k0)
    part = None
    try:
        part = make_partition(k0, config.zeta)
    except ValueError:
        if config.variant != "full":
            raise
    if part is not None:
        meta.update(ell=part.ell, L=part.L)
    norm = block_normalization(part, model) if part is not None else None
    if config.variant == "clock":
        meta["normalization"] = f"-2 ln(stat * {norm!r})"
    elif config.variant == "nonclock":
        meta["normalization"] = f"-ln(stat * {norm!r})"
    else:
        meta["normalization"] = f"-ln(edist / ({model.weight_second_moment:g} sqrt(K_a K_b)))"
    devs = [None] * n
    if config.variant in ("clock", "nonclock"):
        for i in range(n):
            if lengths[i] >= k0:
                devs[i] = block_deviations(states[i], part, model)[0::2]
    for i, j in combinations(range(n), 2):
        if lengths[i] < k0 or lengths[j] < k0:
            d = math.inf
        elif config.variant == "full":
            d = _neg_log(nonclock_ratio(states[i], states[j], model), config.eps_log)
        else:
            stat = float(2.0 / part.L * np.dot(devs[i], devs[j]))
            d = _neg_log(stat * norm, config.eps_log)
            if config.variant == "clock":
                d *= 2.0
        D[i, j] = D[j, i] = d
    return DistanceMatrix(names, D, meta)


# --------------------------------------------------------------------------
# good-event diagnostics


@dataclass
class GoodEventReport:
    ell_u: int
    k_u_prime: int
    delta_u: int
    M: float
    D2: float
    K_u: int
    long_enough: bool
    interior_nonempty: bool
    E1_prime: bool
    E1_double_prime: bool
    E1: bool
    E2: bool
    J: np.ndarray
    extents: dict

    @property
    def holds(self) -> bool:
        return self.long_enough and self.E1 and self.E2


def largest_ell_u(ell: int, M: float) -> int:
    """Largest integer ``n`` with ``n * M <= ell``."""
    n = int(math.floor(ell / M))
    while (n + 1) * M <= ell:
        n += 1
    while n > 0 and n * M > ell:
        n -= 1
    return n


def _extent(origin: np.ndarray, p: np.ndarray, K_u: int, strict: bool = False):
    """1-based leftmost/rightmost leaf positions descending from 1-based u-sites ``p``.

    A lineage with no survivors collapses to the gap where it would sit
    (``x = y + 1``).  Ancestral positions outside ``1..K_u`` are continued
    by translation past the nearest end (``nan`` when ``strict``).
    """
    K_x = len(origin)
    q = np.clip(p, 1, max(K_u, 1))
    x = 1 + np.searchsorted(origin, q - 1, side="left").astype(float)
    y = np.searchsorted(origin, q - 1, side="right").astype(float)
    below, above = p < 1, p > K_u
    if strict:
        x[below | above] = np.nan
        y[below | above] = np.nan
    else:
        x[below] = y[below] = p[below]
        x[above] = y[above] = K_x + (p[above] - K_u)
    return x, y


def good_event_diagnostics(seqs: dict, tree, u: int, a: int, b: int, partition: BlockPartition,
                           c: float = 3.0, strict_bounds: bool = False) -> GoodEventReport:
    """Evaluate the block-alignment and joint-survival events for the pair (a, b) below u.

    ``seqs`` must come from :func:`indelphy.simulator.evolve_tree` with
    ancestry on and internal nodes kept.  ``M`` is the geometric mean of the
    per-side length factors from ``u``; ``D2`` is the product of the
    per-side survival probabilities.  When the interior blocks are empty
    (small ``k0``) some reference positions fall outside ``sigma_u``;
    ``strict_bounds`` makes those blocks fail instead of extrapolating.
    """
    from .analytics import length_factor, survival

    def side(v):
        edges = [tree.edges[w] for w in tree.path_to_root(v)[: len(tree.path_to_root(v)) - len(tree.path_to_root(u))]]
        return (math.prod(length_factor(e) for e in edges), math.prod(survival(e) for e in edges))

    Ma, Da = side(a)
    Mb, Db = side(b)
    M = math.sqrt(Ma * Mb)
    D2 = Da * Db
    ell, L = partition.ell, partition.L
    ell_u = largest_ell_u(ell, M)
    kp = (L - 1) * ell_u
    delta_u = math.ceil(L + c * math.sqrt(kp * math.log(kp)) / M) if kp > 1 else L
    K_u = len(seqs[u])
    oa = compose_origin(seqs, tree, u, a)
    ob = compose_origin(seqs, tree, u, b)
    i = np.arange(1, L)
    win = 2.0 * M * delta_u
    lo_blk = (i - 1) * ell
    hi_blk = i * ell
    ext = {}
    ok1p = np.ones(L - 1, dtype=bool)
    ok1pp = np.ones(L - 1, dtype=bool)
    for name, o in (("a", oa), ("b", ob)):
        xp, _ = _extent(o, (i - 1) * ell_u + delta_u, K_u, strict_bounds)
        _, yp = _extent(o, i * ell_u - delta_u, K_u, strict_bounds)
        xpp, _ = _extent(o, (i - 1) * ell_u - delta_u, K_u, strict_bounds)
        _, ypp = _extent(o, i * ell_u + delta_u, K_u, strict_bounds)
        ext[name] = {"x1": xp, "y1": yp, "x2": xpp, "y2": ypp}
        with np.errstate(invalid="ignore"):
            ok1p &= (lo_blk < xp) & (xp < lo_blk + win) & (hi_blk - win < yp) & (yp < hi_blk)
            ok1pp &= (lo_blk - win < xpp) & (xpp < lo_blk) & (hi_blk < ypp) & (ypp < hi_blk + win)
    la = seqs[a].labels
    lb = seqs[b].labels
    J = np.zeros(L - 1, dtype=np.int64)
    ref = seqs[u].labels
    for k in range(L - 1):
        s0, s1 = k * ell, (k + 1) * ell
        if len(la) < s1 or len(lb) < s1:
            J[k] = -1
            continue
        shared = np.intersect1d(la[s0:s1], lb[s0:s1], assume_unique=True)
        J[k] = int(np.isin(shared, ref, assume_unique=True).sum())
    centre = ell_u * D2
    E2 = bool(np.all((J >= 0) & (centre - 3 * M * delta_u <= J) & (J <= centre + 3 * M * delta_u)))
    return GoodEventReport(
        ell_u=ell_u, k_u_prime=kp, delta_u=delta_u, M=M, D2=D2, K_u=K_u,
        long_enough=K_u >= kp,
        interior_nonempty=delta_u < ell_u - delta_u,
        E1_prime=bool(ok1p.all()), E1_double_prime=bool(ok1pp.all()),
        E1=bool(ok1p.all() or ok1pp.all()), E2=E2, J=J, extents=ext)
