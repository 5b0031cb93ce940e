"""Closed-form moments of the single-site indel branching process and the
expected correlation statistics built from it.

All functions are pure and work in float64.  The critical case
``delta == lam`` (to relative tolerance :data:`CRITICAL_TOL`) uses the
limiting formulas, which are continuous with the generic ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .model import EdgeParams, SubstitutionModel
from .tree import Phylogeny

CRITICAL_TOL = 1e-9


class DomainError(ValueError):
    """Argument outside the domain of a closed-form expression."""


def _critical(p: EdgeParams) -> bool:
    return abs(p.delta - p.lam) < CRITICAL_TOL * max(p.delta, p.lam, 1.0)


def survival(p: EdgeParams) -> float:
    """D_t: probability that a given site is not deleted."""
    return math.exp(-p.delta * p.t)


def length_factor(p: EdgeParams) -> float:
    """M_t: expected number of descendants of one site."""
    return math.exp(-(p.delta - p.lam) * p.t)


def boundary_insertions(p: EdgeParams) -> float:
    """Gamma_t: expected number of sites descending from the front gap."""
    if _critical(p):
        return p.lam * p.t
    return p.lam * -math.expm1(-(p.delta - p.lam) * p.t) / (p.delta - p.lam)


@dataclass(frozen=True)
class ChannelStats:
    M: float
    D: float
    Gamma: float
    flip_p: float

    @classmethod
    def of(cls, p: EdgeParams) -> "ChannelStats":
        return cls(length_factor(p), survival(p), boundary_insertions(p), flip_probability(p.eta, p.t))


def length_mgf(s: float, p: EdgeParams) -> float:
    """E[s^K] for the descendants K of a single site after time ``p.t``."""
    d, lam, t = p.delta, p.lam, p.t
    if _critical(p):
        num = lam * t * (1 - s) + s
        den = lam * t * (1 - s) + 1
    else:
        e = math.exp((d - lam) * t)
        num = d * (s - 1) - e * (lam * s - d)
        den = lam * (s - 1) - e * (lam * s - d)
    if den == 0 or abs(den) < 1e-300:
        raise DomainError(f"length_mgf has a pole at s={s!r} for {p}")
    return num / den


def extinction_probability(p: EdgeParams) -> float:
    return length_mgf(0.0, p)


def expected_length(p: EdgeParams, k_r: int = 1) -> float:
    return k_r * length_factor(p)


def length_variance(p: EdgeParams, k_r: int = 1) -> float:
    if _critical(p):
        return k_r * 2.0 * p.lam * p.t
    M = length_factor(p)
    return k_r * (p.delta + p.lam) / (p.delta - p.lam) * (M - M * M)


def new_sites_expectation(p: EdgeParams) -> float:
    """E[K*]: expected descendants of one site that are not the site itself."""
    return length_factor(p) - survival(p)


def flip_probability(eta: float, t: float) -> float:
    """CFN probability of an odd number of flips."""
    return -0.5 * math.expm1(-2.0 * eta * t)


def deviation_decay(p: EdgeParams, model: SubstitutionModel | str = "cfn") -> float:
    """Factor by which the expected deviation shrinks along one edge."""
    c = _decay_c(model)
    return math.exp(-(c * p.eta + p.delta) * p.t)


def _decay_c(model) -> float:
    if isinstance(model, SubstitutionModel):
        return model.decay_coefficient
    if model == "cfn":
        return 2.0
    if model == "gtr":
        return 1.0
    raise ValueError(f"unknown model {model!r}")


def fork_expected_distance(pa: EdgeParams, pb: EdgeParams, pu: EdgeParams, k_r: float,
                           model: SubstitutionModel | str = "cfn") -> float:
    """E[(Z_a - K_a/2)(Z_b - K_b/2)] for the fork r -u-> u -> {a, b} (or the
    GTR analogue with weight sums), starting from a stationary root of length k_r."""
    c = _decay_c(model)
    base = k_r / 4.0 if c == 2.0 else float(k_r)
    return (math.exp(-(c * pa.eta + pa.delta) * pa.t) * math.exp(-(c * pb.eta + pb.delta) * pb.t)
            * length_factor(pu) * base)


def beta_rate(eta: float, delta: float, lam: float) -> float:
    return 4.0 * eta + delta + lam


def kappa(k_r: float, delta: float, lam: float, T: float) -> float:
    """Clock normalization k_r M_T / 4 for root-to-leaf time T."""
    return k_r * math.exp(-(delta - lam) * T) / 4.0


def clock_expected_distance(eta: float, delta: float, lam: float, t: float, kap: float) -> float:
    """Expected CFN correlation of two leaves whose MRCA is ``t`` above them."""
    return math.exp(-beta_rate(eta, delta, lam) * t) * kap


def nonclock_edge_weight(p: EdgeParams, model: SubstitutionModel | str = "gtr") -> float:
    """Additive weight of one edge in the clock-free metric.

    For the normalized GTR model this is ``(eta + delta/2 + lam/2) t``; the
    CFN flip rate decays the spectral state twice as fast, so CFN edges use
    ``2 eta`` in place of ``eta``.
    """
    c = _decay_c(model)
    return (c * p.eta + p.delta / 2.0 + p.lam / 2.0) * p.t


def nonclock_path_metric(tree: Phylogeny, a: int, b: int, model: SubstitutionModel | str = "gtr") -> float:
    return sum(nonclock_edge_weight(tree.edges[v], model) for v in tree.path_edges(a, b))


def clock_path_metric(tree: Phylogeny, a: int, b: int) -> float:
    return sum(beta_rate(e.eta, e.delta, e.lam) * e.t for e in (tree.edges[v] for v in tree.path_edges(a, b)))


def true_distance_matrix(tree: Phylogeny, weight_choice: str = "clock", model: SubstitutionModel | str = "gtr"):
    """Path-sum metric over leaves: ``clock`` uses w_e = beta t_e, ``nonclock``
    uses :func:`nonclock_edge_weight`."""
    from .estimator import DistanceMatrix

    leaves = tree.leaves()
    n = len(leaves)
    D = np.zeros((n, n))
    for i, j in combinations(range(n), 2):
        if weight_choice == "clock":
            d = clock_path_metric(tree, leaves[i], leaves[j])
        elif weight_choice == "nonclock":
            d = nonclock_path_metric(tree, leaves[i], leaves[j], model)
        else:
            raise ValueError(f"unknown weight choice {weight_choice!r}")
        D[i, j] = D[j, i] = d
    return DistanceMatrix([tree.names[v] for v in leaves], D, {"variant": f"true-{weight_choice}"})
