"""Edge parameters and substitution models.

Two substitution models are supported.  ``cfn`` is the symmetric two-state
model where each site flips at rate ``eta``.  ``gtr`` is a reversible rate
matrix ``Q`` (any alphabet size, usually 4) scaled so that its slowest
nonzero relaxation rate is 1; sites then evolve under ``eta * Q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

DNA = "ACGT"
BINARY = "01"


class ModelError(ValueError):
    """Raised for invalid substitution models or edge parameters."""


@dataclass(frozen=True)
class EdgeParams:
    """Time and per-site rates on one branch."""

    t: float
    eta: float = 0.0
    delta: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        for name in ("t", "eta", "delta", "lam"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ModelError(f"edge parameter {name}={v!r} must be finite and >= 0")

    def replace(self, **kw) -> "EdgeParams":
        vals = dict(t=self.t, eta=self.eta, delta=self.delta, lam=self.lam)
        vals.update(kw)
        return EdgeParams(**vals)


def check_reversible(Q: np.ndarray, pi: np.ndarray, tol: float = 1e-10) -> None:
    Q = np.asarray(Q, dtype=float)
    pi = np.asarray(pi, dtype=float)
    m = Q.shape[0]
    if Q.shape != (m, m) or pi.shape != (m,):
        raise ModelError("Q must be square and pi must match its size")
    if np.any(pi <= 0) or abs(pi.sum() - 1.0) > tol:
        raise ModelError("pi must be strictly positive and sum to 1")
    off = Q - np.diag(np.diag(Q))
    if np.any(off < -tol):
        raise ModelError("off-diagonal rates must be nonnegative")
    if np.max(np.abs(Q.sum(axis=1))) > tol * max(1.0, np.abs(Q).max()):
        raise ModelError("rows of Q must sum to zero")
    flux = pi[:, None] * Q
    if np.max(np.abs(flux - flux.T)) > tol * max(1.0, np.abs(flux).max()):
        raise ModelError("Q is not reversible with respect to pi")


def relaxation_rate(Q: np.ndarray, pi: np.ndarray) -> float:
    """Magnitude of the largest negative eigenvalue of a reversible Q."""
    evals, _ = _symmetric_eig(Q, pi)
    neg = evals[evals < -1e-12 * max(1.0, np.abs(evals).max())]
    if neg.size == 0:
        raise ModelError("Q has no negative eigenvalue")
    return float(-neg.max())


def _symmetric_eig(Q, pi):
    # S = diag(sqrt(pi)) Q diag(1/sqrt(pi)) is symmetric for reversible Q
    r = np.sqrt(pi)
    S = r[:, None] * Q / r[None, :]
    S = 0.5 * (S + S.T)
    evals, U = np.linalg.eigh(S)
    return evals, U


def gtr_spectral_vector(Q, pi, *, tol: float = 1e-9):
    """Right eigenvector ``w`` of the relaxation eigenvalue -1.

    ``Q`` is rescaled first if its largest negative eigenvalue is not -1.
    Returns ``(w, scale)`` where ``scale`` multiplies the input ``Q`` to give
    the normalized matrix.  ``w`` satisfies ``Qw = -w``, ``sum(pi*w) = 0``
    and ``sum(pi*w**2) = 1``; its first nonzero entry is positive.  For a
    degenerate eigenspace the vector is the first basis vector produced by
    ``eigh`` on the symmetrized matrix, which is deterministic.
    """
    Q = np.asarray(Q, dtype=float)
    pi = np.asarray(pi, dtype=float)
    check_reversible(Q, pi, tol=1e-8)
    scale = 1.0 / relaxation_rate(Q, pi)
    Qn = Q * scale
    evals, U = _symmetric_eig(Qn, pi)
    idx = np.flatnonzero(np.abs(evals + 1.0) < tol)
    if idx.size == 0:
        raise ModelError("eigenvalue -1 absent after rescaling")
    # eigenvectors of S map to right eigenvectors of Q via diag(1/sqrt(pi))
    w = U[:, idx[0]] / np.sqrt(pi)
    w = w / math.sqrt(float(np.sum(pi * w * w)))
    nz = np.flatnonzero(np.abs(w) > 1e-12)
    if w[nz[0]] < 0:
        w = -w
    # re-project onto pi-orthogonal complement; removes rounding residue
    w = w - np.sum(pi * w)
    w = w / math.sqrt(float(np.sum(pi * w * w)))
    return w, scale


@dataclass(frozen=True, eq=False)
class SubstitutionModel:
    """Site substitution process plus the state alphabet used for I/O.

    Use :meth:`cfn` or :meth:`gtr` to build one.
    """

    kind: str
    Q: np.ndarray
    pi: np.ndarray
    w: np.ndarray
    alphabet: str
    scale: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def cfn(cls) -> "SubstitutionModel":
        Q = np.array([[-1.0, 1.0], [1.0, -1.0]])
        return cls("cfn", Q, np.array([0.5, 0.5]), np.array([1.0, -1.0]), BINARY)

    @classmethod
    def gtr(cls, Q, pi, alphabet: str | None = None, normalize: bool = True) -> "SubstitutionModel":
        Q = np.asarray(Q, dtype=float)
        pi = np.asarray(pi, dtype=float)
        w, scale = gtr_spectral_vector(Q, pi)
        if not normalize and abs(scale - 1.0) > 1e-9:
            raise ModelError(f"Q is not normalized (rescale factor {scale:.6g})")
        if alphabet is None:
            alphabet = DNA if Q.shape[0] == 4 else "".join(str(i) for i in range(Q.shape[0]))
        if len(alphabet) != Q.shape[0]:
            raise ModelError("alphabet size does not match Q")
        return cls("gtr", Q * scale, pi, w, alphabet, scale)

    @classmethod
    def jukes_cantor(cls) -> "SubstitutionModel":
        Q = np.full((4, 4), 0.25) - np.eye(4)
        return cls.gtr(Q, np.full(4, 0.25))

    @property
    def n_states(self) -> int:
        return self.Q.shape[0]

    @property
    def decay_coefficient(self) -> float:
        """Exponential decay rate of the spectral state per unit ``eta * t``.

        2 for CFN (flip rate eta), 1 for a normalized GTR matrix.
        """
        return 2.0 if self.kind == "cfn" else 1.0

    @property
    def weight_second_moment(self) -> float:
        """Stationary ``E[x^2]`` of the per-site statistic used for deviations.

        CFN deviations count zeros minus half a site (x = +-1/2); GTR uses w.
        """
        return 0.25 if self.kind == "cfn" else 1.0

    def site_values(self, states: np.ndarray) -> np.ndarray:
        """Per-site contribution to a block deviation."""
        states = np.asarray(states)
        if self.kind == "cfn":
            return 0.5 - states.astype(float)
        return self.w[states]

    def transition_matrix(self, eta_t: float) -> np.ndarray:
        key = float(eta_t)
        P = self._cache.get(key)
        if P is None:
            P = scipy.linalg.expm(self.Q * key)
            P = np.clip(P, 0.0, None)
            P /= P.sum(axis=1, keepdims=True)
            if len(self._cache) < 256:
                self._cache[key] = P
        return P

    def encode(self, text: str) -> np.ndarray:
        lut = {c: i for i, c in enumerate(self.alphabet)}
        try:
            return np.fromiter((lut[c] for c in text), dtype=np.int8, count=len(text))
        except KeyError as exc:
            raise ModelError(f"symbol {exc.args[0]!r} not in alphabet {self.alphabet!r}") from None

    def decode(self, states: np.ndarray) -> str:
        table = np.frombuffer(self.alphabet.encode("ascii"), dtype=np.uint8)
        return table[np.asarray(states, dtype=np.intp)].tobytes().decode("ascii")


def random_reversible_q(rng: np.random.Generator, m: int = 4):
    """Random reversible rate matrix and its stationary distribution."""
    pi = rng.dirichlet(np.full(m, 2.0))
    S = rng.uniform(0.1, 2.0, size=(m, m))
    S = np.triu(S, 1)
    S = S + S.T
    Q = S * pi[None, :]
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q, pi
