"""Haar-random sampling and the hard-instance state families.

Every sampler is pure given (spec, seed): a master seed plus a sample index
derive an independent child generator, so batches can fan out across
workers in any order and still reproduce bit-identically.

Family parameter ``n`` always counts the qubits of the sampled state
itself; the Haar-random components act on the trailing payload qubits
dictated by each family's block structure (the two purity families draw
both components from the full ``2**n``-dimensional space).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .core import DensityMatrix, PureState, basis_state, kron_all
from .errors import CapacityError, DimensionError, DomainError, ValidationError

_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


def child_rng(master_seed: int, *index: int) -> np.random.Generator:
    """Independent generator derived from a master seed and a sample index."""
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=index))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with phase-fixed R."""
    if dim < 1:
        raise DomainError(f"dimension {dim} must be >= 1")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def _haar_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def haar_state(n: int, rng: np.random.Generator) -> PureState:
    """Haar-random pure state on n qubits (unsplit register)."""
    if n < 1:
        raise DomainError(f"qubit count {n} must be >= 1")
    return PureState(_haar_vector(2 ** n, rng), n, 0)


class EnsembleFamily(str, Enum):
    PURITY_S1 = "purity_s1"
    PURITY_S2 = "purity_s2"
    VC_PCA_S1 = "vc_pca_s1"
    VC_PCA_S2 = "vc_pca_s2"
    FISHER_S1 = "fisher_s1"
    FISHER_S2 = "fisher_s2"
    CLASS_CORR_CS1 = "class_corr_cs1"
    CLASS_CORR_CS2 = "class_corr_cs2"
    HAAR_PURE = "haar_pure"
    RANDOM_RANK_R = "random_rank_r"


_MIN_QUBITS = {
    EnsembleFamily.PURITY_S1: 1,
    EnsembleFamily.PURITY_S2: 1,
    EnsembleFamily.VC_PCA_S1: 2,
    EnsembleFamily.VC_PCA_S2: 2,
    EnsembleFamily.FISHER_S1: 2,
    EnsembleFamily.FISHER_S2: 2,
    EnsembleFamily.CLASS_CORR_CS1: 5,
    EnsembleFamily.CLASS_CORR_CS2: 5,
    EnsembleFamily.HAAR_PURE: 1,
    EnsembleFamily.RANDOM_RANK_R: 1,
}

_DECLARED_RANK = {
    EnsembleFamily.PURITY_S1: 2,
    EnsembleFamily.PURITY_S2: 2,
    EnsembleFamily.VC_PCA_S1: 3,
    EnsembleFamily.VC_PCA_S2: 3,
    EnsembleFamily.FISHER_S1: 3,
    EnsembleFamily.FISHER_S2: 3,
    EnsembleFamily.CLASS_CORR_CS1: 3,
    EnsembleFamily.CLASS_CORR_CS2: 3,
    EnsembleFamily.HAAR_PURE: 1,
}


@dataclass(frozen=True)
class EnsembleSpec:
    """Which family to draw from, at what size."""

    family: EnsembleFamily
    n: int
    rank: Optional[int] = None
    weights: Optional[tuple[float, ...]] = None
    seed: Optional[int] = None

    def __post_init__(self):
        family = EnsembleFamily(self.family)
        object.__setattr__(self, "family", family)
        if self.n < _MIN_QUBITS[family]:
            raise DomainError(f"{family.value} requires n >= {_MIN_QUBITS[family]}, got {self.n}")
        if family is EnsembleFamily.RANDOM_RANK_R:
            if self.rank is None or self.rank < 1:
                raise DomainError("random_rank_r requires rank >= 1")
            if self.rank > 2 ** self.n:
                raise DomainError(f"rank {self.rank} exceeds dimension {2 ** self.n}")
            if self.weights is None:
                raise DomainError("random_rank_r requires explicit weights")
            w = np.asarray(self.weights, dtype=float)
            if w.size != self.rank:
                raise ValidationError(f"{w.size} weights for rank {self.rank}")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValidationError("weights must be nonnegative and sum to 1 within 1e-12")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        elif self.weights is not None:
            raise DomainError("weights are only meaningful for random_rank_r")

    @property
    def declared_rank(self) -> int:
        if self.family is EnsembleFamily.RANDOM_RANK_R:
            return int(self.rank)
        return _DECLARED_RANK[self.family]

    def to_json(self) -> dict:
        return {
            "family": self.family.value,
            "n": self.n,
            "rank": self.rank,
            "weights": list(self.weights) if self.weights is not None else None,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(obj: dict | str) -> "EnsembleSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        weights = obj.get("weights")
        return EnsembleSpec(
            family=EnsembleFamily(obj["family"]),
            n=int(obj["n"]),
            rank=obj.get("rank"),
            weights=tuple(weights) if weights is not None else None,
            seed=obj.get("seed"),
        )


@dataclass(frozen=True)
class LabeledSample:
    """A drawn state plus the hidden randomness that produced it.

    The hidden record exists for oracle checks and scoring only; protocol
    code must not look at it.
    """

    rho: DensityMatrix
    hidden: dict
    label: EnsembleFamily


def _mixture(dim: int, parts: list[tuple[float, np.ndarray]]) -> np.ndarray:
    rho = np.zeros((dim, dim), dtype=complex)
    for weight, vector in parts:
        rho += weight * np.outer(vector, vector.conj())
    return rho


def _level_ket(level: int) -> np.ndarray:
    """Three-level register state embedded in two qubits (|00>, |01>, |10>)."""
    return basis_state(2, level)


def analytic_mean_purity(spec: EnsembleSpec) -> float:
    """Exact E[Tr rho^2] for a family, from the closed-form cross terms."""
    fam = spec.family
    if fam is EnsembleFamily.PURITY_S1:
        return 0.82 + 0.18 / 2 ** spec.n
    if fam is EnsembleFamily.PURITY_S2:
        return 0.5 + 0.5 / 2 ** spec.n
    if fam in (EnsembleFamily.VC_PCA_S1, EnsembleFamily.VC_PCA_S2):
        return 0.375
    if fam in (EnsembleFamily.FISHER_S1, EnsembleFamily.FISHER_S2):
        return 0.40625 + 0.09375 / 2 ** (spec.n - 1)
    if fam in (EnsembleFamily.CLASS_CORR_CS1, EnsembleFamily.CLASS_CORR_CS2):
        return 0.40625
    if fam is EnsembleFamily.HAAR_PURE:
        return 1.0
    return float(np.sum(np.asarray(spec.weights) ** 2))


def sample_ensemble(
    spec: EnsembleSpec,
    rng: np.random.Generator,
    *,
    force_orthogonal: bool = False,
) -> LabeledSample:
    """Draw one state from the family.

    ``force_orthogonal`` constrains the two Haar components of the purity
    families to be exactly orthogonal, pinning the closed-form purity.
    """
    fam = spec.family
    n = spec.n
    dim = 2 ** n

    if fam in (EnsembleFamily.PURITY_S1, EnsembleFamily.PURITY_S2):
        u = _haar_vector(dim, rng)
        v = _haar_vector(dim, rng)
        if force_orthogonal:
            v = v - u * (u.conj() @ v)
            v = v / np.linalg.norm(v)
        w0 = 0.9 if fam is EnsembleFamily.PURITY_S1 else 0.5
        parts = [(w0, u), (1.0 - w0, v)]
        rho = _mixture(dim, parts)
        hidden = {"u": u, "v": v}

    elif fam in (EnsembleFamily.VC_PCA_S1, EnsembleFamily.VC_PCA_S2):
        psi1 = _haar_vector(2 ** (n - 1), rng)
        psi2 = _haar_vector(2 ** (n - 2), rng)
        psi3 = _haar_vector(2 ** (n - 2), rng)
        e0 = np.array([1, 0], dtype=complex)
        e1 = np.array([0, 1], dtype=complex)
        flag0 = e0 if fam is EnsembleFamily.VC_PCA_S1 else e1
        flag1 = e1 if fam is EnsembleFamily.VC_PCA_S1 else e0
        parts = [
            (0.5, np.kron(flag0, psi1)),
            (0.25, np.kron(flag1, np.kron(e0, psi2))),
            (0.25, np.kron(flag1, np.kron(e1, psi3))),
        ]
        rho = _mixture(dim, parts)
        hidden = {"psi1": psi1, "psi2": psi2, "psi3": psi3}

    elif fam in (EnsembleFamily.FISHER_S1, EnsembleFamily.FISHER_S2):
        u = _haar_vector(2 ** (n - 1), rng)
        v = _haar_vector(2 ** (n - 1), rng)
        if fam is EnsembleFamily.FISHER_S1:
            a, b = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
        else:
            a, b = _PLUS, _MINUS
        parts = [
            (0.5, np.kron(a, u)),
            (0.375, np.kron(b, u)),
            (0.125, np.kron(b, v)),
        ]
        rho = _mixture(dim, parts)
        hidden = {"u": u, "v": v}

    elif fam in (EnsembleFamily.CLASS_CORR_CS1, EnsembleFamily.CLASS_CORR_CS2):
        u = _haar_vector(2 ** (n - 4), rng)
        v = _haar_vector(2 ** (n - 4), rng)
        mid = u if fam is EnsembleFamily.CLASS_CORR_CS1 else v
        parts = [
            (0.5, kron_all(_level_ket(0), _level_ket(0), u).ravel()),
            (0.375, kron_all(_level_ket(1), _level_ket(1), mid).ravel()),
            (0.125, kron_all(_level_ket(2), _level_ket(2), v).ravel()),
        ]
        rho = _mixture(dim, parts)
        hidden = {"u": u, "v": v}

    elif fam is EnsembleFamily.HAAR_PURE:
        u = _haar_vector(dim, rng)
        parts = [(1.0, u)]
        rho = _mixture(dim, parts)
        hidden = {"u": u}

    else:  # RANDOM_RANK_R
        r = spec.rank
        z = rng.standard_normal((dim, r)) + 1j * rng.standard_normal((dim, r))
        q, rr = np.linalg.qr(z)
        q = q * (np.diagonal(rr) / np.abs(np.diagonal(rr)))
        weights = np.asarray(spec.weights, dtype=float)
        parts = [(float(w), q[:, i]) for i, w in enumerate(weights)]
        rho = _mixture(dim, parts)
        hidden = {"frame": q}

    hidden["weights"] = tuple(w for w, _ in parts)
    hidden["components"] = tuple(vec for _, vec in parts)
    return LabeledSample(DensityMatrix(rho, n), hidden, fam)


def purify(rho: DensityMatrix, nB: int) -> PureState:
    """Canonical purification with the B side in the computational basis.

    The j-th nonzero eigenvalue (descending) pairs its eigenvector with
    the B basis ket |j>, so Schmidt round trips are deterministic.
    """
    if nB < 0:
        raise DomainError("ancilla count must be nonnegative")
    spec = rho.spectral()
    r = spec.rank
    if 2 ** nB < r:
        raise CapacityError(f"2**{nB} ancilla levels cannot hold rank {r}")
    lam = np.clip(spec.eigenvalues[:r], 0.0, None)
    dB = 2 ** nB
    amps = np.zeros(rho.dim * dB, dtype=complex)
    for j in range(r):
        amps += np.sqrt(lam[j]) * np.kron(spec.eigenvectors[:, j], _unit(dB, j))
    amps = amps / np.linalg.norm(amps)
    return PureState(amps, rho.n, nB)


def _unit(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def classical_correlate(rho: DensityMatrix, nB: int) -> DensityMatrix:
    """Incoherent counterpart of the canonical purification.

    Returns sum_j lambda_j |psi_j><psi_j| (x) |j><j|_B, which shares every
    marginal with the purification but carries no cross-basis coherence.
    """
    spec = rho.spectral()
    r = spec.rank
    if 2 ** nB < r:
        raise CapacityError(f"2**{nB} ancilla levels cannot hold rank {r}")
    lam = np.clip(spec.eigenvalues[:r], 0.0, None)
    lam = lam / lam.sum()
    dB = 2 ** nB
    out = np.zeros((rho.dim * dB, rho.dim * dB), dtype=complex)
    for j in range(r):
        proj_a = np.outer(spec.eigenvectors[:, j], spec.eigenvectors[:, j].conj())
        proj_b = np.zeros((dB, dB), dtype=complex)
        proj_b[j, j] = 1.0
        out += lam[j] * np.kron(proj_a, proj_b)
    return DensityMatrix(out, rho.n + nB)


def verification_state(alpha: float, u_prep: np.ndarray, v_prep: np.ndarray) -> PureState:
    """Client-side state alpha |u>|0>_B + sqrt(1-alpha^2) |v>|1>_B.

    ``u_prep`` and ``v_prep`` are the two same-dimension payload unitaries
    (or already-prepared column vectors); the single B qubit records which
    branch was taken, so the A marginal is the two-term mixture with
    weights alpha^2 and 1 - alpha^2.
    """
    if not 0.0 <= abs(alpha) <= 1.0:
        raise DomainError(f"alpha {alpha} must satisfy |alpha| <= 1")
    u = np.asarray(u_prep, dtype=complex)
    v = np.asarray(v_prep, dtype=complex)
    u_col = u[:, 0] if u.ndim == 2 else u
    v_col = v[:, 0] if v.ndim == 2 else v
    if u_col.shape != v_col.shape:
        raise DimensionError(f"branch dimensions differ: {u_col.shape} vs {v_col.shape}")
    d = u_col.size
    nA = int(np.log2(d))
    if 2 ** nA != d:
        raise DimensionError(f"payload dimension {d} is not a power of two")
    beta = np.sqrt(max(0.0, 1.0 - alpha ** 2))
    amps = alpha * np.kron(u_col, _unit(2, 0)) + beta * np.kron(v_col, _unit(2, 1))
    amps = amps / np.linalg.norm(amps)
    return PureState(amps, nA, 1)
