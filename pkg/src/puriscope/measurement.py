"""Finite-shot measurement simulation: Born sampling, tomography, purity.

Everything here consumes exact state objects and an explicit generator;
shot noise is the only randomness, so every estimator is reproducible
given (inputs, seed).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .core import (
    DensityMatrix,
    HADAMARD,
    Observable,
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    PureState,
    StateLike,
    eigh,
)
from .ensembles import haar_unitary
from .errors import DimensionError, DomainError, GuardError, InsufficientDataError, ValidationError

_PAULI_STACK = np.stack([PAULI_I, PAULI_X, PAULI_Y, PAULI_Z])
_EIGENBASIS = {
    "X": HADAMARD,
    "Y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
    "Z": np.eye(2, dtype=complex),
}
_LETTER_INDEX = {"I": 0, "X": 1, "Y": 2, "Z": 3}


@dataclass(frozen=True)
class ShotBudget:
    """How many measurement shots each protocol stage may consume."""

    tomography_shots: int = 0
    observable_shots: int = 0
    unitaries: int = 0
    shots_per_unitary: int = 0

    def __post_init__(self):
        values = (
            self.tomography_shots,
            self.observable_shots,
            self.unitaries,
            self.shots_per_unitary,
        )
        if any(v < 0 for v in values):
            raise ValidationError("shot counts must be nonnegative")
        if all(v == 0 for v in values):
            raise ValidationError("at least one stage needs a positive budget")

    @property
    def total(self) -> int:
        return self.tomography_shots + self.observable_shots + self.unitaries * self.shots_per_unitary

    @staticmethod
    def split(total: int, tomography_fraction: float = 0.5) -> "ShotBudget":
        """Two-stage budget with the default 50/50 tomography/observable split."""
        if total < 2:
            raise DomainError("total budget must be at least 2")
        tomo = int(round(total * tomography_fraction))
        tomo = min(max(tomo, 1), total - 1)
        return ShotBudget(tomography_shots=tomo, observable_shots=total - tomo)


def born_probabilities(state: StateLike, basis: np.ndarray) -> np.ndarray:
    """Outcome probabilities for measuring in the given orthonormal basis."""
    basis = np.asarray(basis, dtype=complex)
    if basis.shape[0] != state.dim:
        raise DimensionError(f"basis dimension {basis.shape[0]} != state dimension {state.dim}")
    if isinstance(state, PureState):
        p = np.abs(basis.conj().T @ state.amplitudes) ** 2
    else:
        spec = state.spectral()
        r = max(spec.rank, 1)
        overlaps = np.abs(basis.conj().T @ spec.eigenvectors[:, :r]) ** 2
        p = overlaps @ np.clip(spec.eigenvalues[:r], 0.0, None)
    p = np.clip(p.real, 0.0, None)
    return p / p.sum()


def measure_in_basis(
    state: StateLike, basis: np.ndarray, shots: int, rng: np.random.Generator
) -> np.ndarray:
    """Histogram of computational outcomes after rotating into ``basis``.

    Returns an integer array of length 2**n whose entries sum to ``shots``.
    """
    if shots < 1:
        raise DomainError("shots must be >= 1")
    probs = born_probabilities(state, basis)
    return rng.multinomial(shots, probs)


def histogram_to_json(counts: np.ndarray) -> dict[str, int]:
    """Bitstring-keyed JSON object for an outcome histogram."""
    counts = np.asarray(counts)
    n = int(np.log2(counts.size))
    return {format(k, f"0{n}b"): int(c) for k, c in enumerate(counts) if c}


def _observable_counts(
    state: StateLike, observable: Observable, shots: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    spec = observable.spectral()
    counts = measure_in_basis(state, spec.eigenvectors, shots, rng)
    return spec.eigenvalues, counts


def measure_observable(
    state: StateLike,
    observable: Union[Observable, np.ndarray],
    shots: int,
    rng: np.random.Generator,
) -> float:
    """Empirical mean of eigenvalue outcomes sampled in the observable's eigenbasis."""
    if not isinstance(observable, Observable):
        observable = Observable(observable)
    if observable.dim != state.dim:
        raise DimensionError(
            f"observable dimension {observable.dim} != state dimension {state.dim}"
        )
    if shots < 1:
        raise DomainError("shots must be >= 1")
    values, counts = _observable_counts(state, observable, shots, rng)
    return float(counts @ values / shots)


def measure_observable_with_stderr(
    state: StateLike,
    observable: Union[Observable, np.ndarray],
    shots: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Mean and standard error of the shot-sampled observable estimate."""
    if not isinstance(observable, Observable):
        observable = Observable(observable)
    if observable.dim != state.dim:
        raise DimensionError("dimension mismatch")
    if shots < 1:
        raise DomainError("shots must be >= 1")
    values, counts = _observable_counts(state, observable, shots, rng)
    mean = float(counts @ values / shots)
    second = float(counts @ (values ** 2) / shots)
    var = max(second - mean ** 2, 0.0)
    return mean, float(np.sqrt(var / shots))


@dataclass(frozen=True)
class TomographyResult:
    """PSD-projected state estimate plus the raw data that produced it."""

    estimate: DensityMatrix
    raw_shots: int
    basis_settings: int
    linear_inversion: np.ndarray = field(repr=False)
    settings: tuple[str, ...] = field(repr=False)
    setting_counts: tuple[np.ndarray, ...] = field(repr=False)


def _setting_basis(setting: str) -> np.ndarray:
    basis = np.array([[1.0 + 0j]])
    for letter in setting:
        basis = np.kron(basis, _EIGENBASIS[letter])
    return basis


def _sign_table(m: int) -> np.ndarray:
    """signs[i, k] = (-1)**bit_i(k) for outcomes k of an m-qubit register."""
    outcomes = np.arange(2 ** m)
    return np.array([1 - 2 * ((outcomes >> (m - 1 - i)) & 1) for i in range(m)], dtype=float)


def _counts_to_estimate(
    settings: Sequence[str], counts_list: Sequence[np.ndarray], m: int
) -> tuple[np.ndarray, np.ndarray]:
    """Average Pauli expectations across settings and invert to a matrix."""
    d = 2 ** m
    signs = _sign_table(m)
    sums: dict[tuple[int, ...], float] = {}
    hits: dict[tuple[int, ...], int] = {}
    subsets = [s for s in itertools.product((0, 1), repeat=m) if any(s)]
    for setting, counts in zip(settings, counts_list):
        total = counts.sum()
        if total == 0:
            continue
        letters = [_LETTER_INDEX[c] for c in setting]
        for subset in subsets:
            prod = np.ones(d)
            for i, take in enumerate(subset):
                if take:
                    prod = prod * signs[i]
            key = tuple(letters[i] if subset[i] else 0 for i in range(m))
            value = float(counts @ prod / total)
            sums[key] = sums.get(key, 0.0) + value
            hits[key] = hits.get(key, 0) + 1

    coeffs = np.zeros((4,) * m)
    coeffs[(0,) * m] = 1.0
    for key, total in sums.items():
        coeffs[key] = total / hits[key]

    tensor = coeffs.astype(complex)
    for _ in range(m):
        tensor = np.tensordot(tensor, _PAULI_STACK, axes=(0, 0))
    perm = list(range(0, 2 * m, 2)) + list(range(1, 2 * m, 2))
    raw = tensor.transpose(perm).reshape(d, d) / d

    spec = eigh((raw + raw.conj().T) / 2)
    clipped = np.clip(spec.eigenvalues, 0.0, None)
    clipped = clipped / clipped.sum()
    projected = (spec.eigenvectors * clipped) @ spec.eigenvectors.conj().T
    return raw, projected


def tomography(
    state: StateLike,
    shots: int,
    rng: np.random.Generator,
    *,
    max_dim: int = 64,
) -> TomographyResult:
    """Pauli-basis linear-inversion tomography with PSD projection.

    Shots are split evenly over the 3**m product-Pauli settings; the raw
    linear-inversion matrix is kept alongside the projected estimate so
    callers can bootstrap derived functionals.
    """
    m = state.n
    d = state.dim
    if d > max_dim:
        raise GuardError(f"dimension {d} exceeds the tomography guard {max_dim}")
    if shots < d ** 2:
        raise InsufficientDataError(f"{shots} shots below the d^2 = {d ** 2} floor")
    settings = ["".join(s) for s in itertools.product("XYZ", repeat=m)]
    per, extra = divmod(shots, len(settings))
    counts_list = []
    for k, setting in enumerate(settings):
        basis = _setting_basis(setting)
        n_shots = per + (1 if k < extra else 0)
        if n_shots == 0:
            counts_list.append(np.zeros(d, dtype=int))
            continue
        counts_list.append(measure_in_basis(state, basis, n_shots, rng))
    raw, projected = _counts_to_estimate(settings, counts_list, m)
    return TomographyResult(
        estimate=DensityMatrix(projected, m),
        raw_shots=shots,
        basis_settings=len(settings),
        linear_inversion=raw,
        settings=tuple(settings),
        setting_counts=tuple(counts_list),
    )


def bootstrap_stderr(
    result: TomographyResult,
    functional: Callable[[DensityMatrix], float],
    rng: np.random.Generator,
    resamples: int = 200,
) -> float:
    """Nonparametric bootstrap of a tomography-derived scalar.

    Resamples each setting's outcome counts multinomially and recomputes
    the functional on the re-projected estimate.
    """
    m = result.estimate.n
    values = np.empty(resamples)
    for b in range(resamples):
        resampled = []
        for counts in result.setting_counts:
            total = int(counts.sum())
            if total == 0:
                resampled.append(counts)
                continue
            resampled.append(rng.multinomial(total, counts / total))
        _, projected = _counts_to_estimate(result.settings, resampled, m)
        values[b] = functional(DensityMatrix(projected, m))
    return float(values.std(ddof=1))


def _haar_frame_probs(
    weights: np.ndarray, d: int, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Outcome probabilities of ``count`` Haar-basis measurements of a rank-r state.

    Rotating the measurement basis by Haar U is distributionally the same
    as rotating the state's support frame, so a d x r Ginibre QR per
    setting replaces the full d x d unitary.
    """
    r = weights.size
    z = rng.standard_normal((count, d, r)) + 1j * rng.standard_normal((count, d, r))
    q, _ = np.linalg.qr(z)
    probs = np.abs(q) ** 2 @ weights
    return probs / probs.sum(axis=1, keepdims=True)


def _rm_purity_estimates(
    state: StateLike,
    unitaries: int,
    shots_per_unitary: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-unitary unbiased purity estimates from the collision U-statistic."""
    if unitaries < 2:
        raise DomainError("need at least 2 random unitaries")
    if shots_per_unitary < 2:
        raise InsufficientDataError("the pair statistic needs at least 2 shots per unitary")
    d = state.dim
    m = shots_per_unitary

    if isinstance(state, PureState):
        weights = np.array([1.0])
        low_rank = True
    else:
        spec = state.spectral()
        r = max(spec.rank, 1)
        weights = np.clip(spec.eigenvalues[:r], 0.0, None)
        weights = weights / weights.sum()
        low_rank = r <= d // 2
    if low_rank:
        probs = _haar_frame_probs(weights, d, unitaries, rng)
        counts = np.empty((unitaries, d), dtype=np.int64)
        for k in range(unitaries):
            counts[k] = rng.multinomial(m, probs[k])
        collisions = ((counts * counts).sum(axis=1) - m) / (m * (m - 1))
        return (d + 1) * collisions - 1.0

    estimates = np.empty(unitaries)
    for k in range(unitaries):
        u = haar_unitary(d, rng)
        counts_k = measure_in_basis(state, u, m, rng)
        collisions = (counts_k @ counts_k - m) / (m * (m - 1))
        estimates[k] = (d + 1) * collisions - 1.0
    return estimates


def randomized_measurement_purity(
    state: StateLike,
    unitaries: int,
    shots_per_unitary: int,
    rng: np.random.Generator,
) -> float:
    """Single-copy purity estimate from global Haar randomized measurements.

    For a global Haar basis the collision probability averages to
    (1 + Tr rho^2) / (d + 1), so the pair-coincidence U-statistic gives an
    unbiased purity estimator; its spread carries the sqrt(d) cost.
    """
    return float(_rm_purity_estimates(state, unitaries, shots_per_unitary, rng).mean())
