"""Purification-assisted estimators for moments, cooling, PCA, and QFI.

Each protocol has two faces: an exact identity check (the steering
relations that make the small B register carry the A-side spectrum) and a
finite-shot estimator that performs tomography on B followed by one
observable measurement on the full purified register.  All estimators are
pure functions of (inputs, seed).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .core import (
    DensityMatrix,
    Observable,
    PureState,
    matrix_power_trace,
    partial_trace,
    steered_operator,
    trace_norm,
)
from .ensembles import child_rng
from .errors import DomainError, GapError, GuardError, InsufficientDataError, PreconditionError
from .measurement import (
    ShotBudget,
    bootstrap_stderr,
    measure_observable_with_stderr,
    tomography,
)
from .reports import EstimatorReport

ANCILLA_GUARD = 3
MOMENT_GUARD = 6
OBSERVABLE_NORM_GUARD = 10.0
DEFAULT_MIN_GAP = 0.05
DEFAULT_MIN_EIGENVALUE = 0.05


class PurificationIdentity(str, Enum):
    """The four exact relations between a purification and its marginals."""

    MARGINAL_PURITY = "marginal_purity"
    MOMENT_STEERING = "moment_steering"
    PRINCIPAL_STEERING = "principal_steering"
    CROSS_STEERING = "cross_steering"


JointState = Union[PureState, DensityMatrix]


def _joint_marginals(state: JointState, nA: Optional[int]) -> tuple[DensityMatrix, DensityMatrix, int, int]:
    if isinstance(state, PureState):
        if state.nB < 1:
            raise DomainError("identity checks need a bipartite register (nB >= 1)")
        nA, nB = state.nA, state.nB
        return partial_trace(state, "A"), partial_trace(state, "B"), nA, nB
    if nA is None:
        raise DomainError("a DensityMatrix joint state needs an explicit nA split")
    nB = state.n - nA
    if nA < 1 or nB < 1:
        raise DomainError("split must leave at least one qubit on each side")
    rho_a = partial_trace(state, range(nA))
    rho_b = partial_trace(state, range(nA, state.n))
    return rho_a, rho_b, nA, nB


def _steer(state: JointState, nA: int, nB: int, b_operator: np.ndarray) -> np.ndarray:
    """Tr_B[ state (I_A (x) M_B) ] for pure or mixed joint states."""
    if isinstance(state, PureState):
        return steered_operator(state, b_operator)
    dA, dB = 2 ** nA, 2 ** nB
    t = state.matrix.reshape(dA, dB, dA, dB)
    return np.einsum("abcd,db->ac", t, np.asarray(b_operator, dtype=complex))


def bipartite_expectation(psi: PureState, a_operator: np.ndarray, b_operator: np.ndarray) -> float:
    """<psi| A (x) B |psi> without forming the Kronecker product."""
    c = psi.as_matrix()
    x = c.conj().T @ (np.asarray(a_operator, dtype=complex) @ c)
    return float(np.real(np.sum(x * np.asarray(b_operator, dtype=complex))))


def bipartite_expectation_mixed(
    rho_joint: DensityMatrix, nA: int, a_operator: np.ndarray, b_operator: np.ndarray
) -> float:
    """Tr[ rho (A (x) B) ] for an explicitly stored joint density matrix."""
    dA = 2 ** nA
    dB = rho_joint.dim // dA
    t = rho_joint.matrix.reshape(dA, dB, dA, dB)
    val = np.einsum(
        "abcd,ca,db->",
        t,
        np.asarray(a_operator, dtype=complex),
        np.asarray(b_operator, dtype=complex),
    )
    return float(np.real(val))


def oracle_identity_check(
    state: JointState,
    kind: PurificationIdentity,
    *,
    t: int = 2,
    observable: Optional[Observable] = None,
    pair: tuple[int, int] = (0, 1),
    nA: Optional[int] = None,
    rank_tol: float = 1e-9,
) -> float:
    """Exact deviation between the two sides of a steering identity.

    Returns a trace-norm (or absolute-value) residual computed with exact
    linear algebra; shot noise never enters.  ``observable`` is unused by
    the identities themselves but accepted so callers can sweep one
    configuration object.
    """
    kind = PurificationIdentity(kind)
    rho_a, rho_b, nA, nB = _joint_marginals(state, nA)

    if kind is PurificationIdentity.MARGINAL_PURITY:
        return abs(rho_a.purity() - rho_b.purity())

    if kind is PurificationIdentity.MOMENT_STEERING:
        if t < 1:
            raise DomainError("moment order must be >= 1")
        spec_b = rho_b.spectral()
        power = (spec_b.eigenvectors * np.clip(spec_b.eigenvalues, 0, None) ** (t - 1)) @ spec_b.eigenvectors.conj().T
        lhs = _steer(state, nA, nB, power)
        spec_a = rho_a.spectral()
        rhs = (spec_a.eigenvectors * np.clip(spec_a.eigenvalues, 0, None) ** t) @ spec_a.eigenvectors.conj().T
        return trace_norm(lhs - rhs)

    spec_b = rho_b.spectral(rank_tol)
    if kind is PurificationIdentity.PRINCIPAL_STEERING:
        if spec_b.gap <= rank_tol:
            raise GapError(f"principal eigenvalue is degenerate (gap {spec_b.gap})")
        lam0 = spec_b.eigenvalues[0]
        psi_b0 = spec_b.eigenvectors[:, 0]
        lhs = _steer(state, nA, nB, np.outer(psi_b0, psi_b0.conj())) / lam0
        spec_a = rho_a.spectral(rank_tol)
        psi_a0 = spec_a.eigenvectors[:, 0]
        rhs = np.outer(psi_a0, psi_a0.conj())
        return trace_norm(lhs - rhs)

    # Cross steering: reconstruct |psi_A^k><psi_A^j| from a B-side flip.
    j, k = pair
    r = spec_b.rank
    if not (0 <= j < r and 0 <= k < r and j != k):
        raise DomainError(f"pair {pair} must name two distinct nonzero eigenvalues (rank {r})")
    lam_j, lam_k = spec_b.eigenvalues[j], spec_b.eigenvalues[k]
    flip = np.outer(spec_b.eigenvectors[:, j], spec_b.eigenvectors[:, k].conj())
    lhs = _steer(state, nA, nB, flip) / np.sqrt(lam_j * lam_k)
    spec_a = rho_a.spectral(rank_tol)
    rhs = np.outer(spec_a.eigenvectors[:, k], spec_a.eigenvectors[:, j].conj())
    # The A-side eigenvectors carry their own phase convention; align the
    # one free global phase before differencing.
    overlap = np.trace(rhs.conj().T @ lhs)
    if abs(overlap) > 1e-14:
        rhs = rhs * (overlap / abs(overlap))
    return trace_norm(lhs - rhs)


def _guard_psi(psi: PureState):
    if psi.nB < 1:
        raise DomainError("purification estimators need nB >= 1")
    if psi.nB > ANCILLA_GUARD:
        raise GuardError(f"nB = {psi.nB} exceeds the desk-scale guard {ANCILLA_GUARD}")


def _guard_observable(observable: Observable, dim: int):
    if observable.dim != dim:
        raise DomainError(f"observable dimension {observable.dim} does not match payload {dim}")
    if observable.spectral_norm > OBSERVABLE_NORM_GUARD:
        raise GuardError(
            f"observable norm {observable.spectral_norm} exceeds guard {OBSERVABLE_NORM_GUARD}"
        )


def _matrix_power(dm: DensityMatrix, t: int) -> np.ndarray:
    spec = dm.spectral()
    w = np.clip(spec.eigenvalues, 0.0, None) ** t
    return (spec.eigenvectors * w) @ spec.eigenvectors.conj().T


def estimate_moment(psi: PureState, t: int, budget: ShotBudget, seed: int) -> EstimatorReport:
    """Estimate Tr(rho_A^t) by tomographing the small marginal.

    The spectra of the two marginals agree, so the full estimate is the
    classical moment of the reconstructed B state; no A-side measurement
    is needed and the cost is independent of nA.
    """
    _guard_psi(psi)
    if not 2 <= t <= MOMENT_GUARD:
        raise DomainError(f"moment order t={t} outside [2, {MOMENT_GUARD}]")
    rho_b = partial_trace(psi, "B")
    tomo = tomography(rho_b, budget.tomography_shots, child_rng(seed, 0))
    value = matrix_power_trace(tomo.estimate, t)
    truth = matrix_power_trace(partial_trace(psi, "A"), t)
    stderr = bootstrap_stderr(tomo, lambda dm: matrix_power_trace(dm, t), child_rng(seed, 2))
    return EstimatorReport(
        value=value,
        truth=truth,
        shots_used={"tomography": budget.tomography_shots},
        stderr=stderr,
        seed=seed,
    )


def estimate_virtual_cooling(
    psi: PureState,
    observable: Observable,
    t: int,
    budget: ShotBudget,
    seed: int,
) -> EstimatorReport:
    """Estimate Tr(O rho_A^t) via the B-side power trick.

    Stage 1 reconstructs rho_B; stage 2 measures O (x) rho_B_hat^(t-1) on
    the purified register, whose exact expectation is the target.
    """
    _guard_psi(psi)
    if not 2 <= t <= MOMENT_GUARD:
        raise DomainError(f"moment order t={t} outside [2, {MOMENT_GUARD}]")
    _guard_observable(observable, 2 ** psi.nA)

    rho_b = partial_trace(psi, "B")
    tomo = tomography(rho_b, budget.tomography_shots, child_rng(seed, 0))
    power = _matrix_power(tomo.estimate, t - 1)
    composite = np.kron(observable.matrix, power)
    value, se_shot = measure_observable_with_stderr(
        psi, composite, budget.observable_shots, child_rng(seed, 1)
    )

    spec_a = partial_trace(psi, "A").spectral()
    w = np.clip(spec_a.eigenvalues, 0.0, None) ** t
    diag = np.real(np.einsum("ij,jk,ki->i", spec_a.eigenvectors.conj().T, observable.matrix, spec_a.eigenvectors))
    truth = float(w @ diag)

    se_stage1 = bootstrap_stderr(
        tomo,
        lambda dm: bipartite_expectation(psi, observable.matrix, _matrix_power(dm, t - 1)),
        child_rng(seed, 2),
    )
    return EstimatorReport(
        value=value,
        truth=truth,
        shots_used={"tomography": budget.tomography_shots, "observable": budget.observable_shots},
        stderr=float(np.hypot(se_shot, se_stage1)),
        seed=seed,
    )


def estimate_pca(
    psi: PureState,
    observable: Observable,
    budget: ShotBudget,
    seed: int,
    *,
    min_gap: float = DEFAULT_MIN_GAP,
) -> EstimatorReport:
    """Estimate Tr(O psi_A^0), the observable on the principal component.

    Requires the marginal spectral gap to clear ``min_gap``, mirroring the
    protocol's Theta(1)-gap assumption; the estimate divides the measured
    steering expectation by the reconstructed top eigenvalue.
    """
    _guard_psi(psi)
    _guard_observable(observable, 2 ** psi.nA)

    rho_b = partial_trace(psi, "B")
    exact_gap = rho_b.spectral().gap
    if exact_gap < min_gap:
        raise GapError(f"spectral gap {exact_gap:.4f} below the required {min_gap}")

    tomo = tomography(rho_b, budget.tomography_shots, child_rng(seed, 0))
    spec_hat = tomo.estimate.spectral()
    lam0_hat = float(spec_hat.eigenvalues[0])
    psi0_hat = spec_hat.eigenvectors[:, 0]
    projector = np.outer(psi0_hat, psi0_hat.conj())
    composite = np.kron(observable.matrix, projector)
    raw, se_shot = measure_observable_with_stderr(
        psi, composite, budget.observable_shots, child_rng(seed, 1)
    )
    value = raw / lam0_hat

    spec_a = partial_trace(psi, "A").spectral()
    psi_a0 = spec_a.eigenvectors[:, 0]
    truth = float(np.real(psi_a0.conj() @ (observable.matrix @ psi_a0)))

    def stage1(dm: DensityMatrix) -> float:
        s = dm.spectral()
        p = np.outer(s.eigenvectors[:, 0], s.eigenvectors[:, 0].conj())
        return bipartite_expectation(psi, observable.matrix, p) / float(s.eigenvalues[0])

    se_stage1 = bootstrap_stderr(tomo, stage1, child_rng(seed, 2))
    return EstimatorReport(
        value=value,
        truth=truth,
        shots_used={"tomography": budget.tomography_shots, "observable": budget.observable_shots},
        stderr=float(np.hypot(se_shot / lam0_hat, se_stage1)),
        seed=seed,
    )


@dataclass(frozen=True)
class QfiTermTable:
    """Per-pair bookkeeping of the reformulated Fisher-information sum.

    Each row holds (j, k, lambda_j, lambda_k, prefactor, eigenstate_factor)
    for an unordered pair of nonzero eigenvalues; the total multiplies each
    row by 2 to cover both orderings.
    """

    pairs: tuple[tuple[int, int, float, float, float, float], ...]
    support_rank: int

    def total(self) -> float:
        return float(sum(2.0 * row[4] * row[5] for row in self.pairs))

    def to_json(self) -> dict:
        return {
            "support_rank": self.support_rank,
            "pairs": [list(row) for row in self.pairs],
        }


def _qfi_prefactor(lam_j: float, lam_k: float) -> float:
    return (lam_j - lam_k) ** 2 / (lam_j * lam_k * (lam_j + lam_k))


def flip_observables(vec_j: np.ndarray, vec_k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The Hermitian pair (|j><k| + h.c., i|j><k| + h.c.) for one eigenpair."""
    raw = np.outer(vec_j, vec_k.conj())
    plus = raw + raw.conj().T
    minus = 1j * raw + (1j * raw).conj().T
    return plus, minus


def eigenstate_factor_exact(
    psi: PureState, observable: Observable, vec_j: np.ndarray, vec_k: np.ndarray
) -> float:
    """Infinite-shot value of the two-copy eigenstate factor.

    The tensor decomposition turns the two-copy expectation into the two
    single-copy expectations M+ and M-, combined as (M+^2 + M-^2) / 2.
    """
    plus, minus = flip_observables(vec_j, vec_k)
    m_plus = bipartite_expectation(psi, observable.matrix, plus)
    m_minus = bipartite_expectation(psi, observable.matrix, minus)
    return 0.5 * (m_plus ** 2 + m_minus ** 2)


def eigenstate_factor_incoherent(
    rho_joint: DensityMatrix,
    nA: int,
    observable: Observable,
    vec_j: np.ndarray,
    vec_k: np.ndarray,
) -> float:
    """Same product construction evaluated on a classically correlated state."""
    plus, minus = flip_observables(vec_j, vec_k)
    m_plus = bipartite_expectation_mixed(rho_joint, nA, observable.matrix, plus)
    m_minus = bipartite_expectation_mixed(rho_joint, nA, observable.matrix, minus)
    return 0.5 * (m_plus ** 2 + m_minus ** 2)


def qfi_oracle(rho: DensityMatrix, observable: Observable, mode: str = "support_only") -> float:
    """Exact quantum Fisher information from the spectral decomposition.

    ``full`` sums every eigenpair including the null space (a support/null
    pair contributes lambda_j |<j|O|k>|^2 per ordering); ``support_only``
    restricts to pairs of nonzero eigenvalues, which is exactly the reach
    of the purification-assisted reformulation.
    """
    if mode not in ("full", "support_only"):
        raise DomainError(f"unknown mode {mode!r}")
    spec = rho.spectral()
    lam = np.clip(spec.eigenvalues, 0.0, None)
    d = lam.size
    tol = spec.rank_tol * max(lam.max(), 1e-300)
    mat = spec.eigenvectors.conj().T @ observable.matrix @ spec.eigenvectors
    num = (lam[:, None] - lam[None, :]) ** 2
    den = lam[:, None] + lam[None, :]
    ratio = np.divide(num, den, out=np.zeros((d, d)), where=den > tol)
    if mode == "support_only":
        keep = lam > tol
        ratio = ratio * np.outer(keep, keep)
    return float(2.0 * np.sum(ratio * np.abs(mat) ** 2))


def qfi_support_pairs(rank: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(rank), 2))


def estimate_qfi(
    psi: PureState,
    observable: Observable,
    budget: ShotBudget,
    seed: int,
    *,
    min_eigenvalue: float = DEFAULT_MIN_EIGENVALUE,
    min_gap: float = DEFAULT_MIN_GAP,
) -> EstimatorReport:
    """Estimate the support-restricted QFI from single-copy measurements.

    After B-side tomography, each nonzero eigenpair contributes a
    prefactor from the reconstructed eigenvalues times an eigenstate
    factor measured through the two flip observables; unordered pairs
    enter with multiplicity 2.  The report's truth is the support-QFI
    oracle, with the full-QFI oracle recorded separately because the
    protocol cannot see support/null cross terms.
    """
    _guard_psi(psi)
    _guard_observable(observable, 2 ** psi.nA)

    rho_b = partial_trace(psi, "B")
    spec_exact = rho_b.spectral()
    r = spec_exact.rank
    lam_exact = spec_exact.eigenvalues[:r]
    for j in range(r):
        if lam_exact[j] < min_eigenvalue:
            raise PreconditionError(
                f"eigenvalue {j} = {lam_exact[j]:.4f} below the floor {min_eigenvalue}"
            )
        for k in range(j + 1, r):
            if abs(lam_exact[j] - lam_exact[k]) < min_gap:
                raise PreconditionError(
                    f"eigenvalue pair ({j}, {k}) separated by "
                    f"{abs(lam_exact[j] - lam_exact[k]):.4f} < {min_gap}"
                )

    pairs = qfi_support_pairs(r)
    tomo = tomography(rho_b, budget.tomography_shots, child_rng(seed, 0))
    spec_hat = tomo.estimate.spectral()

    n_meas = max(2 * len(pairs), 1)
    shots_each = budget.observable_shots // n_meas
    if pairs and shots_each < 1:
        raise InsufficientDataError(
            f"{budget.observable_shots} observable shots cannot cover {n_meas} measurements"
        )

    rows = []
    total = 0.0
    var_total = 0.0
    rng_obs = child_rng(seed, 1)
    for j, k in pairs:
        lam_j = float(spec_hat.eigenvalues[j])
        lam_k = float(spec_hat.eigenvalues[k])
        prefactor = _qfi_prefactor(lam_j, lam_k)
        plus, minus = flip_observables(spec_hat.eigenvectors[:, j], spec_hat.eigenvectors[:, k])
        m_plus, se_plus = measure_observable_with_stderr(
            psi, np.kron(observable.matrix, plus), shots_each, rng_obs
        )
        m_minus, se_minus = measure_observable_with_stderr(
            psi, np.kron(observable.matrix, minus), shots_each, rng_obs
        )
        factor = 0.5 * (m_plus ** 2 + m_minus ** 2)
        rows.append((j, k, lam_j, lam_k, prefactor, factor))
        total += 2.0 * prefactor * factor
        var_total += (2.0 * prefactor * m_plus * se_plus) ** 2
        var_total += (2.0 * prefactor * m_minus * se_minus) ** 2

    rho_a = partial_trace(psi, "A")
    truth = qfi_oracle(rho_a, observable, "support_only")
    table = QfiTermTable(tuple(rows), r)
    return EstimatorReport(
        value=total,
        truth=truth,
        shots_used={
            "tomography": budget.tomography_shots,
            "observable": shots_each * n_meas if pairs else 0,
        },
        stderr=float(np.sqrt(var_total)),
        seed=seed,
        extras={
            "full_qfi_oracle": qfi_oracle(rho_a, observable, "full"),
            "support_rank": r,
            "term_table": table.to_json(),
        },
    )
