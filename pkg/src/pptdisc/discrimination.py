"""Minimum-error discrimination values under global and PPT measurements.

The primal problems maximize the average success probability over POVMs
(optionally constrained to PPT elements); the dual problems minimize Tr H
over operators H whose differences H - eta_i rho_i lie in the appropriate
cone.  Primal and dual are solved through the shared conic engine, and every
optimality claim is re-checked arithmetically from extracted certificates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cones import (
    EPS_CERT,
    MEMBER,
    UNKNOWN,
    ConeCertificate,
    certificate_from_decomposition,
    check_decomposable,
)
from .operators import (
    TAU_PSD,
    BipartiteOperator,
    SystemDims,
    ValidationError,
    identity,
    min_eigenvalue,
    partial_transpose,
    partial_transpose_matrix,
    trace_inner,
    zero,
)
from .solver import (
    HermitianProgram,
    SolverError,
    SolverOptions,
    hermitian_basis,
    operator_equality,
    solve_hermitian,
)

# Equality verdicts compare two independently solved programs, so they get a
# band looser than single-certificate checks; gaps inside the band are
# reported as indeterminate instead of guessed.
EPS_VERDICT = 1e-5

EQUAL = "equal"
NOT_EQUAL = "not_equal"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class Ensemble:
    """States rho_i with prior probabilities eta_i on a fixed bipartite space."""

    dims: SystemDims
    items: tuple[tuple[float, BipartiteOperator], ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.items) == 0:
            raise ValidationError("ensemble has no items")
        total = 0.0
        for idx, (eta, rho) in enumerate(self.items):
            if not (0.0 <= eta <= 1.0):
                raise ValidationError(f"items[{idx}].eta = {eta} outside [0, 1]")
            if rho.dims != self.dims:
                raise ValidationError(
                    f"items[{idx}].rho has dims {rho.dims}, ensemble has {self.dims}"
                )
            lo = min_eigenvalue(rho)
            if lo < -TAU_PSD:
                raise ValidationError(
                    f"items[{idx}].rho is not positive semidefinite (min eigenvalue {lo:.3e})"
                )
            if abs(rho.trace - 1.0) > 1e-10:
                raise ValidationError(f"items[{idx}].rho has trace {rho.trace!r}, expected 1")
            total += eta
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"priors sum to {total!r}, expected 1")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def priors(self) -> np.ndarray:
        return np.array([eta for eta, _ in self.items])

    def weighted(self, i: int) -> BipartiteOperator:
        """eta_i * rho_i."""
        eta, rho = self.items[i]
        return eta * rho


@dataclass(frozen=True)
class Measurement:
    """POVM: positive operators summing to the identity."""

    dims: SystemDims
    elements: tuple[BipartiteOperator, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.elements) == 0:
            raise ValidationError("measurement has no elements")
        total = np.zeros((self.dims.total, self.dims.total), dtype=complex)
        for idx, m in enumerate(self.elements):
            if m.dims != self.dims:
                raise ValidationError(
                    f"elements[{idx}] has dims {m.dims}, measurement has {self.dims}"
                )
            lo = min_eigenvalue(m)
            if lo < -TAU_PSD:
                raise ValidationError(
                    f"elements[{idx}] is not positive semidefinite (min eigenvalue {lo:.3e})"
                )
            total = total + m.matrix
        defect = float(np.linalg.norm(total - np.eye(self.dims.total)))
        if defect > 1e-8:
            raise ValidationError(f"elements sum to identity only within {defect:.3e}")

    def __len__(self) -> int:
        return len(self.elements)

    def is_ppt(self, tol: float = TAU_PSD) -> bool:
        return all(min_eigenvalue(partial_transpose(m)) >= -tol for m in self.elements)


@dataclass
class DiscriminationResult:
    mode: str  # global | ppt | ppt_dual
    value: float
    measurement: Measurement | None
    dual_operator: BipartiteOperator
    slackness: np.ndarray
    duality_residual: float
    optimality_residual: float
    membership: list[ConeCertificate] | None
    solver: dict


@dataclass
class EqualityVerdict:
    p_ppt: float
    p_g: float | None
    verdict: str  # equal | not_equal | indeterminate
    margin: float | None
    evidence: str  # no_dew_dual_found | dew_obstruction | numeric_gap
    dew_indices: tuple[int, ...] = ()


@dataclass
class GuessingOptimality:
    """Whether blindly guessing the pivot state already attains the PPT optimum."""

    verdict: str  # holds | fails | unknown
    pivot: int
    value: float | None
    certificates: list[ConeCertificate]

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"


@dataclass
class JointOptimalityReport:
    residuals: np.ndarray
    max_abs_residual: float
    optimal_pair: bool
    problems: list[str]
    membership: list[ConeCertificate]


@dataclass
class WitnessConditionReport:
    """Outcome of the witness test on a candidate PPT measurement.

    When the condition holds, the measurement's success probability equals
    the PPT optimum and the global optimum is strictly larger.
    """

    condition_holds: bool | None
    p_ppt: float | None
    dew_indices: tuple[int, ...]
    hermitization_residual: float
    certificates: list[ConeCertificate]


def _active(ensemble: Ensemble) -> list[int]:
    # zero-prior items take the zero measurement element by convention and
    # never constrain any of the programs
    return [i for i, (eta, _) in enumerate(ensemble.items) if eta > 0.0]


def _pt_fn(dims: SystemDims):
    return lambda m: partial_transpose_matrix(m, dims.d1, dims.d2)


def _combine_basis(y: np.ndarray, basis: list[np.ndarray], sign: float = 1.0) -> np.ndarray:
    out = np.zeros_like(basis[0])
    for g, ym in zip(basis, y):
        out = out + (sign * ym) * g
    return 0.5 * (out + out.conj().T)


def _measurement_from_blocks(ensemble, blocks, active, metadata=None) -> Measurement:
    dims = ensemble.dims
    elements = []
    pos = {i: k for k, i in enumerate(active)}
    for i in range(len(ensemble)):
        if i in pos:
            m = blocks[pos[i]]
            elements.append(BipartiteOperator(dims, 0.5 * (m + m.conj().T)))
        else:
            elements.append(zero(dims))
    return Measurement(dims, tuple(elements), metadata=dict(metadata or {}))


def _solver_stats(sol) -> dict:
    return {
        "status": sol.status,
        "iterations": sol.iterations,
        "residuals": {k: float(v) for k, v in sol.residuals.items()},
    }


def _require_optimal(sol, what: str):
    if sol.status != "optimal":
        raise SolverError(
            f"{what} solve ended with status {sol.status} "
            f"(residuals {sol.residuals}, {sol.iterations} iterations)"
        )


def evaluate_measurement(ensemble: Ensemble, measurement: Measurement) -> float:
    """Average success probability of a fixed measurement on the ensemble."""
    if measurement.dims != ensemble.dims:
        raise ValidationError("measurement dims do not match ensemble dims")
    if len(measurement) != len(ensemble):
        raise ValidationError(
            f"measurement has {len(measurement)} elements for {len(ensemble)} states"
        )
    return float(sum(
        trace_inner(ensemble.weighted(i), measurement.elements[i])
        for i in range(len(ensemble))
    ))


def optimal_global(ensemble: Ensemble, options: SolverOptions | None = None) -> DiscriminationResult:
    """Best success probability over all measurements, with its dual operator.

    The dual H minimizes Tr H subject to H >= eta_i rho_i; the returned
    measurement is checked against the standard optimality condition that
    sum_j eta_j rho_j M_j - eta_i rho_i is PSD for every i.
    """
    active = _active(ensemble)
    dims = ensemble.dims
    d = dims.total
    basis = hermitian_basis(d)
    rows = operator_equality(
        {k: (1.0, None) for k in range(len(active))}, np.eye(d, dtype=complex), basis,
    )
    prog = HermitianProgram(
        block_dims=(d,) * len(active),
        objective=tuple(-ensemble.weighted(i).matrix for i in active),
        constraints=tuple(rows),
    )
    sol = solve_hermitian(prog, options)
    _require_optimal(sol, "global discrimination")

    measurement = _measurement_from_blocks(ensemble, sol.blocks, active)
    h = BipartiteOperator(dims, _combine_basis(sol.y, basis, sign=-1.0))
    value = -sol.value
    slack = np.array([
        trace_inner(measurement.elements[i], h - ensemble.weighted(i))
        for i in range(len(ensemble))
    ])
    # optimality condition on the returned measurement
    r = sum((ensemble.weighted(i).matrix @ measurement.elements[i].matrix for i in active))
    r = BipartiteOperator(dims, 0.5 * (r + r.conj().T))
    opt_resid = max(
        0.0, -min(min_eigenvalue(r - ensemble.weighted(i)) for i in range(len(ensemble)))
    )
    return DiscriminationResult(
        mode="global",
        value=value,
        measurement=measurement,
        dual_operator=h,
        slackness=slack,
        duality_residual=abs(h.trace - value),
        optimality_residual=opt_resid,
        membership=None,
        solver=_solver_stats(sol),
    )


def optimal_ppt(ensemble: Ensemble, options: SolverOptions | None = None) -> DiscriminationResult:
    """Best success probability over PPT measurements.

    One solve produces both sides: the PPT measurement from the primal blocks
    and the dual operator H from the multipliers of the completeness rows,
    together with an explicit decomposition of every H - eta_i rho_i.
    """
    active = _active(ensemble)
    n = len(active)
    dims = ensemble.dims
    d = dims.total
    basis = hermitian_basis(d)
    pt = _pt_fn(dims)
    zero_mat = np.zeros((d, d), dtype=complex)

    # blocks 0..n-1 are the POVM elements, blocks n..2n-1 their transposes
    rows = operator_equality(
        {k: (1.0, None) for k in range(n)}, np.eye(d, dtype=complex), basis,
    )
    for k in range(n):
        rows += operator_equality({k: (-1.0, pt), n + k: (1.0, None)}, zero_mat, basis)
    prog = HermitianProgram(
        block_dims=(d,) * (2 * n),
        objective=tuple(-ensemble.weighted(i).matrix for i in active) + (zero_mat,) * n,
        constraints=tuple(rows),
    )
    sol = solve_hermitian(prog, options)
    _require_optimal(sol, "ppt discrimination")

    measurement = _measurement_from_blocks(ensemble, sol.blocks[:n], active)
    if not measurement.is_ppt():
        raise SolverError("extracted measurement failed the PPT re-check")
    h = BipartiteOperator(dims, _combine_basis(sol.y[: d * d], basis, sign=-1.0))
    value = -sol.value

    # dual slack blocks give H - eta_i rho_i = P_i + Q_i^G exactly in
    # arithmetic, so the membership certificates need no further solves
    membership: list[ConeCertificate] = []
    pos = {i: k for k, i in enumerate(active)}
    for i in range(len(ensemble)):
        diff = h - ensemble.weighted(i)
        if i in pos:
            k = pos[i]
            cert = certificate_from_decomposition(
                diff, sol.dual_blocks[k], sol.dual_blocks[n + k]
            )
            if cert.verdict != MEMBER:
                cert = check_decomposable(diff, options)
        else:
            cert = check_decomposable(diff, options)
        membership.append(cert)

    slack = np.array([
        trace_inner(measurement.elements[i], h - ensemble.weighted(i))
        for i in range(len(ensemble))
    ])
    return DiscriminationResult(
        mode="ppt",
        value=value,
        measurement=measurement,
        dual_operator=h,
        slackness=slack,
        duality_residual=abs(h.trace - value),
        optimality_residual=float(np.max(np.abs(slack))),
        membership=membership,
        solver=_solver_stats(sol),
    )


def optimal_ppt_dual(ensemble: Ensemble, options: SolverOptions | None = None) -> DiscriminationResult:
    """Independent dual route: minimize Tr H over decomposable differences.

    H is eliminated through H = eta_p rho_p + P_p + Q_p^G for a pivot p, so
    the engine sees only PSD blocks; the decomposition of every difference
    comes straight out of the primal solution.
    """
    active = _active(ensemble)
    n = len(active)
    dims = ensemble.dims
    d = dims.total
    basis = hermitian_basis(d)
    pt = _pt_fn(dims)
    zero_mat = np.zeros((d, d), dtype=complex)
    eye = np.eye(d, dtype=complex)

    if n == 1:
        return _certain_dual_result(ensemble, active[0], "ppt_dual")

    piv = max(active, key=lambda i: ensemble.items[i][0])
    kp = active.index(piv)
    # blocks 0..n-1 hold P_i, blocks n..2n-1 hold Q_i
    rows = []
    for k, i in enumerate(active):
        if i == piv:
            continue
        target = (ensemble.weighted(i) - ensemble.weighted(piv)).matrix
        rows += operator_equality(
            {kp: (1.0, None), n + kp: (1.0, pt), k: (-1.0, None), n + k: (-1.0, pt)},
            target, basis,
        )
    objective = [zero_mat] * (2 * n)
    objective[kp] = eye
    objective[n + kp] = eye
    prog = HermitianProgram(
        block_dims=(d,) * (2 * n),
        objective=tuple(objective),
        constraints=tuple(rows),
    )
    sol = solve_hermitian(prog, options)
    _require_optimal(sol, "ppt dual bound")

    eta_p = ensemble.items[piv][0]
    value = sol.value + eta_p
    p_piv, q_piv = sol.blocks[kp], sol.blocks[n + kp]
    h = ensemble.weighted(piv) + BipartiteOperator(
        dims, _clip_herm(p_piv) + partial_transpose_matrix(_clip_herm(q_piv), dims.d1, dims.d2)
    )
    membership = []
    pos = {i: k for k, i in enumerate(active)}
    for i in range(len(ensemble)):
        diff = h - ensemble.weighted(i)
        if i in pos:
            k = pos[i]
            cert = certificate_from_decomposition(diff, sol.blocks[k], sol.blocks[n + k])
            if cert.verdict != MEMBER:
                cert = check_decomposable(diff, options)
        else:
            cert = check_decomposable(diff, options)
        membership.append(cert)
    return DiscriminationResult(
        mode="ppt_dual",
        value=value,
        measurement=None,
        dual_operator=h,
        slackness=np.array([]),
        duality_residual=abs(h.trace - value),
        optimality_residual=max((c.residuals.get("reconstruction", 0.0) for c in membership), default=0.0),
        membership=membership,
        solver=_solver_stats(sol),
    )


def _clip_herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (np.asarray(m, dtype=complex) + np.asarray(m, dtype=complex).conj().T)


def _certain_dual_result(ensemble, pivot, mode) -> DiscriminationResult:
    # one effective hypothesis: H = eta rho is optimal since any dual-feasible
    # H has Tr(H - eta rho) >= 0 by the positive-trace property
    h = ensemble.weighted(pivot)
    d = ensemble.dims.total
    membership = [
        certificate_from_decomposition(h - ensemble.weighted(i),
                                       np.zeros((d, d)), np.zeros((d, d)))
        for i in range(len(ensemble))
    ]
    return DiscriminationResult(
        mode=mode,
        value=float(ensemble.items[pivot][0]),
        measurement=None,
        dual_operator=h,
        slackness=np.array([]),
        duality_residual=0.0,
        optimality_residual=0.0,
        membership=membership,
        solver={"status": "optimal", "iterations": 0, "residuals": {}},
    )


def _psd_restricted_dual(ensemble: Ensemble, options: SolverOptions | None):
    """Minimize Tr H with every H - eta_i rho_i PSD (the global dual)."""
    active = _active(ensemble)
    dims = ensemble.dims
    d = dims.total
    basis = hermitian_basis(d)
    zero_mat = np.zeros((d, d), dtype=complex)

    piv = max(active, key=lambda i: ensemble.items[i][0])
    kp = active.index(piv)
    rows = []
    for k, i in enumerate(active):
        if i == piv:
            continue
        target = (ensemble.weighted(piv) - ensemble.weighted(i)).matrix
        rows += operator_equality({k: (1.0, None), kp: (-1.0, None)}, target, basis)
    objective = [zero_mat] * len(active)
    objective[kp] = np.eye(d, dtype=complex)
    prog = HermitianProgram(
        block_dims=(d,) * len(active),
        objective=tuple(objective),
        constraints=tuple(rows),
    )
    sol = solve_hermitian(prog, options)
    _require_optimal(sol, "psd-restricted dual")
    eta_p = ensemble.items[piv][0]
    h = ensemble.weighted(piv) + BipartiteOperator(dims, _clip_herm(sol.blocks[kp]))
    return sol.value + eta_p, h, sol


def verify_joint_optimality(ensemble: Ensemble, measurement: Measurement,
                            h: BipartiteOperator,
                            options: SolverOptions | None = None) -> JointOptimalityReport:
    """Check the zero-overlap conditions Tr[M_i (H - eta_i rho_i)] = 0.

    Preconditions (PPT measurement, every difference decomposable) are
    verified first and reported per item; when everything passes, the pair
    simultaneously certifies the primal and dual PPT optima.
    """
    problems: list[str] = []
    if measurement.dims != ensemble.dims or len(measurement) != len(ensemble):
        raise ValidationError("measurement does not match the ensemble")
    for i, m in enumerate(measurement.elements):
        lo = min_eigenvalue(partial_transpose(m))
        if lo < -TAU_PSD:
            problems.append(f"measurement element {i} is not PPT (min eigenvalue {lo:.3e})")
    membership = []
    for i in range(len(ensemble)):
        cert = check_decomposable(h - ensemble.weighted(i), options)
        membership.append(cert)
        if cert.verdict == UNKNOWN:
            problems.append(f"difference {i}: membership unknown ({cert.detail})")
        elif not cert.is_member:
            problems.append(f"difference {i} is not decomposable")
    residuals = np.array([
        trace_inner(measurement.elements[i], h - ensemble.weighted(i))
        for i in range(len(ensemble))
    ])
    max_abs = float(np.max(np.abs(residuals)))
    return JointOptimalityReport(
        residuals=residuals,
        max_abs_residual=max_abs,
        optimal_pair=(not problems) and max_abs <= EPS_CERT,
        problems=problems,
        membership=membership,
    )


def check_guessing_optimal(ensemble: Ensemble, pivot: int = 0,
                           options: SolverOptions | None = None) -> GuessingOptimality:
    """Test whether eta_pivot rho_pivot dominates every other weighted state.

    If every difference eta_pivot rho_pivot - eta_i rho_i is decomposable,
    the PPT optimum equals eta_pivot and is reached by always guessing the
    pivot state, with eta_pivot rho_pivot the unique dual minimizer.
    """
    if not (0 <= pivot < len(ensemble)):
        raise ValidationError(f"pivot {pivot} out of range for {len(ensemble)} items")
    certificates = []
    verdict = "holds"
    for i in range(len(ensemble)):
        if i == pivot:
            continue
        cert = check_decomposable(ensemble.weighted(pivot) - ensemble.weighted(i), options)
        certificates.append(cert)
        if cert.verdict == UNKNOWN:
            verdict = "unknown"
        elif not cert.is_member and verdict != "unknown":
            verdict = "fails"
    value = ensemble.items[pivot][0] if verdict == "holds" else None
    return GuessingOptimality(verdict=verdict, pivot=pivot, value=value,
                              certificates=certificates)


def classify_from_differences(ensemble: Ensemble, pivot: int = 0,
                              guess: GuessingOptimality | None = None,
                              options: SolverOptions | None = None) -> EqualityVerdict:
    """Cheap equality test when guessing the pivot is already PPT-optimal.

    Global and PPT optima agree exactly when none of the pivot differences
    is a decomposable witness, i.e. when all of them are PSD outright.  No
    optimization runs here beyond the membership precondition.
    """
    if guess is None:
        guess = check_guessing_optimal(ensemble, pivot, options)
    if guess.verdict == "unknown":
        return EqualityVerdict(
            p_ppt=float(ensemble.items[pivot][0]), p_g=None, verdict=INDETERMINATE,
            margin=None, evidence="membership_unknown",
        )
    if not guess.holds:
        raise ValidationError(
            "difference-based classification needs a pivot whose differences are all decomposable"
        )
    p_ppt = float(guess.value)
    dew_indices = tuple(
        i for i in range(len(ensemble)) if i != pivot
        and min_eigenvalue(ensemble.weighted(pivot) - ensemble.weighted(i)) < -TAU_PSD
    )
    if dew_indices:
        return EqualityVerdict(
            p_ppt=p_ppt, p_g=None, verdict=NOT_EQUAL, margin=None,
            evidence="dew_obstruction", dew_indices=dew_indices,
        )
    return EqualityVerdict(
        p_ppt=p_ppt, p_g=p_ppt, verdict=EQUAL, margin=0.0,
        evidence="no_dew_dual_found",
    )


def measurement_witness_check(ensemble: Ensemble, measurement: Measurement,
                              options: SolverOptions | None = None) -> WitnessConditionReport:
    """Witness condition on a PPT measurement.

    Forms H as the Hermitized sum of eta_i rho_i M_i and asks whether every
    H - eta_i rho_i is decomposable with at least one failing to be PSD.
    When that holds, the measurement's success probability is the exact PPT
    optimum and the global optimum is strictly above it.
    """
    if measurement.dims != ensemble.dims or len(measurement) != len(ensemble):
        raise ValidationError("measurement does not match the ensemble")
    if not measurement.is_ppt():
        raise ValidationError("measurement is not PPT")
    dims = ensemble.dims
    raw = sum(
        ensemble.weighted(i).matrix @ measurement.elements[i].matrix
        for i in range(len(ensemble))
    )
    herm = 0.5 * (raw + raw.conj().T)
    herm_resid = float(np.linalg.norm(raw - herm))
    if herm_resid > EPS_CERT:
        raise SolverError(
            f"hermitization residual {herm_resid:.3e} exceeds {EPS_CERT:.1e}; "
            "the product sum is too far from Hermitian"
        )
    h = BipartiteOperator(dims, herm)

    certificates = []
    all_member = True
    unknown = False
    dew_indices = []
    for i in range(len(ensemble)):
        diff = h - ensemble.weighted(i)
        cert = check_decomposable(diff, options)
        certificates.append(cert)
        if cert.verdict == UNKNOWN:
            unknown = True
        elif not cert.is_member:
            all_member = False
        elif min_eigenvalue(diff) < -TAU_PSD:
            dew_indices.append(i)
    if unknown:
        return WitnessConditionReport(
            condition_holds=None, p_ppt=None, dew_indices=tuple(dew_indices),
            hermitization_residual=herm_resid, certificates=certificates,
        )
    holds = all_member and len(dew_indices) > 0
    p_ppt = evaluate_measurement(ensemble, measurement) if holds else None
    return WitnessConditionReport(
        condition_holds=holds, p_ppt=p_ppt, dew_indices=tuple(dew_indices),
        hermitization_residual=herm_resid, certificates=certificates,
    )


def classify_equality(ensemble: Ensemble,
                      options: SolverOptions | None = None) -> EqualityVerdict:
    """Decide whether PPT measurements reach the unrestricted optimum.

    Equality holds exactly when some H attaining the PPT dual optimum has
    every difference H - eta_i rho_i PSD, so the PSD-restricted dual value
    is compared against the decomposable dual value.  The PSD-restricted
    program doubles as the global dual and is cross-checked against an
    independent global solve.
    """
    qd = optimal_ppt_dual(ensemble, options)
    psd_value, _, psd_sol = _psd_restricted_dual(ensemble, options)
    glob = optimal_global(ensemble, options)
    if abs(psd_value - glob.value) > 2 * EPS_CERT:
        raise SolverError(
            f"psd-restricted dual ({psd_value}) and global primal ({glob.value}) "
            "disagree beyond tolerance; solver drift"
        )
    margin = psd_value - qd.value
    direct_margin = glob.value - qd.value
    if margin <= EPS_CERT and direct_margin <= EPS_VERDICT:
        verdict, evidence = EQUAL, "no_dew_dual_found"
    elif margin >= EPS_VERDICT and direct_margin > EPS_CERT:
        verdict, evidence = NOT_EQUAL, "numeric_gap"
    else:
        verdict, evidence = INDETERMINATE, "numeric_gap"
    return EqualityVerdict(
        p_ppt=qd.value, p_g=glob.value, verdict=verdict,
        margin=margin, evidence=evidence,
    )
