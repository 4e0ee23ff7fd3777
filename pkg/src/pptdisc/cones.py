"""Membership certificates for the PSD-and-PPT cone and its dual.

The dual cone is exactly the set of decomposable operators W = P + Q^G with
P, Q PSD, so membership there is a feasibility program; non-membership is
certified by a separating operator F that is PSD together with its partial
transpose and has Tr(WF) < 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import (
    TAU_PSD,
    BipartiteOperator,
    ValidationError,
    min_eigenvalue,
    partial_transpose,
    partial_transpose_matrix,
    spectrum,
    trace_inner,
)
from .solver import (
    HermitianProgram,
    SolverError,
    SolverOptions,
    hermitian_basis,
    operator_equality,
    solve_hermitian,
)

# Certificate reconstruction residuals; looser than solver feasibility since
# extracted certificates are symmetrized and clipped before re-verification.
EPS_CERT = 1e-6

PPT_PLUS = "ppt_plus"
PPT_PLUS_DUAL = "ppt_plus_dual"

MEMBER = "member"
NON_MEMBER = "non_member"
UNKNOWN = "unknown"

# every verified dual-cone membership appends (trace, frobenius norm) here,
# backing the positive-trace sanity property
_member_trace_log: list[tuple[float, float]] = []


def member_trace_log() -> list[tuple[float, float]]:
    return list(_member_trace_log)


def clear_member_trace_log() -> None:
    _member_trace_log.clear()


@dataclass
class ConeCertificate:
    cone: str
    verdict: str
    residuals: dict[str, float] = field(default_factory=dict)
    # PPT_PLUS non-membership: which test failed and the violating eigenpair
    failed_test: str | None = None
    eigenvalue: float | None = None
    eigenvector: np.ndarray | None = None
    # PPT_PLUS_DUAL membership: W = positive_part + transposed_part^G
    positive_part: BipartiteOperator | None = None
    transposed_part: BipartiteOperator | None = None
    # PPT_PLUS_DUAL non-membership: separating element of the primal cone
    separating: BipartiteOperator | None = None
    detail: str = ""

    @property
    def is_member(self) -> bool:
        return self.verdict == MEMBER


@dataclass
class WitnessClass:
    """PSD / decomposable-witness / non-decomposable classification."""

    is_psd: bool
    is_decomposable: bool | None
    classification: str  # psd | dew | non_decomposable | unknown
    certificate: ConeCertificate


def check_ppt_plus(e: BipartiteOperator) -> ConeCertificate:
    """Is E both PSD and PSD under partial transposition?"""
    spec_e = spectrum(e)
    if spec_e.eigenvalues[0] < -TAU_PSD:
        return ConeCertificate(
            cone=PPT_PLUS, verdict=NON_MEMBER, failed_test="psd",
            eigenvalue=float(spec_e.eigenvalues[0]),
            eigenvector=spec_e.eigenvectors[:, 0].copy(),
            residuals={"min_eigenvalue": float(spec_e.eigenvalues[0])},
        )
    eg = partial_transpose(e)
    spec_g = spectrum(eg)
    if spec_g.eigenvalues[0] < -TAU_PSD:
        return ConeCertificate(
            cone=PPT_PLUS, verdict=NON_MEMBER, failed_test="ppt",
            eigenvalue=float(spec_g.eigenvalues[0]),
            eigenvector=spec_g.eigenvectors[:, 0].copy(),
            residuals={"min_eigenvalue_pt": float(spec_g.eigenvalues[0])},
        )
    return ConeCertificate(
        cone=PPT_PLUS, verdict=MEMBER,
        residuals={
            "min_eigenvalue": float(spec_e.eigenvalues[0]),
            "min_eigenvalue_pt": float(spec_g.eigenvalues[0]),
        },
    )


def _clip_psd(m: np.ndarray) -> np.ndarray:
    m = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(m)
    np.clip(w, 0.0, None, out=w)
    return (v * w) @ v.conj().T


def certificate_from_decomposition(w: BipartiteOperator, p: np.ndarray,
                                   q: np.ndarray) -> ConeCertificate:
    """Arithmetically verified membership certificate from a (P, Q) pair.

    The candidate parts are symmetrized and their eigenvalues clipped at zero
    before re-verification; a pair that does not reconstruct W afterwards
    yields verdict unknown, never a member claim.
    """
    dims = w.dims
    p = _clip_psd(np.asarray(p, dtype=complex))
    q = _clip_psd(np.asarray(q, dtype=complex))
    recon = p + partial_transpose_matrix(q, dims.d1, dims.d2)
    resid = float(np.linalg.norm(recon - w.matrix))
    residuals = {
        "reconstruction": resid,
        "min_eigenvalue_p": float(np.linalg.eigvalsh(p)[0]) if p.size else 0.0,
        "min_eigenvalue_q": float(np.linalg.eigvalsh(q)[0]) if q.size else 0.0,
    }
    if resid > EPS_CERT * (1.0 + w.norm):
        return ConeCertificate(
            cone=PPT_PLUS_DUAL, verdict=UNKNOWN, residuals=residuals,
            detail="decomposition does not reconstruct the operator",
        )
    cert = ConeCertificate(
        cone=PPT_PLUS_DUAL, verdict=MEMBER, residuals=residuals,
        positive_part=BipartiteOperator(dims, p),
        transposed_part=BipartiteOperator(dims, q),
    )
    if not assert_positive_trace(w, cert):
        raise SolverError(
            f"membership certificate violates the positive-trace property "
            f"(trace {w.trace:.3e}, norm {w.norm:.3e})"
        )
    _member_trace_log.append((w.trace, w.norm))
    return cert


def check_decomposable(w: BipartiteOperator,
                       options: SolverOptions | None = None) -> ConeCertificate:
    """Decide W = P + Q^G with P, Q PSD, or produce a separating operator.

    A solve that ends at the iteration limit is surfaced as verdict unknown
    rather than coerced to either claim.
    """
    dims = w.dims
    d = dims.total
    # pure cases need no solve
    if min_eigenvalue(w) >= -TAU_PSD:
        return certificate_from_decomposition(w, w.matrix, np.zeros((d, d)))
    wg = partial_transpose(w)
    if min_eigenvalue(wg) >= -TAU_PSD:
        return certificate_from_decomposition(w, np.zeros((d, d)), wg.matrix)

    basis = hermitian_basis(d)
    pt = lambda m: partial_transpose_matrix(m, dims.d1, dims.d2)
    rows = operator_equality({0: (1.0, None), 1: (1.0, pt)}, w.matrix, basis)
    prog = HermitianProgram(
        block_dims=(d, d),
        objective=(np.zeros((d, d), dtype=complex), np.zeros((d, d), dtype=complex)),
        constraints=tuple(rows),
    )
    sol = solve_hermitian(prog, options)
    if sol.status == "optimal":
        return certificate_from_decomposition(w, sol.blocks[0], sol.blocks[1])
    if sol.status == "infeasible":
        f = -sol.ray_operator(0)
        f = 0.5 * (f + f.conj().T)
        tr_f = float(np.trace(f).real)
        if tr_f <= 0:
            return ConeCertificate(
                cone=PPT_PLUS_DUAL, verdict=UNKNOWN, residuals=dict(sol.ray_info),
                detail="separating candidate has nonpositive trace",
            )
        f = f / tr_f
        sep = BipartiteOperator(dims, f)
        viol = trace_inner(w, sep)
        residuals = {
            "min_eigenvalue_f": min_eigenvalue(sep),
            "min_eigenvalue_f_pt": min_eigenvalue(partial_transpose(sep)),
            "violation": viol,
        }
        ok = (
            residuals["min_eigenvalue_f"] >= -TAU_PSD
            and residuals["min_eigenvalue_f_pt"] >= -TAU_PSD
            and viol <= -10 * TAU_PSD * sep.norm
        )
        if not ok:
            return ConeCertificate(
                cone=PPT_PLUS_DUAL, verdict=UNKNOWN, residuals=residuals,
                detail="separating candidate failed re-verification",
            )
        return ConeCertificate(
            cone=PPT_PLUS_DUAL, verdict=NON_MEMBER, residuals=residuals, separating=sep,
        )
    return ConeCertificate(
        cone=PPT_PLUS_DUAL, verdict=UNKNOWN, residuals=dict(sol.residuals),
        detail=f"solver stopped with status {sol.status}",
    )


def classify_witness(w: BipartiteOperator,
                     options: SolverOptions | None = None) -> WitnessClass:
    """Classify a Hermitian operator as psd, dew, or non_decomposable."""
    psd = min_eigenvalue(w) >= -TAU_PSD
    cert = check_decomposable(w, options)
    if cert.verdict == UNKNOWN:
        return WitnessClass(is_psd=psd, is_decomposable=None,
                            classification=UNKNOWN, certificate=cert)
    decomposable = cert.is_member
    if psd:
        classification = "psd"
    elif decomposable:
        classification = "dew"
    else:
        classification = "non_decomposable"
    return WitnessClass(is_psd=psd, is_decomposable=decomposable,
                        classification=classification, certificate=cert)


def assert_positive_trace(e: BipartiteOperator, cert: ConeCertificate) -> bool:
    """Nonzero members of the dual cone must have strictly positive trace."""
    if cert.cone != PPT_PLUS_DUAL or not cert.is_member:
        raise ValidationError("positive-trace assertion needs a dual-cone membership certificate")
    if e.norm <= EPS_CERT:
        return True
    return e.trace > 0.0
