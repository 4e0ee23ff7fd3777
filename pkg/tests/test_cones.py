"""Cone memberships: PSD-and-PPT cone, decomposability, witness classification."""

import numpy as np
import pytest

from pptdisc import (
    BipartiteOperator,
    SystemDims,
    ValidationError,
    assert_positive_trace,
    bell_state,
    check_decomposable,
    check_ppt_plus,
    classify_witness,
    diag_pair_projector,
    identity,
    min_eigenvalue,
    partial_transpose,
    trace_inner,
)
from pptdisc import anchored_bell_difference, orthogonal_triple_dual, orthogonal_triple_ensemble
from pptdisc.operators import partial_transpose_matrix

from conftest import random_state_matrix

DIMS22 = SystemDims(2, 2)


def test_identity_is_member():
    cert = check_ppt_plus(identity(DIMS22))
    assert cert.is_member


def test_entangled_projector_fails_ppt():
    """The maximally entangled projector leaves the cone through its PT.

    Oracle: 4x4 eigendecomposition gives PT eigenvalue -1/2.
    """
    cert = check_ppt_plus(bell_state("phi+"))
    assert not cert.is_member
    assert cert.failed_test == "ppt"
    assert cert.eigenvalue == pytest.approx(-0.5, abs=1e-12)
    # the stored eigenvector witnesses the negative direction
    v = cert.eigenvector
    quad = np.real(v.conj() @ partial_transpose(bell_state("phi+")).matrix @ v)
    assert quad == pytest.approx(-0.5, abs=1e-12)


def test_diagonal_pair_projector_is_member():
    cert = check_ppt_plus(diag_pair_projector(3, 1, 0, 2))
    assert cert.is_member


def test_psd_operator_decomposes_trivially(rng):
    rho = BipartiteOperator(DIMS22, random_state_matrix(rng, 4))
    cert = check_decomposable(rho)
    assert cert.is_member
    np.testing.assert_allclose(cert.positive_part.matrix, rho.matrix, atol=1e-12)
    assert cert.transposed_part.norm <= 1e-12


def test_pure_transpose_form_decomposes():
    w = partial_transpose(bell_state("phi-"))
    cert = check_decomposable(w)
    assert cert.is_member
    assert cert.positive_part.norm <= 1e-12
    np.testing.assert_allclose(cert.transposed_part.matrix, bell_state("phi-").matrix, atol=1e-12)


def test_triple_dual_difference_decomposes_with_known_parts():
    """The dual-family difference at t = 0 splits along known lines.

    The analytic split uses P = (phi+ + phi-)/6 and Q = phi-/3; the solver
    only needs to find some valid pair, which is then checked against W.
    """
    e = orthogonal_triple_ensemble()
    w = orthogonal_triple_dual(0.0) - e.weighted(2)
    p_known = (bell_state("phi+") + bell_state("phi-")) * (1.0 / 6.0)
    q_known = bell_state("phi-") * (1.0 / 3.0)
    recon = p_known.matrix + partial_transpose_matrix(q_known.matrix, 2, 2)
    np.testing.assert_allclose(recon, w.matrix, atol=1e-14)

    cert = check_decomposable(w)
    assert cert.is_member
    recon = cert.positive_part.matrix + partial_transpose_matrix(
        cert.transposed_part.matrix, 2, 2
    )
    assert np.linalg.norm(recon - w.matrix) <= 1e-6 * (1 + w.norm)


def test_nonmember_carries_separating_operator():
    w = bell_state("phi+") - 0.25 * identity(DIMS22)
    cert = check_decomposable(w)
    assert cert.verdict == "non_member"
    f = cert.separating
    assert f.trace == pytest.approx(1.0, abs=1e-12)
    assert min_eigenvalue(f) >= -1e-8
    assert min_eigenvalue(partial_transpose(f)) >= -1e-8
    assert trace_inner(w, f) < -1e-7 * f.norm


def test_decomposability_is_pt_symmetric(rng):
    """W decomposes exactly when its partial transpose does."""
    for _ in range(5):
        g = random_state_matrix(rng, 4) - random_state_matrix(rng, 4) * 0.6
        g = 0.5 * (g + g.conj().T)
        w = BipartiteOperator(DIMS22, g)
        a = check_decomposable(w)
        b = check_decomposable(partial_transpose(w))
        assert a.verdict == b.verdict


def test_random_sums_never_classify_non_decomposable(rng):
    """P + Q^PT with random PSD parts always certifies as a member."""
    for _ in range(5):
        p = random_state_matrix(rng, 4)
        q = random_state_matrix(rng, 4)
        w = BipartiteOperator(DIMS22, p + partial_transpose_matrix(q, 2, 2))
        cert = check_decomposable(w)
        assert cert.is_member


def test_classify_witness_threshold():
    """The anchored-family difference flips from witness to PSD at the threshold."""
    low = classify_witness(anchored_bell_difference(2, 0.5, 0, 1, 1))
    assert low.classification == "dew"
    assert not low.is_psd and low.is_decomposable
    high = classify_witness(anchored_bell_difference(2, 0.8, 0, 1, 1))
    assert high.classification == "psd"
    assert high.is_psd


def test_classify_witness_identity_and_nondecomposable():
    assert classify_witness(identity(DIMS22)).classification == "psd"
    w = bell_state("phi+") - 0.25 * identity(DIMS22)
    assert classify_witness(w).classification == "non_decomposable"


def test_positive_trace_assertion():
    zero_w = 0.0 * identity(DIMS22)
    cert = check_decomposable(zero_w)
    assert assert_positive_trace(zero_w, cert)
    w = partial_transpose(bell_state("phi-"))
    cert = check_decomposable(w)
    assert w.trace == pytest.approx(1.0, abs=1e-12)
    assert assert_positive_trace(w, cert)
    with pytest.raises(ValidationError):
        assert_positive_trace(w, check_ppt_plus(identity(DIMS22)))


def test_duality_pairing_between_sampled_members(rng):
    """Members of the primal cone pair nonnegatively with dual members."""
    members, duals = [], []
    for _ in range(4):
        m = random_state_matrix(rng, 4)
        if np.linalg.eigvalsh(partial_transpose_matrix(m, 2, 2))[0] >= 0:
            members.append(BipartiteOperator(DIMS22, m))
        p = random_state_matrix(rng, 4)
        q = random_state_matrix(rng, 4)
        duals.append(BipartiteOperator(DIMS22, p + partial_transpose_matrix(q, 2, 2)))
    members.append(identity(DIMS22))
    members.append(diag_pair_projector(2, 2, 0, 1))
    for e in members:
        for w in duals:
            assert trace_inner(e, w) >= -1e-8 * e.norm * w.norm
