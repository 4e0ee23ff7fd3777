"""Discrimination values, dual certificates, and the equality classifiers."""

import numpy as np
import pytest

from pptdisc import (
    BipartiteOperator,
    Ensemble,
    Measurement,
    SolverError,
    SystemDims,
    ValidationError,
    anchored_bell_ensemble,
    bell_mixture_ensemble,
    check_guessing_optimal,
    classify_equality,
    classify_from_differences,
    closed_form_anchored,
    closed_form_bell_mixture,
    evaluate_measurement,
    identity,
    measurement_witness_check,
    optimal_global,
    optimal_ppt,
    optimal_ppt_dual,
    orthogonal_triple_ensemble,
    verify_joint_optimality,
)
from pptdisc.operators import zero as zero_operator

from conftest import helstrom_value, random_ensemble, random_state_matrix

DIMS22 = SystemDims(2, 2)


def _single_state_ensemble():
    dims = DIMS22
    rho = 0.25 * identity(dims)
    return Ensemble(dims, ((1.0, rho),))


def test_ensemble_validation():
    dims = DIMS22
    rho = 0.25 * identity(dims)
    with pytest.raises(ValidationError, match="priors"):
        Ensemble(dims, ((0.6, rho), (0.399, rho)))
    with pytest.raises(ValidationError, match="trace"):
        Ensemble(dims, ((1.0, 0.5 * identity(dims)),))
    with pytest.raises(ValidationError, match="no items"):
        Ensemble(dims, ())


def test_measurement_validation():
    dims = DIMS22
    with pytest.raises(ValidationError, match="identity"):
        Measurement(dims, (0.5 * identity(dims),))
    m = Measurement(dims, (0.5 * identity(dims), 0.5 * identity(dims)))
    assert m.is_ppt()


def test_single_state_is_certain():
    e = _single_state_ensemble()
    for func in (optimal_global, optimal_ppt, optimal_ppt_dual):
        result = func(e)
        assert result.value == pytest.approx(1.0, abs=1e-6)
    g = optimal_global(e)
    np.testing.assert_allclose(
        g.measurement.elements[0].matrix, np.eye(4), atol=1e-6
    )


def test_global_matches_trace_norm_oracle(rng):
    """Random two-state ensembles against the closed-form optimum."""
    for _ in range(5):
        e = random_ensemble(rng, 2, 2, 2)
        result = optimal_global(e)
        assert result.value == pytest.approx(helstrom_value(e), abs=1e-6)
        assert result.optimality_residual <= 1e-6


def test_orthogonal_triple_all_values_one():
    e = orthogonal_triple_ensemble()
    assert optimal_global(e).value == pytest.approx(1.0, abs=1e-6)
    assert optimal_ppt(e).value == pytest.approx(1.0, abs=1e-6)
    assert optimal_ppt_dual(e).value == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("d,lam,expect", [
    (2, 1.0, 10.0 / 24.0),
    (3, 0.5, 13.5 / 72.0),
])
def test_bell_mixture_ppt_value(d, lam, expect):
    e, _ = bell_mixture_ensemble(d, lam)
    assert closed_form_bell_mixture(d, lam) == pytest.approx(expect, abs=1e-15)
    result = optimal_ppt(e)
    assert result.value == pytest.approx(expect, abs=1e-6)
    assert all(c.is_member for c in result.membership)
    assert result.duality_residual <= 1e-6


@pytest.mark.parametrize("d", [2, 3])
def test_anchored_ppt_value(d):
    e = anchored_bell_ensemble(d, 0.3)
    assert optimal_ppt(e).value == pytest.approx(closed_form_anchored(d), abs=1e-6)


def test_strong_duality_on_random_ensembles(rng):
    for (d1, d2, n) in [(2, 2, 3), (2, 3, 2), (3, 3, 2)]:
        e = random_ensemble(rng, d1, d2, n)
        p = optimal_ppt(e)
        q = optimal_ppt_dual(e)
        assert abs(p.value - q.value) <= 2e-7 * (1 + p.value)


def test_joint_optimality_from_solver_pair(rng):
    """Primal measurement and dual operator from one solve verify jointly."""
    e = random_ensemble(rng, 2, 2, 3)
    result = optimal_ppt(e)
    report = verify_joint_optimality(e, result.measurement, result.dual_operator)
    assert report.optimal_pair
    assert report.max_abs_residual <= 1e-6


def test_joint_optimality_guessing_pair():
    """The all-or-nothing measurement pairs with the pivot dual operator."""
    e = anchored_bell_ensemble(2, 0.5)
    elements = [identity(DIMS22)] + [zero_operator(DIMS22)] * (len(e) - 1)
    m = Measurement(DIMS22, tuple(elements))
    h = e.weighted(0)
    report = verify_joint_optimality(e, m, h)
    assert report.optimal_pair
    np.testing.assert_allclose(report.residuals, 0.0, atol=1e-12)


def test_joint_optimality_rejects_scaled_dual():
    """Scaling the dual operator must break a certificate."""
    e = anchored_bell_ensemble(2, 0.5)
    elements = [identity(DIMS22)] + [zero_operator(DIMS22)] * (len(e) - 1)
    m = Measurement(DIMS22, tuple(elements))
    h = 1.01 * e.weighted(0)
    report = verify_joint_optimality(e, m, h)
    assert not report.optimal_pair


def test_guessing_optimality_anchored_family():
    e = anchored_bell_ensemble(3, 0.4)
    guess = check_guessing_optimal(e, 0)
    assert guess.holds
    assert guess.value == pytest.approx(closed_form_anchored(3), abs=1e-15)


def test_guessing_optimality_single_state():
    guess = check_guessing_optimal(_single_state_ensemble(), 0)
    assert guess.holds
    assert guess.value == 1.0


def test_guessing_fails_for_orthogonal_product_pair():
    """Two orthogonal product states are perfectly distinguishable, so no pivot wins."""
    dims = DIMS22
    k0 = np.diag([1.0, 0.0]).astype(complex)
    k1 = np.diag([0.0, 1.0]).astype(complex)
    from pptdisc import tensor

    e = Ensemble(dims, ((0.5, tensor(k0, k0)), (0.5, tensor(k1, k1))))
    guess = check_guessing_optimal(e, 0)
    assert not guess.holds
    assert optimal_ppt(e).value == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("lam,expect", [(0.5, "not_equal"), (0.8, "equal")])
def test_difference_classifier_threshold(lam, expect):
    e = anchored_bell_ensemble(2, lam)
    verdict = classify_from_differences(e, 0)
    assert verdict.verdict == expect
    if expect == "not_equal":
        assert verdict.evidence == "dew_obstruction"
        assert len(verdict.dew_indices) == 4


def test_difference_classifier_boundary():
    """d = 3 boundary value: PSD with an exactly zero eigenvalue."""
    lam_star = 9.0 / 16.0
    e = anchored_bell_ensemble(3, lam_star)
    verdict = classify_from_differences(e, 0)
    assert verdict.verdict == "equal"


def test_witness_condition_on_bell_mixture():
    """The matched local measurement certifies the PPT value and a global gap."""
    e, m = bell_mixture_ensemble(2, 1.0)
    report = measurement_witness_check(e, m)
    assert report.condition_holds
    assert report.p_ppt == pytest.approx(10.0 / 24.0, abs=1e-12)
    # exactly the k-type elements fail PSD
    assert len(report.dew_indices) == 2
    assert report.hermitization_residual <= 1e-12


def test_witness_condition_fails_without_witness():
    """Above threshold the guessing measurement yields only PSD differences."""
    e = anchored_bell_ensemble(2, 0.8)
    elements = [identity(DIMS22)] + [zero_operator(DIMS22)] * (len(e) - 1)
    m = Measurement(DIMS22, tuple(elements))
    report = measurement_witness_check(e, m)
    assert report.condition_holds is False
    assert report.dew_indices == ()


def test_witness_condition_rejects_non_ppt_measurement():
    from pptdisc import bell_state

    e = orthogonal_triple_ensemble()
    phi = bell_state("phi+")
    rest = identity(DIMS22) - phi
    m = Measurement(DIMS22, (phi, rest, zero_operator(DIMS22)))
    with pytest.raises(ValidationError, match="PPT"):
        measurement_witness_check(e, m)


def test_classify_equality_routes():
    assert classify_equality(orthogonal_triple_ensemble()).verdict == "equal"
    e, _ = bell_mixture_ensemble(2, 1.0)
    verdict = classify_equality(e)
    assert verdict.verdict == "not_equal"
    assert verdict.margin >= 1e-5


def test_classifiers_agree_on_anchored_family():
    for lam, expect in ((0.5, "not_equal"), (0.8, "equal")):
        e = anchored_bell_ensemble(2, lam)
        assert classify_equality(e).verdict == expect
        assert classify_from_differences(e, 0).verdict == expect


def test_evaluate_measurement_conventions():
    e = anchored_bell_ensemble(2, 0.5)
    n = len(e)
    elements = [identity(DIMS22)] + [zero_operator(DIMS22)] * (n - 1)
    assert evaluate_measurement(e, Measurement(DIMS22, tuple(elements))) == pytest.approx(
        e.items[0][0], abs=1e-14
    )
    uniform = Measurement(DIMS22, tuple((1.0 / n) * identity(DIMS22) for _ in range(n)))
    e_uniform = orthogonal_triple_ensemble()
    third = Measurement(DIMS22, tuple((1.0 / 3.0) * identity(DIMS22) for _ in range(3)))
    assert evaluate_measurement(e_uniform, third) == pytest.approx(1.0 / 3.0, abs=1e-14)


def test_ordering_chain(rng):
    """Any PPT measurement value <= PPT optimum <= global optimum <= 1."""
    e = random_ensemble(rng, 2, 2, 3)
    p = optimal_ppt(e)
    g = optimal_global(e)
    lower = evaluate_measurement(e, p.measurement)
    assert lower - 1e-6 <= p.value <= g.value + 1e-6 <= 1.0 + 2e-6


def test_permutation_invariance(rng):
    """Relabelling the states permutes the measurement and keeps the value."""
    e = random_ensemble(rng, 2, 2, 3)
    perm = [2, 0, 1]
    permuted = Ensemble(e.dims, tuple(e.items[i] for i in perm))
    a = optimal_ppt(e)
    b = optimal_ppt(permuted)
    assert a.value == pytest.approx(b.value, abs=1e-6)
    for new_idx, old_idx in enumerate(perm):
        np.testing.assert_allclose(
            b.measurement.elements[new_idx].matrix,
            a.measurement.elements[old_idx].matrix,
            atol=1e-5,
        )


def test_zero_prior_items_get_zero_elements(rng):
    """Zero-weight states are carried along without affecting anything."""
    base = random_ensemble(rng, 2, 2, 2)
    dims = base.dims
    extra = BipartiteOperator(dims, random_state_matrix(rng, 4))
    padded = Ensemble(dims, base.items + ((0.0, extra),))
    a = optimal_ppt(base)
    b = optimal_ppt(padded)
    assert a.value == pytest.approx(b.value, abs=2e-7)
    assert b.measurement.elements[2].norm == 0.0
