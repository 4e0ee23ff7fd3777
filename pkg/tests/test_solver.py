"""Conic engine: trivial programs, embedding, duality, infeasibility certificates."""

import numpy as np
import pytest

from pptdisc import (
    BipartiteOperator,
    ConicProgram,
    Ensemble,
    HermitianProgram,
    SolverError,
    SolverOptions,
    SystemDims,
    bell_state,
    identity,
    optimal_global,
)
from pptdisc.operators import partial_transpose_matrix
from pptdisc.solver import (
    embed_complex,
    hermitian_basis,
    operator_equality,
    recover_hermitian,
    solve,
    solve_hermitian,
)

from conftest import helstrom_value, random_hermitian, random_state_matrix


def _e(n, i, j):
    m = np.zeros((n, n))
    m[i, j] = 1.0
    return m


def test_scalar_block():
    """minimize x over the 1x1 PSD cone with x = 1."""
    prog = ConicProgram((1,), (np.array([[1.0]]),), (({0: np.array([[1.0]])}, 1.0),))
    sol = solve(prog)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(1.0, abs=1e-9)


def test_diagonal_decoupling():
    """minimize Tr X with both diagonal entries pinned to 1."""
    prog = ConicProgram(
        (2,), (np.eye(2),),
        (({0: _e(2, 0, 0)}, 1.0), ({0: _e(2, 1, 1)}, 1.0)),
    )
    sol = solve(prog)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(2.0, abs=1e-8)
    np.testing.assert_allclose(sol.blocks[0], np.eye(2), atol=1e-7)


def test_invalid_programs_rejected():
    with pytest.raises(SolverError):
        ConicProgram((2,), (np.eye(2),), ())  # no constraints
    with pytest.raises(SolverError):
        ConicProgram((2,), (_e(2, 0, 1),), (({0: np.eye(2)}, 1.0),))  # asym objective


def test_weak_duality_and_residuals(rng):
    """Reported dual objective never exceeds primal beyond the reported gap."""
    c = random_hermitian(rng, 3).real
    c = 0.5 * (c + c.T)
    prog = ConicProgram(
        (3,), (c,),
        (({0: np.eye(3)}, 1.0), ({0: _e(3, 0, 0)}, 0.4)),
    )
    sol = solve(prog)
    assert sol.status == "optimal"
    assert sol.dual_objective <= sol.primal_objective + 1e-6
    assert sol.residuals["primal"] <= 1e-7
    assert sol.residuals["dual"] <= 1e-7
    assert sol.residuals["gap"] <= 1e-7


def test_objective_rescaling_linearity():
    """Scaling the objective scales the reported value linearly."""
    prog1 = ConicProgram(
        (2,), (np.eye(2),),
        (({0: _e(2, 0, 0)}, 1.0), ({0: _e(2, 1, 1)}, 1.0)),
    )
    prog7 = ConicProgram(
        (2,), (7.25 * np.eye(2),),
        (({0: _e(2, 0, 0)}, 1.0), ({0: _e(2, 1, 1)}, 1.0)),
    )
    v1, v7 = solve(prog1).value, solve(prog7).value
    assert abs(7.25 * v1 - v7) <= 10 * 1e-7 * (1 + abs(v7))


def test_determinism():
    prog = ConicProgram(
        (2,), (np.eye(2),),
        (({0: _e(2, 0, 0)}, 1.0), ({0: _e(2, 1, 1)}, 1.0)),
    )
    a, b = solve(prog), solve(prog)
    assert a.iterations == b.iterations
    assert a.value == b.value
    np.testing.assert_array_equal(a.blocks[0], b.blocks[0])


def test_unbounded_detected():
    prog = ConicProgram(
        (2,), (-_e(2, 1, 1),),
        (({0: _e(2, 0, 0)}, 1.0),),
    )
    sol = solve(prog)
    assert sol.status == "unbounded"
    d = sol.unbounded_direction[0]
    assert np.linalg.eigvalsh(d)[0] >= -1e-7


def test_embed_round_trip(rng):
    """Identity passes through the real embedding unchanged."""
    d = 3
    basis = hermitian_basis(d)
    rows = operator_equality({0: (1.0, None)}, np.eye(d, dtype=complex), basis)
    prog = HermitianProgram((d,), (np.eye(d, dtype=complex),), tuple(rows))
    sol = solve_hermitian(prog)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.blocks[0], np.eye(d), atol=1e-7)
    assert sol.embed_residual <= 1e-10


def test_embedded_inner_products_match(rng):
    """Real-embedded inner products reproduce complex trace inner products."""
    d = 4
    a = random_hermitian(rng, d)
    b = random_hermitian(rng, d)
    prog = HermitianProgram(
        (d,), (a,), tuple(operator_equality({0: (1.0, None)}, b, hermitian_basis(d))),
    )
    real_prog = embed_complex(prog)
    from pptdisc.solver import _embed_matrix  # embedding under test

    lhs = float(np.sum(_embed_matrix(a) * _embed_matrix(b))) * 2.0
    rhs = float(np.einsum("ij,ji->", a, b).real)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert real_prog.block_sizes == (2 * d,)


def test_helstrom_two_state_oracle(rng):
    """Global discrimination of two orthogonal states is perfect.

    Oracle: the trace-norm closed form, computed by eigendecomposition.
    """
    dims = SystemDims(2, 2)
    k0 = np.zeros((4, 4), dtype=complex)
    k0[0, 0] = 1.0
    k1 = np.zeros((4, 4), dtype=complex)
    k1[3, 3] = 1.0
    e = Ensemble(dims, (
        (0.5, BipartiteOperator(dims, k0)),
        (0.5, BipartiteOperator(dims, k1)),
    ))
    assert helstrom_value(e) == pytest.approx(1.0, abs=1e-14)
    result = optimal_global(e)
    assert result.value == pytest.approx(1.0, abs=1e-6)


def test_decomposition_feasibility_regression():
    """Fixed regression instance: split the entangled projector minus noise.

    Independent oracle first: F = (1/3) psi- projector + identity/6 lies in
    the PSD-and-PPT cone and pairs to Tr(WF) = 1/6 - 1/4 = -1/12 < 0 with
    W = phi+ projector - identity/4, so no PSD pair (P, Q) with
    P + Q^PT = W can exist and the program must come back infeasible with a
    verifying ray.
    """
    w = (bell_state("phi+") - 0.25 * identity(SystemDims(2, 2))).matrix
    f_oracle = (bell_state("psi-") * (1.0 / 3.0) + identity(SystemDims(2, 2)) * (1.0 / 6.0)).matrix
    assert np.linalg.eigvalsh(f_oracle)[0] >= -1e-14
    assert np.linalg.eigvalsh(partial_transpose_matrix(f_oracle, 2, 2))[0] >= -1e-14
    pairing = float(np.einsum("ij,ji->", w, f_oracle).real)
    assert pairing == pytest.approx(-1.0 / 12.0, abs=1e-14)

    basis = hermitian_basis(4)
    pt = lambda m: partial_transpose_matrix(m, 2, 2)
    rows = operator_equality({0: (1.0, None), 1: (1.0, pt)}, w, basis)
    zero4 = np.zeros((4, 4), dtype=complex)
    prog = HermitianProgram((4, 4), (zero4, zero4), tuple(rows))
    sol = solve_hermitian(prog)
    assert sol.status == "infeasible"
    # certificate verifies its defining inequalities
    ray_p = sol.ray_operator(0)
    ray_q = sol.ray_operator(1)
    assert np.linalg.eigvalsh(0.5 * (ray_p + ray_p.conj().T))[-1] <= 1e-7
    assert np.linalg.eigvalsh(0.5 * (ray_q + ray_q.conj().T))[-1] <= 1e-7
    assert sol.ray_info["margin"] > 1e-6


def test_decomposition_feasible_pure_transpose_form():
    """W that is the partial transpose of a PSD operator splits with P = 0."""
    w = partial_transpose_matrix(bell_state("phi-").matrix, 2, 2)
    basis = hermitian_basis(4)
    pt = lambda m: partial_transpose_matrix(m, 2, 2)
    rows = operator_equality({0: (1.0, None), 1: (1.0, pt)}, w, basis)
    zero4 = np.zeros((4, 4), dtype=complex)
    prog = HermitianProgram((4, 4), (zero4, zero4), tuple(rows))
    sol = solve_hermitian(prog)
    assert sol.status == "optimal"
    p, q = sol.blocks
    recon = p + partial_transpose_matrix(q, 2, 2)
    assert np.linalg.norm(recon - w) <= 1e-6
    assert np.linalg.eigvalsh(p)[0] >= -1e-8
    assert np.linalg.eigvalsh(q)[0] >= -1e-8


def test_rank_deficient_constraints_fall_back(rng):
    """Duplicated constraint rows route through the spectral pseudo-inverse."""
    prog = ConicProgram(
        (2,), (np.eye(2),),
        (
            ({0: _e(2, 0, 0)}, 1.0),
            ({0: _e(2, 0, 0)}, 1.0),
            ({0: _e(2, 1, 1)}, 1.0),
        ),
    )
    sol = solve(prog)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(2.0, abs=1e-7)


def test_max_iter_reported_not_coerced():
    prog = ConicProgram(
        (2,), (np.eye(2),),
        (({0: _e(2, 0, 0)}, 1.0), ({0: _e(2, 1, 1)}, 1.0)),
    )
    sol = solve(prog, SolverOptions(max_iter=3, check_every=1))
    assert sol.status == "max_iter"
    assert sol.iterations == 3
