"""Shared test helpers: seeded samplers and independent oracles."""

import numpy as np
import pytest

from pptdisc import BipartiteOperator, Ensemble, SystemDims


def random_state_matrix(rng, dim):
    """Full-rank density matrix from a complex Gaussian square."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    r = g @ g.conj().T
    return r / np.trace(r).real


def random_hermitian(rng, dim, scale=1.0):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (g + g.conj().T)


def random_ensemble(rng, d1, d2, n):
    dims = SystemDims(d1, d2)
    etas = rng.dirichlet(np.ones(n))
    etas = etas / etas.sum()
    items = tuple(
        (float(eta), BipartiteOperator(dims, random_state_matrix(rng, d1 * d2)))
        for eta in etas
    )
    return Ensemble(dims, items)


def helstrom_value(ensemble):
    """Two-state optimum 1/2 (1 + ||eta1 rho1 - eta2 rho2||_1) via eigenvalues.

    Independent of any solver: the trace norm comes straight from an
    eigendecomposition of the weighted difference.
    """
    assert len(ensemble) == 2
    delta = (ensemble.weighted(0) - ensemble.weighted(1)).matrix
    return 0.5 * (1.0 + np.abs(np.linalg.eigvalsh(delta)).sum())


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
