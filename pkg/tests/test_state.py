import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gainloss.errors import DensityValidationError, DimensionMismatchError, InvalidArgumentError
from gainloss.state import (
    SIGMA_X, SIGMA_Z, DensityMatrix, GainLossModel, Observable, PureState, density_from_pure,
    expectation, gamma_variance, inspect_density, purity, random_density, random_pure,
    validate_density,
)


def test_density_invariants_enforced():
    with pytest.raises(InvalidArgumentError):
        DensityMatrix(np.diag([0.6, 0.6]))
    with pytest.raises(InvalidArgumentError):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(InvalidArgumentError):
        DensityMatrix(np.diag([1.5, -0.5]))
    rho = DensityMatrix.maximally_mixed(3)
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 1.0


def test_basis_and_pure():
    assert purity(DensityMatrix.basis(3, 2)) == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        DensityMatrix.basis(2, 2)
    with pytest.raises(InvalidArgumentError):
        PureState(np.array([1.0, 1.0]))
    with pytest.raises(InvalidArgumentError):
        PureState.from_vector([0, 0])
    psi = PureState.from_vector([1, 1j])
    rho = density_from_pure(psi)
    assert expectation(rho, SIGMA_X) == pytest.approx(0.0, abs=1e-15)
    assert purity(rho) == pytest.approx(1.0)


def test_model_validation():
    with pytest.raises(InvalidArgumentError):
        GainLossModel(np.array([[0, 1], [0, 0]]), SIGMA_Z)
    with pytest.raises(DimensionMismatchError):
        GainLossModel(SIGMA_X, np.eye(3))
    with pytest.raises(InvalidArgumentError):
        GainLossModel(SIGMA_X, SIGMA_Z, -0.1)
    m = GainLossModel(SIGMA_X, 0.5 * SIGMA_Z, 0.2)
    assert m.dim == 2 and m.has_gain_loss
    np.testing.assert_allclose(m.K, SIGMA_X - 0.5j * SIGMA_Z)
    assert m.with_kappa(0).kappa == 0.0
    assert not GainLossModel(SIGMA_X, np.zeros((2, 2))).has_gain_loss


def test_expectation_checks():
    rho = DensityMatrix.maximally_mixed(2)
    with pytest.raises(DimensionMismatchError):
        expectation(rho, np.eye(3))
    with pytest.raises(InvalidArgumentError):
        Observable(np.array([[0, 1], [0, 0]]))
    assert gamma_variance(DensityMatrix.basis(2, 0), SIGMA_Z) == 0.0
    assert gamma_variance(rho, SIGMA_Z) == pytest.approx(1.0)


def test_validate_density_repairs_and_rejects():
    m = np.diag([0.5 + 1e-10, 0.5]).astype(complex)
    m[0, 1] = 1e-13j
    fixed = validate_density(m)
    assert abs(np.trace(fixed.matrix) - 1) < 1e-15
    np.testing.assert_array_equal(fixed.matrix, fixed.matrix.conj().T)
    clipped = validate_density(np.diag([1 + 1e-8, -1e-8]))
    assert np.linalg.eigvalsh(clipped.matrix).min() >= 0
    with pytest.raises(DensityValidationError) as info:
        validate_density(np.diag([0.6, 0.6]))
    assert info.value.report.violations
    with pytest.raises(DensityValidationError):
        validate_density(np.diag([1.1, -0.1]))
    assert not inspect_density(np.ones((2, 3))).ok


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_random_states_are_valid(seed, n):
    rng = np.random.default_rng(seed)
    rho = random_density(n, rng)
    assert 1.0 / n - 1e-12 <= purity(rho) <= 1 + 1e-12
    psi = random_pure(n, rng)
    assert purity(density_from_pure(psi)) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.matrix_rank(random_density(n, rng, rank=1).matrix, tol=1e-10) == 1
