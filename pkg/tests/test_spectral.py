import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gainloss.dynamics import propagate_exact, rhs
from gainloss.errors import UnsupportedModelError
from gainloss.experiments import standard_model
from gainloss.spectral import (
    AttractorSet, Phase, analyze, evolve_eigenbasis, expand, period, predict_attractor,
    stationary_set,
)
from gainloss.state import (
    SIGMA_Z, DensityMatrix, GainLossModel, expectation, random_density,
)

from conftest import random_hermitian


@pytest.mark.parametrize("gamma,phase", [
    (0.0, Phase.UNBROKEN), (0.5, Phase.UNBROKEN), (0.999, Phase.UNBROKEN),
    (1.0, Phase.EXCEPTIONAL), (1.001, Phase.BROKEN), (3.0, Phase.BROKEN),
])
def test_phase_labels(gamma, phase):
    assert analyze(standard_model(gamma)).phase is phase


def test_exceptional_point_vectors_coalesce():
    sys = analyze(standard_model(1.0))
    assert sys.left_vectors is None
    v = sys.right_vectors
    assert abs(abs(np.vdot(v[:, 0], v[:, 1])) - 1) < 1e-6
    st_ = stationary_set(sys, standard_model(1.0))
    assert len(st_.pure_fixed_points) == 1
    with pytest.raises(UnsupportedModelError):
        expand(DensityMatrix.maximally_mixed(2), sys)


def test_degenerate_hermitian_is_not_exceptional():
    model = GainLossModel(np.eye(3), np.zeros((3, 3)))
    assert analyze(model).phase is Phase.UNBROKEN


def test_overlap_and_gammas():
    sys = analyze(standard_model(2.0))
    np.testing.assert_allclose(sys.overlap, sys.right_vectors.conj().T @ sys.right_vectors)
    np.testing.assert_allclose(sorted(sys.gammas), [-math.sqrt(3), math.sqrt(3)], atol=1e-12)
    np.testing.assert_allclose(sys.energies, 0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4))
def test_expand_reconstruct_roundtrip(seed, n):
    rng = np.random.default_rng(seed)
    model = GainLossModel(random_hermitian(n, rng), random_hermitian(n, rng, 0.5))
    sys = analyze(model)
    if sys.phase is Phase.EXCEPTIONAL or sys.condition > 1e4:
        return
    rho = random_density(n, rng)
    ex = expand(rho, sys)
    np.testing.assert_allclose(ex.reconstruct(), rho.matrix, atol=1e-10 * sys.condition**2)
    assert ex.trace() == pytest.approx(1.0, abs=1e-10 * sys.condition**2)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0.0, 8.0))
def test_evolve_eigenbasis_matches_propagator(seed, t):
    rng = np.random.default_rng(seed)
    model = GainLossModel(random_hermitian(3, rng), random_hermitian(3, rng, 0.5))
    sys = analyze(model)
    if sys.phase is Phase.EXCEPTIONAL or sys.condition > 1e4:
        return
    rho = random_density(3, rng)
    got = evolve_eigenbasis(expand(rho, sys), t)
    ref = propagate_exact(rho, t, model)[0]
    np.testing.assert_allclose(got.matrix, ref.matrix, atol=1e-9 * sys.condition)


def test_eigenprojectors_are_fixed_points():
    for gamma in (0.5, 2.0):
        model = standard_model(gamma)
        sys = analyze(model)
        for j in range(2):
            assert np.linalg.norm(rhs(sys.projector(j), model)) <= 1e-10


def test_stationary_set_mixtures():
    model = standard_model(0.5)
    st_ = stationary_set(analyze(model), model)
    assert st_.real_count == 2 and len(st_.mixed_generators) == 2
    mix = st_.mixture([0.3, 0.7])
    assert np.linalg.norm(rhs(mix, model)) <= 1e-10
    with pytest.raises(ValueError):
        st_.mixture([0.5, 0.6])
    broken = standard_model(2.0)
    st_b = stationary_set(analyze(broken), broken)
    assert st_b.real_count == 0 and not st_b.mixed_generators
    with pytest.raises(UnsupportedModelError):
        stationary_set(analyze(broken), broken.with_kappa(0.1))


def test_attractor_in_broken_phase():
    model = standard_model(2.0)
    sys = analyze(model)
    proj, gap = predict_attractor(expand(DensityMatrix.maximally_mixed(2), sys))
    assert expectation(proj, SIGMA_Z) == pytest.approx(-math.sqrt(3) / 2, abs=1e-12)
    assert gap == pytest.approx(2 * math.sqrt(3), rel=1e-12)


def test_attractor_set_when_decay_rates_tie():
    model = standard_model(0.5)
    result, gap = predict_attractor(expand(DensityMatrix.maximally_mixed(2), analyze(model)))
    assert isinstance(result, AttractorSet) and result.periodic and gap == 0.0


def test_attractor_ignores_absent_components():
    model = standard_model(2.0)
    sys = analyze(model)
    slow = int(np.argmin(sys.gammas))
    fast = sys.projector(1 - slow)
    proj, _ = predict_attractor(expand(fast, sys))
    np.testing.assert_allclose(proj.matrix, fast.matrix, atol=1e-12)


def test_period_of_unbroken_phase():
    sys = analyze(standard_model(0.6))
    assert period(sys) == pytest.approx(2 * math.pi / (2 * 0.8), rel=1e-12)
    assert period(analyze(standard_model(2.0))) is None
