import io

import numpy as np
import pytest

from gainloss.dynamics import propagate_exact, propagate_noise_unitary, rhs
from gainloss.errors import InvalidArgumentError
from gainloss.experiments import standard_model
from gainloss.integrator import (
    IntegratorConfig, integrate, read_trajectory_csv, relax, trajectory_header, write_trajectory_csv,
)
from gainloss.state import SIGMA_Z, DensityMatrix, GainLossModel, random_density

from conftest import random_hermitian


def _rk4(rho, model, t, steps):
    r = rho.matrix.copy()
    h, g, k = model.H, model.Gamma, model.kappa
    from gainloss.dynamics import covariance_rhs
    dt = t / steps
    for _ in range(steps):
        k1 = covariance_rhs(r, h, g, k)
        k2 = covariance_rhs(r + dt / 2 * k1, h, g, k)
        k3 = covariance_rhs(r + dt / 2 * k2, h, g, k)
        k4 = covariance_rhs(r + dt * k3, h, g, k)
        r = r + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return r


@pytest.mark.parametrize("gamma", [0.5, 2.0])
def test_integrate_matches_exact_propagator(gamma, rng):
    model = standard_model(gamma)
    rho0 = random_density(2, rng)
    times = np.linspace(0, 10, 41)
    traj = integrate(rho0, 10.0, model, output_times=times)
    np.testing.assert_allclose(traj.times, times, atol=0)
    for t, s in zip(traj.times[1:], traj.states[1:]):
        np.testing.assert_allclose(s.matrix, propagate_exact(rho0, t, model)[0].matrix, atol=1e-8)


def test_integrate_matches_rk4_with_noise(rng):
    model = GainLossModel(random_hermitian(3, rng), random_hermitian(3, rng, 0.5), 0.3)
    rho0 = random_density(3, rng)
    traj = integrate(rho0, 2.0, model)
    np.testing.assert_allclose(traj.final.matrix, _rk4(rho0, model, 2.0, 4000), atol=1e-9)


def test_integrate_matches_noise_closed_form(rng):
    model = GainLossModel(random_hermitian(3, rng), np.zeros((3, 3)), 1.0)
    rho0 = random_density(3, rng)
    traj = integrate(rho0, 3.0, model, output_times=[1.0, 2.0, 3.0])
    for t, s in zip(traj.times, traj.states):
        np.testing.assert_allclose(s.matrix, propagate_noise_unitary(rho0, t, model).matrix, atol=1e-8)


def test_trajectory_bookkeeping(rng):
    model = standard_model(0.5)
    traj = integrate(random_density(2, rng), 5.0, model, IntegratorConfig(stride=3))
    assert traj.times[0] == 0 and traj.times[-1] == 5.0
    assert np.all(np.diff(traj.times) > 0)
    assert np.all(traj.trace_drift < 1e-9)
    assert np.all(traj.min_eigenvalue > -1e-9)
    assert np.all(np.isfinite(traj.speed))
    np.testing.assert_allclose(traj.purity, [np.trace(s.matrix @ s.matrix).real for s in traj.states])
    noisy = integrate(random_density(2, rng), 1.0, standard_model(0.5, 0.2))
    assert np.all(np.isnan(noisy.speed))


def test_quadrature_integrates_observable():
    # Gamma = 0, kappa = 0: <sigma_z> under H = sigma_x from |0> is cos(2t).
    model = GainLossModel(np.array([[0, 1], [1, 0]]), np.zeros((2, 2)))
    traj = integrate(DensityMatrix.basis(2, 0), 1.0, model,
                     quadrature=lambda r: float(np.trace(SIGMA_Z @ r).real))
    assert traj.quadrature == pytest.approx(np.sin(2.0) / 2, abs=1e-9)


def test_stop_predicate_and_relax():
    model = standard_model(2.0)
    traj = relax(DensityMatrix.maximally_mixed(2), model, 1e-6, 100.0, IntegratorConfig())
    assert traj.stopped and traj.times[-1] < 100.0
    assert np.linalg.norm(rhs(traj.final, model)) <= 1e-6


def test_bad_arguments():
    rho = DensityMatrix.maximally_mixed(2)
    with pytest.raises(InvalidArgumentError):
        integrate(rho, -1.0, standard_model(0.5))
    with pytest.raises(InvalidArgumentError):
        IntegratorConfig(rel_tol=-1)
    with pytest.raises(InvalidArgumentError):
        IntegratorConfig(stride=0)


def test_csv_roundtrip(rng):
    traj = integrate(random_density(2, rng), 1.0, standard_model(0.3), output_times=[0.5, 1.0])
    buf = io.StringIO()
    write_trajectory_csv(traj, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == ",".join(trajectory_header(2))
    assert "\r" not in text
    times, mats = read_trajectory_csv(text)
    np.testing.assert_array_equal(times, traj.times)
    np.testing.assert_array_equal(mats, traj.matrices())
