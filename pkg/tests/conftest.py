"""Shared fixtures and independent reference computations."""

import numpy as np
import pytest
from scipy.optimize import brentq

from gainloss.state import SIGMA_X, SIGMA_Y, SIGMA_Z


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(n, rng, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def expm_two_level(gamma, t):
    """exp(-iKt) for K = sigma_x - i gamma sigma_z from K^2 = (1 - gamma^2) I."""
    k = SIGMA_X - 1j * gamma * SIGMA_Z
    w2 = 1.0 - gamma**2
    if w2 == 0:
        return np.eye(2) - 1j * k * t
    w = np.sqrt(complex(w2))
    return np.cos(w * t) * np.eye(2) - 1j * (np.sin(w * t) / w) * k


def bloch(rho):
    return np.real([np.trace(SIGMA_X @ rho), np.trace(SIGMA_Y @ rho), np.trace(SIGMA_Z @ rho)])


def from_bloch(x):
    return (np.eye(2) + x[0] * SIGMA_X + x[1] * SIGMA_Y + x[2] * SIGMA_Z) / 2


def bloch_equilibrium(gamma, kappa):
    """Fixed point of the two-level noisy flow from its Bloch-vector reduction.

    With x = 0, y = z/(gamma z - kappa), z solves
    z/(gamma z - kappa) = gamma(1 - z^2) + kappa z on the physical branch.
    """
    def f(z):
        return z - (gamma * z - kappa) * (gamma * (1 - z * z) + kappa * z)

    zs = np.linspace(-1, 0, 20001)
    vals = f(zs)
    roots = []
    for a, b, fa, fb in zip(zs[:-1], zs[1:], vals[:-1], vals[1:]):
        if fa == 0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(f, a, b, xtol=1e-15))
    best = None
    for z in roots:
        y = z / (gamma * z - kappa)
        if y * y + z * z <= 1 + 1e-12:
            best = (0.0, y, z) if best is None or z < best[2] else best
    return np.array(best)


# -- session-wide record of stored trajectory samples and acceptance outcomes --

SAMPLE_STATS = {"count": 0, "max_trace_dev": 0.0, "min_eig": float("inf")}
ACCEPTANCE = {}


@pytest.fixture(autouse=True, scope="session")
def _track_samples():
    from gainloss import integrator

    original = integrator._Samples.add

    def add(self, t, r, drift):
        original(self, t, r, drift)
        m = self.rho[-1].matrix
        SAMPLE_STATS["count"] += 1
        SAMPLE_STATS["max_trace_dev"] = max(SAMPLE_STATS["max_trace_dev"],
                                            abs(np.trace(m) - 1), self.drift[-1])
        SAMPLE_STATS["min_eig"] = min(SAMPLE_STATS["min_eig"], float(np.linalg.eigvalsh(m)[0]),
                                      self.mineig[-1])

    integrator._Samples.add = add
    yield
    integrator._Samples.add = original


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        tr.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    if SAMPLE_STATS["count"]:
        ok = SAMPLE_STATS["max_trace_dev"] <= 1e-9 and SAMPLE_STATS["min_eig"] >= -1e-9
        tr.write_line(
            f"session-wide samples: {'PASS' if ok else 'FAIL'}  {SAMPLE_STATS['count']} stored, "
            f"max |tr-1| {SAMPLE_STATS['max_trace_dev']:.2e}, min eig {SAMPLE_STATS['min_eig']:.2e}"
        )
