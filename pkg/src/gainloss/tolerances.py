"""Numerical thresholds shared by validation, repair, and the integrator."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # DensityMatrix invariants
    density_hermitian: float = 1e-10   # relative to max(1, ||rho||)
    density_trace: float = 1e-10
    density_min_eig: float = -1e-9

    # Model / observable / pure-state invariants
    operator_hermitian: float = 1e-12
    pure_norm: float = 1e-12

    # Repair thresholds: beyond these a state is rejected rather than fixed
    repair_trace: float = 1e-8
    repair_min_eig: float = -1e-6

    # Linear algebra
    hermitian_input: float = 1e-12     # eig_hermitian precondition, relative
    psd_clamp: float = 1e-10
    defective_condition: float = 1e8
    expm_eigen_condition: float = 1e6

    # Spectral classification
    reality: float = 1e-9
    collision: float = 1e-10

    # Real-valued functionals
    expectation_discard: float = 1e-10
    expectation_error: float = 1e-8
    speed_imag: float = 1e-9


DEFAULT = Tolerances()
