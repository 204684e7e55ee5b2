"""Equations of motion for mixed states under ``K = H - i Gamma`` with optional noise.

The flow is::

    drho/dt = -i[H, rho] - ({Gamma, rho} - 2 tr(rho Gamma) rho) + kappa (I - n rho)

which preserves trace and positivity. With ``kappa = 0`` it has the closed-form
solution ``exp(-iKt) rho0 exp(iK^dagger t)`` normalized to unit trace; with
``Gamma = 0`` the noisy flow relaxes to ``I/n`` in the rotating frame of ``H``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NormUnderflowError, UnsupportedModelError, InvalidArgumentError, InconsistencyError
from .numerics import dagger, hermitize, mat_exp, psd_sqrt
from .state import (
    DensityMatrix,
    GainLossModel,
    PureState,
    _arr,
    check_dims,
    real_trace,
    validate_density,
)
from .tolerances import DEFAULT

# Keep ||K|| * dt below this per closed-form segment so exp(-iKt) stays representable.
SEGMENT_NORM_TIME = 20.0


def covariance_rhs(r: np.ndarray, h: np.ndarray, g: np.ndarray, kappa: float) -> np.ndarray:
    """Array kernel of :func:`rhs`; no validation, used inside the integrator."""
    hr = h @ r
    gr = g @ r
    out = -1j * (hr - dagger(hr)) - (gr + dagger(gr)) + (2.0 * np.trace(gr).real) * r
    if kappa:
        n = r.shape[0]
        out = out - (kappa * n) * r
        out[np.diag_indices(n)] += kappa
    return out


def rhs(rho, model: GainLossModel) -> np.ndarray:
    """Time derivative of ``rho`` (traceless, Hermitian)."""
    check_dims(rho, model.H)
    return covariance_rhs(_arr(rho), model.H, model.Gamma, model.kappa)


def _require_noise_free(model: GainLossModel, what: str):
    if model.kappa != 0:
        raise UnsupportedModelError(f"{what} requires kappa = 0 (got {model.kappa})")


def rhs_double_bracket(rho, model: GainLossModel) -> np.ndarray:
    """Alternative flow ``-i[H, rho] - [[Gamma, rho], rho]``.

    Agrees with :func:`rhs` on pure states only.
    """
    _require_noise_free(model, "double-bracket flow")
    check_dims(rho, model.H)
    r, h, g = _arr(rho), model.H, model.Gamma
    c = g @ r - r @ g
    return -1j * (h @ r - r @ h) - (c @ r - r @ c)


def pure_rhs(psi: PureState, model: GainLossModel) -> np.ndarray:
    """Norm-preserving state-vector flow ``-i(H - <H>)psi - (Gamma - <Gamma>)psi``."""
    _require_noise_free(model, "pure-state flow")
    v = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=np.complex128)
    if v.shape[0] != model.dim:
        raise InvalidArgumentError("state and model dimensions differ")
    hv, gv = model.H @ v, model.Gamma @ v
    mean_h = np.vdot(v, hv).real
    mean_g = np.vdot(v, gv).real
    return -1j * (hv - mean_h * v) - (gv - mean_g * v)


def _propagate_segment(r: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, float]:
    out = u @ r @ dagger(u)
    norm = np.trace(out).real
    if not norm > 1e-300 or not np.isfinite(norm):
        raise NormUnderflowError(
            f"unnormalized trace {norm:.3e} out of range; use shorter segments"
        )
    return hermitize(out / norm), norm


def propagate_exact_log(rho0, t: float, model: GainLossModel,
                        max_norm_time: float = SEGMENT_NORM_TIME) -> tuple[DensityMatrix, float]:
    """Closed-form noise-free propagation returning ``log`` of the norm factor.

    The interval is split into segments with ``||K|| dt <= max_norm_time`` and the
    state is renormalized between segments, so the result stays finite however
    long the run is.
    """
    _require_noise_free(model, "exact propagation")
    check_dims(rho0, model.H)
    if not np.isfinite(t) or t < 0:
        raise InvalidArgumentError(f"t must be finite and >= 0, got {t}")
    r = _arr(rho0)
    if t == 0:
        return (rho0 if isinstance(rho0, DensityMatrix) else DensityMatrix(r)), 0.0
    a = -1j * model.K
    knorm = float(np.linalg.norm(model.K, 2))
    segments = max(1, math.ceil(knorm * t / max_norm_time))
    dt = t / segments
    u = mat_exp(a, dt)
    log_norm = 0.0
    for _ in range(segments):
        r, norm = _propagate_segment(r, u)
        log_norm += math.log(norm)
    return validate_density(r), log_norm


def propagate_exact(rho0, t: float, model: GainLossModel) -> tuple[DensityMatrix, float]:
    """Normalized closed-form solution for ``kappa = 0``.

    Returns ``(rho_t, N_t)`` where ``N_t = tr(exp(-iKt) rho0 exp(iK^dagger t))``
    is the unnormalized trace. Raises :class:`NormUnderflowError` when ``N_t``
    leaves the double range; :func:`propagate_exact_log` handles those runs.
    """
    state, log_norm = propagate_exact_log(rho0, t, model)
    if log_norm < math.log(1e-300) or log_norm > math.log(1e300):
        raise NormUnderflowError(
            f"norm factor exp({log_norm:.1f}) not representable; "
            "use propagate_exact_log for segmented long-time propagation"
        )
    return state, math.exp(log_norm)


def propagate_noise_unitary(rho0, t: float, model: GainLossModel) -> DensityMatrix:
    """Closed form for ``Gamma = 0``: ``(1/n)[I + (n U rho0 U^dagger - I) exp(-kappa n t)]``."""
    if model.has_gain_loss:
        raise UnsupportedModelError("closed-form noisy propagation requires Gamma = 0")
    check_dims(rho0, model.H)
    if not np.isfinite(t) or t < 0:
        raise InvalidArgumentError(f"t must be finite and >= 0, got {t}")
    n = model.dim
    u = mat_exp(-1j * model.H, t)
    rot = u @ _arr(rho0) @ dagger(u)
    eye = np.eye(n, dtype=np.complex128)
    out = (eye + (n * rot - eye) * math.exp(-model.kappa * n * t)) / n
    return validate_density(out)


def purity_rate(rho, model: GainLossModel) -> float:
    """``d tr(rho^2)/dt = -4(tr(Gamma rho^2) - tr(rho Gamma) tr(rho^2)) + 2 kappa (1 - n tr rho^2)``."""
    check_dims(rho, model.H)
    r, g = _arr(rho), model.Gamma
    r2 = r @ r
    p = real_trace(r2, "purity")
    rate = -4.0 * (real_trace(g @ r2) - real_trace(g @ r) * p)
    return rate + 2.0 * model.kappa * (1.0 - model.dim * p)


def observable_rate(rho, f, model: GainLossModel) -> float:
    """``d<F>/dt = i<[H,F]> - <{Gamma,F}> + 2<Gamma><F> + kappa (tr F - n <F>)``."""
    check_dims(rho, f, model.H)
    r, fm, h, g = _arr(rho), _arr(f), model.H, model.Gamma
    mean_f = real_trace(fm @ r)
    rate = real_trace(1j * (h @ fm - fm @ h) @ r) - real_trace((g @ fm + fm @ g) @ r)
    rate += 2.0 * real_trace(g @ r) * mean_f
    return rate + model.kappa * (np.trace(fm).real - model.dim * mean_f)


def evolution_speed(rho, model: GainLossModel) -> float:
    """Closed-form speed of the noise-free flow.

    ``v = 2(tr(H^2 rho) - tr(H s H s)) - 2i tr([H,Gamma] rho)
          + 2(tr(Gamma^2 rho) + tr(Gamma s Gamma s) - 2 tr(Gamma rho)^2)``
    with ``s = sqrt(rho)``.
    """
    _require_noise_free(model, "evolution speed")
    check_dims(rho, model.H)
    r, h, g = _arr(rho), model.H, model.Gamma
    s = psd_sqrt(r)
    hs, gs = h @ s, g @ s
    mean_g = np.trace(g @ r)
    v = (
        2.0 * (np.trace(h @ h @ r) - np.trace(hs @ hs))
        - 2j * np.trace((h @ g - g @ h) @ r)
        + 2.0 * (np.trace(g @ g @ r) + np.trace(gs @ gs) - 2.0 * mean_g * mean_g)
    )
    if abs(v.imag) > DEFAULT.speed_imag * max(1.0, abs(v.real)):
        raise InconsistencyError(f"speed has imaginary part {v.imag:.3e}")
    return float(v.real)
