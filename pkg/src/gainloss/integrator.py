"""Adaptive Dormand-Prince 5(4) integration of the density-matrix flow.

After every accepted step the state is hermitized and its trace reset to one;
the pre-repair trace drift is logged so the size of the repair doubles as an
error meter. Repairs larger than the rejection thresholds abort the run.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .dynamics import covariance_rhs, evolution_speed
from .errors import DensityValidationError, IntegrationError, InvalidArgumentError
from .numerics import hermitize
from .state import DensityMatrix, GainLossModel, _arr, check_dims, validate_density
from .tolerances import DEFAULT

logger = logging.getLogger(__name__)

# Dormand-Prince tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (  # 5th-order minus embedded 4th-order weights
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = math.inf
    stride: int = 1               # store every stride-th accepted step
    first_step: float | None = None
    min_step: float = 1e-14
    max_steps: int = 10_000_000
    safety: float = 0.9

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise InvalidArgumentError("tolerances must be positive")
        if not self.max_step > 0:
            raise InvalidArgumentError("max_step must be positive")
        if self.stride < 1:
            raise InvalidArgumentError("stride must be >= 1")


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[DensityMatrix]
    purity: np.ndarray
    gamma_expectation: np.ndarray
    speed: np.ndarray            # NaN where not defined (kappa > 0)
    trace_drift: np.ndarray      # |tr - 1| before repair
    min_eigenvalue: np.ndarray
    quadrature: float | None = None
    stopped: bool = False        # a stop predicate ended the run early
    n_accepted: int = 0
    n_rejected: int = 0

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]

    def matrices(self) -> np.ndarray:
        return np.array([s.matrix for s in self.states])


@dataclass
class _Samples:
    compute_speed: bool
    model: GainLossModel
    t: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    pur: list = field(default_factory=list)
    gexp: list = field(default_factory=list)
    speed: list = field(default_factory=list)
    drift: list = field(default_factory=list)
    mineig: list = field(default_factory=list)

    def add(self, t, r, drift):
        lo = float(np.linalg.eigvalsh(r)[0])
        try:
            state = validate_density(r)
        except DensityValidationError as exc:
            raise IntegrationError(f"stored state invalid at t={t:.6g}: {exc}", time=t) from exc
        m = state.matrix
        self.t.append(t)
        self.rho.append(state)
        self.pur.append(float(np.vdot(m, m).real))
        self.gexp.append(float(np.trace(self.model.Gamma @ m).real))
        self.speed.append(evolution_speed(state, self.model) if self.compute_speed else math.nan)
        self.drift.append(drift)
        self.mineig.append(lo)


def _error_norm(err, y0, y1, cfg):
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def _initial_step(f, r0, k0, cfg, order=5):
    # Hairer-Norsett-Wanner starting step heuristic.
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(r0)
    d0 = np.sqrt(np.mean(np.abs(r0 / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(k0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    k1 = f(r0 + h0 * k0)
    d2 = np.sqrt(np.mean(np.abs((k1 - k0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / order)
    return min(100 * h0, h1)


def integrate(
    rho0,
    t_final: float,
    model: GainLossModel,
    cfg: IntegratorConfig = IntegratorConfig(),
    *,
    output_times: Sequence[float] | None = None,
    stop: Callable[[float, np.ndarray, np.ndarray], bool] | None = None,
    quadrature: Callable[[np.ndarray], float] | None = None,
    compute_speed: bool | None = None,
) -> Trajectory:
    """Integrate the flow from ``rho0`` over ``[0, t_final]``.

    Parameters
    ----------
    output_times
        If given, steps are shortened to land exactly on these times and only
        they (plus ``t = 0`` and the final time) are stored; ``cfg.stride`` is
        ignored.
    stop
        ``stop(t, rho, drho_dt)`` is checked after every accepted step; returning
        True ends the run there (the state is stored and ``stopped`` set).
    quadrature
        Scalar functional ``q(rho)`` integrated alongside the state with the
        same Runge-Kutta weights; the integral over the run is returned in
        ``Trajectory.quadrature``.
    compute_speed
        Store the closed-form speed at each sample; defaults to ``kappa == 0``.
    """
    check_dims(rho0, model.H)
    if not (np.isfinite(t_final) and t_final > 0):
        raise InvalidArgumentError(f"t_final must be positive, got {t_final}")
    h_op, g_op, kappa = model.H, model.Gamma, model.kappa

    def f(r):
        return covariance_rhs(r, h_op, g_op, kappa)

    if compute_speed is None:
        compute_speed = kappa == 0
    samples = _Samples(compute_speed, model)

    r = np.array(_arr(rho0), dtype=np.complex128)
    samples.add(0.0, r, abs(np.trace(r) - 1))

    targets = None
    if output_times is not None:
        targets = sorted(float(x) for x in output_times if 0 < x < t_final)
        targets.append(float(t_final))
    target_idx = 0

    k0 = f(r)
    h = cfg.first_step or _initial_step(f, r, k0, cfg)
    h = min(h, cfg.max_step, t_final)
    t = 0.0
    q_total = 0.0 if quadrature is not None else None
    err_prev = 1e-4
    accepted = rejected = 0
    since_store = 0
    stopped = False

    while t < t_final:
        if accepted + rejected >= cfg.max_steps:
            raise IntegrationError(f"maximum step count reached at t={t:.6g}", time=t)
        next_stop = targets[target_idx] if targets is not None else t_final
        hit = False
        h_proposed = h
        if t + h >= next_stop or next_stop - (t + h) < 1e-12 * max(1.0, next_stop):
            h = next_stop - t
            hit = True
        if h < cfg.min_step:
            raise IntegrationError(f"step size underflow ({h:.3e}) at t={t:.6g}", time=t)

        ks = [k0]
        qs = [quadrature(r)] if quadrature is not None else None
        for i in range(1, 7):
            y = r.copy()
            for aij, kj in zip(_A[i], ks):
                if aij:
                    y += (h * aij) * kj
            ks.append(f(y))
            if qs is not None and i < 6:
                qs.append(quadrature(y))
        # stage 7 point equals the 5th-order solution
        r_new = y
        err = h * sum(e * k for e, k in zip(_E, ks) if e)
        en = _error_norm(err, r, r_new, cfg)

        if en <= 1.0:
            t_new = next_stop if hit else t + h
            drift = abs(np.trace(r_new) - 1)
            if drift > DEFAULT.repair_trace:
                raise IntegrationError(f"trace drift {drift:.3e} at t={t_new:.6g}", time=t_new)
            r_new = hermitize(r_new)
            r_new = r_new / np.trace(r_new).real
            if qs is not None:
                q_total += h * sum(b * q for b, q in zip(_B, qs) if b)
            t = t_new
            r = r_new
            k0 = f(r)
            accepted += 1
            since_store += 1
            stored = False
            if targets is not None:
                if hit:
                    target_idx += 1
                    samples.add(t, r, drift)
                    stored = True
            elif since_store >= cfg.stride or t >= t_final:
                samples.add(t, r, drift)
                stored = True
            if stored:
                since_store = 0
            if stop is not None and stop(t, r, k0):
                if not stored:
                    samples.add(t, r, drift)
                stopped = True
                break
            # PI controller
            en_c = max(en, 1e-10)
            fac = cfg.safety * en_c ** (-0.7 / 5) * err_prev ** (0.4 / 5)
            fac = min(5.0, max(0.2, fac))
            err_prev = en_c
            h_next = h * fac
            if hit:
                # a step shortened to land on an output time says little about the next one
                h_next = max(h_next, h_proposed)
            h = min(h_next, cfg.max_step)
        else:
            rejected += 1
            h = h * max(0.1, cfg.safety * en ** (-1 / 5))
            hit = False

    if samples.t[-1] != t:
        samples.add(t, r, drift)

    return Trajectory(
        times=np.array(samples.t),
        states=samples.rho,
        purity=np.array(samples.pur),
        gamma_expectation=np.array(samples.gexp),
        speed=np.array(samples.speed),
        trace_drift=np.array(samples.drift),
        min_eigenvalue=np.array(samples.mineig),
        quadrature=q_total,
        stopped=stopped,
        n_accepted=accepted,
        n_rejected=rejected,
    )


def relax(rho0, model: GainLossModel, rhs_tol: float, t_max: float,
          cfg: IntegratorConfig = IntegratorConfig(), stride: int = 1000) -> Trajectory:
    """Integrate until ``||drho/dt||_F <= rhs_tol`` or ``t_max``."""
    cfg = replace(cfg, stride=stride)
    return integrate(
        rho0, t_max, model, cfg,
        stop=lambda _t, _r, k: np.linalg.norm(k) <= rhs_tol,
        compute_speed=False,
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_header(n: int) -> list[str]:
    cols = ["t"]
    for i in range(n):
        for j in range(n):
            cols += [f"rho_{i}{j}_re", f"rho_{i}{j}_im"]
    return cols + ["purity", "gamma_expectation", "speed", "trace_drift", "min_eig"]


def write_trajectory_csv(traj: Trajectory, out) -> None:
    """Write a trajectory as CSV to a path or text stream (LF line endings)."""
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            write_trajectory_csv(traj, fh)
        return
    n = traj.states[0].dim
    w = csv.writer(out, lineterminator="\n")
    w.writerow(trajectory_header(n))
    for k, t in enumerate(traj.times):
        m = traj.states[k].matrix
        row = [_fmt(t)]
        for z in m.reshape(-1):
            row += [_fmt(z.real), _fmt(z.imag)]
        row += [_fmt(traj.purity[k]), _fmt(traj.gamma_expectation[k]), _fmt(traj.speed[k]),
                _fmt(traj.trace_drift[k]), _fmt(traj.min_eigenvalue[k])]
        w.writerow(row)


def read_trajectory_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse the CSV written above back to ``(times, matrices)``; comment lines are skipped."""
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    reader = csv.reader(io.StringIO("\n".join(rows)))
    header = next(reader)
    n = int(round(math.sqrt((len(header) - 6) / 2)))
    times, mats = [], []
    for row in reader:
        vals = [float(x) for x in row]
        times.append(vals[0])
        flat = np.array(vals[1:1 + 2 * n * n])
        mats.append((flat[0::2] + 1j * flat[1::2]).reshape(n, n))
    return np.array(times), np.array(mats)


def trajectory_from_states(times, states, model: GainLossModel, compute_speed: bool | None = None) -> Trajectory:
    """Wrap states produced by a closed-form propagator in a Trajectory."""
    if compute_speed is None:
        compute_speed = model.kappa == 0
    samples = _Samples(compute_speed, model)
    for t, s in zip(times, states):
        r = _arr(s)
        samples.add(float(t), r, abs(np.trace(r) - 1))
    return Trajectory(
        times=np.array(samples.t), states=samples.rho, purity=np.array(samples.pur),
        gamma_expectation=np.array(samples.gexp), speed=np.array(samples.speed),
        trace_drift=np.array(samples.drift), min_eigenvalue=np.array(samples.mineig),
    )
