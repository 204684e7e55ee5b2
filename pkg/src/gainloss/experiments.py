"""Order parameter, equilibria of the noisy flow, and gamma/kappa sweeps.

The two-level model ``K = sigma_x - i gamma sigma_z`` has eigenvalues
``+-sqrt(1 - gamma^2)``: real for ``|gamma| < 1``, an exceptional point at
``|gamma| = 1``, and a complex pair beyond. The long-time average of
``<sigma_z>`` is zero on the real side and ``-sqrt(1 - gamma^-2)`` on the
complex side when ``kappa = 0``; any ``kappa > 0`` replaces the attractor by a
unique equilibrium and smooths out the transition.
"""

from __future__ import annotations

import concurrent.futures
import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import covariance_rhs
from .errors import GainLossError, UnsupportedModelError
from .integrator import IntegratorConfig, integrate, relax
from .numerics import hermitize
from .spectral import Phase, analyze, expand, period
from .state import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DensityMatrix,
    GainLossModel,
    _arr,
    expectation,
    random_density,
    validate_density,
)

logger = logging.getLogger(__name__)

OBSERVABLES = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

# Integrator settings for getting into Newton's basin; path accuracy is irrelevant there.
RELAX_CONFIG = IntegratorConfig(rel_tol=1e-7, abs_tol=1e-9)


class Method(str, enum.Enum):
    TIME_AVERAGE = "TimeAverage"
    ATTRACTOR = "AttractorExpectation"
    EQUILIBRIUM = "EquilibriumExpectation"


@dataclass(frozen=True)
class OrderParameterResult:
    m: float
    method: Method
    T_used: float
    converged: bool
    residual: float
    near_exceptional: bool = False


def standard_model(gamma: float, kappa: float = 0.0) -> GainLossModel:
    """Two-level model with ``H = sigma_x`` and ``Gamma = gamma sigma_z``."""
    return GainLossModel(SIGMA_X, gamma * SIGMA_Z, kappa)


# -- equilibria -----------------------------------------------------------------


def traceless_hermitian_basis(n: int) -> np.ndarray:
    """Generalized Gell-Mann matrices scaled to be orthonormal under ``tr(A B)``."""
    out = []
    for j in range(n):
        for k in range(j + 1, n):
            s = np.zeros((n, n), dtype=np.complex128)
            s[j, k] = s[k, j] = 1 / math.sqrt(2)
            a = np.zeros((n, n), dtype=np.complex128)
            a[j, k], a[k, j] = -1j / math.sqrt(2), 1j / math.sqrt(2)
            out += [s, a]
    for l in range(1, n):
        d = np.zeros((n, n), dtype=np.complex128)
        d[np.arange(l), np.arange(l)] = 1.0
        d[l, l] = -l
        out.append(d / math.sqrt(l * (l + 1)))
    return np.array(out)


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    """Unpacks as ``(rho, residual)``; the remaining fields are diagnostics."""

    rho: DensityMatrix
    residual: float
    relaxed: DensityMatrix
    relax_time: float
    newton_iterations: int
    newton_converged: bool

    def __iter__(self):
        return iter((self.rho, self.residual))


def _newton(model: GainLossModel, start: np.ndarray, tol: float, max_iter: int = 50, fd_step: float = 1e-6):
    n = model.dim
    basis = traceless_hermitian_basis(n)
    center = np.eye(n, dtype=np.complex128) / n
    h, g, kappa = model.H, model.Gamma, model.kappa

    def to_rho(x):
        return center + np.tensordot(x, basis, axes=1)

    def residual_vec(x):
        d = covariance_rhs(to_rho(x), h, g, kappa)
        return np.einsum("aij,ji->a", basis, d).real

    x = np.einsum("aij,ji->a", basis, start - center).real
    fx = residual_vec(x)
    norm = np.linalg.norm(fx)
    it = 0
    while norm > tol and it < max_iter:
        it += 1
        jac = np.empty((len(x), len(x)))
        for a in range(len(x)):
            e = np.zeros_like(x)
            e[a] = fd_step
            jac[:, a] = (residual_vec(x + e) - residual_vec(x - e)) / (2 * fd_step)
        try:
            dx = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        while step > 1e-4:
            x_new = x + step * dx
            f_new = residual_vec(x_new)
            if np.linalg.norm(f_new) < norm:
                break
            step *= 0.5
        else:
            break
        x, fx, norm = x_new, f_new, float(np.linalg.norm(f_new))
    return to_rho(x), norm, it


def find_equilibrium(
    model: GainLossModel,
    rho_start=None,
    relax_tol: float = 1e-6,
    newton_tol: float = 1e-12,
    t_max: float | None = None,
    cfg: IntegratorConfig = RELAX_CONFIG,
) -> EquilibriumResult:
    """Fixed point of the noisy flow (``kappa > 0``).

    Relaxes by integration from ``rho_start`` (default ``I/n``) until the flow
    norm drops to ``relax_tol``, then polishes with Newton's method on the
    ``n^2 - 1`` real coordinates of traceless Hermitian deviations from ``I/n``.
    If Newton fails or leaves the state space, the relaxed state is returned
    with its own residual.
    """
    if model.kappa <= 0:
        raise UnsupportedModelError("equilibria need kappa > 0; use spectral.stationary_set for kappa = 0")
    n = model.dim
    start = DensityMatrix.maximally_mixed(n) if rho_start is None else rho_start
    if t_max is None:
        t_max = 200.0 / (model.kappa * n) + 200.0
    traj = relax(start, model, relax_tol, t_max, cfg)
    relaxed = traj.final
    r_relax = relaxed.matrix
    res_relax = float(np.linalg.norm(covariance_rhs(r_relax, model.H, model.Gamma, model.kappa)))

    r_new, res_newton, iters = _newton(model, r_relax, newton_tol)
    r_new = hermitize(r_new)
    ok = res_newton < res_relax and np.linalg.norm(r_new - r_relax) <= 1e-3
    if ok:
        try:
            rho = validate_density(r_new)
        except GainLossError:
            ok = False
    if not ok:
        logger.warning("Newton refinement rejected (residual %.2e); keeping relaxed state", res_newton)
        rho, residual = relaxed, res_relax
    else:
        residual = float(np.linalg.norm(covariance_rhs(rho.matrix, model.H, model.Gamma, model.kappa)))
    return EquilibriumResult(rho, residual, relaxed, float(traj.times[-1]), iters,
                             ok and residual <= newton_tol)


# -- order parameter ------------------------------------------------------------


def default_initial_state(model: GainLossModel, rng: np.random.Generator | None = None,
                          min_weight: float = 1e-10) -> DensityMatrix:
    """``I/n``, or a random full-rank state if ``I/n`` misses an eigencomponent of ``K``."""
    rho = DensityMatrix.maximally_mixed(model.dim)
    sys = analyze(model.with_kappa(0.0))
    if sys.phase is Phase.EXCEPTIONAL:
        return rho
    rng = rng or np.random.default_rng(0)
    for _ in range(100):
        if np.all(expand(rho, sys).weights >= min_weight):
            return rho
        rho = random_density(model.dim, rng)
    return rho


def _relative_gap(eigenvalues: np.ndarray) -> float:
    if len(eigenvalues) < 2:
        return math.inf
    gaps = np.abs(eigenvalues[:, None] - eigenvalues[None, :])
    np.fill_diagonal(gaps, np.inf)
    return float(np.min(gaps)) / max(1.0, float(np.max(np.abs(eigenvalues))))


def order_parameter(
    model: GainLossModel,
    f=SIGMA_Z,
    rho0=None,
    T_max: float = 200.0,
    tol: float = 1e-6,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> OrderParameterResult:
    """Long-time average of ``<F>``.

    * ``kappa > 0``: expectation in the unique equilibrium.
    * ``kappa = 0``, complex spectrum (or exceptional point): integrate until
      ``||drho/dt|| <= tol``; the average is then set by the attractor.
    * ``kappa = 0``, real spectrum: running time averages over windows
      ``[0, T]``, ``[0, 2T]``, ... starting from the orbit period, until two
      successive averages differ by less than ``tol``.

    Hitting ``T_max`` returns ``converged=False`` rather than raising.
    """
    fm = _arr(f)
    if model.kappa > 0:
        eq = find_equilibrium(model)
        return OrderParameterResult(expectation(eq.rho, fm), Method.EQUILIBRIUM, eq.relax_time,
                                    eq.residual <= max(tol, 1e-12), eq.residual)

    sys = analyze(model)
    near = sys.phase is Phase.EXCEPTIONAL or _relative_gap(sys.eigenvalues) < 1e-3
    if rho0 is None:
        rho0 = default_initial_state(model)

    if sys.phase is not Phase.UNBROKEN:
        traj = relax(rho0, model, tol, T_max, replace(cfg, stride=1))
        final = traj.final
        residual = float(np.linalg.norm(covariance_rhs(final.matrix, model.H, model.Gamma, 0.0)))
        # At an exceptional point the approach is algebraic, so a small flow norm
        # does not bound the distance to the limit.
        converged = traj.stopped and sys.phase is not Phase.EXCEPTIONAL
        return OrderParameterResult(expectation(final, fm), Method.ATTRACTOR, float(traj.times[-1]),
                                    converged, residual, near)

    window = period(sys)
    if window is None:
        e = np.sort(sys.energies)
        diffs = np.diff(e)
        diffs = diffs[diffs > 1e-12]
        if diffs.size == 0:
            # all energies equal: every state is stationary
            return OrderParameterResult(expectation(rho0, fm), Method.TIME_AVERAGE, 0.0, True, 0.0, near)
        window = 2 * math.pi / float(diffs.min())

    def q(r):
        return float(np.trace(fm @ r).real)

    state = rho0
    total = 0.0
    t_done = 0.0
    prev = None
    seg = window
    while True:
        traj = integrate(state, seg, model, replace(cfg, stride=10 ** 9), quadrature=q, compute_speed=False)
        total += traj.quadrature
        t_done += seg
        state = traj.final
        avg = total / t_done
        if prev is not None and abs(avg - prev) < tol:
            return OrderParameterResult(avg, Method.TIME_AVERAGE, t_done, True, abs(avg - prev), near)
        if 2 * t_done > T_max:
            return OrderParameterResult(avg, Method.TIME_AVERAGE, t_done, False,
                                        abs(avg - prev) if prev is not None else math.inf, near)
        prev = avg
        seg = t_done


# -- sweeps ---------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    T_max: float = 200.0
    tol: float = 1e-6
    critical_window: tuple[float, float] = (0.95, 1.05)
    critical_factor: float = 10.0
    threads: int = 1
    seed: int = 0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)


@dataclass(frozen=True)
class SweepRow:
    gamma_inv: float
    kappa: float
    m: float
    phase: str
    converged: bool
    critical: bool = False
    error: str | None = None


@dataclass
class SweepTable:
    rows: list[SweepRow]
    config: SweepConfig
    observable: str = "z"

    def block(self, kappa: float) -> list[SweepRow]:
        return [r for r in self.rows if r.kappa == kappa]

    def to_csv(self) -> str:
        lines = ["gamma_inv,kappa,m,phase,converged"]
        for r in self.rows:
            lines.append(",".join([
                format(r.gamma_inv, ".17g"), format(r.kappa, ".17g"), format(r.m, ".17g"),
                r.phase, "true" if r.converged else "false",
            ]))
        return "\n".join(lines) + "\n"

    def metadata(self) -> dict:
        from . import __version__

        kappas = sorted({r.kappa for r in self.rows})
        grid = [r.gamma_inv for r in self.rows if r.kappa == kappas[0]] if kappas else []
        return {
            "gamma_inv_grid": grid,
            "kappa_list": kappas,
            "observable": self.observable,
            "T_max": self.config.T_max,
            "tol": self.config.tol,
            "critical_window": list(self.config.critical_window),
            "critical_factor": self.config.critical_factor,
            "seed": self.config.seed,
            "rel_tol": self.config.integrator.rel_tol,
            "abs_tol": self.config.integrator.abs_tol,
            "flagged_critical": [i for i, r in enumerate(self.rows) if r.critical],
            "failed": [{"index": i, "error": r.error} for i, r in enumerate(self.rows) if r.error],
            "version": __version__,
        }


def _sweep_point(args) -> SweepRow:
    gamma_inv, kappa, fm, cfg, index = args
    gamma = 1.0 / gamma_inv
    model = standard_model(gamma, kappa)
    lo, hi = cfg.critical_window
    critical = lo < gamma_inv < hi
    t_max = cfg.T_max * (cfg.critical_factor if critical else 1.0)
    try:
        phase = analyze(model.with_kappa(0.0)).phase.value
        rng = np.random.default_rng([cfg.seed, index])
        rho0 = default_initial_state(model, rng)
        res = order_parameter(model, fm, rho0, t_max, cfg.tol, cfg.integrator)
        return SweepRow(gamma_inv, kappa, res.m, phase, res.converged, critical)
    except GainLossError as exc:
        logger.warning("sweep point gamma_inv=%g kappa=%g failed: %s", gamma_inv, kappa, exc)
        return SweepRow(gamma_inv, kappa, math.nan, "Failed", False, critical, str(exc))


def sweep(gamma_inv_grid, kappa_list, f=SIGMA_Z, cfg: SweepConfig = SweepConfig(),
          observable: str = "z") -> SweepTable:
    """Order parameter of the two-level model on a ``(1/gamma, kappa)`` grid.

    Rows are ordered by kappa block, then ascending ``1/gamma``. Points are
    independent; with ``cfg.threads > 1`` they run in worker processes and the
    output is identical to the serial run.
    """
    grid = sorted(float(x) for x in gamma_inv_grid)
    if not grid or not kappa_list:
        raise ValueError("grids must be nonempty")
    if any(x <= 0 for x in grid):
        raise ValueError("gamma_inv values must be positive")
    if len(set(grid)) != len(grid):
        raise ValueError("gamma_inv values must be distinct")
    if any(k < 0 for k in kappa_list):
        raise ValueError("kappa values must be >= 0")
    fm = np.array(_arr(f))
    tasks = []
    for k in kappa_list:
        for x in grid:
            tasks.append((x, float(k), fm, cfg, len(tasks)))
    if cfg.threads > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    return SweepTable(rows, cfg, observable)
