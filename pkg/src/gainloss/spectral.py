"""Eigenstructure of ``K = H - i Gamma`` and what it implies for the flow.

Eigenvectors of a non-Hermitian ``K`` are not orthogonal, so states are
expanded in the biorthogonal frame: coefficients come from the left vectors
``chi_j`` (rows of ``inv(R)``) and reconstruction uses the right vectors
``phi_j``. An eigenvalue ``lambda_j = E_j - i gamma_j`` has
``<phi_j|H|phi_j> = E_j`` and ``<phi_j|Gamma|phi_j> = gamma_j``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dynamics import covariance_rhs
from .errors import (
    ConditioningError,
    DefectiveMatrixError,
    DegenerateExpansionError,
    NormUnderflowError,
    UnsupportedModelError,
)
from .numerics import dagger, eig_general, hermitize
from .state import DensityMatrix, GainLossModel, _arr, validate_density
from .tolerances import DEFAULT

logger = logging.getLogger(__name__)


class Phase(str, enum.Enum):
    UNBROKEN = "Unbroken"
    BROKEN = "Broken"
    EXCEPTIONAL = "Exceptional"


@dataclass(frozen=True, eq=False)
class EigenSystem:
    eigenvalues: np.ndarray       # lambda_j = E_j - i gamma_j
    right_vectors: np.ndarray     # columns phi_j, unit norm
    left_vectors: np.ndarray | None  # columns chi_j with chi^dagger phi = I; None if exceptional
    overlap: np.ndarray           # S[k, j] = <phi_k|phi_j>
    phase: Phase
    condition: float
    reality_tolerance: float

    @property
    def energies(self) -> np.ndarray:
        return self.eigenvalues.real

    @property
    def gammas(self) -> np.ndarray:
        return -self.eigenvalues.imag

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def real_mask(self) -> np.ndarray:
        scale = max(1.0, float(np.max(np.abs(self.eigenvalues))))
        return np.abs(self.eigenvalues.imag) <= self.reality_tolerance * scale

    def projector(self, j: int) -> DensityMatrix:
        v = self.right_vectors[:, j]
        return validate_density(np.outer(v, v.conj()))


@dataclass(frozen=True, eq=False)
class EigenExpansion:
    """Coefficients ``c[j, k]`` with ``rho = sum_jk c[j, k] |phi_j><phi_k|``."""

    coefficients: np.ndarray
    system: EigenSystem

    @property
    def weights(self) -> np.ndarray:
        return self.coefficients.diagonal().real.copy()

    def trace(self) -> complex:
        return complex(np.sum(self.coefficients * self.system.overlap.T))

    def reconstruct(self) -> np.ndarray:
        r = self.system.right_vectors
        return r @ self.coefficients @ dagger(r)


@dataclass(frozen=True, eq=False)
class StationarySet:
    pure_fixed_points: tuple[DensityMatrix, ...]
    mixed_generators: tuple[DensityMatrix, ...]
    real_count: int

    def mixture(self, weights) -> DensityMatrix:
        """Member of the convex hull of the mixed generators."""
        w = np.asarray(weights, dtype=float)
        if len(w) != len(self.mixed_generators):
            raise ValueError("one weight per mixed generator required")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        return validate_density(sum(p * g.matrix for p, g in zip(w, self.mixed_generators)))


@dataclass(frozen=True)
class AttractorSet:
    """Invariant subspace reached when the slowest decay rate is shared.

    No pointwise limit exists; within the subspace the motion is the
    (quasi-)periodic rotation generated by the real parts of the eigenvalues.
    """

    indices: tuple[int, ...]
    eigenvalues: tuple[complex, ...]
    periodic: bool


def _exceptional_vectors(k: np.ndarray, w: np.ndarray) -> np.ndarray:
    # At a defective point LAPACK's vectors are only accurate to ~sqrt(eps);
    # use the null vector of (K - lambda I) from an SVD instead.
    out = np.empty_like(k)
    for j, lam in enumerate(w):
        _, _, vh = np.linalg.svd(k - lam * np.eye(len(w)))
        v = vh[-1].conj()
        out[:, j] = v / np.linalg.norm(v)
    return out


def analyze(model: GainLossModel, reality_tol: float = DEFAULT.reality) -> EigenSystem:
    """Eigenvalues, biorthogonal frame, overlap matrix, and phase of ``K``."""
    k = model.K
    scale_k = max(1.0, float(np.linalg.norm(k, 2)))
    try:
        dec = eig_general(k)
    except DefectiveMatrixError as exc:
        w = exc.eigenvalues
        r = _exceptional_vectors(k, w)
        return EigenSystem(w, r, None, dagger(r) @ r, Phase.EXCEPTIONAL, exc.condition, reality_tol)

    w, r, left, cond = dec
    overlap = dagger(r) @ r
    phase = _classify(w, reality_tol)
    normal = np.linalg.norm(k @ dagger(k) - dagger(k) @ k) <= 1e-12 * scale_k ** 2
    if not normal and len(w) > 1:
        gaps = np.abs(w[:, None] - w[None, :])
        np.fill_diagonal(gaps, np.inf)
        if np.min(gaps) < DEFAULT.collision * scale_k:
            phase = Phase.EXCEPTIONAL
            left = None
    return EigenSystem(w, r, left, overlap, phase, cond, reality_tol)


def _classify(w: np.ndarray, tol: float) -> Phase:
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.all(np.abs(w.imag) <= tol * scale):
        return Phase.UNBROKEN
    return Phase.BROKEN


def _require_frame(sys: EigenSystem):
    if sys.phase is Phase.EXCEPTIONAL or sys.left_vectors is None:
        raise UnsupportedModelError("eigenbasis operations are undefined at an exceptional point")
    if sys.condition > DEFAULT.defective_condition:
        raise ConditioningError(f"eigenframe condition {sys.condition:.3e} too large")


def expand(rho0, sys: EigenSystem) -> EigenExpansion:
    """Biorthogonal coefficients ``c[j, k] = <chi_j|rho0|chi_k>``."""
    _require_frame(sys)
    left = sys.left_vectors
    c = dagger(left) @ _arr(rho0) @ left
    return EigenExpansion(c, sys)


def _evolved_matrices(exp: EigenExpansion, t: float):
    sys = exp.system
    lam = sys.eigenvalues
    # -i (lambda_j - conj(lambda_k)) t; shift by the largest real part to avoid overflow
    expo = -1j * (lam[:, None] - lam.conj()[None, :]) * t
    present = np.abs(exp.coefficients) > 0
    shift = float(np.max(expo.real[present])) if np.any(present) else 0.0
    c = exp.coefficients * np.exp(expo - shift)
    num = sys.right_vectors @ c @ dagger(sys.right_vectors)
    den = np.trace(num).real
    return num, den, shift


def evolve_eigenbasis(exp: EigenExpansion, t: float) -> DensityMatrix:
    """State at time ``t`` from the analytic eigenframe solution (``kappa = 0``).

    Coefficients evolve with ``exp(-i (lambda_j - conj(lambda_k)) t)``; in the
    unbroken phase this is pure rotation at the Bohr frequencies ``E_j - E_k``,
    and for a diagonal expansion it reduces to weights ``p_j exp(-2 gamma_j t)``.
    """
    num, den, _ = _evolved_matrices(exp, t)
    if not den > 1e-300:
        raise NormUnderflowError(f"eigenbasis normalization {den:.3e} underflowed at t={t}")
    return validate_density(hermitize(num / den))


def stationary_set(sys: EigenSystem, model: GainLossModel, tol: float = 1e-10) -> StationarySet:
    """Pure fixed points (all eigenprojectors) and generators of the mixed fixed points.

    Mixed stationary states are the convex combinations of eigenprojectors with
    real eigenvalues. Every returned state is checked by evaluating the flow.
    """
    if model.kappa != 0:
        raise UnsupportedModelError("stationary_set describes the noise-free flow")
    h, g = model.H, model.Gamma
    real = sys.real_mask()
    pure, mixed = [], []
    seen = []
    for j in range(sys.dim):
        v = sys.right_vectors[:, j]
        if any(abs(np.vdot(u, v)) > 1 - 1e-9 for u in seen):
            continue  # coalesced eigenvector at an exceptional point
        seen.append(v)
        p = sys.projector(j)
        res = float(np.linalg.norm(covariance_rhs(p.matrix, h, g, 0.0)))
        if res > tol:
            logger.warning("eigenprojector %d has residual %.2e; dropped", j, res)
            continue
        pure.append(p)
        if real[j] and abs(np.trace(g @ p.matrix).real) <= tol:
            mixed.append(p)
    return StationarySet(tuple(pure), tuple(mixed), int(np.count_nonzero(real)))


def predict_attractor(exp: EigenExpansion, weight_tol: float = 1e-12):
    """Long-time limit of the noise-free flow from the expanded state.

    Among eigenstates present in the expansion, the one with the smallest
    ``gamma_j`` (largest ``Im lambda_j``) decays slowest and is the limit.

    Returns
    -------
    (DensityMatrix | AttractorSet, float)
        The attractor projector and the gap to the next-smallest ``gamma`` among
        present states (``inf`` if it is the only one), or an
        :class:`AttractorSet` and ``0.0`` when the smallest ``gamma`` is shared.
    """
    sys = exp.system
    _require_frame(sys)
    w = exp.weights
    present = np.flatnonzero(w > weight_tol)
    if present.size == 0:
        raise DegenerateExpansionError("no eigenstate carries weight above tolerance")
    gam = sys.gammas[present]
    scale = max(1.0, float(np.max(np.abs(sys.eigenvalues))))
    tied = present[np.abs(gam - gam.min()) <= sys.reality_tolerance * scale]
    if tied.size > 1:
        lam = tuple(complex(sys.eigenvalues[j]) for j in tied)
        energies = np.array([z.real for z in lam])
        return AttractorSet(tuple(int(j) for j in tied), lam, _commensurate(energies)), 0.0
    best = int(tied[0])
    rest = np.sort(gam)[1:]
    gap = float(rest[0] - gam.min()) if rest.size else math.inf
    return sys.projector(best), gap


def _commensurate(energies: np.ndarray, max_den: int = 1000) -> bool:
    diffs = np.abs(np.diff(np.sort(energies)))
    diffs = diffs[diffs > 1e-12]
    if diffs.size <= 1:
        return True
    base = diffs[0]
    for d in diffs[1:]:
        frac = Fraction(d / base).limit_denominator(max_den)
        if abs(float(frac) - d / base) > 1e-9:
            return False
    return True


def period(sys: EigenSystem) -> float | None:
    """Period of every orbit in an unbroken phase with commensurate energies, else None."""
    if sys.phase is not Phase.UNBROKEN:
        return None
    e = np.sort(sys.energies)
    diffs = np.abs(e[:, None] - e[None, :])
    freqs = np.unique(np.round(diffs[diffs > 1e-12], 12))
    if freqs.size == 0:
        return None
    if not _commensurate(e):
        return None
    base = freqs.min()
    lcm_num = 1
    for f in freqs:
        frac = Fraction(f / base).limit_denominator(1000)
        lcm_num = lcm_num * frac.denominator // math.gcd(lcm_num, frac.denominator)
    return 2 * math.pi * lcm_num / base
