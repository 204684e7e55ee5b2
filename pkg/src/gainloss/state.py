"""Validated quantum-state and model types and their scalar functionals."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DensityValidationError,
    DimensionMismatchError,
    InconsistencyError,
    InvalidArgumentError,
)
from .numerics import as_cmatrix, dagger, hermitian_defect, hermitize
from .tolerances import DEFAULT

logger = logging.getLogger(__name__)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


def _arr(x) -> np.ndarray:
    """Raw matrix of a DensityMatrix / Observable / ndarray."""
    return x.matrix if hasattr(x, "matrix") else np.asarray(x, dtype=np.complex128)


@dataclass(frozen=True)
class ValidationReport:
    """Measured invariant violations of a candidate density matrix."""

    hermitian_defect: float
    trace: complex
    min_eigenvalue: float
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite ``n x n`` matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_cmatrix(self.matrix, "rho")
        tol = DEFAULT
        scale = max(1.0, float(np.linalg.norm(m)))
        if hermitian_defect(m) > tol.density_hermitian * scale:
            raise InvalidArgumentError(f"rho is not Hermitian (defect {hermitian_defect(m):.2e})")
        tr = np.trace(m)
        if abs(tr - 1) > tol.density_trace:
            raise InvalidArgumentError(f"rho has trace {tr.real:.12g}{tr.imag:+.3g}j, expected 1")
        lo = float(np.linalg.eigvalsh(hermitize(m))[0])
        if lo < tol.density_min_eig:
            raise InvalidArgumentError(f"rho has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        return cls(np.eye(n, dtype=np.complex128) / n)

    @classmethod
    def basis(cls, n: int, index: int) -> "DensityMatrix":
        if not 0 <= index < n:
            raise InvalidArgumentError(f"basis index {index} out of range for n={n}")
        m = np.zeros((n, n), dtype=np.complex128)
        m[index, index] = 1.0
        return cls(m)


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise InvalidArgumentError("amplitudes must be a non-empty finite vector")
        norm = np.linalg.norm(v)
        if abs(norm - 1) > DEFAULT.pure_norm:
            raise InvalidArgumentError(f"state is not normalized (norm {norm:.15g})")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @classmethod
    def from_vector(cls, v) -> "PureState":
        """Normalize ``v`` and wrap it; a zero vector is rejected."""
        v = np.asarray(v, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0 or not np.isfinite(norm):
            raise InvalidArgumentError("cannot normalize a zero or non-finite vector")
        return cls(v / norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]


def _hermitian_operator(m, name) -> np.ndarray:
    m = as_cmatrix(m, name)
    if hermitian_defect(m) > DEFAULT.operator_hermitian * max(1.0, float(np.linalg.norm(m))):
        raise InvalidArgumentError(f"{name} is not Hermitian")
    return _frozen(m)


@dataclass(frozen=True, eq=False)
class Observable:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _hermitian_operator(self.matrix, "observable"))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class GainLossModel:
    """Complex Hamiltonian ``K = H - i Gamma`` plus white-noise strength ``kappa``.

    ``H`` generates the unitary part of the motion; ``Gamma`` sets gain
    (negative expectation) and loss (positive expectation).
    """

    H: np.ndarray
    Gamma: np.ndarray
    kappa: float = 0.0
    dim: int = field(init=False)

    def __post_init__(self):
        h = _hermitian_operator(self.H, "H")
        g = _hermitian_operator(self.Gamma, "Gamma")
        if h.shape != g.shape:
            raise DimensionMismatchError(f"H is {h.shape} but Gamma is {g.shape}")
        kappa = float(self.kappa)
        if not np.isfinite(kappa) or kappa < 0:
            raise InvalidArgumentError(f"kappa must be finite and >= 0, got {self.kappa}")
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "Gamma", g)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "dim", h.shape[0])

    @property
    def K(self) -> np.ndarray:
        return self.H - 1j * self.Gamma

    @property
    def has_gain_loss(self) -> bool:
        return bool(np.any(self.Gamma != 0))

    def with_kappa(self, kappa: float) -> "GainLossModel":
        return GainLossModel(self.H, self.Gamma, kappa)


def check_dims(*objs) -> int:
    dims = {_arr(o).shape[0] for o in objs}
    if len(dims) != 1:
        raise DimensionMismatchError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def density_from_pure(psi: PureState) -> DensityMatrix:
    v = psi.amplitudes if isinstance(psi, PureState) else PureState.from_vector(psi).amplitudes
    return DensityMatrix(np.outer(v, v.conj()))


def real_trace(m: np.ndarray, what: str = "expectation") -> float:
    """Real part of ``tr(m)`` after checking that the imaginary residue is roundoff."""
    tr = complex(np.trace(m))
    scale = max(1.0, abs(tr.real))
    if abs(tr.imag) > DEFAULT.expectation_error * scale:
        raise InconsistencyError(f"{what} has imaginary part {tr.imag:.3e}")
    if abs(tr.imag) > DEFAULT.expectation_discard * scale:
        logger.debug("discarding imaginary residue %.3e in %s", tr.imag, what)
    return tr.real


def expectation(rho, f) -> float:
    """``tr(F rho)`` for a Hermitian observable."""
    check_dims(rho, f)
    return real_trace(_arr(f) @ _arr(rho))


def purity(rho) -> float:
    r = _arr(rho)
    return real_trace(r @ r, "purity")


def gamma_variance(rho, gamma) -> float:
    """``tr(Gamma^2 rho) - tr(Gamma rho)^2``, clipped at zero for roundoff."""
    check_dims(rho, gamma)
    g, r = _arr(gamma), _arr(rho)
    mean = real_trace(g @ r)
    var = real_trace(g @ g @ r) - mean * mean
    return max(var, 0.0)


def inspect_density(candidate) -> ValidationReport:
    m = np.asarray(candidate, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return ValidationReport(np.inf, complex("nan"), -np.inf, ("shape",))
    if not np.all(np.isfinite(m)):
        return ValidationReport(np.inf, complex("nan"), -np.inf, ("non-finite",))
    defect = hermitian_defect(m)
    tr = complex(np.trace(m))
    lo = float(np.linalg.eigvalsh(hermitize(m))[0])
    bad = []
    if abs(tr - 1) > DEFAULT.repair_trace:
        bad.append(f"trace {tr.real:.12g}{tr.imag:+.3g}j (drift {abs(tr - 1):.3e})")
    if lo < DEFAULT.repair_min_eig:
        bad.append(f"negative eigenvalue {lo:.6g}")
    if defect > DEFAULT.repair_trace * max(1.0, float(np.linalg.norm(m))):
        bad.append(f"hermitian defect {defect:.3e}")
    return ValidationReport(defect, tr, lo, tuple(bad))


def validate_density(candidate) -> DensityMatrix:
    """Repair roundoff-level defects of a candidate state or reject it.

    The candidate is hermitized and its trace renormalized when the drift is at
    most the repair threshold; larger defects raise
    :class:`DensityValidationError` carrying a :class:`ValidationReport`.
    """
    report = inspect_density(candidate)
    if not report.ok:
        raise DensityValidationError("invalid density matrix: " + "; ".join(report.violations), report)
    m = hermitize(np.asarray(candidate, dtype=np.complex128))
    m = m / np.trace(m).real
    lo = float(np.linalg.eigvalsh(m)[0])
    if lo < DEFAULT.density_min_eig:
        # Small negative eigenvalues above the rejection threshold are clipped.
        w, v = np.linalg.eigh(m)
        w = np.clip(w, 0.0, None)
        m = (v * w) @ dagger(v)
        m = hermitize(m / np.trace(m).real)
    return DensityMatrix(m)


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random state from the induced (Ginibre) measure; full rank by default."""
    rank = n if rank is None else rank
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    m = g @ dagger(g)
    return DensityMatrix(hermitize(m / np.trace(m).real))


def random_pure(n: int, rng: np.random.Generator) -> PureState:
    return PureState.from_vector(rng.normal(size=n) + 1j * rng.normal(size=n))
