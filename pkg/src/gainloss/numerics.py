"""Dense complex linear algebra for small matrices (n up to a few dozen).

Everything here works on plain ``numpy`` arrays of dtype ``complex128``;
higher-level modules wrap them in validated value types.
"""

from __future__ import annotations

import functools
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DefectiveMatrixError, InvalidArgumentError, NotPositiveError
from .tolerances import DEFAULT


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    condition: float


def as_cmatrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite, square complex128 array (copy-free when possible)."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise InvalidArgumentError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermitian_defect(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - dagger(a)))


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def _eig_order(eigenvalues: np.ndarray) -> list[int]:
    # Ascending real part; near-equal real parts fall back to the imaginary part.
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    tie = 1e-12 * scale

    def cmp(i, j):
        a, b = eigenvalues[i], eigenvalues[j]
        if abs(a.real - b.real) > tie:
            return -1 if a.real < b.real else 1
        if abs(a.imag - b.imag) > tie:
            return -1 if a.imag < b.imag else 1
        return i - j

    return sorted(range(len(eigenvalues)), key=functools.cmp_to_key(cmp))


def eig_general(k, defective_condition: float = DEFAULT.defective_condition) -> EigenDecomposition:
    """Right/left eigen-decomposition of a general complex matrix.

    Columns of ``right`` have unit Euclidean norm. ``left`` is
    ``inv(right)^dagger`` so that ``left^dagger @ right = I``.

    Raises
    ------
    DefectiveMatrixError
        If the condition number of ``right`` exceeds ``defective_condition``.
        The exception carries the sorted eigenvalues and right vectors.
    """
    k = as_cmatrix(k, "K")
    w, r = np.linalg.eig(k)
    order = _eig_order(w)
    w = w[order]
    r = r[:, order]
    r = r / np.linalg.norm(r, axis=0)
    cond = float(np.linalg.cond(r))
    if not np.isfinite(cond) or cond > defective_condition:
        raise DefectiveMatrixError(
            f"eigenvector matrix condition {cond:.3e} exceeds {defective_condition:.1e}",
            eigenvalues=w, right_vectors=r, condition=cond,
        )
    left = dagger(np.linalg.inv(r))
    return EigenDecomposition(w, r, left, cond)


def eig_hermitian(a, tol: float = DEFAULT.hermitian_input) -> tuple[np.ndarray, np.ndarray]:
    """Ascending real eigenvalues and a unitary eigenvector matrix."""
    a = as_cmatrix(a)
    norm = float(np.linalg.norm(a))
    if hermitian_defect(a) > tol * norm:
        raise InvalidArgumentError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(a)
    return w, v


def mat_exp(a, t: float, eigen_condition: float = DEFAULT.expm_eigen_condition) -> np.ndarray:
    """Matrix exponential ``exp(a * t)``.

    Uses the eigendecomposition when the eigenvector matrix is well conditioned
    and falls back to scaling-and-squaring (``scipy.linalg.expm``) otherwise,
    e.g. at exceptional points where ``a`` is defective.
    """
    a = as_cmatrix(a)
    if not np.isfinite(t):
        raise InvalidArgumentError("t must be finite")
    n = a.shape[0]
    if t == 0:
        return np.eye(n, dtype=np.complex128)
    w, r = np.linalg.eig(a)
    cond = float(np.linalg.cond(r))
    if np.isfinite(cond) and cond < eigen_condition:
        return (r * np.exp(w * t)) @ np.linalg.inv(r)
    return scipy.linalg.expm(a * t)


def psd_sqrt(rho, clamp: float = DEFAULT.psd_clamp) -> np.ndarray:
    """Hermitian positive square root of a Hermitian PSD matrix.

    Eigenvalues in ``[-clamp, 0)`` are treated as zero; anything more
    negative raises :class:`NotPositiveError`.
    """
    rho = as_cmatrix(rho, "rho")
    w, v = np.linalg.eigh(hermitize(rho))
    if w[0] < -clamp:
        raise NotPositiveError(f"minimum eigenvalue {w[0]:.3e} below -{clamp:g}")
    s = (v * np.sqrt(np.clip(w, 0.0, None))) @ dagger(v)
    return hermitize(s)
