"""JSON encoding of matrices, states, and models.

Complex numbers are ``[re, im]`` pairs; matrices are row-major nested lists of
such pairs. Bare real numbers are accepted on input for convenience.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import InvalidArgumentError
from .state import DensityMatrix, GainLossModel, Observable, PureState


def encode_complex(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def decode_complex(x) -> complex:
    if isinstance(x, bool):
        raise InvalidArgumentError(f"not a number: {x!r}")
    if isinstance(x, (int, float)):
        return complex(float(x), 0.0)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
        isinstance(p, (int, float)) and not isinstance(p, bool) for p in x
    ):
        return complex(float(x[0]), float(x[1]))
    raise InvalidArgumentError(f"expected [re, im], got {x!r}")


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[encode_complex(z) for z in row] for row in m]


def decode_matrix(data) -> np.ndarray:
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise InvalidArgumentError("matrix must be a non-empty list of rows")
    n = len(data)
    if any(len(r) != n for r in data):
        raise InvalidArgumentError("matrix must be square")
    return np.array([[decode_complex(x) for x in row] for row in data], dtype=np.complex128)


def encode_vector(v) -> list:
    return [encode_complex(z) for z in np.asarray(v).reshape(-1)]


def decode_vector(data) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise InvalidArgumentError("vector must be a non-empty list")
    return np.array([decode_complex(x) for x in data], dtype=np.complex128)


def encode_density(rho: DensityMatrix) -> dict:
    return {"rho": encode_matrix(rho.matrix)}


def decode_density(data) -> DensityMatrix:
    m = data["rho"] if isinstance(data, dict) else data
    return DensityMatrix(decode_matrix(m))


def encode_pure(psi: PureState) -> dict:
    return {"psi": encode_vector(psi.amplitudes)}


def decode_pure(data) -> PureState:
    return PureState(decode_vector(data["psi"] if isinstance(data, dict) else data))


def encode_observable(f: Observable) -> dict:
    return {"F": encode_matrix(f.matrix)}


def decode_observable(data) -> Observable:
    return Observable(decode_matrix(data["F"] if isinstance(data, dict) else data))


def encode_model(model: GainLossModel) -> dict:
    return {
        "H": encode_matrix(model.H),
        "Gamma": encode_matrix(model.Gamma),
        "kappa": float(model.kappa),
        "dim": model.dim,
    }


def decode_model(data) -> GainLossModel:
    """Decode a model from explicit matrices or the two-level shorthand.

    ``{"gamma": g, "kappa": k}`` stands for ``H = sigma_x``, ``Gamma = g sigma_z``.
    """
    if not isinstance(data, dict):
        raise InvalidArgumentError("model must be a JSON object")
    kappa = data.get("kappa", 0.0)
    if not isinstance(kappa, (int, float)) or isinstance(kappa, bool) or not math.isfinite(kappa):
        raise InvalidArgumentError("kappa must be a number")
    if "H" in data:
        if "Gamma" not in data:
            raise InvalidArgumentError("model with H also needs Gamma")
        model = GainLossModel(decode_matrix(data["H"]), decode_matrix(data["Gamma"]), float(kappa))
        if "dim" in data and data["dim"] != model.dim:
            raise InvalidArgumentError(f"dim {data['dim']} disagrees with matrix size {model.dim}")
        return model
    if "gamma" in data:
        from .experiments import standard_model

        gamma = data["gamma"]
        if not isinstance(gamma, (int, float)) or isinstance(gamma, bool):
            raise InvalidArgumentError("gamma must be a number")
        return standard_model(float(gamma), float(kappa))
    raise InvalidArgumentError("model needs either H/Gamma matrices or gamma")


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, repr-exact floats, trailing newline)."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
