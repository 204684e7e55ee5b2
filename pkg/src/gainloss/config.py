"""Run configuration files for the command-line tools."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GainLossError, InvalidArgumentError
from .integrator import IntegratorConfig
from .serialization import decode_matrix, decode_model, decode_vector, encode_matrix, encode_model
from .state import DensityMatrix, GainLossModel, density_from_pure, random_density, random_pure, PureState

RHO0_TOKENS = ("maximally-mixed", "random", "random-pure")
_PURE_TOKEN = re.compile(r"^pure:(\d+)$")


class ConfigError(GainLossError):
    """Config file unreadable, malformed, or inconsistent."""


@dataclass(frozen=True, eq=False)
class RunConfig:
    model: GainLossModel
    rho0: object = "maximally-mixed"   # DensityMatrix or token
    t_final: float = 10.0
    output_stride: int = 1
    output_dt: float | None = None
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = math.inf
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def integrator_config(self) -> IntegratorConfig:
        return IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                                max_step=self.max_step, stride=self.output_stride)

    def initial_state(self) -> DensityMatrix:
        n = self.model.dim
        rho0 = self.rho0
        if isinstance(rho0, DensityMatrix):
            if rho0.dim != n:
                raise ConfigError(f"rho0 is {rho0.dim}x{rho0.dim} but the model has n={n}")
            return rho0
        if rho0 == "maximally-mixed":
            return DensityMatrix.maximally_mixed(n)
        rng = np.random.default_rng(self.seed)
        if rho0 == "random":
            return random_density(n, rng)
        if rho0 == "random-pure":
            return density_from_pure(random_pure(n, rng))
        match = _PURE_TOKEN.match(str(rho0))
        if match:
            idx = int(match.group(1))
            if idx >= n:
                raise ConfigError(f"pure:{idx} out of range for n={n}")
            return DensityMatrix.basis(n, idx)
        raise ConfigError(f"unknown rho0 token {rho0!r}")

    def output_times(self) -> np.ndarray | None:
        if self.output_dt is None:
            return None
        k = int(math.floor(self.t_final / self.output_dt + 1e-9))
        times = self.output_dt * np.arange(k + 1)
        if self.t_final - times[-1] > 1e-12 * self.t_final:
            times = np.append(times, self.t_final)
        return times

    def to_json(self) -> dict:
        rho0 = self.rho0
        out = {
            "model": encode_model(self.model),
            "rho0": encode_matrix(rho0.matrix) if isinstance(rho0, DensityMatrix) else rho0,
            "t_final": self.t_final,
            "output_stride": self.output_stride,
            "output_dt": self.output_dt,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "max_step": None if math.isinf(self.max_step) else self.max_step,
            "seed": self.seed,
        }
        out.update(self.extra)
        return out

    @classmethod
    def from_json(cls, data) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if "model" not in data:
            raise ConfigError("config is missing 'model'")
        known = {"model", "rho0", "t_final", "output_stride", "output_dt", "rel_tol",
                 "abs_tol", "max_step", "seed"}
        try:
            model = decode_model(data["model"])
            rho0 = data.get("rho0", "maximally-mixed")
            if isinstance(rho0, list):
                rho0 = DensityMatrix(decode_matrix(rho0))
            elif isinstance(rho0, dict) and "psi" in rho0:
                rho0 = density_from_pure(PureState.from_vector(decode_vector(rho0["psi"])))
            elif not isinstance(rho0, str) or not (rho0 in RHO0_TOKENS or _PURE_TOKEN.match(rho0)):
                raise ConfigError(f"invalid rho0 {rho0!r}")
            max_step = data.get("max_step")
            cfg = cls(
                model=model,
                rho0=rho0,
                t_final=_positive(data.get("t_final", 10.0), "t_final"),
                output_stride=int(data.get("output_stride", 1)),
                output_dt=None if data.get("output_dt") is None else _positive(data["output_dt"], "output_dt"),
                rel_tol=_positive(data.get("rel_tol", 1e-9), "rel_tol"),
                abs_tol=_positive(data.get("abs_tol", 1e-11), "abs_tol"),
                max_step=math.inf if max_step is None else _positive(max_step, "max_step"),
                seed=int(data.get("seed", 0)),
                extra={k: v for k, v in data.items() if k not in known},
            )
        except (InvalidArgumentError, TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.output_stride < 1 or cfg.seed < 0:
            raise ConfigError("output_stride must be >= 1 and seed >= 0")
        cfg.initial_state()  # surface dimension / token errors now
        return cfg


def _positive(x, name) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) or x <= 0:
        raise ConfigError(f"{name} must be a positive number, got {x!r}")
    return float(x)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return RunConfig.from_json(data)
