from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Any, Dict, Optional

from .algebra import MAX_DIM, NormKind
from .control import regime_of


class ConfigError(ValueError):
    pass


def _complex_from_json(v) -> complex:
    if isinstance(v, dict):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, (int, float)):
        return complex(v)
    raise ConfigError(f"complex values must be {{'re': .., 'im': ..}}, got {v!r}")


def _complex_to_json(z: complex) -> Dict[str, float]:
    return {"re": float(z.real), "im": float(z.imag)}


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 1
    dim: int = 2
    norm_kind: str = "frobenius"
    s: complex = 0.5
    t: complex = 0.5j
    regime: str = "contractive"
    r: float = 3.0
    c_g: float = 0.1
    c_h: float = 0.1
    sample_count: int = 16
    calibration_count: int = 64
    circle_count: int = 8
    tol: float = 1e-10
    k_max: Optional[int] = None
    output_path: Optional[str] = None

    def validate(self) -> "ExperimentConfig":
        problems = []
        if not 1 <= self.dim <= MAX_DIM:
            problems.append(f"dim must be in [1, {MAX_DIM}]")
        try:
            NormKind(self.norm_kind)
        except ValueError:
            problems.append(f"norm_kind must be one of {[k.value for k in NormKind]}")
        for name in ("s", "t"):
            v = abs(complex(getattr(self, name)))
            if not 0 < v < 1:
                problems.append(f"|{name}| must lie in (0, 1), got {v}")
        if self.regime not in ("contractive", "expansive"):
            problems.append("regime must be 'contractive' or 'expansive'")
        elif regime_of(self.r) != self.regime:
            need = "r > 2" if self.regime == "contractive" else "r < 1"
            problems.append(f"regime mismatch: {self.regime} needs {need}, got r={self.r}")
        if self.c_g < 0 or self.c_h < 0:
            problems.append("c_g and c_h must be nonnegative")
        if self.sample_count < 1 or self.calibration_count < 1:
            problems.append("sample counts must be >= 1")
        if self.circle_count < 2:
            problems.append("circle_count must be >= 2")
        if not self.tol > 0:
            problems.append("tol must be positive")
        if self.k_max is not None and self.k_max < 1:
            problems.append("k_max must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def to_dict(self) -> Dict[str, Any]:
        d = dataclasses.asdict(self)
        d["s"] = _complex_to_json(complex(self.s))
        d["t"] = _complex_to_json(complex(self.t))
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ExperimentConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ConfigError(f"unknown config fields: {unknown}")
        kwargs = dict(d)
        try:
            for name in ("s", "t"):
                if name in kwargs:
                    kwargs[name] = _complex_from_json(kwargs[name])
            for name in ("seed", "dim", "sample_count", "calibration_count", "circle_count"):
                if name in kwargs:
                    kwargs[name] = int(kwargs[name])
            for name in ("r", "c_g", "c_h", "tol"):
                if name in kwargs:
                    kwargs[name] = float(kwargs[name])
            if kwargs.get("k_max") is not None:
                kwargs["k_max"] = int(kwargs["k_max"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)
