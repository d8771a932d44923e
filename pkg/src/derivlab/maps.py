"""Linear maps on M_n(C), derivations, brackets and perturbed mapping models."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Tuple, Union

import numpy as np

from .algebra import DimensionError, Element, NormKind, SampleSet, as_element, norm, sample_unit_circle

#: Cap used by the ``bounded_bump`` perturbation family.
BUMP_CAP = 1.0

PERTURBATION_FAMILIES = ("power_norm", "bounded_bump", "none")


def vec(x: Element) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> Element:
    return np.asarray(v).reshape((dim, dim), order="F")


@dataclass(frozen=True, eq=False)
class LinearMap:
    """A C-linear operator on M_n(C), stored as its n^2 x n^2 matrix on vec(x)."""

    dim: int
    action: np.ndarray

    def __post_init__(self):
        action = np.array(self.action, dtype=np.complex128)
        if action.shape != (self.dim**2, self.dim**2):
            raise DimensionError(f"action must be {self.dim**2}x{self.dim**2}, got {action.shape}")
        action.setflags(write=False)
        object.__setattr__(self, "action", action)

    def __call__(self, x) -> Element:
        x = as_element(x, self.dim)
        return unvec(self.action @ vec(x), self.dim)

    def _check(self, other: "LinearMap"):
        if other.dim != self.dim:
            raise DimensionError(f"maps act on dimensions {self.dim} and {other.dim}")

    def compose(self, other: "LinearMap") -> "LinearMap":
        """``self o other``."""
        self._check(other)
        return LinearMap(self.dim, self.action @ other.action)

    def __add__(self, other: "LinearMap") -> "LinearMap":
        self._check(other)
        return LinearMap(self.dim, self.action + other.action)

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        self._check(other)
        return LinearMap(self.dim, self.action - other.action)

    def __neg__(self) -> "LinearMap":
        return LinearMap(self.dim, -self.action)

    @classmethod
    def zero(cls, dim: int) -> "LinearMap":
        return cls(dim, np.zeros((dim * dim, dim * dim)))

    @classmethod
    def identity(cls, dim: int) -> "LinearMap":
        return cls(dim, np.eye(dim * dim))

    @classmethod
    def from_function(cls, f: Callable[[Element], Element], dim: int) -> "LinearMap":
        """Assemble the matrix of a (presumed linear) function column by column."""
        cols = []
        for k in range(dim * dim):
            e = np.zeros(dim * dim, dtype=np.complex128)
            e[k] = 1.0
            cols.append(vec(f(unvec(e, dim))))
        return cls(dim, np.stack(cols, axis=1))

    def to_dict(self) -> Dict[str, Any]:
        return {"dim": self.dim, "action": complex_matrix_to_json(self.action)}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "LinearMap":
        return cls(int(d["dim"]), complex_matrix_from_json(d["action"]))


def inner_derivation(a) -> LinearMap:
    """``ad_a : x -> a x - x a``."""
    a = as_element(a)
    n = a.shape[0]
    eye = np.eye(n)
    # vec(a x) = (I kron a) vec x ; vec(x a) = (a^T kron I) vec x
    return LinearMap(n, np.kron(eye, a) - np.kron(a.T, eye))


def transpose_map(dim: int) -> LinearMap:
    return LinearMap.from_function(lambda x: x.T, dim)


def lie_bracket(d1: LinearMap, d2: LinearMap) -> LinearMap:
    """``[d1, d2] = d1 o d2 - d2 o d1``."""
    return d1.compose(d2) - d2.compose(d1)


@dataclass(frozen=True, eq=False)
class PerturbationSpec:
    """Rank-one perturbation ``p(x) = c * s(||x||) * u`` with ``||u|| = 1``.

    ``power_norm`` uses ``s(t) = t**r``; ``bounded_bump`` uses
    ``s(t) = min(t**r, BUMP_CAP)``. ``p(0) = 0`` for every family.
    """

    family: str = "none"
    amplitude: float = 0.0
    exponent: float = 1.0
    direction: Element | None = None
    norm_kind: NormKind = NormKind.FROBENIUS

    def __post_init__(self):
        if self.family not in PERTURBATION_FAMILIES:
            raise ValueError(f"unknown perturbation family {self.family!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        object.__setattr__(self, "norm_kind", NormKind(self.norm_kind))
        if self.family != "none":
            if self.direction is None:
                raise ValueError("direction required")
            u = np.array(as_element(self.direction))
            nu = norm(u, self.norm_kind)
            if abs(nu - 1.0) > 1e-12:
                raise ValueError(f"direction must have unit norm, got {nu}")
            u.setflags(write=False)
            object.__setattr__(self, "direction", u)

    @property
    def active(self) -> bool:
        return self.family != "none" and self.amplitude > 0

    def __call__(self, x: Element) -> Element:
        if not self.active:
            return np.zeros_like(x)
        nx = norm(x, self.norm_kind)
        if nx == 0.0:
            return np.zeros_like(x)
        scale = nx**self.exponent
        if self.family == "bounded_bump":
            scale = min(scale, BUMP_CAP)
        return (self.amplitude * scale) * self.direction

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "amplitude": self.amplitude,
            "exponent": self.exponent,
            "norm_kind": self.norm_kind.value,
            "direction": None if self.direction is None else complex_matrix_to_json(self.direction),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "PerturbationSpec":
        u = d.get("direction")
        return cls(
            d["family"],
            float(d["amplitude"]),
            float(d["exponent"]),
            None if u is None else complex_matrix_from_json(u),
            NormKind(d.get("norm_kind", "frobenius")),
        )


@dataclass(frozen=True, eq=False)
class MappingModel:
    """``g = linear_part + perturbation``; ``g(0) = 0`` always."""

    linear_part: LinearMap
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)

    def __post_init__(self):
        u = self.perturbation.direction
        if u is not None and u.shape[0] != self.linear_part.dim:
            raise DimensionError("perturbation direction and linear part disagree on dimension")

    @property
    def dim(self) -> int:
        return self.linear_part.dim

    def __call__(self, x) -> Element:
        return evaluate(self, x)

    def to_dict(self) -> Dict[str, Any]:
        return {"linear_part": self.linear_part.to_dict(), "perturbation": self.perturbation.to_dict()}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "MappingModel":
        return cls(LinearMap.from_dict(d["linear_part"]), PerturbationSpec.from_dict(d["perturbation"]))


def evaluate(m: MappingModel, x) -> Element:
    x = as_element(x, m.dim)
    if not x.any():
        return np.zeros_like(x)
    return m.linear_part(x) + m.perturbation(x)


@dataclass(frozen=True)
class InequalityParams:
    s: complex
    t: complex

    def __post_init__(self):
        for name in ("s", "t"):
            v = complex(getattr(self, name))
            if not 0 < abs(v) < 1:
                raise ValueError(f"|{name}| must lie in (0, 1), got {abs(v)}")
            object.__setattr__(self, name, v)


Evaluable = Union[LinearMap, MappingModel, Callable[[Element], Element]]


def map_bracket(f: Evaluable, h: Evaluable) -> Callable[[Element], Element]:
    """``x -> f(h(x)) - h(f(x))`` by direct composition."""
    return lambda x: f(h(x)) - h(f(x))


def derivation_residual(
    f: Evaluable,
    samples: SampleSet | Iterable[Tuple[Element, Element]],
    norm_kind: NormKind | str | None = None,
) -> float:
    """Worst ``||f(ab) - f(a) b - a f(b)||`` over sampled pairs."""
    pairs, kind = _pairs_and_kind(samples, norm_kind)
    worst = 0.0
    for a, b in pairs:
        worst = max(worst, norm(f(a @ b) - f(a) @ b - a @ f(b), kind))
    return worst


def linearity_residual(
    f: Evaluable,
    samples: SampleSet,
    circle_count: int = 8,
    norm_kind: NormKind | str | None = None,
) -> Tuple[float, float]:
    """(additivity residual, T^1-homogeneity residual) maxima over the samples."""
    if circle_count < 2:
        raise ValueError("circle_count must be >= 2")
    kind = NormKind(norm_kind or samples.norm_kind)
    add_res = 0.0
    for x, y in samples.pair_points:
        add_res = max(add_res, norm(f(x + y) - f(x) - f(y), kind))
    hom_res = 0.0
    lambdas = sample_unit_circle(circle_count)
    for x in samples.points:
        fx = f(x)
        for lam in lambdas:
            hom_res = max(hom_res, norm(f(lam * x) - lam * fx, kind))
    return add_res, hom_res


def _pairs_and_kind(samples, norm_kind):
    if isinstance(samples, SampleSet):
        return samples.pair_points, NormKind(norm_kind or samples.norm_kind)
    return list(samples), NormKind(norm_kind or NormKind.FROBENIUS)


def complex_matrix_to_json(m: np.ndarray):
    m = np.asarray(m)
    return [[{"re": float(v.real), "im": float(v.imag)} for v in row] for row in m]


def complex_matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(v["re"], v["im"]) for v in row] for row in rows], dtype=np.complex128)
