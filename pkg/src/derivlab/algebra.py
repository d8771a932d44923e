"""Finite-dimensional matrix Banach algebra M_n(C).

Elements are plain ``numpy`` complex arrays of shape ``(n, n)``; the
helpers here validate shapes, compute the two supported submultiplicative
norms and produce reproducible sample sets.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

#: Identifier of the pseudo-random generator recorded in reports.
RNG_ALGORITHM = "numpy.random.PCG64/SeedSequence"

MAX_DIM = 16

Element = np.ndarray


class NormKind(str, enum.Enum):
    FROBENIUS = "frobenius"
    OPERATOR2 = "operator2"


NormLike = Union[NormKind, str]


class DimensionError(ValueError):
    """Raised when algebra elements of incompatible size are combined."""


def as_element(x, dim: int | None = None) -> Element:
    """Coerce ``x`` to a square complex128 array, checking its dimension."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise DimensionError(f"expected a non-empty square matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.shape[0]}")
    return arr


def identity(dim: int) -> Element:
    return np.eye(dim, dtype=np.complex128)


def zero(dim: int) -> Element:
    return np.zeros((dim, dim), dtype=np.complex128)


def mul(x, y) -> Element:
    x = as_element(x)
    y = as_element(y)
    if x.shape != y.shape:
        raise DimensionError(f"cannot multiply {x.shape} by {y.shape}")
    return x @ y


def norm(x, kind: NormLike = NormKind.FROBENIUS) -> float:
    kind = NormKind(kind)
    x = as_element(x)
    if kind is NormKind.FROBENIUS:
        val = float(np.linalg.norm(x, "fro"))
        if 0.0 < val < 1e-150 or (val == 0.0 and x.any()) or math.isinf(val):
            # sum of squares under/overflowed; rescale by the largest entry
            m = float(np.max(np.abs(x)))
            val = m * float(np.linalg.norm(x / m, "fro"))
        return val
    return float(np.linalg.norm(x, 2))


def sample_unit_circle(count: int) -> List[complex]:
    """The ``count``-th roots of unity ``exp(2*pi*i*j/count)``, starting at 1."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return [complex(np.exp(2j * np.pi * j / count)) for j in range(count)]


@dataclass(frozen=True)
class SampleSet:
    seed: int
    dim: int
    radius: float
    norm_kind: NormKind
    points: Tuple[Element, ...]
    pair_points: Tuple[Tuple[Element, Element], ...]

    def __len__(self) -> int:
        return len(self.points)

    def with_special_pairs(self) -> List[Tuple[Element, Element]]:
        """Pair points plus the degenerate pairs ``(x, x)`` and ``(x, -x)``."""
        pairs = list(self.pair_points)
        for x in self.points:
            pairs.append((x, x))
            pairs.append((x, -x))
        return pairs


def _random_element(rng: np.random.Generator, dim: int, radius: float, kind: NormKind) -> Element:
    while True:
        z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        nz = norm(z, kind)
        if nz > 0.0:
            break
    # norms in [radius/4, radius): keeps points away from the origin where
    # power-type control functions are dominated by rounding
    target = radius * (0.25 + 0.75 * rng.random())
    out = z * (target / nz)
    out.setflags(write=False)
    return out


def generate_samples(
    seed: int,
    dim: int,
    count: int,
    radius: float = 1.0,
    norm_kind: NormLike = NormKind.FROBENIUS,
) -> SampleSet:
    """Deterministic nonzero sample points with norms in ``(0, radius]``.

    ``points`` and the two coordinates of ``pair_points`` come from three
    independent child streams of ``SeedSequence(seed)``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not 1 <= dim <= MAX_DIM:
        raise ValueError(f"dim must be in [1, {MAX_DIM}]")
    kind = NormKind(norm_kind)
    streams = [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(3)]
    points = tuple(_random_element(streams[0], dim, radius, kind) for _ in range(count))
    pairs = tuple(
        (_random_element(streams[1], dim, radius, kind), _random_element(streams[2], dim, radius, kind))
        for _ in range(count)
    )
    return SampleSet(seed, dim, float(radius), kind, points, pairs)


def random_unit_element(seed: int, dim: int, norm_kind: NormLike = NormKind.FROBENIUS) -> Element:
    """A seeded element of norm exactly one (up to rounding)."""
    kind = NormKind(norm_kind)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    out = z / norm(z, kind)
    out.setflags(write=False)
    return out
