"""Residuals of the stability inequalities and the two reconstructions.

Both reconstructions recover the exact pair ``(D, H)`` from an approximate
pair ``(g, h)`` pointwise:

* the direct method iterates ``2^k g(x / 2^k)`` (contractive regime) or
  ``2^-k g(2^k x)`` (expansive regime) until the Cauchy increments, with a
  geometric remainder estimate, fall below ``tol``;
* the fixed-point method applies ``J(g, h)(x) = (2 g(x/2), 2 h(x/2))``
  (resp. ``(g(2x)/2, h(2x)/2)``) and stops through the a-posteriori bound
  ``d(y, y*) <= d(y, Jy) / (1 - L)`` in the generalized metric
  ``d((g, h), (g1, h1)) = sup_x (||g - g1|| + ||h - h1||)(x) / phi(x, x)``.

Powers of two are applied as exact floating point scalings, so the linear
part of ``g`` is reproduced bit-for-bit along the iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import Element, NormKind, SampleSet, norm, sample_unit_circle
from .control import (
    ControlFunction,
    contraction_constant,
    phi,
    regime_of,
    sum_contractive_series,
    sum_expansive_series,
)
from .maps import InequalityParams, LinearMap, MappingModel, PerturbationSpec, map_bracket

MODES = ("contractive", "expansive")
BOUND_KINDS = ("eq25", "eq213", "eq32", "eq36", "cor24", "cor26")
DEFAULT_K_MAX = {"contractive": 60, "expansive": 120}
SAFETY_FACTOR = 1.05

Pair = Tuple[Callable[[Element], Element], Callable[[Element], Element]]


class RegimeError(ValueError):
    """The control function admits no contraction constant below one."""


class InstanceError(ValueError):
    pass


@dataclass
class ResidualReport:
    name: str
    lhs: float
    rhs: float
    slack: float
    satisfied: bool
    tolerance: float
    witness: Optional[tuple] = None
    lhs_values: List[float] = field(default_factory=list)
    rhs_values: List[float] = field(default_factory=list)

    @classmethod
    def from_values(cls, name, lhs_values, rhs_values, tolerance, witnesses=None) -> "ResidualReport":
        lhs_arr = np.asarray(lhs_values, dtype=float)
        rhs_arr = np.asarray(rhs_values, dtype=float)
        if lhs_arr.size == 0:
            return cls(name, 0.0, 0.0, 0.0, True, tolerance)
        slack = rhs_arr - lhs_arr
        i = int(np.argmin(slack))
        return cls(
            name,
            float(lhs_arr[i]),
            float(rhs_arr[i]),
            float(slack[i]),
            bool(slack[i] >= -tolerance),
            tolerance,
            None if witnesses is None else witnesses[i],
            [float(v) for v in lhs_arr],
            [float(v) for v in rhs_arr],
        )


# -- inequality residuals ---------------------------------------------------


def st_inequality_terms(g, h, p: InequalityParams, x, y, lam: complex, kind: NormKind) -> Tuple[float, float]:
    """LHS and the (s, t) part of the RHS of the additive-additive inequality at ``(x, y, lam)``."""
    gx, gy, hx = g(x), g(y), h(x)
    lhs = norm(g(lam * (x + y)) - lam * gx - lam * gy, kind) + norm(
        h(lam * (x + y)) + h(lam * (x - y)) - 2 * lam * hx, kind
    )
    rhs = norm(p.s * (2 * g(lam * (x + y) / 2) - lam * gx - lam * gy), kind) + norm(
        p.t * (2 * h(lam * (x + y) / 2) + 2 * h(lam * (x - y) / 2) - 2 * lam * hx), kind
    )
    return lhs, rhs


def derivation_pair_terms(g, h, x, y, kind: NormKind) -> float:
    b = map_bracket(g, h)
    xy = x @ y
    return norm(b(xy) - b(x) @ y - x @ b(y), kind) + norm(h(xy) - h(x) @ y - x @ h(y), kind)


def residual_st_inequality(
    g,
    h,
    p: InequalityParams,
    samples: SampleSet,
    lambdas: Optional[Sequence[complex]] = None,
    cf: Optional[ControlFunction] = None,
    tol: float = 1e-12,
) -> ResidualReport:
    """Worst slack of the additive-additive inequality, with ``+ phi(x, y)`` when ``cf`` is given.

    Without ``cf`` the exact inequality is checked at ``lambda = 1``.
    """
    kind = samples.norm_kind
    if lambdas is None:
        lambdas = [1.0] if cf is None else sample_unit_circle(8)
    lhs_v, rhs_v, wit = [], [], []
    for x, y in samples.with_special_pairs():
        extra = 0.0 if cf is None else phi(cf, x, y)
        for lam in lambdas:
            lhs, rhs = st_inequality_terms(g, h, p, x, y, lam, kind)
            lhs_v.append(lhs)
            rhs_v.append(rhs + extra)
            wit.append((x, y, lam))
    name = "st_inequality" if cf is not None else "st_inequality_exact"
    return ResidualReport.from_values(name, lhs_v, rhs_v, tol, wit)


def residual_derivation_pair(g, h, samples: SampleSet, cf: ControlFunction, tol: float = 1e-12) -> ResidualReport:
    """Worst slack of the bracket/derivation inequality with right side ``phi(x, y)``."""
    kind = samples.norm_kind
    lhs_v, rhs_v, wit = [], [], []
    for x, y in samples.with_special_pairs():
        lhs_v.append(derivation_pair_terms(g, h, x, y, kind))
        rhs_v.append(phi(cf, x, y))
        wit.append((x, y, 1.0))
    return ResidualReport.from_values("derivation_pair", lhs_v, rhs_v, tol, wit)


# -- instances ----------------------------------------------------------------


@dataclass
class Instance:
    g: MappingModel
    h: MappingModel
    cf: ControlFunction
    params: InequalityParams
    regime: str
    certificate: Tuple[ResidualReport, ResidualReport]


def make_instance(
    D: LinearMap,
    H: LinearMap,
    pert_g: PerturbationSpec,
    pert_h: PerturbationSpec,
    p: InequalityParams,
    calibration_samples: SampleSet,
    circle_count: int = 8,
    r: Optional[float] = None,
    safety: float = SAFETY_FACTOR,
    refine: int = 8,
    refine_steps: int = 40,
) -> Instance:
    """Build ``g = D + pert_g``, ``h = H + pert_h`` and calibrate a power control function.

    ``theta`` is ``safety`` times the largest ratio, over the calibration
    pairs (special pairs included) and sampled ``lambda``, of the excess of
    either inequality's left side over its ``phi``-free right side, divided
    by ``||x||^r + ||y||^r``. The ``refine`` worst pairs are then pushed
    uphill by a seeded random local search inside the sampling ball, since
    the bracket inequality is not scale invariant and its supremum is easy
    to undershoot. With no active perturbation ``theta = 0``.
    """
    active = [q for q in (pert_g, pert_h) if q.active]
    regimes = {regime_of(q.exponent) for q in active}
    if None in regimes or len(regimes) > 1:
        raise InstanceError(
            f"perturbation exponents {[q.exponent for q in active]} are not in a single regime (r > 2 or r < 1)"
        )
    if r is None:
        r = min(q.exponent for q in active) if active else 3.0
    regime = regime_of(r)
    if regime is None or (regimes and regimes != {regime}):
        raise InstanceError(f"control exponent r={r} is outside the perturbation regime")
    g = MappingModel(D, pert_g)
    h = MappingModel(H, pert_h)
    kind = calibration_samples.norm_kind
    base = ControlFunction("power", 1.0, r, kind)
    lambdas = sample_unit_circle(circle_count)

    def ratio(x, y):
        excess = derivation_pair_terms(g, h, x, y, kind)
        for lam in lambdas:
            lhs, rhs = st_inequality_terms(g, h, p, x, y, lam, kind)
            excess = max(excess, lhs - rhs)
        return excess / phi(base, x, y)

    theta = 0.0
    if active:
        scored = sorted(
            ((ratio(x, y), i, x, y) for i, (x, y) in enumerate(_calibration_pairs(calibration_samples))),
            key=lambda t: (-t[0], t[1]),
        )
        worst = scored[0][0]
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([calibration_samples.seed, 1])))
        for score, _, x, y in scored[:refine]:
            worst = max(worst, _refine_pair(ratio, x, y, score, calibration_samples.radius, kind, rng, refine_steps))
        if not math.isfinite(worst):
            raise InstanceError("calibration ratio is unbounded on the sample")
        theta = safety * max(worst, 0.0)
    cf = base.with_theta(theta)
    cert = (
        residual_st_inequality(g, h, p, calibration_samples, lambdas, cf),
        residual_derivation_pair(g, h, calibration_samples, cf),
    )
    return Instance(g, h, cf, p, regime, cert)


def _calibration_pairs(samples: SampleSet) -> List[Tuple[Element, Element]]:
    """Sample pairs plus copies pushed out to the boundary of the sampling ball."""
    pairs = samples.with_special_pairs()
    R, kind = samples.radius, samples.norm_kind
    boundary = []
    for x, y in pairs:
        nx, ny = norm(x, kind), norm(y, kind)
        boundary.append((x * (R / nx), y * (R / ny)))
    return pairs + boundary


def _refine_pair(ratio, x, y, score, radius, kind, rng, steps):
    def clip(z):
        nz = norm(z, kind)
        return z * (radius / nz) if nz > radius else z

    step = 0.2 * radius
    for _ in range(steps):
        cand = []
        for z in (x, y):
            dz = rng.standard_normal(z.shape) + 1j * rng.standard_normal(z.shape)
            cand.append(clip(z + step * dz / norm(dz, kind)))
        if norm(cand[0], kind) == 0.0 or norm(cand[1], kind) == 0.0:
            continue
        val = ratio(*cand)
        if val > score:
            x, y, score = cand[0], cand[1], val
        else:
            step *= 0.9
    return score


# -- reconstruction -----------------------------------------------------------


@dataclass
class ReconstructionResult:
    method: str
    mode: str
    points: List[Element]
    d_values: List[Element]
    h_values: List[Element]
    iterations: List[int]
    residual_final: List[float]
    converged: List[bool]
    bound_value: List[float] = field(default_factory=list)
    bound_satisfied: Optional[bool] = None
    lipschitz: Optional[float] = None
    # fixed-point method: sample estimates of d((g,h), J(g,h)) and d((g,h), (D,H))
    distance_to_J: Optional[float] = None
    distance_to_fixed_point: Optional[float] = None
    trace: Optional[List[List[Tuple[Element, Element]]]] = None

    @property
    def all_converged(self) -> bool:
        return all(self.converged)

    def max_iterations(self) -> int:
        return max(self.iterations) if self.iterations else 0


def _scaled(x: Element, k: int, mode: str) -> Element:
    return x * math.ldexp(1.0, -k if mode == "contractive" else k)


def direct_iterate(f, x: Element, k: int, mode: str) -> Element:
    """``2^k f(x/2^k)`` (contractive) or ``2^-k f(2^k x)`` (expansive)."""
    return f(_scaled(x, k, mode)) * math.ldexp(1.0, k if mode == "contractive" else -k)


def _increment_ok(inc: float, prev: Optional[float], tol: float) -> bool:
    if inc == 0.0:
        return True
    if inc >= tol or prev is None or prev == 0.0:
        return False
    rho = inc / prev
    if rho >= 1.0:
        return False
    return inc * rho / (1.0 - rho) < tol


def _direct_limit(f, x: Element, mode: str, tol: float, k_max: int, kind: NormKind, trace: Optional[list] = None):
    prev_val = f(x)
    if trace is not None:
        trace.append(prev_val)
    prev_inc = None
    streak = 0
    inc = math.inf
    for k in range(1, k_max + 1):
        val = direct_iterate(f, x, k, mode)
        if trace is not None:
            trace.append(val)
        inc = norm(val - prev_val, kind)
        if inc == 0.0:
            return val, k, inc, True
        streak = streak + 1 if _increment_ok(inc, prev_inc, tol) else 0
        if streak >= 2:
            return val, k, inc, True
        prev_val, prev_inc = val, inc
    return prev_val if k_max < 1 else val, k_max, inc, False


def limit_map(f, mode: str, tol: float = 1e-10, k_max: Optional[int] = None,
              norm_kind: NormKind = NormKind.FROBENIUS) -> Callable[[Element], Element]:
    """The direct-method limit of ``f`` as a pointwise evaluable map."""
    k_max = k_max or DEFAULT_K_MAX[mode]

    def limit(x):
        x = np.asarray(x, dtype=np.complex128)
        if not x.any():
            return np.zeros_like(x)
        return _direct_limit(f, x, mode, tol, k_max, norm_kind)[0]

    return limit


def _points(points) -> Tuple[List[Element], NormKind]:
    if isinstance(points, SampleSet):
        return list(points.points), points.norm_kind
    return [np.asarray(x, dtype=np.complex128) for x in points], NormKind.FROBENIUS


def _bound_values(cf: ControlFunction, points, kind_name: str) -> List[float]:
    return [stability_bound(cf, x, kind_name) for x in points]


def direct_reconstruct(
    g,
    h,
    mode: str,
    points,
    tol: float = 1e-10,
    k_max: Optional[int] = None,
    cf: Optional[ControlFunction] = None,
    record_trace: bool = False,
) -> ReconstructionResult:
    """Pointwise direct-method limits of ``g`` and ``h``.

    A sequence is accepted when its increment vanishes, or when on two
    consecutive steps the increment is below ``tol`` and so is the
    geometric remainder estimate ``inc * rho / (1 - rho)`` built from the
    observed increment ratio ``rho``. With ``cf`` the series bound is
    attached (``eq25`` contractive, ``eq213`` expansive).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    k_max = k_max or DEFAULT_K_MAX[mode]
    pts, kind = _points(points)
    res = ReconstructionResult("direct_" + mode, mode, pts, [], [], [], [], [],
                               trace=[] if record_trace else None)
    for x in pts:
        tg = [] if record_trace else None
        th = [] if record_trace else None
        dv, kd, incd, okd = _direct_limit(g, x, mode, tol, k_max, kind, tg)
        hv, kh, inch, okh = _direct_limit(h, x, mode, tol, k_max, kind, th)
        res.d_values.append(dv)
        res.h_values.append(hv)
        res.iterations.append(max(kd, kh))
        res.residual_final.append(max(incd, inch))
        res.converged.append(okd and okh)
        if record_trace:
            res.trace.append(list(zip(tg, th)) if len(tg) == len(th) else _pad_trace(tg, th))
    if cf is not None:
        _attach_bound(res, g, h, cf, "eq25" if mode == "contractive" else "eq213", tol, kind)
    return res


def _pad_trace(tg, th):
    n = max(len(tg), len(th))
    tg = tg + [tg[-1]] * (n - len(tg))
    th = th + [th[-1]] * (n - len(th))
    return list(zip(tg, th))


def _attach_bound(res: ReconstructionResult, g, h, cf, kind_name, tol, kind):
    res.bound_value = _bound_values(cf, res.points, kind_name)
    lhs = [norm(g(x) - d, kind) + norm(h(x) - hh, kind) for x, d, hh in zip(res.points, res.d_values, res.h_values)]
    res.bound_satisfied = all(l <= b + tol for l, b in zip(lhs, res.bound_value))


def apply_J(pair: Pair, mode: str) -> Pair:
    """One application of the rescaling operator ``J`` to a pair of maps."""
    g, h = pair
    if mode == "contractive":
        return (lambda x: 2.0 * g(x * 0.5)), (lambda x: 2.0 * h(x * 0.5))
    return (lambda x: 0.5 * g(x * 2.0)), (lambda x: 0.5 * h(x * 2.0))


@dataclass(frozen=True)
class MetricEstimate:
    mu: float
    sample_count: int


def _metric_from_values(gv, hv, g1v, h1v, phis, kind) -> float:
    mu = 0.0
    for a, b, c, d, f in zip(gv, hv, g1v, h1v, phis):
        num = norm(a - c, kind) + norm(b - d, kind)
        if num == 0.0:
            continue
        if f <= 0.0:
            return math.inf
        mu = max(mu, num / f)
    return mu


def generalized_metric(g, h, g1, h1, cf: ControlFunction, samples) -> MetricEstimate:
    """Sample lower bound of ``inf{mu : ||g-g1|| + ||h-h1|| <= mu phi(x, x) for all x}``."""
    pts, kind = _points(samples)
    mu = _metric_from_values(
        [g(x) for x in pts], [h(x) for x in pts], [g1(x) for x in pts], [h1(x) for x in pts],
        [phi(cf, x, x) for x in pts], kind,
    )
    return MetricEstimate(mu, len(pts))


def fixed_point_reconstruct(
    g,
    h,
    cf: ControlFunction,
    mode: str,
    points,
    tol: float = 1e-10,
    k_max: Optional[int] = None,
    record_trace: bool = False,
) -> ReconstructionResult:
    """Iterate ``J`` on ``(g, h)`` over the sample points.

    Stops at the first ``n`` with ``max_x phi(x, x) * d(J^(n-1), J^n) / (1 - L) < tol``,
    which bounds the pointwise distance to the fixed point by ``tol``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    L = contraction_constant(cf, mode)
    if L is None:
        raise RegimeError(f"no contraction constant below 1 for r={cf.r} in {mode} mode")
    k_max = k_max or DEFAULT_K_MAX[mode]
    pts, kind = _points(points)
    phis = [phi(cf, x, x) for x in pts]
    phi_max = max(phis) if phis else 0.0

    pair: Pair = (g, h)
    gv = [g(x) for x in pts]
    hv = [h(x) for x in pts]
    g0, h0 = gv, hv
    trace = [[(a, b)] for a, b in zip(gv, hv)] if record_trace else None
    d_first = None
    converged = False
    n = 0
    d_inc = math.inf
    for n in range(1, k_max + 1):
        pair = apply_J(pair, mode)
        gn = [pair[0](x) for x in pts]
        hn = [pair[1](x) for x in pts]
        d_inc = _metric_from_values(gn, hn, gv, hv, phis, kind)
        if d_first is None:
            d_first = d_inc
        if trace is not None:
            for t, a, b in zip(trace, gn, hn):
                t.append((a, b))
        gv, hv = gn, hn
        if d_inc == 0.0 or phi_max * d_inc / (1.0 - L) < tol:
            converged = True
            break

    incs = [phi_x * d_inc for phi_x in phis] if math.isfinite(d_inc) else [math.inf] * len(pts)
    res = ReconstructionResult(
        "fixed_point", mode, pts, gv, hv, [n] * len(pts), incs, [converged] * len(pts),
        lipschitz=L, trace=trace,
    )
    res.distance_to_J = d_first
    res.distance_to_fixed_point = _metric_from_values(g0, h0, gv, hv, phis, kind)
    factor = L / (2.0 * (1.0 - L)) if mode == "contractive" else 1.0 / (2.0 * (1.0 - L))
    res.bound_value = [factor * f for f in phis]
    lhs = [norm(a - c, kind) + norm(b - d, kind) for a, b, c, d in zip(g0, h0, gv, hv)]
    res.bound_satisfied = all(l <= bv + tol for l, bv in zip(lhs, res.bound_value))
    return res


# -- bounds -------------------------------------------------------------------


def stability_bound(cf: ControlFunction, x: Element, bound_kind: str) -> float:
    """Right-hand side of the selected stability bound at ``x``."""
    if bound_kind == "eq25":
        # the second argument is x: the telescoping estimate runs along (x/2^j, x/2^j)
        return sum_contractive_series(cf, x, x, "2jm1").value
    if bound_kind == "eq213":
        return 0.5 * sum_expansive_series(cf, x, x).value
    if bound_kind in ("eq32", "eq36"):
        mode = "contractive" if bound_kind == "eq32" else "expansive"
        L = contraction_constant(cf, mode)
        if L is None:
            raise RegimeError(f"{bound_kind} needs L < 1")
        factor = L / (2.0 * (1.0 - L)) if mode == "contractive" else 1.0 / (2.0 * (1.0 - L))
        return factor * phi(cf, x, x)
    if bound_kind in ("cor24", "cor26"):
        if cf.family != "power":
            raise ValueError(f"{bound_kind} applies to the power family only")
        if bound_kind == "cor24" and not cf.r > 2:
            raise RegimeError("cor24 needs r > 2")
        if bound_kind == "cor26" and not cf.r < 1:
            raise RegimeError("cor26 needs r < 1")
        coeff = 2.0 * cf.theta / (2.0**cf.r - 2.0 if bound_kind == "cor24" else 2.0 - 2.0**cf.r)
        nx = norm(x, cf.norm_kind)
        return coeff * nx**cf.r if nx > 0 else 0.0
    raise ValueError(f"unknown bound kind {bound_kind!r}; expected one of {BOUND_KINDS}")


def verify_stability_bound(g, h, recon: ReconstructionResult, cf: ControlFunction, bound_kind: str,
                           tol: float = 1e-10) -> ResidualReport:
    kind = cf.norm_kind
    lhs_v, rhs_v, wit = [], [], []
    for x, d, hh in zip(recon.points, recon.d_values, recon.h_values):
        lhs_v.append(norm(g(x) - d, kind) + norm(h(x) - hh, kind))
        rhs_v.append(stability_bound(cf, x, bound_kind))
        wit.append((x, None, None))
    return ResidualReport.from_values(bound_kind, lhs_v, rhs_v, tol, wit)


def bounds_for_regime(mode: str) -> Tuple[str, str, str]:
    return ("eq25", "eq32", "cor24") if mode == "contractive" else ("eq213", "eq36", "cor26")


def error_contraction_ratio(errors: Sequence[float], start: int = 3, floor: float = 0.0) -> float:
    """``2**slope`` of a least-squares fit of ``log2(error_k)`` against ``k`` for ``k >= start``."""
    ks = [k for k in range(start, len(errors)) if errors[k] > floor]
    if len(ks) < 2:
        raise ValueError("need at least two errors above the floor")
    slope = np.polyfit(ks, [math.log2(errors[k]) for k in ks], 1)[0]
    return float(2.0**slope)
