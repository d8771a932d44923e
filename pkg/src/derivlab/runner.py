"""Seeded end-to-end experiments and their JSON reports.

A report has three top-level parts: ``deterministic`` (everything that is
a function of the config), ``content_hash`` (sha256 of the canonical JSON of
the deterministic part) and ``timing`` (wall clock, excluded from the hash).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .algebra import RNG_ALGORITHM, NormKind, generate_samples, norm, random_unit_element, sample_unit_circle
from .config import ExperimentConfig
from .control import contraction_constant, corollary_contraction_constant, sum_contractive_series, sum_expansive_series
from .maps import (
    InequalityParams,
    PerturbationSpec,
    derivation_residual,
    inner_derivation,
    lie_bracket,
    linearity_residual,
    map_bracket,
)
from .stability import (
    DEFAULT_K_MAX,
    ReconstructionResult,
    ResidualReport,
    apply_J,
    bounds_for_regime,
    direct_reconstruct,
    fixed_point_reconstruct,
    generalized_metric,
    limit_map,
    make_instance,
    residual_derivation_pair,
    residual_st_inequality,
    verify_stability_bound,
)

SCHEMA_VERSION = 1
BOUND_TOL = 1e-10
INEQUALITY_TOL = 1e-12


def canonical_hash(section: Dict[str, Any]) -> str:
    blob = json.dumps(section, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _seeds(seed: int, count: int) -> List[int]:
    return [int(v) for v in np.random.SeedSequence(seed).generate_state(count)]


def _check_entry(rep: ResidualReport) -> Dict[str, Any]:
    points = []
    for i, (l, r) in enumerate(zip(rep.lhs_values, rep.rhs_values)):
        points.append({"id": i, "lhs": l, "rhs": r})
    return {
        "name": rep.name,
        "tolerance": rep.tolerance,
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "slack": rep.slack,
        "satisfied": rep.satisfied,
        "points": points,
    }


def _with_norms(entry: Dict[str, Any], norms: List[float]) -> Dict[str, Any]:
    for p, nx in zip(entry["points"], norms):
        p["norm_x"] = nx
    return entry


def _recon_summary(res: ReconstructionResult) -> Dict[str, Any]:
    return {
        "method": res.method,
        "converged": res.all_converged,
        "iterations_max": res.max_iterations(),
        "iterations": list(res.iterations),
        "residual_final_max": max(res.residual_final) if res.residual_final else 0.0,
        "bound_satisfied": res.bound_satisfied,
        "lipschitz": res.lipschitz,
        "distance_to_J": res.distance_to_J,
        "distance_to_fixed_point": res.distance_to_fixed_point,
    }


def _scalar_check(name: str, lhs: float, rhs: float, tol: float) -> ResidualReport:
    return ResidualReport.from_values(name, [lhs], [rhs], tol)


def run(config: ExperimentConfig) -> Dict[str, Any]:
    """Run the full pipeline for ``config`` and return the report dictionary."""
    config.validate()
    t0 = time.perf_counter()
    kind = NormKind(config.norm_kind)
    n = config.dim
    s_a, s_b, s_ug, s_uh, s_cal, s_val = _seeds(config.seed, 6)
    a = random_unit_element(s_a, n, kind)
    b = random_unit_element(s_b, n, kind)
    D = inner_derivation(a)
    H = inner_derivation(b)
    pert_g = PerturbationSpec("power_norm", config.c_g, config.r, random_unit_element(s_ug, n, kind), kind)
    pert_h = PerturbationSpec("power_norm", config.c_h, config.r, random_unit_element(s_uh, n, kind), kind)
    params = InequalityParams(complex(config.s), complex(config.t))
    cal = generate_samples(s_cal, n, config.calibration_count, 1.0, kind)
    val = generate_samples(s_val, n, config.sample_count, 1.0, kind)
    inst = make_instance(D, H, pert_g, pert_h, params, cal, config.circle_count, r=config.r)
    g, h, cf, mode = inst.g, inst.h, inst.cf, config.regime
    tol = config.tol
    k_max = config.k_max or DEFAULT_K_MAX[mode]

    reasons: List[str] = []
    checks: List[Dict[str, Any]] = []
    recons: List[Dict[str, Any]] = []

    def add(rep: ResidualReport, norms: Optional[List[float]] = None):
        entry = _check_entry(rep)
        if norms is not None:
            _with_norms(entry, norms)
        checks.append(entry)
        if not rep.satisfied:
            reasons.append(f"check {rep.name} violated (slack {rep.slack:.3e})")

    pair_norms = [norm(x, kind) for x, _ in val.with_special_pairs()]
    point_norms = [norm(x, kind) for x in val.points]

    for rep, label in ((inst.certificate[0], "certificate/st_inequality"), (inst.certificate[1], "certificate/derivation_pair")):
        rep.name = label
        add(rep)
    lambdas = sample_unit_circle(config.circle_count)
    st = residual_st_inequality(g, h, params, val, lambdas, cf, INEQUALITY_TOL)
    add(st, [nx for nx in pair_norms for _ in lambdas])
    add(residual_derivation_pair(g, h, val, cf, tol=INEQUALITY_TOL), pair_norms)

    x_ref = val.points[0]
    if mode == "contractive":
        series = sum_contractive_series(cf, x_ref, x_ref, "4j")
    else:
        series = sum_expansive_series(cf, x_ref, x_ref)
    series_info = {
        "kind": "4j" if mode == "contractive" else "expansive",
        "converged": series.converged,
        "ratio": series.ratio,
        "partial_sum": series.partial_sum,
        "tail_bound": series.tail_bound if math.isfinite(series.tail_bound) else "inf",
        "terms_used": series.terms_used,
    }
    L = contraction_constant(cf, mode)
    L_cor = corollary_contraction_constant(cf, mode)
    constants = {
        "L": L,
        "L_corollary": L_cor,
        "discrepancy": L is not None and L_cor is not None and L != L_cor,
    }

    if not series.converged or L is None:
        reasons.append(f"control series does not converge in the {mode} regime (r={config.r})")
    else:
        direct = direct_reconstruct(g, h, mode, val, tol, k_max, cf)
        fixed = fixed_point_reconstruct(g, h, cf, mode, val, tol, k_max)
        for res in (direct, fixed):
            recons.append(_recon_summary(res))
            if not res.all_converged:
                reasons.append(f"{res.method} did not converge within k_max={k_max}")
        for res, prefix in ((direct, "direct"), (fixed, "fixed_point")):
            for bk in bounds_for_regime(mode):
                rep = verify_stability_bound(g, h, res, cf, bk, BOUND_TOL)
                rep.name = f"{prefix}/{bk}"
                add(rep, point_norms)
        agree = [
            max(norm(d1 - d2, kind), norm(h1 - h2, kind))
            for d1, d2, h1, h2 in zip(direct.d_values, fixed.d_values, direct.h_values, fixed.h_values)
        ]
        add(ResidualReport.from_values("method_agreement", agree, [2 * tol] * len(agree), 0.0), point_norms)
        oracle = [
            max(norm(d - D(x), kind), norm(hh - H(x), kind))
            for x, d, hh in zip(val.points, direct.d_values, direct.h_values)
        ]
        add(ResidualReport.from_values("direct/oracle", oracle, [10 * tol] * len(oracle), 0.0), point_norms)
        add(_scalar_check(
            "fixed_point/a_posteriori",
            fixed.distance_to_fixed_point,
            fixed.distance_to_J / (1.0 - L),
            0.0,
        ))
        # J contracts the distance between (g, h) and its fixed point
        d0 = generalized_metric(g, h, D, H, cf, val).mu
        Jg, Jh = apply_J((g, h), mode)
        d1 = generalized_metric(Jg, Jh, D, H, cf, val).mu
        add(_scalar_check("J_contraction", d1, L * d0, BOUND_TOL))

        lim_g = limit_map(g, mode, tol, k_max, kind)
        lim_h = limit_map(h, mode, tol, k_max, kind)
        for name, f in (("D", lim_g), ("H", lim_h)):
            add_res, hom_res = linearity_residual(f, val, config.circle_count)
            add(_scalar_check(f"reconstructed/{name}_linearity", max(add_res, hom_res), 10 * tol, 0.0))
        add(_scalar_check("reconstructed/H_derivation", derivation_residual(lim_h, val), 10 * tol, 0.0))
        add(_scalar_check(
            "reconstructed/bracket_derivation", derivation_residual(map_bracket(lim_g, lim_h), val), 10 * tol, 0.0
        ))

    verdict = "pass" if not reasons else "fail"
    deterministic = {
        "package_version": __version__,
        "config": {k: v for k, v in config.to_dict().items() if k != "output_path"},
        "rng": RNG_ALGORITHM,
        "derived_seeds": {"a": s_a, "b": s_b, "u_g": s_ug, "u_h": s_uh, "calibration": s_cal, "validation": s_val},
        "instance": {
            "D": D.to_dict(),
            "H": H.to_dict(),
            "bracket_DH": lie_bracket(D, H).to_dict(),
            "g": g.to_dict(),
            "h": h.to_dict(),
            "control": cf.to_dict(),
            "theta": cf.theta,
            "regime": mode,
            "k_max": k_max,
        },
        "contraction_constants": constants,
        "series": series_info,
        "checks": checks,
        "reconstructions": recons,
        "verdict": verdict,
        "reasons": reasons,
    }
    iterations = [it for r in recons for it in r["iterations"]]
    return {
        "schema_version": SCHEMA_VERSION,
        "deterministic": deterministic,
        "content_hash": canonical_hash(deterministic),
        "timing": {
            "wall_clock_s": time.perf_counter() - t0,
            "iterations_mean": float(np.mean(iterations)) if iterations else 0.0,
            "iterations_max": max(iterations) if iterations else 0,
        },
    }


def write_report(report: Dict[str, Any], path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_csv(report: Dict[str, Any], path) -> None:
    """Flat per-point table: one row per (check, point)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "point_id", "norm_x", "lhs", "rhs", "slack"])
        for c in report["deterministic"]["checks"]:
            for p in c["points"]:
                w.writerow([c["name"], p["id"], p.get("norm_x", ""), repr(p["lhs"]), repr(p["rhs"]),
                            repr(p["rhs"] - p["lhs"])])


_REQUIRED = ("schema_version", "deterministic", "content_hash")
_REQUIRED_DET = ("config", "checks", "reconstructions", "series", "verdict", "reasons")


def verify_report(report: Dict[str, Any]) -> Tuple[int, str]:
    """Recompute verdicts from stored per-point values.

    Returns ``(exit_code, message)``: 0 when everything reproduces, 1 when
    a check, the verdict or the hash diverges, 2 on a schema mismatch.
    """
    for key in _REQUIRED:
        if key not in report:
            return 2, f"schema error: missing field {key!r}"
    if report["schema_version"] != SCHEMA_VERSION:
        return 2, f"schema error: schema_version {report['schema_version']!r} != {SCHEMA_VERSION}"
    det = report["deterministic"]
    for key in _REQUIRED_DET:
        if key not in det:
            return 2, f"schema error: missing field 'deterministic.{key}'"
    all_ok = True
    for i, c in enumerate(det["checks"]):
        try:
            tol = float(c["tolerance"])
            recomputed = all(float(p["rhs"]) - float(p["lhs"]) >= -tol for p in c["points"])
            stored = c["satisfied"]
        except (KeyError, TypeError, ValueError) as exc:
            return 2, f"schema error in deterministic.checks[{i}]: {exc!r}"
        if stored is not recomputed:
            return 1, f"check {c.get('name', i)!r}: stored satisfied={stored} but recomputed {recomputed}"
        all_ok = all_ok and recomputed
    converged = all(r.get("converged") is True for r in det["reconstructions"])
    series_ok = det["series"].get("converged") is True
    verdict = "pass" if all_ok and converged and series_ok and det["reconstructions"] else "fail"
    if verdict != det["verdict"]:
        return 1, f"verdict: stored {det['verdict']!r} but recomputed {verdict!r}"
    digest = canonical_hash(det)
    if digest != report["content_hash"]:
        return 1, f"content_hash: stored {report['content_hash']} but recomputed {digest}"
    return 0, f"report reproduces: verdict {verdict}, {len(det['checks'])} checks"


SWEEPABLE = ("r", "c_g", "c_h", "seed", "dim", "tol", "sample_count")


def sweep(config: ExperimentConfig, param: str, values: List[str]) -> List[Dict[str, Any]]:
    """Run ``config`` once per value of ``param``; returns one summary row per run."""
    from .config import ConfigError

    if param not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {param!r}; choose from {SWEEPABLE}")
    caster = int if param in ("seed", "dim", "sample_count") else float
    rows = []
    for raw in values:
        try:
            cfg = config.replace(**{param: caster(raw)}).validate()
        except (ValueError, ConfigError) as exc:
            rows.append({"param": param, "value": raw, "verdict": "config_error", "reason": str(exc)})
            continue
        report = run(cfg)
        det = report["deterministic"]
        row = {
            "param": param,
            "value": raw,
            "verdict": det["verdict"],
            "theta": det["instance"]["theta"],
            "L": det["contraction_constants"]["L"],
            "iterations_max": report["timing"]["iterations_max"],
            "reason": "; ".join(det["reasons"]),
            "content_hash": report["content_hash"],
        }
        for c in det["checks"]:
            row[f"slack:{c['name']}"] = c["slack"]
        rows.append(row)
    return rows


def write_sweep_csv(rows: List[Dict[str, Any]], path) -> None:
    fields: List[str] = []
    for row in rows:
        for k in row:
            if k not in fields:
                fields.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow(row)
