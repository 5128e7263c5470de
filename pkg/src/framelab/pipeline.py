"""Configuration-driven pipeline: build, solve, verify, report.

Stages run in a fixed order and accumulate a JSON-ready report with an
exhaustive certificate list; numeric report fields are deterministic for a
fixed config and seed (wall-clock data lives only under "timings").
Eigensolves are cached per operator fingerprint in EIGB files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .besov import BesovParams, besov_norm_approx, besov_norm_frame, besov_norm_lp, besov_report, inequality_suite
from .config import RunConfig, q_repr
from .eigen import EigenBasis, load_eigenbasis, save_eigenbasis, solve_lowest
from .errors import CacheMismatchError, CalibrationError, ContractViolation, FrameLabError
from .filters import make_filter_bank
from .frame import (
    FrameCoefficients,
    analyze,
    analyze_via_bands,
    build_frame,
    calibrate_levels,
    energy_radius,
    frame_bounds,
    interior_atom_index,
    localization_profile,
    reconstruct,
    synthesize,
)
from .grid import build_domain
from .operator import assemble, coefficient_from_config

STAGES = ("domain", "eigs", "frame", "verify", "reconstruct", "localization", "besov", "weyl")

PARTITION_TOL = 1e-12
PARSEVAL_TOL = 1e-10
UPPER_BOUND_TOL = 1e-12
ROUTE_TOL = 1e-12
RATIO_SLACK = 0.02
BESOV_RATIO_TOL = 1e-10
HOMOGENEITY_TOL = 1e-12
SUITE_TOL = 1e-10


def sample_bandlimited(basis: EigenBasis, omega: float, seed: int) -> np.ndarray:
    """Seeded unit-norm random element of span{lambda <= omega}."""
    sel = basis.eigenvalues <= omega
    if not sel.any():
        raise ContractViolation(f"no eigenvalue below omega={omega}; nothing to sample")
    rng = np.random.default_rng(seed)
    c = np.zeros(basis.m)
    c[sel] = rng.standard_normal(int(sel.sum()))
    c /= np.linalg.norm(c)
    return basis.expand(c)


@dataclass
class Certificate:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": self.value,
            "threshold": self.threshold,
            "detail": self.detail,
        }


@dataclass
class PipelineState:
    config: RunConfig
    report: dict = field(default_factory=dict)
    certificates: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    dom: object = None
    op: object = None
    basis: object = None
    bank: object = None
    fs: object = None
    span_bounds: tuple | None = None

    def certify(self, name, passed, value, threshold, detail=""):
        self.certificates.append(
            Certificate(name, bool(passed), float(value), float(threshold), detail)
        )


def _timed(state: PipelineState, key: str):
    class _Timer:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            state.timings[key] = time.perf_counter() - self.t0

    return _Timer()


def _stage_domain(state: PipelineState):
    cfg = state.config
    with _timed(state, "domain"):
        state.dom = build_domain(cfg.domain_kind, cfg.domain_params, cfg.h)
        coeff = coefficient_from_config(cfg.operator)
        state.op = assemble(state.dom, coeff)
    gap = float(abs(state.op.matrix - state.op.matrix.T).max()) if state.op.n else 0.0
    state.report["domain"] = {
        "kind": cfg.domain_kind,
        "h": cfg.h,
        "dim": state.dom.dim,
        "nodes": state.dom.n_nodes,
        "measure": state.dom.measure,
    }
    state.report["operator"] = {
        "coefficient": state.op.coeff.descriptor,
        "fingerprint": state.op.fingerprint,
        "nonzeros": int(state.op.matrix.nnz),
        "symmetry_gap": gap,
    }


def _cache_path(state: PipelineState) -> str:
    cache_dir = os.path.join(state.config.out_dir, "cache")
    os.makedirs(cache_dir, exist_ok=True)
    return os.path.join(cache_dir, f"{state.op.fingerprint}.eigb")


def _stage_eigs(state: PipelineState):
    cfg = state.config
    path = _cache_path(state)
    cache_hit = False
    with _timed(state, "eigs"):
        if os.path.exists(path):
            try:
                state.basis = load_eigenbasis(
                    path, state.dom, state.op.fingerprint, eta=cfg.eta, op=state.op
                )
                cache_hit = True
            except CacheMismatchError:
                state.basis = None
        if state.basis is None:
            lam_cap = None
            if cfg.max_level is not None:
                lam_cap = 4.0 ** (cfg.max_level + 1)
            state.basis = solve_lowest(
                state.op,
                state.dom,
                m=cfg.solver_m,
                tol=cfg.solver_tol,
                dense_threshold=cfg.dense_threshold,
                eta=cfg.eta,
                seed=cfg.seed,
                lambda_cap=lam_cap,
            )
            save_eigenbasis(path, state.basis)
    state.timings["eigs_cache_hit"] = cache_hit
    b = state.basis
    state.report["solver"] = {
        "modes": b.m,
        "lambda_min": float(b.eigenvalues[0]),
        "lambda_max": b.lambda_max,
        "lambda_reliable": b.lambda_reliable,
        "max_residual": b.max_residual,
        "tol": b.residual_tol,
    }


def _stage_frame(state: PipelineState):
    cfg = state.config
    with _timed(state, "frame"):
        state.bank = make_filter_bank(state.basis, max_level=cfg.max_level)
        levels = list(state.bank.levels)
        if cfg.a0 == "calibrate":
            cal = calibrate_levels(
                state.dom, state.basis, cfg.delta, levels, trials=cfg.trials, seed=cfg.seed
            )
            usable = [r.a_max for r in cal if r.a_max is not None]
            if not usable:
                raise CalibrationError("every resolved level had an empty band subspace")
            a0 = 0.9 * min(usable)
            state.report["calibration"] = {
                "mode": "calibrated",
                "a0": a0,
                "levels": [
                    {
                        "level": r.level,
                        "band_top_lambda": r.band_top_lambda,
                        "subspace_dim": r.subspace_dim,
                        "a_max": r.a_max,
                        "floor": r.criterion_at_a_max,
                    }
                    for r in cal
                ],
            }
        else:
            a0 = float(cfg.a0)
            state.report["calibration"] = {"mode": "configured", "a0": a0}
        state.fs = build_frame(state.basis, state.bank, state.dom, cfg.delta, a0)

    rows = []
    for j in state.bank.levels:
        lv = state.fs.levels[j]
        band_dim = int(lv.mode_indices.size)
        bounds = None
        if band_dim:
            bounds = frame_bounds(state.fs, j)
        band_lo = 0.0 if j == 0 else 2.0 ** (j - 1)
        rows.append(
            {
                "level": j,
                "rho": lv.rho,
                "parts": lv.n_atoms,
                "band_sqrt_lo": band_lo,
                "band_sqrt_hi": 2.0 ** (j + 1),
                "band_modes": band_dim,
                "lower": bounds[0] if bounds else None,
                "upper": bounds[1] if bounds else None,
            }
        )
    state.report["filters"] = {
        "max_level": state.bank.max_level,
        "certified_lambda": state.bank.certified_lambda,
    }
    state.report["frame"] = {
        "delta": cfg.delta,
        "a0": state.fs.a0,
        "atom_total": state.fs.atom_count,
        "levels": rows,
    }


def _stage_verify(state: PipelineState):
    cfg = state.config
    fs, bank, basis, dom = state.fs, state.bank, state.basis, state.dom
    delta = cfg.delta
    with _timed(state, "verify"):
        # partition of unity on a dense dyadic-range grid
        s_grid = np.linspace(0.0, 2.0 ** bank.max_level, 10_000)
        dev = float(np.abs(bank.partition_sum(s_grid) - 1.0).max())
        state.certify("partition_of_unity", dev <= PARTITION_TOL, dev, PARTITION_TOL)

        omega_cert = bank.certified_lambda
        worst_parseval = 0.0
        worst_upper = 0.0
        for t in range(cfg.trials):
            f = sample_bandlimited(basis, omega_cert, seed=cfg.seed + t)
            n2 = dom.inner(f, f)
            parseval = abs(float(bank.band_energies(f).sum()) - n2) / n2
            worst_parseval = max(worst_parseval, parseval)
            worst_upper = max(worst_upper, analyze(fs, f).total_energy() / n2)
        state.certify("band_parseval", worst_parseval <= PARSEVAL_TOL, worst_parseval, PARSEVAL_TOL)
        state.certify(
            "upper_frame_bound",
            worst_upper <= 1.0 + UPPER_BOUND_TOL,
            worst_upper,
            1.0 + UPPER_BOUND_TOL,
        )

        lo, hi = frame_bounds(fs, "span")
        state.span_bounds = (lo, hi)
        state.certify("frame_lower_span", lo >= (1.0 - delta) - 1e-10, lo, 1.0 - delta)
        state.certify("frame_upper_span", hi <= 1.0 + PARSEVAL_TOL, hi, 1.0 + PARSEVAL_TOL)
        for j in bank.levels:
            if fs.levels[j].mode_indices.size == 0:
                state.certify(
                    f"frame_upper_band_{j}", True, 0.0, 1.0 + PARSEVAL_TOL,
                    "vacuous: no resolved mode in band",
                )
                if j < bank.max_level:
                    state.certify(
                        f"frame_lower_band_{j}", True, 0.0, 1.0 - delta,
                        "vacuous: no resolved mode in band",
                    )
                continue
            a_j, b_j = frame_bounds(fs, j)
            if j < bank.max_level:
                # the top band has no lower-bound guarantee: the partition of
                # unity is truncated above 2^J
                state.certify(
                    f"frame_lower_band_{j}", a_j >= (1.0 - delta) - 1e-10, a_j, 1.0 - delta
                )
            state.certify(f"frame_upper_band_{j}", b_j <= 1.0 + PARSEVAL_TOL, b_j, 1.0 + PARSEVAL_TOL)

        # atoms: spectral support exactly inside the band, norms at most 1
        leak = 0.0
        worst_norm = 0.0
        for lv in fs.levels:
            lo_b, hi_b = 2.0 ** (2 * lv.level - 2), 2.0 ** (2 * lv.level + 2)
            outside = (basis.eigenvalues < lo_b - 1e-300) | (basis.eigenvalues > hi_b)
            if lv.level == 0:
                outside = basis.eigenvalues > hi_b
            full = np.zeros((basis.m, lv.n_atoms))
            full[lv.mode_indices] = lv.atom_coeffs
            if outside.any():
                leak = max(leak, float(np.abs(full[outside]).max(initial=0.0)))
            norms = np.linalg.norm(full, axis=0)
            worst_norm = max(worst_norm, float(norms.max(initial=0.0)))
        state.certify("atom_bandlimited", leak == 0.0, leak, 0.0, "spectral mass outside band")
        state.certify("atom_norm_bound", worst_norm <= 1.0 + UPPER_BOUND_TOL, worst_norm, 1.0)

        # the two analysis routes agree; synthesize is the adjoint of analyze
        f = sample_bandlimited(basis, omega_cert, seed=cfg.seed + 7_001)
        ca = analyze(fs, f)
        cb = analyze_via_bands(fs, f)
        route_gap = max(
            float(np.abs(x - y).max(initial=0.0)) for x, y in zip(ca.per_level, cb.per_level)
        )
        state.certify("analyze_route_agreement", route_gap <= ROUTE_TOL, route_gap, ROUTE_TOL)

        rng = np.random.default_rng(cfg.seed + 8_001)
        adj_gap = 0.0
        for _ in range(20):
            g = sample_bandlimited(basis, omega_cert, seed=int(rng.integers(2**31)))
            rand = [rng.standard_normal(lv.n_atoms) for lv in fs.levels]
            lhs = sum(float(c @ r) for c, r in zip(analyze(fs, g).per_level, rand))
            rhs = dom.inner(g, synthesize(fs, FrameCoefficients(per_level=rand, source_norm=0.0)))
            adj_gap = max(adj_gap, abs(lhs - rhs))
        state.certify("synthesize_adjoint", adj_gap <= ROUTE_TOL, adj_gap, ROUTE_TOL)


def _stage_reconstruct(state: PipelineState):
    cfg = state.config
    fs, basis, dom, bank = state.fs, state.basis, state.dom, state.bank
    delta = cfg.delta
    with _timed(state, "reconstruct"):
        f = sample_bandlimited(basis, bank.certified_lambda, seed=cfg.seed + 9_001)
        ratio_bound = delta / (2.0 - delta)
        n_iters = max(1, math.ceil(math.log(1e-8) / math.log(ratio_bound)))
        approx, history = reconstruct(
            fs, analyze(fs, f), n_iters, 1.0 - delta, 1.0, reference=f
        )
        norm_f = dom.norm(f)
        ratios = [
            history[k + 1] / history[k]
            for k in range(len(history) - 1)
            if history[k] > 1e-13 * norm_f
        ]
        max_ratio = max(ratios) if ratios else 0.0
        final_rel = history[-1] / norm_f
    state.certify(
        "reconstruction_ratio",
        max_ratio <= ratio_bound + RATIO_SLACK,
        max_ratio,
        ratio_bound + RATIO_SLACK,
        f"{n_iters} iterations",
    )
    state.certify("reconstruction_error", final_rel <= 1e-8, final_rel, 1e-8)
    state.report["reconstruction"] = {
        "iterations": n_iters,
        "ratio_bound": ratio_bound,
        "max_ratio": max_ratio,
        "final_rel_error": final_rel,
        "history": history,
    }


def _stage_localization(state: PipelineState):
    fs, bank = state.fs, state.bank
    with _timed(state, "localization"):
        usable = [j for j in bank.levels if fs.levels[j].mode_indices.size > 0]
        rows = []
        profiles = []
        monotone = True
        for j in usable:
            i = interior_atom_index(fs, j)
            rho = fs.levels[j].rho
            radii = [k * rho for k in range(0, 17, 2)]
            prof = localization_profile(fs, j, i, radii)
            fracs = [p[1] for p in prof]
            monotone = monotone and all(a >= b - 1e-12 for a, b in zip(fracs, fracs[1:]))
            r99 = energy_radius(fs, j, i, 0.99)
            rows.append({"level": j, "atom": i, "rho": rho, "r99": r99, "r99_over_rho": r99 / rho})
            profiles.extend({"level": j, "atom": i, "radius": r, "exterior": p} for r, p in prof)
        state.certify("localization_monotone", monotone, float(monotone), 1.0)
        # localization sharpens with the level only once bands are populated,
        # so the trend is judged on the topmost (j, j+2) pair available
        by_level = {r["level"]: r for r in rows}
        tops = [j for j in sorted(by_level) if j + 2 in by_level]
        if tops:
            a, b = by_level[tops[-1]], by_level[tops[-1] + 2]
            ratio = b["r99"] / a["r99"]
            state.certify(
                "localization_r99_trend",
                b["r99"] < a["r99"],
                ratio,
                1.0,
                f"levels {a['level']} vs {b['level']}",
            )
    state.report["localization"] = {"r99": rows, "profiles": profiles}


def _stage_besov(state: PipelineState):
    cfg = state.config
    fs, bank, basis = state.fs, state.bank, state.basis
    delta = cfg.delta
    with _timed(state, "besov"):
        lower_ratio = math.sqrt(1.0 - delta)
        rows = []
        worst_low, worst_high = 1.0, 1.0
        worst_homogeneity = 0.0
        suite_ok = True
        suite_failures = []
        for t in range(cfg.besov_functions):
            f = sample_bandlimited(basis, bank.certified_lambda, seed=cfg.seed + 11_000 + t)
            rep = inequality_suite(basis, bank, f, rel_tol=SUITE_TOL, strict=False)
            suite_ok = suite_ok and rep.ok
            suite_failures.extend(c.name for c in rep.failures())
            for alpha in cfg.alphas:
                for q in cfg.qs:
                    params = BesovParams(alpha=alpha, q=q, max_level=bank.max_level)
                    br = besov_report(fs, f, params)
                    ratios = [br.frame_over_lp] + [
                        r
                        for r, l in zip(br.level_frame_over_lp(), br.lp_terms)
                        if l > 0
                    ]
                    worst_low = min(worst_low, min(ratios))
                    worst_high = max(worst_high, max(ratios))
                    scale = 3.0
                    h_gap = max(
                        abs(besov_norm_lp(bank, scale * f, params) - scale * br.lp_norm)
                        / max(scale * br.lp_norm, 1e-300),
                        abs(besov_norm_frame(fs, scale * f, params) - scale * br.frame_norm)
                        / max(scale * br.frame_norm, 1e-300),
                        abs(besov_norm_approx(basis, scale * f, params) - scale * br.approx_norm)
                        / max(scale * br.approx_norm, 1e-300),
                    )
                    worst_homogeneity = max(worst_homogeneity, h_gap)
                    rows.append(
                        {
                            "function": t,
                            "alpha": alpha,
                            "q": q_repr(q),
                            "approx_norm": br.approx_norm,
                            "lp_norm": br.lp_norm,
                            "frame_norm": br.frame_norm,
                            "frame_over_lp": br.frame_over_lp,
                        }
                    )
    state.certify(
        "besov_ratio_lower",
        worst_low >= lower_ratio - BESOV_RATIO_TOL,
        worst_low,
        lower_ratio,
    )
    state.certify(
        "besov_ratio_upper",
        worst_high <= 1.0 + BESOV_RATIO_TOL,
        worst_high,
        1.0 + BESOV_RATIO_TOL,
    )
    state.certify(
        "besov_homogeneity",
        worst_homogeneity <= HOMOGENEITY_TOL,
        worst_homogeneity,
        HOMOGENEITY_TOL,
    )
    state.certify(
        "inequality_suite",
        suite_ok,
        float(len(suite_failures)),
        0.0,
        ";".join(sorted(set(suite_failures))[:5]),
    )
    state.report["besov"] = {
        "functions": cfg.besov_functions,
        "frame_over_lp_range": [worst_low, worst_high],
        "suite": {
            "functions_checked": cfg.besov_functions,
            "violations": sorted(set(suite_failures)),
        },
        "rows": rows,
    }


def _weyl_density(state: PipelineState) -> float:
    """Phase-space volume of the coefficient field: integral of det(a)^-1/2."""
    dom, coeff = state.dom, state.op.coeff
    if coeff.kind == "identity":
        return dom.measure
    if coeff.kind == "matrix":
        return dom.measure / math.sqrt(float(np.linalg.det(coeff.matrix)))
    a = coeff.scalar_at(dom.coords)
    return dom.weight * float(np.sum(a ** (-dom.dim / 2.0)))


def _stage_weyl(state: PipelineState):
    basis, dom = state.basis, state.dom
    with _timed(state, "weyl"):
        const = {1: 1.0 / math.pi, 2: 1.0 / (4.0 * math.pi)}[dom.dim]
        density = _weyl_density(state)
        top = min(basis.lambda_reliable, basis.lambda_max)
        rows = []
        for omega in (top / 4.0, top / 2.0, top):
            count = int(np.count_nonzero(basis.eigenvalues <= omega))
            expected = const * density * omega ** (dom.dim / 2)
            rows.append(
                {
                    "omega": omega,
                    "count": count,
                    "weyl_expected": expected,
                    "ratio": count / expected if expected > 0 else 0.0,
                }
            )
        # the asymptotic law says nothing where only a handful of modes fit
        usable = [r for r in rows if r["count"] > 0 and r["weyl_expected"] >= 3.0]
        worst = max((max(r["ratio"], 1.0 / r["ratio"]) for r in usable), default=1.0)
    state.certify("weyl_ratio", worst <= 2.0, worst, 2.0, "count vs integral of det(a)^-1/2")
    state.report["weyl"] = {"rows": rows}


_STAGE_FN = {
    "domain": _stage_domain,
    "eigs": _stage_eigs,
    "frame": _stage_frame,
    "verify": _stage_verify,
    "reconstruct": _stage_reconstruct,
    "localization": _stage_localization,
    "besov": _stage_besov,
    "weyl": _stage_weyl,
}


def run_pipeline(cfg: RunConfig, upto: str = "weyl", write: bool = True) -> dict:
    """Run stages through `upto` and return (and optionally write) the report."""
    if upto not in STAGES:
        raise ContractViolation(f"unknown stage {upto!r}; expected one of {STAGES}")
    cfg.validate()
    state = PipelineState(config=cfg)
    state.report["schema_version"] = 1
    state.report["config"] = cfg.to_echo()
    state.report["versions"] = {"framelab": __version__}
    last = STAGES.index(upto)
    try:
        for stage in STAGES[: last + 1]:
            _STAGE_FN[stage](state)
    except FrameLabError as exc:
        state.report["error"] = {"stage": stage, "message": str(exc)}
        state.report["certificates"] = [c.as_dict() for c in state.certificates]
        state.report["all_passed"] = False
        if write:
            _write_outputs(state)
        raise
    state.report["certificates"] = [c.as_dict() for c in state.certificates]
    state.report["all_passed"] = all(c.passed for c in state.certificates)
    if write:
        _write_outputs(state)
    return state.report


def _write_outputs(state: PipelineState) -> None:
    out = state.config.out_dir
    os.makedirs(out, exist_ok=True)
    report = dict(state.report)
    report["timings"] = state.timings
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")

    if "frame" in report:
        _write_csv(
            os.path.join(out, "frame_levels.csv"),
            ["level", "rho", "parts", "band_sqrt_lo", "band_sqrt_hi", "band_modes", "lower", "upper"],
            report["frame"]["levels"],
        )
    if "reconstruction" in report:
        hist = report["reconstruction"]["history"]
        _write_csv(
            os.path.join(out, "reconstruction_history.csv"),
            ["iteration", "error"],
            [{"iteration": k, "error": e} for k, e in enumerate(hist)],
        )
    if "localization" in report:
        _write_csv(
            os.path.join(out, "localization_profiles.csv"),
            ["level", "atom", "radius", "exterior"],
            report["localization"]["profiles"],
        )
    if "besov" in report:
        _write_csv(
            os.path.join(out, "besov_table.csv"),
            ["function", "alpha", "q", "approx_norm", "lp_norm", "frame_norm", "frame_over_lp"],
            report["besov"]["rows"],
        )
    if "weyl" in report:
        _write_csv(
            os.path.join(out, "weyl_counts.csv"),
            ["omega", "count", "weyl_expected", "ratio"],
            report["weyl"]["rows"],
        )


def _write_csv(path: str, headers: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=headers)
        writer.writeheader()
        writer.writerows(rows)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")
