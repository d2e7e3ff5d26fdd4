"""Scenario configs, step executors, and reproducible report generation.

A scenario is a JSON document: a version tag, a name, a mandatory seed, a
model description, and a list of steps.  Each step kind wraps one family of
library computations and returns a results table plus named pass/fail checks;
the report collects them with environment metadata.  Runs are deterministic:
every step derives its own generator from the scenario seed and its index, and
step results are assembled in index order regardless of the worker count.
"""

from __future__ import annotations

import concurrent.futures
import json
import platform
import time

import numpy as np

from . import __version__
from .ansatz import PathAnsatz
from .distances import (
    distance_lower_flux,
    distance_to_ham,
    distance_upper,
    gradient_check,
    hofer_length,
    length,
    length_banyaga,
)
from .errors import ConfigError
from .lattice import (
    ProductModel,
    is_hamiltonian_endpoint,
    product_split_obstruction,
    torus_flux_lattice,
)
from .paths import (
    SCHEDULES,
    IsotopyPath,
    concat_left,
    concat_right,
    constant_form_path,
    flux,
    hamiltonian_path,
    random_isotopy,
    translation_path,
)
from .probes import (
    default_form_family,
    default_map_family,
    invariance_defect,
    nonharmonic_closed_form,
    orbit_rank,
    right_concat_excess,
)
from .serialize import load_json, model_from_dict, model_to_dict
from .splitting import BaseNorm, SeminormSpec, SplittingOperator
from .torus import (
    DiffeoMap,
    TorusModel,
    constant_form,
    hamiltonian_shear,
    hodge_decompose,
    random_closed_form,
)

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# schema validation
# ---------------------------------------------------------------------------

def _require(condition, pointer, message):
    if not condition:
        raise ConfigError(pointer, message)


def _validate_model(data, pointer):
    _require(isinstance(data, dict), pointer, "model must be an object")
    _require("half_dim" in data, f"{pointer}.half_dim", "missing")
    _require("grid_res" in data, f"{pointer}.grid_res", "missing")


def validate_scenario(config: dict) -> None:
    """Raise ConfigError (with a JSON-pointer-style location) on any violation."""
    _require(isinstance(config, dict), "$", "scenario must be a JSON object")
    _require(config.get("version") == SCHEMA_VERSION, "version",
             f"must be {SCHEMA_VERSION}")
    _require(isinstance(config.get("name"), str) and config["name"], "name",
             "must be a non-empty string")
    _require(isinstance(config.get("seed"), int), "seed",
             "must be an integer (reproducibility is mandatory)")
    if "model" in config:
        _validate_model(config["model"], "model")
    steps = config.get("steps")
    _require(isinstance(steps, list), "steps", "must be an array")
    for i, step in enumerate(steps):
        _require(isinstance(step, dict), f"steps[{i}]", "must be an object")
        kind = step.get("kind")
        _require(isinstance(kind, str), f"steps[{i}].kind", "missing step kind")
        _require(kind in STEP_EXECUTORS, f"steps[{i}].kind",
                 f"unknown step kind {kind!r}; known: {sorted(STEP_EXECUTORS)}")
        params = step.get("params", {})
        _require(isinstance(params, dict), f"steps[{i}].params",
                 "must be an object")


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _default_model(config) -> TorusModel:
    if "model" in config:
        data = dict(config["model"])
        data.setdefault("type", "torus_model")
        data.setdefault("periods", [1.0] * (2 * data["half_dim"]))
        data.setdefault("metric_diag", [1.0] * (2 * data["half_dim"]))
        data.setdefault(
            "symplectic_matrix",
            __import__("sympdist.torus", fromlist=["standard_symplectic_matrix"])
            .standard_symplectic_matrix(data["half_dim"]).tolist(),
        )
        return model_from_dict(data)
    return TorusModel(half_dim=1, grid_res=32)


def _hodge_spec(params) -> SeminormSpec:
    """Seminorm from scenario parameters: operator kind tag plus c and base norm."""
    c = float(params.get("c", 1.0))
    base = BaseNorm(params.get("base_norm", "hofer_osc"))
    kind = params.get("operator", "hodge_projection")
    if kind == "hodge_projection":
        op = SplittingOperator.hodge_projection()
    elif kind == "zero":
        op = SplittingOperator.zero()
    else:
        raise ConfigError("params.operator",
                          f"scenario operators are hodge_projection|zero, got {kind!r}")
    return SeminormSpec(op, c=c, base_norm=base)


def _check(name, passed, detail=""):
    return {"name": name, "passed": bool(passed), "detail": str(detail)}


# ---------------------------------------------------------------------------
# step executors
# ---------------------------------------------------------------------------

def _step_hodge_roundtrip(model, params, rng):
    n = int(params.get("n_forms", 200))
    tol = float(params.get("tolerance", 1e-10))
    worst_resid = 0.0
    means_exact = True
    for _ in range(n):
        alpha = random_closed_form(model, rng)
        split = hodge_decompose(alpha)
        worst_resid = max(worst_resid, split.residual)
        means_exact &= bool(np.array_equal(split.harmonic, alpha.component_means()))
    checks = [
        _check("reconstruction_residual", worst_resid <= tol,
               f"worst {worst_resid:.3e} <= {tol:.0e}"),
        _check("harmonic_equals_means", means_exact, "componentwise grid means"),
    ]
    return {"table": [{"n_forms": n, "worst_residual": worst_resid}],
            "checks": checks}


def _step_ham_distance_sweep(model, params, rng):
    amounts = params.get("amounts", [round(0.1 * k, 10) for k in range(1, 10)])
    axis = int(params.get("axis", 0))
    tol = float(params.get("tolerance", 1e-3))
    spec = _hodge_spec(params)
    lattice = torus_flux_lattice(model)
    rows = []
    ok_value = True
    ok_gap = True
    for a in amounts:
        vector = [0.0] * model.dim
        vector[axis] = float(a)
        path = translation_path(model, vector, n_steps=32)
        est = distance_to_ham(path, spec, lattice, rng=rng)
        expected = min(abs(a), abs(1.0 - abs(a)))  # unit-period closed form
        rows.append({"amount": a, "lower": est.lower, "upper": est.upper,
                     "expected": expected})
        ok_value &= abs(est.midpoint - expected) <= tol
        ok_gap &= est.gap <= tol
    checks = [
        _check("matches_closed_form", ok_value, f"tolerance {tol:g}"),
        _check("lower_meets_upper", ok_gap, f"gap <= {tol:g}"),
    ]
    return {"table": rows, "checks": checks}


def _step_banyaga_vs_hofer(model, params, rng):
    n_paths = int(params.get("n_paths", 50))
    n_steps = int(params.get("n_steps", 32))
    eq_tol = float(params.get("equality_tolerance", 1e-10))
    rows = []
    violations = 0
    worst_eq = 0.0
    for _ in range(n_paths):
        path = random_isotopy(model, rng, n_steps=n_steps, max_mode=2,
                              harmonic_scale=0.0, exact_scale=0.5)
        lb = length_banyaga(path)
        lh = hofer_length(path)
        rows.append({"banyaga": lb, "hofer": lh})
        if lb > lh + eq_tol * max(1.0, lh):
            violations += 1
        worst_eq = max(worst_eq, abs(lb - lh) / max(1.0, lh))
    checks = [
        _check("banyaga_below_hofer", violations == 0,
               f"{violations} violations over {n_paths} paths"),
        _check("osc_equality_on_ham", worst_eq <= eq_tol,
               f"worst relative deviation {worst_eq:.3e}"),
    ]
    return {"table": rows, "checks": checks}


def _step_length_monotonicity(model, params, rng):
    n_paths = int(params.get("n_paths", 100))
    n_steps = int(params.get("n_steps", 16))
    c = float(params.get("c", 1.0))
    spec0 = SeminormSpec(SplittingOperator.hodge_projection(), c=0.0)
    spec_c = SeminormSpec(SplittingOperator.hodge_projection(), c=c)
    violations = 0
    for _ in range(n_paths):
        path = random_isotopy(model, rng, n_steps=n_steps, max_mode=2,
                              harmonic_scale=0.0, exact_scale=0.5)
        if length(path, spec0) > length(path, spec_c):
            violations += 1
    return {
        "table": [{"n_paths": n_paths, "violations": violations}],
        "checks": [_check("monotone_in_c", violations == 0,
                          f"{violations} violations")],
    }


def _step_concat_additivity(model, params, rng):
    n_pairs = int(params.get("n_pairs", 50))
    schedules = params.get("schedules", ["smooth", "quintic"])
    tol = float(params.get("tolerance", 1e-6))
    spec = _hodge_spec(params)
    worst = 0.0
    for name in schedules:
        sched = SCHEDULES[name]
        for _ in range(n_pairs):
            p = random_isotopy(model, rng, n_steps=64, smooth_norm_profile=True)
            q = random_isotopy(model, rng, n_steps=64, smooth_norm_profile=True)
            lp, lq = length(p, spec), length(q, spec)
            lc = length(concat_left(p, q, sched), spec)
            worst = max(worst, abs(lc - lp - lq) / (lp + lq))
    checks = [_check("left_concat_additive", worst <= tol,
                     f"worst relative defect {worst:.3e} over "
                     f"{n_pairs} pairs x {len(schedules)} schedules")]
    return {"table": [{"worst_relative_defect": worst}], "checks": checks}


def _step_flux_lattice(model, params, rng):
    lattice = torus_flux_lattice(model)
    gens = [g.coeffs.tolist() for g in lattice.generators]
    gap = lattice.discreteness_gap
    unit = bool(
        np.allclose(np.abs(lattice.generator_matrix), np.eye(model.dim), atol=1e-8)
        or np.allclose(
            np.abs(lattice.generator_matrix[::-1]), np.eye(model.dim), atol=1e-8
        )
    )
    # the unbounded-image criterion for a non-lattice flux group never fires on
    # a torus: the sampled values stay bounded and the lattice has full rank
    sampled = []
    spec = _hodge_spec(params)
    for _ in range(int(params.get("n_samples", 16))):
        vec = rng.uniform(size=model.dim)
        sampled.append(
            distance_lower_flux(flux(translation_path(model, vec, 8)), spec, lattice)
        )
    sup_sampled = float(np.max(sampled))
    full_rank = lattice.rank == model.betti1
    checks = [
        _check("unit_generators", unit, f"generators {gens}"),
        _check("discreteness_gap_is_one", abs(gap - 1.0) <= 1e-12, f"gap {gap}"),
        _check("bounded_image_consistent_with_lattice",
               full_rank and np.isfinite(sup_sampled),
               f"sup over sample {sup_sampled:.3f}; rank {lattice.rank}"),
    ]
    return {
        "table": [{"generators": gens, "gram": lattice.gram.tolist(),
                   "gap": gap, "sup_sampled": sup_sampled}],
        "checks": checks,
    }


def _step_pullback_invariance(model, params, rng):
    spec = _hodge_spec(params)
    n_each = int(params.get("n_each", 6))
    maps = default_map_family(model, rng, n_each)
    forms = default_form_family(model, rng, n_each)
    result = invariance_defect(spec, maps, forms)
    checks = [
        _check("enough_pairs", result.n_pairs >= 100, f"{result.n_pairs} pairs"),
        _check("invariance_fails_for_hodge", result.violates_invariance,
               f"{result.violations} ratio violations, "
               f"{result.zero_denominator_hits} kernel hits"),
        _check("ratio_deviation_visible", result.worst_ratio_deviation() > 1e-3,
               f"worst |ratio - 1| = {result.worst_ratio_deviation():.3e}"),
    ]
    table = [{"ratio": float(r)} for r in result.ratios]
    return {"table": table, "checks": checks,
            "summary": {"sup_ratio": result.sup_ratio,
                        "n_pairs": result.n_pairs,
                        "violations": result.violations,
                        "zero_denominator_hits": result.zero_denominator_hits}}


def _step_orbit_rank(model, params, rng):
    k_max = int(params.get("k_max", 8))
    sv_floor = float(params.get("singular_floor", 1e-8))
    which = params.get("form", "dy")
    if which == "dy":
        beta = constant_form(model, [0.0] * (model.dim - 1) + [1.0])
    else:
        beta = random_closed_form(model, rng, max_mode=2)
    rows = []
    ok = True
    for k in range(1, k_max + 1):
        result = orbit_rank(beta, k)
        rows.append({"k": k, "rank": result.rank,
                     "min_singular": result.min_singular_value})
        ok &= result.rank == k and result.min_singular_value > sv_floor
    checks = [_check("full_rank_orbits", ok, f"k up to {k_max}")]
    return {"table": rows, "checks": checks}


def _step_nonharmonic_form(model, params, rng):
    base = constant_form(model, [1.0] + [0.0] * (model.dim - 1))
    cert = nonharmonic_closed_form(base, rng=rng)
    rows = [
        {
            "pairing": float(p),
            "codifferential_norm": float(c),
            "identity_defect": float(d),
        }
        for p, c, d in zip(cert.pairings, cert.codifferential_norms,
                           cert.identity_defects)
    ]
    checks = [
        _check("certificate_positive", cert.all_positive,
               f"min pairing {cert.pairings.min():.3e}"),
        _check("never_harmonic", bool(np.all(cert.codifferential_norms > 0.0)),
               f"min codifferential {cert.codifferential_norms.min():.3e}"),
        _check("integration_by_parts", bool(np.all(cert.identity_defects <= 1e-8)),
               f"max defect {cert.identity_defects.max():.3e}"),
    ]
    return {"table": rows, "checks": checks}


def _step_right_concat_excess(model, params, rng):
    amplitude = float(params.get("amplitude", 0.2))
    H = amplitude * np.cos(2.0 * np.pi * model.grid()[0] / model.periods[0])
    phi_path = hamiltonian_path(model, H, n_steps=64)
    phi_end = hamiltonian_shear(model, amplitude)
    harmonic = [0.0] * (model.dim - 1) + [1.0]
    result = right_concat_excess(phi_path, phi_end, harmonic)
    # identity-first-factor control: right concat with a null first path
    null = IsotopyPath(model, np.zeros((65, model.dim) + model.grid_shape),
                       validate=False)
    h_path = constant_form_path(constant_form(model, harmonic), 64)
    ctrl = concat_right(null, h_path, phi_end=DiffeoMap.identity(model))
    ctrl_excess = length_banyaga(ctrl) - length_banyaga(h_path)
    checks = [
        _check("strict_excess", result.excess >= 1e-3,
               f"excess {result.excess:.6f}"),
        _check("excess_matches_prediction",
               abs(result.excess - result.predicted) <= 1e-4,
               f"|excess - predicted| = {abs(result.excess - result.predicted):.3e}"),
        _check("left_concat_control", abs(result.left_control) <= 1e-6,
               f"left defect {result.left_control:.3e}"),
        _check("identity_factor_control", abs(ctrl_excess) <= 1e-8,
               f"identity-factor defect {ctrl_excess:.3e}"),
    ]
    return {"table": [result.__dict__], "checks": checks}


def _step_product_split(model, params, rng):
    res = int(params.get("factor_res", 8))
    amount = float(params.get("translation", 0.3))
    factor = TorusModel(half_dim=1, grid_res=res)
    pm = ProductModel.build(factor, factor)
    spec = _hodge_spec(params)
    ansatz = PathAnsatz(pm.product, time_degree=2, max_mode=1,
                        collocation_res=8, time_samples=16)
    phi_path = translation_path(factor, [amount, 0.0], 16)
    H = 0.1 * np.cos(2.0 * np.pi * factor.grid()[0])
    pairs = {
        "translation_x_hamiltonian": hamiltonian_path(factor, H, 16),
        "translation_x_translation": translation_path(factor, [0.7, 0.0], 16),
    }
    rows = []
    consistent = True
    split_dev = 0.0
    eps_ok = True
    for name, psi_path in pairs.items():
        rep = product_split_obstruction(phi_path, psi_path, pm, spec,
                                        n_split_checks=int(params.get("n_split_checks", 20)),
                                        rng=rng, ansatz=ansatz)
        rows.append({
            "pair": name,
            "epsilon_lower": rep.epsilon_lower,
            "epsilon_upper": rep.epsilon_upper,
            "delta_right_upper": rep.right_delta_upper,
            "product_is_hamiltonian": rep.product_is_hamiltonian,
            "split_length_deviation": rep.split_length_max_deviation,
            "lattice_is_direct_sum": rep.lattice_is_direct_sum,
        })
        consistent &= rep.implication_consistent and rep.lattice_is_direct_sum
        split_dev = max(split_dev, rep.split_length_max_deviation)
        eps_ok &= abs(rep.epsilon_upper - min(amount, 1 - amount)) <= 1e-3
    checks = [
        _check("split_length_identity", split_dev <= 1e-8,
               f"max deviation {split_dev:.3e}"),
        _check("epsilon_matches_factor_distance", eps_ok,
               f"target {min(amount, 1 - amount)}"),
        _check("obstruction_consistent", consistent, "no counterexamples"),
    ]
    return {"table": rows, "checks": checks}


def _step_delta_invariance(model, params, rng):
    spec = _hodge_spec(params)
    lattice = torus_flux_lattice(model)
    grid_n = int(params.get("grid", 5))
    tol = float(params.get("tolerance", 1e-3))

    def delta_of_translation(vec):
        return distance_to_ham(
            translation_path(model, vec, 16), spec, lattice, rng=rng
        )

    amounts = [round((k + 1) / (grid_n + 1), 10) for k in range(grid_n)]
    ok_commute = True
    ok_bound = True
    ok_conj = True
    rows = []
    deltas = {}
    for a in amounts:
        for b in amounts:
            d_ab = delta_of_translation([a + b, 0.0]).midpoint
            deltas[(a, b)] = d_ab
    for a in amounts:
        d_a = delta_of_translation([a, 0.0]).midpoint
        d_a_inv = delta_of_translation([-a, 0.0]).midpoint
        r_a = max(d_a, d_a_inv)
        for b in amounts:
            d_b = delta_of_translation([b, 0.0]).midpoint
            d_ab = deltas[(a, b)]
            d_ba = deltas[(b, a)]
            ok_commute &= abs(d_ab - d_ba) <= tol
            ok_bound &= abs(d_ab - d_b) <= r_a + tol
            rows.append({"a": a, "b": b, "delta_ab": d_ab, "delta_b": d_b,
                         "r_a": r_a})
    # conjugation by a translation preserves the coset, hence the distance
    for a in amounts:
        base = translation_path(model, [a, 0.0], 16)
        conj = flux(base)  # translations commute: identical flux class
        d_base = distance_to_ham(base, spec, lattice, rng=rng).midpoint
        d_conj = distance_to_ham(conj, spec, lattice, rng=rng).midpoint
        ok_conj &= abs(d_base - d_conj) <= tol
    # half-period translation squares to a full loop: distance symmetric
    d_half = delta_of_translation([0.5, 0.0]).midpoint
    d_half_inv = delta_of_translation([-0.5, 0.0]).midpoint
    checks = [
        _check("commuting_compositions", ok_commute, f"tolerance {tol:g}"),
        _check("bounded_multiplication", ok_bound,
               "|delta(ab) - delta(b)| <= max(delta(a), delta(a^-1))"),
        _check("conjugation_preserves_distance", ok_conj, f"tolerance {tol:g}"),
        _check("involution_symmetric",
               abs(d_half - d_half_inv) <= tol,
               f"half-period values {d_half:.4f} / {d_half_inv:.4f}"),
    ]
    return {"table": rows, "checks": checks}


def _step_degeneracy_consistency(model, params, rng):
    spec = _hodge_spec(params)
    lattice = torus_flux_lattice(model)
    targets = {
        "identity": translation_path(model, [0.0, 0.0], 8),
        "full_loop": translation_path(model, [1.0, 0.0], 8),
        "half_translation": translation_path(model, [0.5, 0.0], 8),
        "third_translation": translation_path(model, [0.3, 0.0], 8),
        "shear": hamiltonian_path(
            model, 0.2 * np.cos(2 * np.pi * model.grid()[0]), 8
        ),
    }
    rows = []
    consistent = True
    for name, path in targets.items():
        lower = distance_lower_flux(flux(path), spec, lattice)
        verdict = is_hamiltonian_endpoint(path, lattice)
        rows.append({"target": name, "delta_lower": lower,
                     "verdict": verdict.status,
                     "flux_distance": verdict.flux_distance})
        if lower <= 1e-9:
            consistent &= verdict.is_hamiltonian
        else:
            consistent &= not verdict.is_hamiltonian
    checks = [_check("degenerate_iff_hamiltonian", consistent,
                     "flux detector agrees with the vanishing lower bound")]
    return {"table": rows, "checks": checks}


def _step_gradient_check(model, params, rng):
    report = gradient_check(
        model=model, rng=rng,
        n_points=int(params.get("n_points", 10)),
        n_coords=int(params.get("n_coords", 12)),
    )
    tol = float(params.get("tolerance", 1e-5))
    worst = max(report.values())
    checks = [_check("gradients_match_fd", worst <= tol,
                     "; ".join(f"{k}: {v:.2e}" for k, v in report.items()))]
    return {"table": [report], "checks": checks}


def _step_distance_upper(model, params, rng):
    spec = _hodge_spec(params)
    ansatz = PathAnsatz(model, time_degree=3, max_mode=2,
                        collocation_res=8, time_samples=16)
    rows = []
    ok = True
    for i, tgt in enumerate(params.get("targets", [])):
        kind = tgt.get("kind")
        if kind == "translation":
            vec = [float(v) for v in tgt["vector"]]
            target = DiffeoMap.translation(model, vec)
            tflux = (model.symplectic_matrix.T @ np.asarray(vec)).tolist()
        elif kind == "shear":
            target = hamiltonian_shear(model, float(tgt["amplitude"]))
            tflux = [0.0] * model.dim
        elif kind == "map_file":
            target = load_json(tgt["path"])
            tflux = None
        else:
            raise ConfigError(f"steps[].params.targets[{i}].kind",
                              f"unknown target kind {kind!r}")
        est = distance_upper(target, spec, ansatz=ansatz, target_flux=tflux,
                             rng=rng, n_random_seeds=2)
        bound = tgt.get("upper_bound")
        row = {"target": kind, "upper": est.upper,
               "endpoint_residual": est.endpoint_residual}
        rows.append(row)
        if bound is not None:
            ok &= est.upper <= float(bound) + float(tgt.get("tolerance", 1e-3))
    checks = [_check("upper_bounds_hold", ok, f"{len(rows)} targets")]
    return {"table": rows, "checks": checks}


STEP_EXECUTORS = {
    "hodge_roundtrip": _step_hodge_roundtrip,
    "ham_distance_sweep": _step_ham_distance_sweep,
    "banyaga_vs_hofer": _step_banyaga_vs_hofer,
    "length_monotonicity": _step_length_monotonicity,
    "concat_additivity": _step_concat_additivity,
    "flux_lattice": _step_flux_lattice,
    "pullback_invariance": _step_pullback_invariance,
    "orbit_rank": _step_orbit_rank,
    "nonharmonic_form": _step_nonharmonic_form,
    "right_concat_excess": _step_right_concat_excess,
    "product_split": _step_product_split,
    "delta_invariance": _step_delta_invariance,
    "degeneracy_consistency": _step_degeneracy_consistency,
    "gradient_check": _step_gradient_check,
    "distance_upper": _step_distance_upper,
}


# ---------------------------------------------------------------------------
# running scenarios
# ---------------------------------------------------------------------------

def run_scenario(config: dict, threads: int = 1, seed_override: int = None) -> dict:
    """Execute a validated scenario and assemble the report.

    Steps run in a thread pool when independent (they all are: each gets its
    own generator spawned from the scenario seed and step index), and the
    report lists them in step order for bit-stable output.
    """
    validate_scenario(config)
    seed = int(seed_override if seed_override is not None else config["seed"])
    model = _default_model(config)
    steps = config.get("steps", [])
    spawned = np.random.SeedSequence(seed).spawn(max(len(steps), 1))

    def run_step(i):
        step = steps[i]
        rng = np.random.default_rng(spawned[i])
        step_model = model
        if "model" in step:
            step_model = _default_model(step)
        started = time.perf_counter()
        result = STEP_EXECUTORS[step["kind"]](step_model, step.get("params", {}), rng)
        result = dict(result)
        result["kind"] = step["kind"]
        result["duration_s"] = time.perf_counter() - started
        return i, result

    results = [None] * len(steps)
    if threads > 1 and len(steps) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            for i, result in pool.map(run_step, range(len(steps))):
                results[i] = result
    else:
        for i in range(len(steps)):
            results[i] = run_step(i)[1]

    all_checks = [c for r in results for c in r["checks"]]
    passed = all(c["passed"] for c in all_checks)
    return {
        "scenario": {"name": config["name"], "seed": seed,
                     "model": model_to_dict(model),
                     "steps": [s["kind"] for s in steps]},
        "environment": {
            "package_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "platform": platform.platform(),
        },
        "steps": results,
        "passed": passed,
        "n_checks": len(all_checks),
        "n_failed": sum(1 for c in all_checks if not c["passed"]),
    }


def report_payload_for_comparison(report: dict) -> dict:
    """The deterministic part of a report (durations and environment removed)."""
    slim = {
        "scenario": report["scenario"],
        "passed": report["passed"],
        "n_checks": report["n_checks"],
        "steps": [
            {k: v for k, v in step.items() if k != "duration_s"}
            for step in report["steps"]
        ],
    }
    return slim


# ---------------------------------------------------------------------------
# bundled scenarios
# ---------------------------------------------------------------------------

BUNDLED_SCENARIOS = {
    "empty": {
        "version": 1,
        "name": "empty",
        "seed": 0,
        "steps": [],
    },
    "torus-ham-distance-sweep": {
        "version": 1,
        "name": "torus-ham-distance-sweep",
        "seed": 20240817,
        "model": {"half_dim": 1, "grid_res": 32},
        "steps": [
            {"kind": "ham_distance_sweep", "params": {"tolerance": 1e-3}},
        ],
    },
    "banyaga-vs-hofer": {
        "version": 1,
        "name": "banyaga-vs-hofer",
        "seed": 20240817,
        "model": {"half_dim": 1, "grid_res": 32},
        "steps": [
            {"kind": "banyaga_vs_hofer", "params": {"n_paths": 50}},
            {"kind": "length_monotonicity", "params": {"n_paths": 100}},
        ],
    },
    "pullback-invariance": {
        "version": 1,
        "name": "pullback-invariance",
        "seed": 20240817,
        "model": {"half_dim": 1, "grid_res": 64},
        "steps": [
            {"kind": "pullback_invariance", "params": {"n_each": 4}},
        ],
    },
    "orbit-rank": {
        "version": 1,
        "name": "orbit-rank",
        "seed": 20240817,
        "model": {"half_dim": 1, "grid_res": 64},
        "steps": [
            {"kind": "orbit_rank", "params": {"k_max": 8}},
        ],
    },
    "nonharmonic-form": {
        "version": 1,
        "name": "nonharmonic-form",
        "seed": 20240817,
        "model": {"half_dim": 1, "grid_res": 64},
        "steps": [
            {"kind": "nonharmonic_form", "params": {}},
        ],
    },
    "right-concat-excess": {
        "version": 1,
        "name": "right-concat-excess",
        "seed": 20240817,
        "model": {"half_dim": 1, "grid_res": 64},
        "steps": [
            {"kind": "right_concat_excess", "params": {"amplitude": 0.2}},
        ],
    },
    "flux-lattice": {
        "version": 1,
        "name": "flux-lattice",
        "seed": 20240817,
        "model": {"half_dim": 1, "grid_res": 32},
        "steps": [
            {"kind": "flux_lattice", "params": {}},
            {"kind": "degeneracy_consistency", "params": {}},
        ],
    },
    "product-split": {
        "version": 1,
        "name": "product-split",
        "seed": 20240817,
        "steps": [
            {"kind": "product_split", "params": {"factor_res": 8}},
        ],
    },
    "desk-check": {
        "version": 1,
        "name": "desk-check",
        "seed": 20240817,
        "model": {"half_dim": 1, "grid_res": 32},
        "steps": [
            {"kind": "hodge_roundtrip", "params": {"n_forms": 50}},
            {"kind": "concat_additivity", "params": {"n_pairs": 10}},
            {"kind": "gradient_check", "params": {"n_points": 4}},
            {"kind": "delta_invariance", "params": {"grid": 3}},
        ],
    },
}


def load_scenario(source: str) -> dict:
    """Resolve a bundled scenario name or read a JSON config file."""
    if source in BUNDLED_SCENARIOS:
        return json.loads(json.dumps(BUNDLED_SCENARIOS[source]))
    with open(source) as fh:
        return json.load(fh)
