"""wavecli: validate model-spec files, reproduce the bundled example
pipelines, and run verification stages with JSON/CSV reports.

Exit codes: 0 pass, 1 check failure, 2 input error, 3 I/O error.
Reports are byte-identical for identical inputs and seed; wall-clock
numbers live in a separate ``timings`` field outside that contract.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .chart_action import (
    ChartPreconditionError,
    compose,
    realize_conf_element,
    realize_conf_flow,
    realize_flip,
    realize_heis,
    realize_K,
    realize_translation_flow,
    similarity_factor,
)
from .conformal_gauge import (
    GaugeMeasurementError,
    GaugeSpec,
    build_gauge,
    measure_gauge_data,
    verify_gauge,
)
from .geometry import BrinkmannPoint, ModelSpec, check_parallel, conformal_flatness
from .lie_core import HeisElement
from .quotient_lab import (
    build_example,
    malcev_closure,
    membership,
    orbit_separation,
    properness_check,
)
from .sampling import brinkmann_samples
from .specfile import SpecFileError, build_from_document, load_spec_file

DEFAULT_TOLERANCES = {
    "weyl": 1e-7,
    "cotton": 1e-6,
    "similarity": 1e-8,
    "gauge": 1e-8,
    "lattice": 1e-6,
    "properness": 1e-8,
}

EXAMPLES = ("cw4", "example1", "example2")


class _Config:
    def __init__(self, args, file_checks=None):
        file_checks = file_checks or {}
        self.tolerances = dict(DEFAULT_TOLERANCES)
        self.tolerances.update(file_checks.get("tolerances", {}))
        for key in self.tolerances:
            env = os.environ.get(f"WAVECLI_TOL_{key.upper()}")
            if env is not None:
                self.tolerances[key] = float(env)
        for item in args.tol or []:
            name, _, value = item.partition("=")
            if name not in self.tolerances or not value:
                raise SpecFileError([f"--tol {item!r}: unknown tolerance name"])
            self.tolerances[name] = float(value)
        self.seed = args.seed if args.seed is not None else file_checks.get("seed", 0)
        self.samples = (
            args.samples if args.samples is not None else file_checks.get("samples", 32)
        )
        if args.grid is not None:
            t0, t1, count = args.grid.split(",")
            self.grid = (float(t0), float(t1), int(count))
        else:
            grid = file_checks.get("grid", (-20.0, 20.0, 4001))
            self.grid = (float(grid[0]), float(grid[1]), int(grid[2]))
        self.out = args.out

    def sample_points(self, model):
        return brinkmann_samples(model, self.samples, seed=self.seed)

    def to_json_dict(self):
        return {
            "tolerances": dict(sorted(self.tolerances.items())),
            "seed": self.seed,
            "samples": self.samples,
            "grid": list(self.grid),
        }


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_model(model: ModelSpec, cfg: _Config) -> dict:
    out = {
        "n": model.n,
        "dim": model.dim,
        "profile": "constant" if model.profile.is_constant else "sampled",
        "is_flat": model.is_flat,
    }
    pts = cfg.sample_points(model)
    out["parallel_null_field"] = {
        "max_nabla_dv": check_parallel(model, "v", pts),
        "g_vv": 0.0,
    }
    if model.profile.is_constant:
        L = model.derivation()
        out["derivation_eigenvalues"] = [
            [float(e.real), float(e.imag)] for e in L.eigenvalues()
        ]
        from .lie_core import spectral_type

        out["spectral_type"] = spectral_type(L)
    return out


def stage_flatness(model: ModelSpec, cfg: _Config):
    tol = cfg.tolerances["weyl"] if model.dim >= 4 else cfg.tolerances["cotton"]
    pts = cfg.sample_points(model)
    report = conformal_flatness(model, pts, tol)
    rows = [
        list(p.coords()) + [val] for p, val in zip(pts, report.sample_values)
    ]
    return {"report": report.to_json_dict(), "pass": True}, rows


def _action_maps(model: ModelSpec):
    n = model.n
    e1 = np.eye(n)[0]
    maps = [
        ("homothety(0.3)", realize_conf_flow(model, 0.3), math.exp(0.6)),
        ("homothety(1.0)", realize_conf_flow(model, 1.0), math.exp(2.0)),
        ("heis_a_plus", realize_heis(model, HeisElement(e1, np.zeros(n), 0.0)), 1.0),
        ("heis_a_minus", realize_heis(model, HeisElement(np.zeros(n), e1, 0.0)), 1.0),
        ("heis_center", realize_heis(model, HeisElement.center(1.0, n)), 1.0),
    ]
    skipped = []
    if model.profile.is_constant:
        maps.append(("translation(0.7)", realize_translation_flow(model, 0.7), 1.0))
        maps.append(("flip(0)", realize_flip(model, 0.0), 1.0))
    else:
        lo, hi = model.profile.domain
        try:
            maps.append((f"flip({lo + hi})", realize_flip(model, lo + hi), 1.0))
        except ChartPreconditionError as e:
            skipped.append({"name": "flip", "reason": str(e)})
    for i, k in enumerate(model.K_generators):
        maps.append((f"rotation[{i}]", realize_K(model, k), 1.0))
    return maps, skipped


def stage_action(model: ModelSpec, cfg: _Config) -> dict:
    tol = cfg.tolerances["similarity"]
    pts = cfg.sample_points(model)
    maps, skipped = _action_maps(model)
    entries = []
    ok = True
    for name, phi, expected in maps:
        rep = similarity_factor(model, phi, pts, tol=tol)
        entry = {"name": name, **rep.to_json_dict()}
        if expected is not None and rep.factor is not None:
            entry["expected_factor"] = expected
            entry["factor_error"] = abs(rep.factor - expected)
        entries.append(entry)
        if rep.verdict == "not_conformal_in_tolerance":
            ok = False
    a = realize_conf_flow(model, 0.25)
    b_map = realize_heis(model, HeisElement.center(0.5, model.n))
    ca = similarity_factor(model, a, pts, tol=tol).factor
    cb = similarity_factor(model, b_map, pts, tol=tol).factor
    cab = similarity_factor(model, compose(a, b_map), pts, tol=tol).factor
    mult_residual = abs(cab - ca * cb)
    if mult_residual > 1e-7:
        ok = False
    return {
        "elements": entries,
        "skipped": skipped,
        "factor_multiplicativity_residual": mult_residual,
        "pass": ok,
    }


def stage_quotient(model, gamma, diagnostics, cfg: _Config):
    tol = cfg.tolerances["properness"]
    out = {}
    if diagnostics is not None:
        out["construction"] = diagnostics
    if gamma is not None and gamma.rank > 0:
        n0 = malcev_closure(gamma.gamma0_basis)
        gamma_hat = gamma.gamma_hat
    elif diagnostics is not None and "ideal_basis" in diagnostics:
        n0 = np.array(diagnostics["ideal_basis"], dtype=float)
        from .lie_core import ConfGroupElement

        gamma_hat = ConfGroupElement(
            diagnostics["t_H"],
            diagnostics["t_L"],
            np.eye(model.n),
            HeisElement.identity(model.n),
            model.derivation(),
        )
    else:
        return {"pass": False, "reason": "no quotient data"}, []
    prop = properness_check(model, n0, gamma_hat, grid=cfg.grid, threshold=tol)
    out["properness"] = prop.to_json_dict()
    curve_rows = _transversality_rows(model, n0, cfg.grid)
    ok = prop.verdict == "pass"
    if gamma is not None and gamma.rank > 0:
        word_length = 4 if gamma.rank <= 2 else 3
        origin = BrinkmannPoint(0.0, np.zeros(model.n), 0.0)
        sep = orbit_separation(gamma, origin, word_length)
        out["orbit_separation"] = {
            "word_length": word_length,
            "min_displacement": sep,
            "note": "empirical probe, not a proof",
        }
        g_in = gamma.gamma_hat
        from .lie_core import ConfGroupElement, group_mul, group_pow

        probe_in = group_mul(
            group_pow(g_in, 2),
            ConfGroupElement.from_heis(gamma.gamma0_basis[0], g_in.deriv),
        )
        half = HeisElement(
            0.5 * gamma.gamma0_basis[0].alpha,
            0.5 * gamma.gamma0_basis[0].beta,
            0.5 * gamma.gamma0_basis[0].z,
        )
        probe_out = ConfGroupElement.from_heis(half, g_in.deriv)
        out["membership_spot_checks"] = {
            "gamma_hat^2.gen0": membership(probe_in, gamma),
            "half_gen0": membership(probe_out, gamma),
        }
        if not out["membership_spot_checks"]["gamma_hat^2.gen0"]:
            ok = False
        if out["membership_spot_checks"]["half_gen0"]:
            ok = False
    out["pass"] = ok
    return out, curve_rows


def _transversality_rows(model, n0, grid):
    from .quotient_lab import _aplus_cols, _basis_matrix, _transversality_curve

    B = _basis_matrix(n0)
    if B.shape[0] != model.n + 1:
        return []
    t0, t1, count = grid
    ts = np.linspace(float(t0), float(t1), int(count))
    d = _transversality_curve(model.derivation().matrix, B.T, _aplus_cols(model.n), ts)
    return [[float(t), float(v)] for t, v in zip(ts, d)]


def stage_gauge(model, gamma, cfg: _Config) -> dict:
    tol = cfg.tolerances["gauge"]
    pts = cfg.sample_points(model)
    if gamma is not None:
        gamma_hat = gamma.gamma_hat
        heis_gens = list(gamma.gamma0_basis)
    else:
        from .lie_core import ConfGroupElement

        deriv = model.derivation()
        gamma_hat = ConfGroupElement(
            0.5, 0.7, np.eye(model.n), HeisElement.identity(model.n), deriv
        )
        n = model.n
        heis_gens = [
            HeisElement(np.eye(n)[0], np.zeros(n), 0.0),
            HeisElement(np.zeros(n), np.eye(n)[0], 0.0),
            HeisElement.center(1.0, n),
        ]
    phi_hat = realize_conf_element(model, gamma_hat)
    try:
        b, alpha = measure_gauge_data(model, phi_hat, pts)
    except GaugeMeasurementError as e:
        return {"pass": False, "reason": str(e)}
    if b == 0.0 and abs(alpha) > 1e-12:
        return {
            "pass": False,
            "reason": "no leaf gauge exists: the designated element has a "
            "nontrivial conformal factor but trivial u-translation",
            "measured": {"b": b, "alpha": alpha},
        }
    elements = [("gamma_hat", phi_hat)]
    elements += [
        (f"heis_gen[{i}]", realize_heis(model, h)) for i, h in enumerate(heis_gens)
    ]
    elements += [
        (f"rotation[{i}]", realize_K(model, k))
        for i, k in enumerate(model.K_generators)
    ]
    out = {"measured": {"b": b, "alpha": alpha}}
    if b == 0.0:
        out["note"] = "designated element is isometric; trivial gauge suffices"
        out["pass"] = True
        return out
    reports = {}
    ok = True
    for variant in ("linear", "bump"):
        gspec = GaugeSpec(
            b, alpha, variant=variant, epsilon=abs(b) / 4 if variant == "bump" else None
        )
        gauge = build_gauge(gspec)
        rep = verify_gauge(model, gauge, elements, tol=tol, samples=pts)
        reports[variant] = rep.to_json_dict()
        ok = ok and rep.all_isometries
    out["gauges"] = reports
    out["pass"] = ok
    return out


# ---------------------------------------------------------------------------
# Report plumbing
# ---------------------------------------------------------------------------


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, float) and (math.isinf(obj) or math.isnan(obj)):
        return repr(obj)
    if isinstance(obj, float) and obj == int(obj) and abs(obj) < 1e15:
        return obj
    return obj


def _emit(report: dict, cfg: _Config, csv_tables: dict, stem: str) -> int:
    text = json.dumps(_sanitize(report), sort_keys=True, indent=2) + "\n"
    if cfg.out:
        try:
            os.makedirs(cfg.out, exist_ok=True)
            path = os.path.join(cfg.out, f"{stem}_report.json")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
            for name, (header, rows) in csv_tables.items():
                with open(
                    os.path.join(cfg.out, f"{stem}_{name}.csv"), "w", newline=""
                ) as fh:
                    writer = csv.writer(fh)
                    writer.writerow(header)
                    writer.writerows(rows)
            print(f"report written to {path}")
        except OSError as e:
            print(f"error: cannot write report: {e}", file=sys.stderr)
            return 3
    else:
        print(text, end="")
    return 0


def _summary(report: dict):
    for stage, payload in sorted(report.get("results", {}).items()):
        if isinstance(payload, dict) and "pass" in payload:
            print(f"  {stage}: {'pass' if payload['pass'] else 'FAIL'}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        load_spec_file(args.path)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except SpecFileError as e:
        for err in e.errors:
            print(f"invalid: {err}", file=sys.stderr)
        return 2
    print(f"{args.path}: valid")
    return 0


def _flatness_header(model):
    return ["v"] + [f"x{i + 1}" for i in range(model.n)] + ["u", "max_abs_component"]


def cmd_example(args) -> int:
    if args.name not in EXAMPLES:
        print(f"error: unknown example {args.name!r}; choose from {EXAMPLES}", file=sys.stderr)
        return 2
    try:
        cfg = _Config(args)
    except (SpecFileError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    variant = "adjusted" if args.alpha_adjusted else "default"
    timings = {}
    results = {}
    csv_tables = {}

    t0 = time.perf_counter()
    built = build_example(args.name, variant=variant, b=args.b)
    timings["build"] = time.perf_counter() - t0
    model = built.model

    t0 = time.perf_counter()
    results["model"] = stage_model(model, cfg)
    timings["model"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    results["flatness"], rows = stage_flatness(model, cfg)
    csv_tables["flatness_samples"] = (_flatness_header(model), rows)
    timings["flatness"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    results["action"] = stage_action(model, cfg)
    timings["action"] = time.perf_counter() - t0

    if args.name != "cw4":
        t0 = time.perf_counter()
        quotient, curve = stage_quotient(model, built.gamma, built.diagnostics, cfg)
        if variant == "default":
            adjusted = build_example(args.name, variant="adjusted", b=args.b)
            adj_quotient, _ = stage_quotient(
                adjusted.model, adjusted.gamma, adjusted.diagnostics, cfg
            )
            quotient["adjusted_rerun"] = adj_quotient
        results["quotient"] = quotient
        if curve:
            csv_tables["transversality"] = (["t", "d"], curve)
        timings["quotient"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        results["gauge"] = stage_gauge(model, built.gamma, cfg)
        timings["gauge"] = time.perf_counter() - t0

    params = {"name": args.name, "variant": variant, "b": args.b}
    report = {
        "tool": {"name": "wavecli", "version": __version__},
        "input": {
            "kind": "example",
            "params": params,
            "hash": hashlib.sha256(
                json.dumps(params, sort_keys=True).encode()
            ).hexdigest(),
        },
        "config": cfg.to_json_dict(),
        "results": results,
        "timings": timings,
    }
    print(f"example {args.name} ({variant}):")
    _summary(report)
    return _emit(report, cfg, csv_tables, args.name)


def cmd_check(args) -> int:
    try:
        doc = load_spec_file(args.path)
        model, gamma, file_checks = build_from_document(doc)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except SpecFileError as e:
        for err in e.errors:
            print(f"invalid: {err}", file=sys.stderr)
        return 2
    try:
        cfg = _Config(args, file_checks)
    except (SpecFileError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    flags = {
        "flatness": args.flatness,
        "action": args.action,
        "quotient": args.quotient,
        "gauge": args.gauge,
    }
    if not any(flags.values()):
        flags = {k: True for k in flags}
        if gamma is None:
            flags["quotient"] = flags["gauge"] = False
    if (flags["quotient"] or flags["gauge"]) and gamma is None:
        print("error: requested stage needs a 'gamma' section", file=sys.stderr)
        return 2

    timings = {}
    results = {}
    csv_tables = {}

    t0 = time.perf_counter()
    results["model"] = stage_model(model, cfg)
    timings["model"] = time.perf_counter() - t0

    if flags["flatness"]:
        t0 = time.perf_counter()
        results["flatness"], rows = stage_flatness(model, cfg)
        csv_tables["flatness_samples"] = (_flatness_header(model), rows)
        timings["flatness"] = time.perf_counter() - t0
    if flags["action"]:
        t0 = time.perf_counter()
        results["action"] = stage_action(model, cfg)
        timings["action"] = time.perf_counter() - t0
    if flags["quotient"]:
        t0 = time.perf_counter()
        quotient, curve = stage_quotient(model, gamma, None, cfg)
        results["quotient"] = quotient
        if curve:
            csv_tables["transversality"] = (["t", "d"], curve)
        timings["quotient"] = time.perf_counter() - t0
    if flags["gauge"]:
        t0 = time.perf_counter()
        results["gauge"] = stage_gauge(model, gamma, cfg)
        timings["gauge"] = time.perf_counter() - t0

    with open(args.path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    report = {
        "tool": {"name": "wavecli", "version": __version__},
        "input": {"kind": "file", "path": os.path.basename(args.path), "hash": digest},
        "config": cfg.to_json_dict(),
        "results": results,
        "timings": timings,
    }
    print(f"check {args.path}:")
    _summary(report)
    stem = os.path.splitext(os.path.basename(args.path))[0]
    rc = _emit(report, cfg, csv_tables, stem)
    if rc != 0:
        return rc
    failed = any(
        isinstance(v, dict) and v.get("pass") is False for v in results.values()
    )
    return 1 if failed else 0


def _add_common(p):
    p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                   help="override a tolerance (weyl, cotton, similarity, gauge, lattice, properness)")
    p.add_argument("--seed", type=int, default=None, help="sample-point seed")
    p.add_argument("--samples", type=int, default=None, help="number of sample points")
    p.add_argument("--grid", default=None, metavar="T0,T1,COUNT",
                   help="transversality grid")
    p.add_argument("--out", default=None, metavar="DIR", help="report output directory")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wavecli",
        description="verify plane-wave models: flatness, group actions, "
        "quotient criteria, conformal gauges",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="validate a model-spec JSON file")
    p_val.add_argument("path")
    p_val.set_defaults(func=cmd_validate)

    p_ex = sub.add_parser("example", help="run a bundled example pipeline")
    p_ex.add_argument("name", help="cw4 | example1 | example2")
    p_ex.add_argument("--alpha-adjusted", action="store_true",
                      help="use the integer-trace generator scale")
    p_ex.add_argument("--b", type=float, default=1.0,
                      help="profile parameter for example2")
    _add_common(p_ex)
    p_ex.set_defaults(func=cmd_example)

    p_chk = sub.add_parser("check", help="run verification stages on a spec file")
    p_chk.add_argument("path")
    p_chk.add_argument("--flatness", action="store_true")
    p_chk.add_argument("--action", action="store_true")
    p_chk.add_argument("--quotient", action="store_true")
    p_chk.add_argument("--gauge", action="store_true")
    _add_common(p_chk)
    p_chk.set_defaults(func=cmd_check)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
