"""Command line front end: validate configs, run experiments, emit plot data.

Configs are JSON documents validated strictly (unknown or inapplicable keys
are rejected with their full path) and echoed back with every default
expanded, so the echo can be re-run to reproduce the report.  Reports are
JSON with a versioned schema; per-cell sweep data also lands in a flat CSV,
and `plotdata` turns a report into per-metric whitespace-delimited files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import env
from . import homogenize as H
from .discrete import (
    Grid,
    assemble_form,
    bump,
    cone_comparability_check,
    evaluate,
    measure_weights,
    nash_check,
    test_function_suite,
    translation_estimate_check,
)
from .errors import ConfigurationError
from .kernel import (
    AngularWeight,
    ConeSpec,
    ConstantForm,
    KernelParams,
    ProductForm,
    SummationForm,
)
from .solver import ResolventProblem, solve_resolvent
from . import __version__

SCHEMA_VERSION = 1

_EXPERIMENTS = ("sweep", "estimate_constant", "mosco", "diagnostics", "example17")
_DIAGNOSTICS = (
    "nash", "cone", "translation", "birkhoff", "maximal", "covariance", "tails", "moments",
)

# which top-level keys each experiment reads, and which of those must be given
_RELEVANT = {
    "sweep": ("grid", "alpha", "cone", "form", "lambda", "eps_list", "seeds",
              "mu", "report_radius", "rhs_radius", "tol"),
    "estimate_constant": ("grid", "alpha", "cone", "form", "estimate"),
    "mosco": ("grid", "alpha", "cone", "form", "eps_list", "seeds", "mosco"),
    "example17": ("grid", "alpha", "cone", "lambda", "eps_list", "seeds", "tol",
                  "example17"),
}
_REQUIRED = {
    "sweep": ("grid", "alpha", "form", "eps_list"),
    "estimate_constant": ("grid", "alpha", "form", "estimate"),
    "mosco": ("grid", "alpha", "form", "eps_list"),
    "example17": ("grid", "alpha", "example17"),
}
_DIAG_RELEVANT = {
    "nash": ("grid", "alpha", "cone"),
    "cone": ("grid", "alpha", "cone"),
    "translation": ("grid", "alpha", "cone", "form", "lambda", "tol", "rhs_radius"),
    "tails": ("grid", "alpha", "cone", "form", "rhs_radius"),
    "moments": ("grid", "form"),
    "birkhoff": ("field",),
    "maximal": ("field",),
    "covariance": ("field",),
}
_DIAG_REQUIRED = {
    "nash": ("grid", "alpha"),
    "cone": ("grid", "alpha"),
    "translation": ("grid", "alpha", "form"),
    "tails": ("grid", "alpha", "form"),
    "moments": ("grid", "form"),
    "birkhoff": ("field",),
    "maximal": ("field",),
    "covariance": ("field",),
}
_ALL_TOP_KEYS = (
    "schema_version", "experiment", "master_seed", "grid", "alpha", "cone",
    "form", "lambda", "eps_list", "seeds", "mu", "report_radius", "rhs_radius",
    "tol", "field", "estimate", "mosco", "diagnostics", "example17",
)


# ---------------------------------------------------------------------------
# strict config traversal


def _check_keys(obj: dict, path: str, required: tuple, optional: tuple):
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{path} must be an object")
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigurationError(f"unknown key '{key}' in {path}")
    for key in required:
        if key not in obj:
            raise ConfigurationError(f"missing required key '{key}' in {path}")


def _number(obj, path) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigurationError(f"{path} must be a number")
    return float(obj)


def _integer(obj, path) -> int:
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise ConfigurationError(f"{path} must be an integer")
    return obj


def _boolean(obj, path) -> bool:
    if not isinstance(obj, bool):
        raise ConfigurationError(f"{path} must be a boolean")
    return obj


def _string(obj, path, choices=None) -> str:
    if not isinstance(obj, str):
        raise ConfigurationError(f"{path} must be a string")
    if choices is not None and obj not in choices:
        raise ConfigurationError(f"{path} must be one of {sorted(choices)}, got '{obj}'")
    return obj


def _number_list(obj, path) -> list[float]:
    if not isinstance(obj, list) or not obj:
        raise ConfigurationError(f"{path} must be a nonempty array of numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(obj)]


# ---------------------------------------------------------------------------
# section parsers: each returns the resolved (defaults-expanded) echo dict


def _parse_grid(obj, path) -> dict:
    _check_keys(obj, path, ("dim", "length", "n"), ())
    return {
        "dim": _integer(obj["dim"], f"{path}.dim"),
        "length": _number(obj["length"], f"{path}.length"),
        "n": _integer(obj["n"], f"{path}.n"),
    }


_MARGINAL_PARAMS = {
    "constant": ("c",),
    "uniform": ("a", "b"),
    "lognormal": ("m", "s"),
    "exp_abs_gauss": ("s",),
    "shifted_pareto": ("x_min", "tail_index"),
}


def _parse_marginal(obj, path) -> dict:
    all_params = tuple({k for ks in _MARGINAL_PARAMS.values() for k in ks})
    _check_keys(obj, path, ("kind",), all_params + ("declared_p",))
    kind = _string(obj["kind"], f"{path}.kind", choices=set(_MARGINAL_PARAMS))
    out = {"kind": kind}
    for key in _MARGINAL_PARAMS[kind]:
        if key not in obj:
            raise ConfigurationError(f"missing required key '{key}' in {path}")
        out[key] = _number(obj[key], f"{path}.{key}")
    for key in obj:
        if key not in ("kind", "declared_p") and key not in _MARGINAL_PARAMS[kind]:
            raise ConfigurationError(
                f"key '{key}' in {path} does not belong to marginal kind '{kind}'"
            )
    out["declared_p"] = _number(obj.get("declared_p", 2.0), f"{path}.declared_p")
    return out


def _parse_mixing(obj, path) -> dict:
    _check_keys(obj, path, ("kind",), ("q",))
    kind = _string(obj["kind"], f"{path}.kind", choices={"iid_cells", "moving_average"})
    out = {"kind": kind}
    if kind == "moving_average":
        out["q"] = _number(obj.get("q", 1.0), f"{path}.q")
    elif "q" in obj:
        raise ConfigurationError(f"key 'q' in {path} does not belong to kind 'iid_cells'")
    return out


def _parse_field(obj, path, dim: int) -> dict:
    _check_keys(obj, path, ("marginal",), ("mixing", "cell_size", "seed", "scale"))
    return {
        "marginal": _parse_marginal(obj["marginal"], f"{path}.marginal"),
        "mixing": _parse_mixing(obj.get("mixing", {"kind": "iid_cells"}), f"{path}.mixing"),
        "cell_size": _number(obj.get("cell_size", 1.0), f"{path}.cell_size"),
        "seed": _integer(obj.get("seed", 0), f"{path}.seed"),
        "scale": _number(obj.get("scale", 1.0), f"{path}.scale"),
        "dim": dim,
    }


def _default_axis(dim: int) -> list[float]:
    return [1.0] + [0.0] * (dim - 1)


def _parse_cone(obj, path, dim: int) -> dict:
    if obj is None:
        return {"axis": _default_axis(dim), "aperture": 0.0, "full_space": True}
    _check_keys(obj, path, (), ("axis", "aperture", "full_space"))
    axis = _number_list(obj.get("axis", _default_axis(dim)), f"{path}.axis")
    if len(axis) != dim:
        raise ConfigurationError(f"{path}.axis has {len(axis)} entries, grid dim is {dim}")
    return {
        "axis": axis,
        "aperture": _number(obj.get("aperture", 0.0), f"{path}.aperture"),
        "full_space": _boolean(obj.get("full_space", False), f"{path}.full_space"),
    }


def _parse_angular(obj, path, dim: int) -> dict:
    if obj is None:
        return {"kind": "one", "axis": _default_axis(dim)}
    _check_keys(obj, path, ("kind",), ("axis",))
    kind = _string(obj["kind"], f"{path}.kind", choices={"one", "cos2"})
    axis = _number_list(obj.get("axis", _default_axis(dim)), f"{path}.axis")
    if len(axis) != dim:
        raise ConfigurationError(f"{path}.axis has {len(axis)} entries, grid dim is {dim}")
    return {"kind": kind, "axis": axis}


def _parse_form(obj, path, dim: int) -> dict:
    _check_keys(obj, path, ("kind",), ("k0", "field", "angular", "nu1", "nu2"))
    kind = _string(obj["kind"], f"{path}.kind", choices={"constant", "summation", "product"})
    if kind == "constant":
        _check_keys(obj, path, ("kind", "k0"), ())
        return {"kind": "constant", "k0": _number(obj["k0"], f"{path}.k0")}
    if kind == "summation":
        _check_keys(obj, path, ("kind", "field"), ("angular",))
        return {
            "kind": "summation",
            "field": _parse_field(obj["field"], f"{path}.field", dim),
            "angular": _parse_angular(obj.get("angular"), f"{path}.angular", dim),
        }
    _check_keys(obj, path, ("kind", "nu1", "nu2"), ())
    return {
        "kind": "product",
        "nu1": _parse_field(obj["nu1"], f"{path}.nu1", dim),
        "nu2": _parse_field(obj["nu2"], f"{path}.nu2", dim),
    }


def _form_cell_sizes(form_d: dict) -> list[float]:
    if form_d["kind"] == "summation":
        return [form_d["field"]["cell_size"]]
    if form_d["kind"] == "product":
        return [form_d["nu1"]["cell_size"], form_d["nu2"]["cell_size"]]
    return []


def _check_resolution(grid_d: dict, cell_sizes, eps_values):
    """Mirror of the assembly-time invariant so `validate` catches it early."""
    h = grid_d["length"] / grid_d["n"]
    for cell in cell_sizes:
        for eps in eps_values:
            if h > eps * cell / 4.0 + 1e-15:
                raise ConfigurationError(
                    f"h > eps*cell_size/4: h={h:g} does not resolve environment "
                    f"cells of size eps*cell_size={eps * cell:g}; refine the grid "
                    "or raise eps"
                )


# ---------------------------------------------------------------------------
# builders: resolved echo dicts -> library objects


def _build_grid(d: dict) -> Grid:
    return Grid(dim=d["dim"], length=d["length"], n=d["n"])


def _build_marginal(d: dict) -> env.DistributionSpec:
    params = tuple(d[key] for key in _MARGINAL_PARAMS[d["kind"]])
    return env.DistributionSpec(d["kind"], params, d["declared_p"])


def _build_field(d: dict) -> env.RandomField:
    mixing = env.MixingSpec(kind=d["mixing"]["kind"], q=d["mixing"].get("q", 1.0))
    return env.RandomField(
        dim=d["dim"],
        marginal=_build_marginal(d["marginal"]),
        mixing=mixing,
        cell_size=d["cell_size"],
        seed=d["seed"],
        scale=d["scale"],
    )


def _build_cone(d: dict) -> ConeSpec:
    return ConeSpec(axis=tuple(d["axis"]), aperture=d["aperture"], full_space=d["full_space"])


def _build_form(d: dict):
    if d["kind"] == "constant":
        return ConstantForm(d["k0"])
    if d["kind"] == "summation":
        ang = AngularWeight(kind=d["angular"]["kind"], axis=tuple(d["angular"]["axis"]))
        return SummationForm(_build_field(d["field"]), ang)
    return ProductForm(_build_field(d["nu1"]), _build_field(d["nu2"]))


# ---------------------------------------------------------------------------
# top-level config


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    resolved: dict


def parse_config(text: str) -> ExperimentConfig:
    """Validate a JSON config and resolve every default into the echo.

    Re-parsing the echo yields the same resolved dictionary, so reports can be
    reproduced from the config they embed.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"config is not valid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}"
        ) from None
    _check_keys(raw, "config", ("schema_version", "experiment"), _ALL_TOP_KEYS)
    version = _integer(raw["schema_version"], "config.schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigurationError(
            f"config.schema_version {version} not recognized (expected {SCHEMA_VERSION})"
        )
    kind = _string(raw["experiment"], "config.experiment", choices=set(_EXPERIMENTS))

    if kind == "diagnostics":
        diag_raw = raw.get("diagnostics")
        if not isinstance(diag_raw, dict) or "kind" not in diag_raw:
            raise ConfigurationError(
                "experiment 'diagnostics' requires config.diagnostics with a 'kind'"
            )
        diag_kind = _string(diag_raw["kind"], "config.diagnostics.kind", choices=set(_DIAGNOSTICS))
        relevant = _DIAG_RELEVANT[diag_kind] + ("diagnostics",)
        required = _DIAG_REQUIRED[diag_kind] + ("diagnostics",)
        label = f"experiment 'diagnostics' (kind '{diag_kind}')"
    else:
        diag_kind = None
        relevant = _RELEVANT[kind]
        required = _REQUIRED[kind]
        label = f"experiment '{kind}'"
    for key in raw:
        if key in ("schema_version", "experiment", "master_seed"):
            continue
        if key not in relevant:
            raise ConfigurationError(f"key '{key}' does not apply to {label}")
    for key in required:
        if key not in raw or raw[key] is None:
            raise ConfigurationError(f"{label} requires top-level key '{key}'")

    out = {
        "schema_version": version,
        "experiment": kind,
        "master_seed": _integer(raw.get("master_seed", 0), "config.master_seed"),
    }
    if "field" in relevant:
        field_raw = raw["field"]
        _check_keys(field_raw, "config.field",
                    ("marginal",), ("mixing", "cell_size", "seed", "scale", "dim"))
        fdim = _integer(field_raw.get("dim", 1), "config.field.dim")
        trimmed = {k: v for k, v in field_raw.items() if k != "dim"}
        out["field"] = _parse_field(trimmed, "config.field", fdim)
        out["diagnostics"] = _parse_diagnostics(raw["diagnostics"], diag_kind, out)
        return ExperimentConfig(kind=kind, resolved=out)

    grid_d = _parse_grid(raw["grid"], "config.grid")
    out["grid"] = grid_d
    dim = grid_d["dim"]
    if "alpha" in relevant:
        out["alpha"] = _number(raw["alpha"], "config.alpha")
        if not (0.0 < out["alpha"] < 2.0):
            raise ConfigurationError(f"config.alpha must lie in (0, 2), got {out['alpha']}")
    if "cone" in relevant:
        out["cone"] = _parse_cone(raw.get("cone"), "config.cone", dim)
    if "form" in relevant:
        out["form"] = _parse_form(raw["form"], "config.form", dim)
    if "lambda" in relevant:
        out["lambda"] = _number(raw.get("lambda", 1.0), "config.lambda")
    if "tol" in relevant:
        out["tol"] = _number(raw.get("tol", 1e-9), "config.tol")
    if "seeds" in relevant:
        out["seeds"] = _integer(raw.get("seeds", 10), "config.seeds")
    if "eps_list" in relevant:
        if raw.get("eps_list") is not None:
            eps = _number_list(raw["eps_list"], "config.eps_list")
            if any(b >= a for a, b in zip(eps, eps[1:])):
                raise ConfigurationError("config.eps_list must be strictly decreasing")
            out["eps_list"] = eps
        else:
            out["eps_list"] = None
    if "mu" in relevant:
        out["mu"] = (
            _parse_field(raw["mu"], "config.mu", dim) if raw.get("mu") is not None else None
        )
    if "report_radius" in relevant:
        out["report_radius"] = (
            _number(raw["report_radius"], "config.report_radius")
            if raw.get("report_radius") is not None else None
        )
    if "rhs_radius" in relevant:
        out["rhs_radius"] = (
            _number(raw["rhs_radius"], "config.rhs_radius")
            if raw.get("rhs_radius") is not None else None
        )
        if out["rhs_radius"] is not None and out["rhs_radius"] > grid_d["length"] / 8.0 + 1e-12:
            raise ConfigurationError(
                f"config.rhs_radius {out['rhs_radius']:g} exceeds L/8 = "
                f"{grid_d['length'] / 8:g}; the bump must stay well inside the torus"
            )

    if kind == "sweep":
        cells = _form_cell_sizes(out["form"]) + (
            [out["mu"]["cell_size"]] if out["mu"] else []
        )
        _check_resolution(grid_d, cells, out["eps_list"])
    elif kind == "estimate_constant":
        est = raw["estimate"]
        _check_keys(est, "config.estimate", ("eps",), ("seeds", "test_radii"))
        out["estimate"] = {
            "eps": _number(est["eps"], "config.estimate.eps"),
            "seeds": _integer(est.get("seeds", 20), "config.estimate.seeds"),
            "test_radii": _number_list(
                est.get("test_radii", [grid_d["length"] / 8.0, grid_d["length"] / 16.0]),
                "config.estimate.test_radii",
            ),
        }
        for i, r in enumerate(out["estimate"]["test_radii"]):
            if r > grid_d["length"] / 8.0 + 1e-12:
                raise ConfigurationError(
                    f"config.estimate.test_radii[{i}] {r:g} exceeds L/8 = "
                    f"{grid_d['length'] / 8:g}"
                )
        _check_resolution(grid_d, _form_cell_sizes(out["form"]), [out["estimate"]["eps"]])
    elif kind == "mosco":
        mos = raw.get("mosco") or {}
        _check_keys(mos, "config.mosco", (), ("threshold",))
        out["mosco"] = {
            "threshold": _number(mos["threshold"], "config.mosco.threshold")
            if mos.get("threshold") is not None else None
        }
        _check_resolution(grid_d, _form_cell_sizes(out["form"]), out["eps_list"])
    elif kind == "example17":
        ex = raw["example17"]
        _check_keys(ex, "config.example17",
                    ("inv_lambda1",), ("lambda2", "eps", "seeds", "sweep"))
        out["example17"] = {
            "lambda2": _number(ex.get("lambda2", 1.0), "config.example17.lambda2"),
            "inv_lambda1": _parse_marginal(ex["inv_lambda1"], "config.example17.inv_lambda1"),
            "eps": _number(ex.get("eps", 0.0625), "config.example17.eps"),
            "seeds": _integer(ex.get("seeds", 20), "config.example17.seeds"),
            "sweep": _boolean(ex.get("sweep", False), "config.example17.sweep"),
        }
        if out["example17"]["lambda2"] <= 0:
            raise ConfigurationError("config.example17.lambda2 must be positive")
        if out["example17"]["sweep"]:
            ladder = out["eps_list"] or [1.0, 0.5, 0.25, 0.125, 0.0625]
            _check_resolution(grid_d, [1.0], ladder)
    elif kind == "diagnostics":
        out["diagnostics"] = _parse_diagnostics(raw["diagnostics"], diag_kind, out)
    return ExperimentConfig(kind=kind, resolved=out)


def _parse_diagnostics(obj: dict, diag_kind: str, out: dict) -> dict:
    path = "config.diagnostics"
    if diag_kind in ("nash", "cone"):
        _check_keys(obj, path, ("kind",), ())
        return {"kind": diag_kind}
    if diag_kind == "translation":
        _check_keys(obj, path, ("kind",), ("h_multiples", "radius", "eps"))
        parsed = {
            "kind": diag_kind,
            "h_multiples": [
                _integer(v, f"{path}.h_multiples[{i}]")
                for i, v in enumerate(obj.get("h_multiples", [1, 2, 4, 8]))
            ],
            "radius": _number(obj.get("radius", out["grid"]["length"] / 4.0), f"{path}.radius"),
            "eps": _number(obj.get("eps", 1.0), f"{path}.eps"),
        }
        _check_resolution(out["grid"], _form_cell_sizes(out["form"]), [parsed["eps"]])
        return parsed
    if diag_kind == "tails":
        _check_keys(obj, path, ("kind", "eta_list"), ("eps",))
        parsed = {
            "kind": diag_kind,
            "eta_list": _number_list(obj["eta_list"], f"{path}.eta_list"),
            "eps": _number(obj.get("eps", 1.0), f"{path}.eps"),
        }
        _check_resolution(out["grid"], _form_cell_sizes(out["form"]), [parsed["eps"]])
        return parsed
    if diag_kind == "moments":
        _check_keys(obj, path, ("kind", "eps_list"), ("seeds", "radius"))
        return {
            "kind": diag_kind,
            "eps_list": _number_list(obj["eps_list"], f"{path}.eps_list"),
            "seeds": _integer(obj.get("seeds", 5), f"{path}.seeds"),
            "radius": _number(obj.get("radius", out["grid"]["length"] / 4.0), f"{path}.radius"),
        }
    if diag_kind == "birkhoff":
        _check_keys(obj, path, ("kind", "eps"), ("region", "n_seeds"))
        fdim = out["field"]["dim"]
        region = obj.get("region", [[0.0] * fdim, [1.0] * fdim])
        if not isinstance(region, list) or len(region) != 2:
            raise ConfigurationError(f"{path}.region must be a [lo, hi] pair of corner arrays")
        lo = _number_list(region[0], f"{path}.region[0]")
        hi = _number_list(region[1], f"{path}.region[1]")
        if len(lo) != fdim or len(hi) != fdim:
            raise ConfigurationError(f"{path}.region corners must have {fdim} entries")
        return {
            "kind": diag_kind,
            "eps": _number(obj["eps"], f"{path}.eps"),
            "region": [lo, hi],
            "n_seeds": _integer(obj.get("n_seeds", 20), f"{path}.n_seeds"),
        }
    if diag_kind == "maximal":
        _check_keys(obj, path, ("kind",), ("eps_grid", "r0", "n_seeds"))
        return {
            "kind": diag_kind,
            "eps_grid": _number_list(
                obj.get("eps_grid", [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625]),
                f"{path}.eps_grid",
            ),
            "r0": _number(obj.get("r0", 1.0), f"{path}.r0"),
            "n_seeds": _integer(obj.get("n_seeds", 200), f"{path}.n_seeds"),
        }
    # covariance
    _check_keys(obj, path, ("kind", "z1", "z2", "x"), ("trials", "truncation"))
    return {
        "kind": diag_kind,
        "z1": _number_list(obj["z1"], f"{path}.z1"),
        "z2": _number_list(obj["z2"], f"{path}.z2"),
        "x": _number_list(obj["x"], f"{path}.x"),
        "trials": _integer(obj.get("trials", 1000), f"{path}.trials"),
        "truncation": _number(obj.get("truncation", 1e3), f"{path}.truncation"),
    }


# ---------------------------------------------------------------------------
# experiment execution


def _sweep_config(resolved: dict) -> H.SweepConfig:
    grid = _build_grid(resolved["grid"])
    rhs = None
    if resolved.get("rhs_radius") is not None:
        rhs = evaluate(grid, bump(grid, resolved["rhs_radius"]))
    return H.SweepConfig(
        grid=grid,
        form=_build_form(resolved["form"]),
        cone=_build_cone(resolved["cone"]),
        params=KernelParams(alpha=resolved["alpha"], dim=grid.dim),
        eps_list=tuple(resolved["eps_list"]),
        seeds=resolved["seeds"],
        lam=resolved["lambda"],
        mu_field=_build_field(resolved["mu"]) if resolved["mu"] else None,
        report_radius=resolved["report_radius"],
        rhs=rhs,
        master_seed=resolved["master_seed"],
        tol=resolved["tol"],
    )


def _quartile_table(report: H.ConvergenceReport) -> dict:
    table = {}
    for metric in H.METRICS:
        q25, q75 = [], []
        for eps in report.eps_list:
            vals = [getattr(c, metric) for c in report.cells if c.eps == eps]
            q25.append(float(np.percentile(vals, 25)) if vals else math.nan)
            q75.append(float(np.percentile(vals, 75)) if vals else math.nan)
        table[metric] = {
            "eps": list(report.eps_list),
            "median": list(report.medians[metric]),
            "q25": q25,
            "q75": q75,
        }
    return table


def _sweep_results(report: H.ConvergenceReport) -> tuple[dict, list]:
    results = {
        "metrics": _quartile_table(report),
        "cells": [
            {"eps": c.eps, "seed": c.seed_index, **{m: getattr(c, m) for m in H.METRICS}}
            for c in report.cells
        ],
        "failures": [
            {"eps": e, "seed": s, "error": msg} for e, s, msg in report.failures
        ],
    }
    med = report.medians["err_l2_mu"]
    checks = [
        {
            "name": "no_cell_failures",
            "passed": not report.failures,
            "detail": f"{len(report.failures)} failed cells",
        }
    ]
    if len(med) > 1:
        # an exactly-solved case (constant coefficients) sits at the solver
        # floor from the start; that counts as converged, not as a failure
        at_floor = max(med) <= 1e-10
        checks.append(
            {
                "name": "err_l2_mu_end_to_end_decrease",
                "passed": med[-1] < med[0] or at_floor,
                "detail": f"median {med[0]:.6g} -> {med[-1]:.6g}",
            }
        )
    return results, checks


def _run_sweep_experiment(resolved: dict, threads: int) -> tuple[dict, list]:
    report = H.run_sweep(_sweep_config(resolved), threads=threads)
    results, checks = _sweep_results(report)
    if resolved["form"]["kind"] == "constant":
        worst = max(max(report.medians[m]) for m in H.METRICS)
        checks.append(
            {
                "name": "constant_form_environment_independence",
                "passed": worst <= 1e-6,
                "detail": f"max metric median {worst:.3g}",
            }
        )
    return {"sweep": results}, checks


def _run_estimate_experiment(resolved: dict) -> tuple[dict, list]:
    grid = _build_grid(resolved["grid"])
    fns = [evaluate(grid, bump(grid, r)) for r in resolved["estimate"]["test_radii"]]
    est = H.estimate_effective_constant(
        grid,
        _build_form(resolved["form"]),
        _build_cone(resolved["cone"]),
        KernelParams(alpha=resolved["alpha"], dim=grid.dim),
        eps=resolved["estimate"]["eps"],
        seeds=resolved["estimate"]["seeds"],
        test_fns=fns,
        master_seed=resolved["master_seed"],
    )
    results = {
        "estimate": {
            "c_hat": est.c_hat,
            "iqr": est.iqr,
            "n_samples": len(est.samples),
            "samples": list(est.samples),
            "skipped_fns": list(est.skipped_fns),
        }
    }
    checks = [
        {
            "name": "estimate_has_samples",
            "passed": len(est.samples) > 0,
            "detail": f"{len(est.samples)} energy ratios",
        }
    ]
    return results, checks


def _run_mosco_experiment(resolved: dict) -> tuple[dict, list]:
    grid = _build_grid(resolved["grid"])
    report = H.mosco_form_check(
        grid,
        _build_form(resolved["form"]),
        _build_cone(resolved["cone"]),
        KernelParams(alpha=resolved["alpha"], dim=grid.dim),
        resolved["eps_list"],
        resolved["seeds"],
        test_function_suite(grid),
        threshold=resolved["mosco"]["threshold"],
        master_seed=resolved["master_seed"],
    )
    results = {
        "mosco": {
            "eps": list(report.eps_list),
            "median": list(report.medians),
            "iqr": list(report.iqrs),
            "threshold": report.threshold,
        }
    }
    # exact coefficients keep every median at the assembly floor; that is
    # convergence already achieved, not a stalled sequence
    at_floor = max(report.medians) <= 1e-10
    checks = [
        {"name": "mosco_medians_decreasing", "passed": report.decreasing or at_floor,
         "detail": f"medians {[float(f'{v:.6g}') for v in report.medians]}"},
        {"name": "mosco_final_below_threshold", "passed": report.final_below_threshold,
         "detail": f"final {report.medians[-1]:.6g} vs threshold {report.threshold:.6g}"},
    ]
    return results, checks


def _run_example17(resolved: dict, threads: int) -> tuple[dict, list]:
    ex = resolved["example17"]
    grid = _build_grid(resolved["grid"])
    c2 = ex["lambda2"]
    inv_marginal = _build_marginal(ex["inv_lambda1"])
    e_inv = env.mean_value(inv_marginal)
    z_mu = c2 * e_inv
    c0 = c2 * c2 / z_mu
    form = ConstantForm(c2 * c2 / z_mu)
    cone = _build_cone(resolved["cone"])
    params = KernelParams(alpha=resolved["alpha"], dim=grid.dim)
    fns = [
        evaluate(grid, bump(grid)),
        evaluate(grid, bump(grid, grid.length / 16.0)),
    ]
    est = H.estimate_effective_constant(
        grid, form, cone, params, eps=ex["eps"], seeds=ex["seeds"],
        test_fns=fns, master_seed=resolved["master_seed"],
    )
    results = {
        "example17": {
            "c0_target": c0,
            "z_mu": z_mu,
            "c_hat": est.c_hat,
            "iqr": est.iqr,
            "n_samples": len(est.samples),
        }
    }
    checks = [
        {
            "name": "example17_constant_within_tolerance",
            "passed": abs(est.c_hat - c0) <= 0.1,
            "detail": f"c_hat {est.c_hat:.6g} vs target {c0:.6g}",
        }
    ]
    if ex["sweep"]:
        mu_field = env.RandomField(
            dim=grid.dim,
            marginal=inv_marginal,
            mixing=env.MixingSpec(),
            cell_size=1.0,
            seed=0,
            scale=c2 / z_mu,
        )
        eps_list = tuple(resolved["eps_list"] or [1.0, 0.5, 0.25, 0.125, 0.0625])
        config = H.SweepConfig(
            grid=grid, form=form, cone=cone, params=params, eps_list=eps_list,
            seeds=resolved["seeds"], lam=resolved["lambda"], mu_field=mu_field,
            master_seed=resolved["master_seed"], tol=resolved["tol"],
        )
        report = H.run_sweep(config, threads=threads)
        sweep_results, sweep_checks = _sweep_results(report)
        results["sweep"] = sweep_results
        pairing = report.medians["pairing_err"]
        norm = report.medians["norm_err"]
        if len(eps_list) > 1:
            sweep_checks.append(
                {
                    "name": "measure_metrics_end_to_end_decrease",
                    "passed": pairing[-1] < pairing[0] and norm[-1] < norm[0],
                    "detail": f"pairing {pairing[0]:.4g}->{pairing[-1]:.4g}, "
                    f"norm {norm[0]:.4g}->{norm[-1]:.4g}",
                }
            )
        checks.extend(sweep_checks)
    return results, checks


def _run_diagnostics(resolved: dict) -> tuple[dict, list]:
    diag = resolved["diagnostics"]
    kind = diag["kind"]
    grid = _build_grid(resolved["grid"]) if "grid" in resolved else None
    params = (
        KernelParams(alpha=resolved["alpha"], dim=grid.dim)
        if "alpha" in resolved else None
    )
    cone = _build_cone(resolved["cone"]) if "cone" in resolved else None
    if kind == "nash":
        rep = nash_check(grid, cone, params, test_function_suite(grid))
        results = {"nash": {"ratios": list(rep.ratios), "max_ratio": rep.max_ratio,
                            "skipped": list(rep.skipped)}}
        checks = [{"name": "nash_ratios_finite", "passed": rep.passed,
                   "detail": f"max ratio {rep.max_ratio:.6g}"}]
    elif kind == "cone":
        rep = cone_comparability_check(grid, cone, params, test_function_suite(grid))
        results = {"cone": {"ratios": list(rep.ratios), "max_ratio": rep.max_ratio,
                            "skipped": list(rep.skipped),
                            "violations": list(rep.violations)}}
        checks = [{"name": "cone_comparability", "passed": rep.passed,
                   "detail": f"max ratio {rep.max_ratio:.6g}"}]
    elif kind == "translation":
        form = assemble_form(grid, _build_form(resolved["form"]), cone, params, diag["eps"])
        rhs = evaluate(grid, bump(grid, resolved.get("rhs_radius")))
        sol = solve_resolvent(
            ResolventProblem(form, measure_weights(grid, None), resolved["lambda"], rhs),
            tol=resolved["tol"],
        )
        steps = [m * grid.h for m in diag["h_multiples"]]
        rep = translation_estimate_check(form, sol.u, steps, diag["radius"])
        results = {"translation": {
            "h_steps": list(rep.h_steps),
            "max_ratio": rep.max_ratio,
            "fitted_exponents": list(rep.fitted_exponents),
            "min_exponent": rep.min_exponent,
        }}
        target = params.alpha / 2.0 - 0.2
        checks = [{"name": "translation_exponent",
                   "passed": (not rep.violation) and rep.min_exponent >= target,
                   "detail": f"min exponent {rep.min_exponent:.4g} vs {target:.4g}"}]
    elif kind == "tails":
        rep = H.truncation_tail_report(
            grid, _build_form(resolved["form"]), cone, params, diag["eps"],
            evaluate(grid, bump(grid, resolved.get("rhs_radius"))), diag["eta_list"],
        )
        results = {"tails": {
            "eta": list(rep.eta_list),
            "small": list(rep.small_energies),
            "large": list(rep.large_energies),
            "small_slope": rep.small_slope,
            "large_slope": rep.large_slope,
        }}
        checks = [
            {"name": "tails_decreasing",
             "passed": rep.small_decreasing and rep.large_decreasing,
             "detail": "both truncation tails shrink as eta falls"},
            {"name": "small_jump_exponent", "passed": rep.small_slope_ok,
             "detail": f"slope {rep.small_slope:.4g} vs 2-alpha = {2 - params.alpha:.4g}"},
            {"name": "large_jump_exponent", "passed": rep.large_slope_ok,
             "detail": f"slope {rep.large_slope:.4g} vs alpha/2 = {params.alpha / 2:.4g}"},
        ]
    elif kind == "moments":
        rep = H.moment_bound_report(
            grid, _build_form(resolved["form"]), diag["eps_list"], diag["seeds"],
            diag["radius"], master_seed=resolved["master_seed"],
        )
        results = {"moments": {
            "eps": list(rep.eps_list),
            "median": list(rep.medians),
            "max_value": rep.max_value,
            "growth_slope": rep.growth_slope,
            "exponent_p": rep.exponent_p,
        }}
        checks = [{"name": "moment_bound_no_growth", "passed": not rep.flagged,
                   "detail": f"growth slope {rep.growth_slope:.4g}"}]
    elif kind == "birkhoff":
        field = _build_field(resolved["field"])
        study = env.birkhoff_study(
            field, diag["eps"],
            (np.array(diag["region"][0]), np.array(diag["region"][1])),
            n_seeds=diag["n_seeds"],
        )
        results = {"birkhoff": {
            "eps": study.eps,
            "exact_mean": study.exact_mean,
            "median_average": study.median_average,
            "median_abs_rel_error": study.median_abs_rel_error,
        }}
        vol = float(np.prod(np.array(diag["region"][1]) - np.array(diag["region"][0])))
        target = study.exact_mean * vol
        rel = abs(study.median_average - target) / abs(target)
        checks = [{"name": "birkhoff_within_5_percent", "passed": rel <= 0.05,
                   "detail": f"median {study.median_average:.6g} vs {target:.6g}"}]
    elif kind == "maximal":
        field = _build_field(resolved["field"])
        rep = env.maximal_tail_check(
            field, tuple(diag["eps_grid"]), r0=diag["r0"], n_seeds=diag["n_seeds"]
        )
        results = {"maximal": {
            "eps_grid": list(rep.eps_grid),
            "levels": list(rep.levels),
            "frequencies": list(rep.frequencies),
            "fitted_c": rep.fitted_c,
        }}
        checks = [{"name": "maximal_markov_scaling", "passed": rep.markov_bound_ok,
                   "detail": f"exceedance frequencies "
                             f"{[float(f'{v:.4g}') for v in rep.frequencies]}"}]
    else:  # covariance
        field = _build_field(resolved["field"])
        entry = env.empirical_covariance(
            field,
            np.array(diag["z1"]), np.array(diag["z2"]), np.array(diag["x"]),
            trials=diag["trials"], truncation=diag["truncation"],
        )
        results = {"covariance": {
            "lag": entry.lag,
            "estimate": entry.estimate,
            "signed": entry.signed,
            "standard_error": entry.standard_error,
            "trials": entry.trials,
        }}
        if field.mixing.kind == "iid_cells" and entry.lag > field.cell_size:
            passed = entry.estimate <= 3.0 * entry.standard_error
            detail = f"|cov| {entry.estimate:.4g} vs 3 se {3 * entry.standard_error:.4g}"
        else:
            passed = True
            detail = "no zero-covariance gate at this lag or mixing; value reported"
        checks = [{"name": "covariance_decay", "passed": passed, "detail": detail}]
    return results, checks


def run_experiment(config: ExperimentConfig, threads: int = 1) -> dict:
    """Execute the experiment and assemble the full report dictionary."""
    start = time.perf_counter()
    resolved = config.resolved
    if config.kind == "sweep":
        results, checks = _run_sweep_experiment(resolved, threads)
    elif config.kind == "estimate_constant":
        results, checks = _run_estimate_experiment(resolved)
    elif config.kind == "mosco":
        results, checks = _run_mosco_experiment(resolved)
    elif config.kind == "example17":
        results, checks = _run_example17(resolved, threads)
    else:
        results, checks = _run_diagnostics(resolved)
    return {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "experiment": config.kind,
        "config": resolved,
        "results": results,
        "checks": checks,
        "provenance": {
            "master_seed": resolved["master_seed"],
            "wall_time": time.perf_counter() - start,
        },
    }


# ---------------------------------------------------------------------------
# emission


def write_report(report: dict, out_dir: str, deterministic: bool = False) -> str:
    os.makedirs(out_dir, exist_ok=True)
    if deterministic:
        report = dict(report)
        report["provenance"] = dict(report["provenance"], wall_time=0.0)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    return path


def write_csv(report: dict, out_dir: str) -> str:
    """One row per (eps, seed, metric); header-only when no sweep cells exist."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "cells.csv")
    cells = report["results"].get("sweep", {}).get("cells", [])
    with open(path, "w") as fh:
        fh.write("eps,seed,metric,value\n")
        for cell in cells:
            for metric in H.METRICS:
                fh.write(f"{cell['eps']!r},{cell['seed']},{metric},{cell[metric]!r}\n")
    return path


def emit_plotdata(report: dict, out_dir: str) -> list[str]:
    """Per-metric whitespace-delimited files: eps, median, q25, q75."""
    os.makedirs(out_dir, exist_ok=True)
    metrics = dict(report["results"].get("sweep", {}).get("metrics", {}))
    if "mosco" in report["results"]:
        m = report["results"]["mosco"]
        metrics["form_abs_err"] = {
            "eps": m["eps"],
            "median": m["median"],
            "q25": [med - iqr / 2 for med, iqr in zip(m["median"], m["iqr"])],
            "q75": [med + iqr / 2 for med, iqr in zip(m["median"], m["iqr"])],
        }
    paths = []
    for name in sorted(metrics):
        path = os.path.join(out_dir, f"{name}.dat")
        rows = sorted(
            zip(metrics[name]["eps"], metrics[name]["median"],
                metrics[name]["q25"], metrics[name]["q75"]),
            key=lambda r: -r[0],
        )
        with open(path, "w") as fh:
            fh.write("# eps median q25 q75\n")
            for eps, med, q25, q75 in rows:
                fh.write(f"{eps!r} {med!r} {q25!r} {q75!r}\n")
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stablehom",
        description="Homogenization studies for stable-like jump forms in random media.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory (or STABLEHOM_OUT)")
    p_run.add_argument("--threads", type=int, default=None,
                       help="worker threads for sweep cells (or STABLEHOM_THREADS)")
    p_run.add_argument("--deterministic", action="store_true",
                       help="single-threaded, wall times zeroed: byte-identical reports")
    p_val = sub.add_parser("validate", help="validate a config and print the resolved echo")
    p_val.add_argument("config")
    p_plot = sub.add_parser("plotdata", help="emit per-metric plot files from a report")
    p_plot.add_argument("report")
    p_plot.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    try:
        if args.command == "validate":
            with open(args.config) as fh:
                config = parse_config(fh.read())
            json.dump(config.resolved, sys.stdout, indent=1)
            sys.stdout.write("\n")
            return 0
        if args.command == "plotdata":
            with open(args.report) as fh:
                report = json.load(fh)
            out_dir = args.out or os.environ.get("STABLEHOM_OUT", ".")
            for path in emit_plotdata(report, out_dir):
                print(path)
            return 0
        with open(args.config) as fh:
            config = parse_config(fh.read())
        out_dir = args.out or os.environ.get("STABLEHOM_OUT", ".")
        if args.deterministic:
            threads = 1
        elif args.threads is not None:
            threads = args.threads
        else:
            threads = int(os.environ.get("STABLEHOM_THREADS", "1"))
        report = run_experiment(config, threads=threads)
        write_report(report, out_dir, deterministic=args.deterministic)
        write_csv(report, out_dir)
        failed = [c for c in report["checks"] if not c["passed"]]
        for check in report["checks"]:
            status = "ok" if check["passed"] else "FAIL"
            print(f"[{status}] {check['name']}: {check['detail']}")
        print(os.path.join(out_dir, "report.json"))
        return 1 if failed else 0
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
