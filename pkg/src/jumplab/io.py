"""Experiment configs, headline experiment runners, and report bundles.

A run is a pure function of its resolved config (given the seed): reports are
serialized with sorted keys and repr-exact floats, and timestamps live in a
separate meta.json, so re-running with the same config reproduces report.json
byte for byte.  Bundles are written to a temp directory and renamed into
place atomically.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
import logging
import math
import os
import shutil
import time
from dataclasses import dataclass, field

import numpy as np

from . import conditions as cond
from . import harnack as har
from . import montecarlo as mc
from .errors import ConfigError
from .models import (
    KILLED,
    LadderKernel,
    LatticeModel,
    PolynomialKernel,
    REFLECTED,
    SuppressedPairKernel,
    model_from_dict,
    truncate,
)
from .semigroup import expected_exit_time, heat_kernel

log = logging.getLogger("jumplab")

EXPERIMENTS = ("conditions-sweep", "phi", "ehi", "heat", "exit-time",
               "poincare", "cex-suppressed", "cex-ladder")


@dataclass
class ExperimentConfig:
    experiment: str
    model: dict | None = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str | None = None
    assert_thresholds: bool = False

    def resolved(self) -> dict:
        return {"experiment": self.experiment, "model": self.model,
                "params": jsonable(self.params), "seed": self.seed,
                "out_dir": self.out_dir,
                "assert_thresholds": self.assert_thresholds}


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if "experiment" not in raw:
        raise ConfigError(f"{path}: missing required field 'experiment'")
    exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"{path}: field 'experiment': unknown value {exp!r}; "
                          f"expected one of {EXPERIMENTS}")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for k in raw:
        if k not in known:
            raise ConfigError(f"{path}: unknown field {k!r}")
    return ExperimentConfig(**raw)


def jsonable(v):
    """Deterministic JSON-safe conversion (tuples to lists, inf to 'inf')."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
    return v


def write_bundle(out_dir: str, config: dict, report: dict,
                 csvs: dict | None = None, meta: dict | None = None):
    """Atomically write config.resolved, report.json, meta.json, and CSVs."""
    tmp = out_dir.rstrip("/") + f".tmp-{os.getpid()}"
    os.makedirs(tmp, exist_ok=True)
    with open(os.path.join(tmp, "config.resolved"), "w") as f:
        json.dump(jsonable(config), f, sort_keys=True, indent=2)
        f.write("\n")
    with open(os.path.join(tmp, "report.json"), "w") as f:
        json.dump(jsonable(report), f, sort_keys=True, indent=2)
        f.write("\n")
    meta = dict(meta or {})
    meta["written_at"] = datetime.datetime.now(
        datetime.timezone.utc).isoformat()
    with open(os.path.join(tmp, "meta.json"), "w") as f:
        json.dump(jsonable(meta), f, sort_keys=True, indent=2)
        f.write("\n")
    for name, rows in (csvs or {}).items():
        with open(os.path.join(tmp, name + ".csv"), "w") as f:
            if rows:
                keys = list(rows[0].keys())
                f.write(",".join(keys) + "\n")
                for r in rows:
                    f.write(",".join(
                        repr(r[k]) if isinstance(r[k], float) else str(r[k])
                        for k in keys) + "\n")
    if os.path.exists(out_dir):
        shutil.rmtree(out_dir)
    os.replace(tmp, out_dir)


def _warn_alpha(alpha: float):
    if not (0.0 < alpha < 2.0):
        log.warning("alpha=%s lies outside (0,2); polynomial-bound sweeps are "
                    "outside their usual scope but the computation proceeds",
                    alpha)


def _assertion(name, value, threshold, ok) -> dict:
    return {"name": name, "value": jsonable(value),
            "threshold": jsonable(threshold), "ok": bool(ok)}


# ---------------------------------------------------------------------------
# headline experiments
# ---------------------------------------------------------------------------

def run_cex_suppressed(config: ExperimentConfig):
    """Suppressed-pair experiment: one deleted jump kills the lower kernel
    bound while the Harnack and Poincare constants barely move."""
    p = config.params
    d = int(p.get("d", 1))
    alpha = float(p.get("alpha", 1.0))
    gaps = [int(r) for r in p.get("radii", (8, 16))]
    t_probe = float(p.get("t_probe", 1e-3))
    _warn_alpha(alpha)
    report = {"experiment": "cex-suppressed", "per_gap": {}, "assertions": []}
    csvs = {}
    for R in gaps:
        y0 = tuple(R if i == 0 else 0 for i in range(d))
        origin = (0,) * d
        base = LatticeModel(d=d, kernel=PolynomialKernel(alpha))
        supp = LatticeModel(d=d, kernel=SuppressedPairKernel(
            base=PolynomialKernel(alpha), x0=origin, y0=y0))
        entry = {"gap": R, "y0": list(y0)}
        pairs = [(origin, y0)] + cond.default_pair_grid(base)
        jb_base = cond.check_jump_bounds(base, alpha, pairs)
        jb_supp = cond.check_jump_bounds(supp, alpha, pairs)
        entry["C_LJ"] = {"base": jb_base.constants["C_LJ"],
                         "suppressed": jb_supp.constants["C_LJ"],
                         "witness": jb_supp.witnesses["C_LJ"]}
        report["assertions"].append(_assertion(
            f"C_LJ_zero_R{R}", jb_supp.constants["C_LJ"], 0.0,
            jb_supp.constants["C_LJ"] == 0.0
            and jb_supp.witnesses["C_LJ"] == (origin, y0)))
        # lower heat-kernel bound collapse at the suppressed pair
        hk_base = cond.check_hkp(base, alpha, [(origin, y0)],
                                 times=[t_probe], r_win=8 * R)
        hk_supp = cond.check_hkp(supp, alpha, [(origin, y0)],
                                 times=[t_probe], r_win=8 * R)
        rb = hk_base.metadata["rows"][0]["ratio"]
        rs = hk_supp.metadata["rows"][0]["ratio"]
        entry["lhkp_ratio"] = {"base": rb, "suppressed": rs,
                               "collapse": rs / rb, "t": t_probe}
        report["assertions"].append(_assertion(
            f"lhkp_collapse_R{R}", rs / rb, 0.01, rs / rb <= 0.01))
        js_base = cond.check_ujs_ljs_js(base, pairs, radii=[1, 2, 4])
        js_supp = cond.check_ujs_ljs_js(supp, pairs, radii=[1, 2, 4])
        entry["ujs"] = {"base": js_base.constants, "suppressed": js_supp.constants}
        pi_base = cond.check_poincare(base, alpha, radii=[R], centers=[origin])
        pi_supp = cond.check_poincare(supp, alpha, radii=[R], centers=[origin])
        pi_ratio = pi_supp.constants["C_Q"] / pi_base.constants["C_Q"]
        pi_cap = 2.0 ** (d + alpha + 1) * float(p.get("pi_margin", 1.25))
        entry["poincare"] = {"base": pi_base.constants["C_Q"],
                             "suppressed": pi_supp.constants["C_Q"],
                             "ratio": pi_ratio, "cap": pi_cap}
        report["assertions"].append(_assertion(
            f"pi_ratio_R{R}", pi_ratio, pi_cap, pi_ratio <= pi_cap))
        box = har.HarnackBox(x0=origin, R=R, alpha=alpha, lam=1.0)
        phi_base = har.phi_constant(base, box)
        phi_supp = har.phi_constant(supp, box)
        phi_ratio = phi_supp.constant / phi_base.constant
        entry["phi"] = {"base": phi_base.constant,
                        "suppressed": phi_supp.constant, "ratio": phi_ratio}
        report["assertions"].append(_assertion(
            f"phi_ratio_R{R}", phi_ratio, 2.0, phi_ratio <= 2.0))
        ehi_base = har.ehi_constant(base, origin, R)
        ehi_supp = har.ehi_constant(supp, origin, R)
        ehi_ratio = ehi_supp.constant / ehi_base.constant
        entry["ehi"] = {"base": ehi_base.constant,
                        "suppressed": ehi_supp.constant, "ratio": ehi_ratio}
        report["assertions"].append(_assertion(
            f"ehi_ratio_R{R}", ehi_ratio, 2.0, ehi_ratio <= 2.0))
        report["per_gap"][str(R)] = entry
        csvs[f"jump_bounds_R{R}"] = jb_supp.metadata["rows"]
    report["model_digest"] = {"base": base.digest(), "suppressed": supp.digest()}
    return report, csvs


def run_cex_ladder(config: ExperimentConfig):
    """Ladder experiment: log-weight atoms push the upper jump constant up
    with scale while exit times and hitting probabilities stay uniform."""
    p = config.params
    alpha = float(p.get("alpha", 1.5))
    if not (1.0 < alpha < 2.0):
        raise ConfigError(f"cex-ladder requires alpha in (1,2), got {alpha}")
    ranges = tuple(int(r) for r in p.get("ranges", (16, 64, 256)))
    n_hit = int(p.get("n_hit", 2000))
    n_sup = int(p.get("n_sup", 20_000))
    model = LatticeModel(d=1, kernel=LadderKernel(alpha=alpha, ranges=ranges))
    report = {"experiment": "cex-ladder", "alpha": alpha,
              "ranges": list(ranges), "assertions": []}
    csvs = {}
    # upper jump constant probed at each atom scale
    pairs = [((0,), (r,)) for r in ranges]
    jb = cond.check_jump_bounds(model, alpha, pairs)
    cuj = {r: row["ratio"] for r, row in zip(ranges, jb.metadata["rows"])}
    report["C_UJ"] = {str(r): cuj[r] for r in ranges}
    increasing = all(cuj[a] < cuj[b] for a, b in zip(ranges, ranges[1:]))
    growth = cuj[ranges[-1]] / cuj[ranges[0]]
    report["assertions"].append(_assertion(
        "C_UJ_increasing", [cuj[r] for r in ranges], None, increasing))
    report["assertions"].append(_assertion(
        "C_UJ_growth", growth, 1.5, growth >= 1.5))
    csvs["jump_bounds"] = jb.metadata["rows"]
    # exit-time stability across the atom scales
    et = cond.check_exit_time(model, alpha, radii=list(ranges))
    spread = et.constants["c2"] / et.constants["c1"]
    report["exit_time"] = {"c1": et.constants["c1"], "c2": et.constants["c2"],
                           "exponent": et.constants["exponent"],
                           "spread": spread}
    report["assertions"].append(_assertion(
        "exit_time_spread", spread, 2.0, spread <= 2.0))
    csvs["exit_time"] = [r for r in et.metadata["rows"] if r["r"] != "fit"]
    # hitting probability bounded below uniformly in the scale
    margin = float(p.get("hit_margin", 0.1))
    n_streams = int(os.environ.get("JUMPLAB_WORKERS", mc.N_STREAMS))
    sampler = mc.TrajectorySampler(model, seed=config.seed, n_streams=n_streams)
    hits = {}
    for R in ranges:
        rep = mc.hit_before_exit(sampler, (R // 4,), (0,), (0,), R, n_hit)
        hits[str(R)] = {"estimate": rep.estimate, "se": rep.se, "n": rep.n}
        report["assertions"].append(_assertion(
            f"hit_lower_R{R}", rep.estimate - 3 * rep.se, margin,
            rep.estimate - 3 * rep.se >= margin))
    report["hit_before_exit"] = hits
    # running-sup bounds for the pure single-range component
    sups = {}
    for R in ranges:
        rep = mc.sample_position_sup(R, alpha, T=float(R) ** alpha / 4,
                                     n=n_sup, seed=config.seed + R)
        sups[str(R)] = rep.to_dict()
        report["assertions"].append(_assertion(
            f"doob_R{R}", rep.extra["E_Y2"], rep.extra["doob_bound"],
            rep.extra["doob_ok"]))
        report["assertions"].append(_assertion(
            f"cheb_R{R}", rep.extra["P_ge_lam"], rep.extra["cheb_bound"],
            rep.extra["cheb_ok"]))
    report["position_sup"] = sups
    report["model_digest"] = model.digest()
    return report, csvs


# ---------------------------------------------------------------------------
# generic single-checker experiments
# ---------------------------------------------------------------------------

def _config_model(config: ExperimentConfig) -> LatticeModel:
    if config.model is not None:
        return model_from_dict(config.model)
    p = config.params
    alpha = float(p.get("alpha", 1.0))
    return LatticeModel(d=int(p.get("d", 1)),
                        metric=p.get("metric", "linf"),
                        kernel=PolynomialKernel(alpha))


def run_generic(config: ExperimentConfig):
    p = config.params
    model = _config_model(config)
    alpha = float(p.get("alpha", 1.0))
    _warn_alpha(alpha)
    origin = (0,) * model.d if model.kind == "lattice" else sorted(model.vertices)[0]
    exp = config.experiment
    csvs = {}
    if exp == "heat":
        t = float(p.get("t", 1.0))
        r_win = int(p.get("r_win", 16))
        mode = p.get("mode", "killed")
        fm = truncate(model, origin, r_win,
                      KILLED if mode == "killed" else REFLECTED)
        hk = heat_kernel(fm, origin, t)
        rows = [{"y": v, "p": float(val)}
                for v, val in zip(fm.window, hk.values)]
        csvs["heat"] = rows
        report = {"experiment": "heat", "t": t, "r_win": r_win, "mode": mode,
                  "mass": hk.mass(), "eps_poisson": hk.eps_poisson,
                  "values": {",".join(map(str, v)): float(val)
                             for v, val in zip(fm.window, hk.values)}}
    elif exp == "exit-time":
        radii = [int(r) for r in p.get("radii", (8, 16, 32))]
        rep = cond.check_exit_time(model, alpha, radii, centers=[origin])
        report = {"experiment": "exit-time", **rep.to_dict()}
        csvs["exit_time"] = [r for r in rep.metadata["rows"] if r["r"] != "fit"]
    elif exp == "poincare":
        radii = [int(r) for r in p.get("radii", (4, 8, 16))]
        rep = cond.check_poincare(model, alpha, radii, centers=[origin])
        report = {"experiment": "poincare", **rep.to_dict()}
        csvs["poincare"] = rep.metadata["rows"]
    elif exp == "phi":
        R = int(p.get("R", 8))
        lam = float(p.get("lam", 1.0))
        box = har.HarnackBox(x0=origin, R=R, alpha=alpha, lam=lam)
        rep = har.phi_constant(model, box)
        report = {"experiment": "phi", **rep.to_dict()}
    elif exp == "ehi":
        R = int(p.get("R", 8))
        rep = har.ehi_constant(model, origin, R)
        report = {"experiment": "ehi", **rep.to_dict()}
    elif exp == "conditions-sweep":
        radii = [int(r) for r in p.get("radii", (4, 8, 16))]
        pairs = cond.default_pair_grid(model)
        out = {}
        for rep in (cond.check_vd(model, radii),
                    cond.check_jump_bounds(model, alpha, pairs),
                    cond.check_ujs_ljs_js(model, pairs, radii=[1, 2, 4]),
                    cond.check_poincare(model, alpha, radii, centers=[origin]),
                    cond.check_exit_time(model, alpha, radii, centers=[origin]),
                    cond.check_boundary_flux(model, radii, centers=[origin],
                                             alpha=alpha)):
            out[rep.condition] = rep.to_dict()
            csvs[rep.condition] = rep.metadata.get("rows", [])
        report = {"experiment": "conditions-sweep", "conditions": out}
    else:
        raise ConfigError(f"unknown experiment {exp!r}")
    report["model_digest"] = model.digest()
    # rows may contain tuples; normalize for CSV writing
    csvs = {k: [{kk: (",".join(map(str, vv)) if isinstance(vv, tuple) else vv)
                 for kk, vv in row.items()} for row in rows]
            for k, rows in csvs.items()}
    return report, csvs


def run_experiment(config: ExperimentConfig):
    """Dispatch, write the bundle if configured, and collect threshold failures."""
    t0 = time.monotonic()
    if config.experiment == "cex-suppressed":
        report, csvs = run_cex_suppressed(config)
    elif config.experiment == "cex-ladder":
        report, csvs = run_cex_ladder(config)
    else:
        report, csvs = run_generic(config)
    failures = [a for a in report.get("assertions", []) if not a["ok"]]
    if config.out_dir:
        write_bundle(config.out_dir, config.resolved(), report, csvs,
                     meta={"duration_s": time.monotonic() - t0})
    return report, failures
