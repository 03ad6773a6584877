"""Experiment dispatch: a validated configuration in, an ``ExperimentRecord`` out."""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import diagrams, error_terms, gmc, moments2, polymer
from ..errors import SchemaError
from ..kernels import QuadratureSpec, j_theta_with_error, time_grid
from .bands import beta_bands
from .clt import synthetic_clt
from .config import RunConfig, parse_config
from .records import ExperimentRecord, Table, content_hash, persist

__all__ = ["RUNNERS", "run_experiment", "run_many"]


def _jtheta(cfg: RunConfig):
    spec = QuadratureSpec(rel_tol=cfg.tol)
    table = Table(["theta", "t", "j", "stderr"])
    for th in cfg.params["theta"]:
        for t in cfg.params["t"]:
            j, err = j_theta_with_error(th, t, spec)
            table.rows.append((th, t, j, err))
    return {"count": len(table.rows)}, {"table": table}


def _moment2(cfg: RunConfig):
    p = cfg.params
    spec = QuadratureSpec(rel_tol=max(cfg.tol, 1e-12))
    table = Table(["quantity", "theta", "tau", "T", "r", "value"])
    for tau in p["tau"]:
        if p["quantity"] == "w_block":
            q = moments2.BlockQuery(p["theta"], tau, p["T"], spec=spec)
            table.rows.append(("w_block", p["theta"], tau, p["T"], None, moments2.w_block_second_moment(q)))
        else:
            for r in p["r"]:
                q = moments2.BlockQuery(p["theta"], tau, p["T"], r, spec=spec)
                table.rows.append(("z_block", p["theta"], tau, p["T"], r, moments2.z_block_smoothed_second_moment(q)))
    return {"count": len(table.rows)}, {"table": table}


def _diagrams(cfg: RunConfig):
    p = cfg.params
    test = diagrams.GaussianTest.isotropic(p["n"], p["variance"])
    spec = QuadratureSpec(rel_tol=1e-3, seed=cfg.seed)
    tm = diagrams.moments_truncated(
        p["theta"], p["n"], p["t"], test, p["max_len"], spec, centered=p["centered"], n_samples=p["samples"]
    )
    table = Table(["diagram", "length", "value", "stderr", "method"])
    for c in tm.series:
        table.rows.append((str(c.diagram), len(c.diagram), c.value, c.stderr, c.method))
    outputs = {
        "heat_term": tm.heat_term,
        "partial_sums": tm.partial_sums,
        "stderr": tm.stderr,
        "converging": tm.converging,
    }
    return outputs, {"table": table}


def _errterms(cfg: RunConfig):
    p = cfg.params
    grid = time_grid(p["epsilon"], p["b"], p["ell"])
    I = error_terms.IntervalSpec(grid, p["m"], p["n"], p["r"])
    res = error_terms.Resolution(p["K_u"], p["h"])
    table = Table(["omega", "value"])
    total = 0.0
    for om in error_terms.omega_subsets(I):
        v = error_terms.b_omega(p["theta"], I, om, res)
        total += v
        table.rows.append((" ".join(map(str, sorted(om))), v))
    outputs = {"N": grid.N, "b_sum": total}
    if p["direct"]:
        outputs["direct"] = error_terms.dz_second_moment_direct(p["theta"], I, res)
        outputs["relative_difference"] = abs(outputs["direct"] - total) / abs(outputs["direct"])
    return outputs, {"table": table}


def _decouple(cfg: RunConfig):
    p = cfg.params
    if p["M"] - p["ell"] < 1:
        raise SchemaError("M - ell must be at least 1", "params.ell")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    table = Table(["chain", "lhs", "rhs", "relative_error"])
    worst = 0.0
    for k in range(p["chains"]):
        lhs, rhs, _ = polymer.decoupling_expand(polymer.random_chain(rng, p["S"], p["M"]), p["ell"])
        rel = abs(lhs - rhs) / abs(lhs)
        worst = max(worst, rel)
        table.rows.append((k, lhs, rhs, rel))
    return {"max_relative_error": worst}, {"table": table}


def _polymer(cfg: RunConfig):
    p = cfg.params
    pc = polymer.PolymerConfig(
        horizon=p["horizon"], theta_lattice=p["theta_lattice"], seed=cfg.seed, averaging_scale=p["averaging_scale"]
    )
    grid = polymer.lattice_grid(pc, p["b"], p["ell"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", polymer.AccuracyWarning)
        tab = polymer.run_replicas(pc, grid, p["replicas"], full=True, threads=cfg.threads)
    R = p["replicas"]
    z = tab.full
    m = grid.N - grid.ell
    table = Table(["replica", "Z", "chain", "block_product", "omega"])
    prod = np.prod(tab.block_z[:, :m], axis=1)
    om = tab.omega(grid.ell)
    for r in range(R):
        table.rows.append((r, z[r], tab.chain[r, m], prod[r], bool(om[r])))
    markov = Table(["r", "frequency", "bound", "sigma", "ok"])
    q = tab.full / tab.chain[:, m]
    for r in p["markov_r"]:
        freq = float(np.mean(q > math.exp(r)))
        bound = math.exp(-r)
        sig = math.sqrt(bound * (1 - bound) / R)
        markov.rows.append((r, freq, bound, sig, freq <= bound + 4 * sig))
    se = float(z.std(ddof=1) / math.sqrt(R))
    outputs = {
        "N": grid.N,
        "steps": list(grid.steps),
        "beta2": pc.beta2,
        "mean_Z": float(z.mean()),
        "mean_Z_stderr": se,
        "unbiased_within_4sigma": abs(z.mean() - 1.0) <= 4 * se,
        "leakage": tab.leakage,
        "omega_fail_frequency": float(1 - om.mean()),
    }
    return outputs, {"replicas": table, "markov": markov}, [str(w.message) for w in caught] + tab.warnings


def _gmc(cfg: RunConfig):
    p = cfg.params
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    system = gmc.random_system(rng, points=p["points"], a=p["a"], rank=p["rank"])
    rho, rho_p = gmc.rho_functionals(system)
    reports = gmc.lower_tail_bound(system, p["r"], samples=p["samples"], seed=cfg.seed + 1)
    table = Table(["r", "empirical", "sigma", "bound", "ok"])
    for rep in reports:
        table.rows.append((rep.r, rep.empirical, rep.mc_sigma, rep.bound, rep.ok))
    mc, se = gmc.second_moment_mc(system, p["samples"], seed=cfg.seed + 2)
    outputs = {
        "rho": rho,
        "rho_prime": rho_p,
        "second_moment": gmc.second_moment(system),
        "second_moment_mc": mc,
        "second_moment_mc_stderr": se,
        "all_ok": all(rep.ok for rep in reports),
    }
    return outputs, {"tail": table}


def _clt(cfg: RunConfig):
    p = cfg.params
    res = synthetic_clt(p["N"], p["replicas"], cfg.seed, p["ell"], p["family"])
    d = res["diagnostics"]
    qq = Table(["normal_quantile", "sample_quantile"], list(zip(*d["qq"])))
    outputs = {
        "f_hat": res["f_hat"],
        "center": res["center"],
        "ks": d["ks"],
        "ks_pvalue": d["ks_pvalue"],
        "ad": d["ad"],
        "skewness": d["skewness"],
        "excess_kurtosis": d["excess_kurtosis"],
    }
    return outputs, {"qq": qq}


def _bands(cfg: RunConfig):
    p = cfg.params
    table = Table(["epsilon", "loglog", "beta", "beta_prime", "I_lo", "I_hi", "z_lo", "z_hi"])
    for eps in p["epsilon"]:
        bb = beta_bands(eps, p["alpha_eps"])
        table.rows.append((eps, bb.loglog, bb.beta, bb.beta_prime, *bb.interval, *bb.z_band))
    return {"count": len(table.rows)}, {"table": table}


RUNNERS = {
    "jtheta": _jtheta,
    "moment2": _moment2,
    "diagrams": _diagrams,
    "errterms": _errterms,
    "decouple": _decouple,
    "polymer": _polymer,
    "gmc": _gmc,
    "clt": _clt,
    "bands": _bands,
}


def run_experiment(config, out_dir: str | Path | None = None) -> ExperimentRecord:
    """Validate, run and (optionally) persist one experiment.

    Parameters
    ----------
    config : RunConfig or dict
        A validated configuration or a decoded JSON document.
    out_dir : path, optional
        Where to write the record and tables.  Nothing is written if omitted.
    """
    cfg = config if isinstance(config, RunConfig) else parse_config(config)
    snap = cfg.snapshot()
    h = content_hash(snap)
    t0 = time.perf_counter()
    result = RUNNERS[cfg.experiment](cfg)
    outputs, tables = result[0], result[1]
    notes = result[2] if len(result) > 2 else []
    rec = ExperimentRecord(
        id=cfg.id or f"{cfg.experiment}-{h[:12]}",
        config=snap,
        seed=cfg.seed,
        input_hash=h,
        outputs=outputs,
        wall_time=time.perf_counter() - t0,
        tables=tables,
        warnings=notes,
    )
    if out_dir is not None:
        persist(rec, out_dir)
    return rec


def run_many(configs, out_dir: str | Path | None = None, workers: int = 1) -> list:
    """Run independent experiments in a thread pool; order of results follows ``configs``."""
    if workers <= 1:
        return [run_experiment(c, out_dir) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda c: run_experiment(c, out_dir), configs))
