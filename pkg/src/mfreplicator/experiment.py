"""End-to-end experiment driver behind ``mfreplicator run``.

Artifact tree written to the output directory::

    config.echo            resolved configuration (YAML)
    snapshots/means.csv    empirical mean at every snapshot
    snapshots/hist_t*.csv  coordinate-1 histograms every ``histogram_every``
    reports/*.json         one report per analysis
    reports/occupation.csv
    summary.json           deterministic headline numbers and checks
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .ensemble import iter_ensemble, iter_replicas, poc_experiment, snapshot, write_snapshots
from .errors import RegimeError, ReplicatorError
from .invariant import beta_s, dirichlet_fixed_point
from .persistence import (capped_h_means, face_equilibria, find_p, fit_drift,
                          write_occupation_csv)
from .stats import ad_null, anderson_darling_statistic, beta_tail_mass, tn_null, tn_statistic


class StageError(ReplicatorError):
    """A runtime failure inside one analysis stage."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


def _close(t: float, targets, tol: float) -> bool:
    return any(abs(t - x) <= tol for x in targets)


def invariant_parameters(params) -> tuple:
    """``(s, alpha_star)`` for the configured model."""
    if params.d == 2:
        try:
            s = beta_s(params)
            return s, [s, 1.0 - s]
        except RegimeError:
            pass
    rep = dirichlet_fixed_point(params)
    if not rep.converged:
        raise RegimeError("Dirichlet fixed-point iteration did not converge")
    return float(rep.alpha_star.alpha[0]), rep.alpha_star.alpha.tolist()


@dataclass
class Plan:
    name: str
    stages: list = field(default_factory=list)

    def describe(self) -> str:
        lines = [f"experiment {self.name}"]
        lines += [f"  - {s}" for s in self.stages]
        return "\n".join(lines)


def plan(cfg: ExperimentConfig) -> Plan:
    run = cfg.run
    n = cfg.integrator.n_steps(run["T"])
    p = Plan(cfg.name)
    p.stages.append(f"ensemble: N={run['N']} T={run['T']} h={run['h']} steps={n} "
                    f"scheme={run['scheme']} seed={run['seed']} "
                    f"particle-steps={run['N'] * n:.3g}")
    a = cfg.analyses
    if "mean_tracking" in a:
        p.stages.append(f"mean_tracking: t >= {a['mean_tracking']['t_min']}, "
                        f"tolerance {a['mean_tracking']['tolerance']}")
    if "ad_test" in a:
        p.stages.append(f"ad_test: t in {a['ad_test']['times']}, B={a['ad_test']['B']}")
    if "tn_test" in a:
        t = a["tn_test"]
        p.stages.append(f"tn_test: {t['n_tracked']} runs x {t['N']} particles, "
                        f"times {t['times']}, B={t['B']}")
    if "poc" in a:
        q = a["poc"]
        p.stages.append(f"poc: N_list={q['N_list']} M={q['M']} T={q['T']} N_ref={q['N_ref']}")
    if "persistence" in a:
        p.stages.append(f"persistence: eps_list={a['persistence']['eps_list']}")
    return p


def _ensemble_stage(cfg, alpha, out_dir, workers):
    run, a = cfg.run, cfg.analyses
    params, integ = cfg.params, cfg.integrator
    h = integ.h
    tol = 0.5 * h
    hist_every = run["histogram_every"]
    ad = a.get("ad_test")
    pers = a.get("persistence")

    ad_nullv = ad_null(run["N"], ad["B"], run["seed"]) if ad else None
    ad_crit = float(np.quantile(ad_nullv, ad["decision_level"])) if ad else None

    times, means, hists = [], [], []
    ad_rows = []
    ext_counts = np.zeros(len(pers["eps_list"]), dtype=np.int64) if pers else None
    ext_total = 0
    eps = sorted(pers["eps_list"]) if pers else []
    cert = None
    if pers:
        eqs = face_equilibria(params.payoff, params.sigma)
        cert = find_p(eqs)
    p_vec = cert.p if cert is not None else np.ones(params.d)
    hbar = []

    for t, X in iter_ensemble(run["N"], cfg.init_law, params, run["T"], integ,
                              run["snapshot_stride"], workers):
        times.append(t)
        means.append(X.mean(axis=0))
        k = round(t / hist_every)
        if abs(t - k * hist_every) <= tol:
            hists.append(snapshot(t, X))
        if ad and ad["times"][0] - tol <= t <= ad["times"][1] + tol:
            stat = anderson_darling_statistic(X[:, 0], alpha[0], 1.0 - alpha[0])
            ad_rows.append({"t": t, "statistic": stat, "reject": bool(stat > ad_crit)})
        if pers:
            hbar.append(capped_h_means([X], p_vec, pers["r"], pers["cap"])[0])
            if t >= pers["t_min"] - tol:
                mins = np.sort(X.min(axis=1))
                ext_counts += np.searchsorted(mins, eps, side="left")
                ext_total += mins.size

    write_snapshots(hists, os.path.join(out_dir, "snapshots"))
    with open(os.path.join(out_dir, "snapshots", "means.csv"), "w") as fh:
        fh.write("t," + ",".join(f"mean_{i + 1}" for i in range(params.d)) + "\n")
        for t, m in zip(times, means):
            fh.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in m) + "\n")

    times = np.array(times)
    means = np.array(means)
    result = {"times": times, "means": means, "ad_rows": ad_rows, "ad_crit": ad_crit,
              "ad_null": ad_nullv, "cert": cert, "hbar": np.array(hbar),
              "ext": (dict(zip(eps, (ext_counts / max(ext_total, 1)).tolist()))
                      if pers else None)}
    return result


def _tn_stage(cfg, alpha, workers):
    t_cfg = cfg.analyses["tn_test"]
    integ = cfg.integrator
    targets = sorted(t_cfg["times"])
    tol = 0.5 * integ.h
    samples = {}
    for t, X in iter_replicas(t_cfg["n_tracked"], t_cfg["N"], cfg.init_law, cfg.params,
                              targets[-1], integ):
        if _close(t, targets, tol):
            samples[min(targets, key=lambda x: abs(x - t))] = X[:, 0, 0].copy()
    a, b = alpha[0], 1.0 - alpha[0]
    null = tn_null(t_cfg["n_tracked"], a, b, t_cfg["B"], cfg.run["seed"], workers)
    qs = {f"{lv:.2f}": float(np.quantile(null, lv)) for lv in sorted(t_cfg["levels"])}
    crit = float(np.quantile(null, t_cfg["decision_level"]))
    stats = {f"{t:g}": tn_statistic(samples[t], a, b) for t in targets}
    return {"method": "TnL2", "n": t_cfg["n_tracked"], "N": t_cfg["N"], "B": t_cfg["B"],
            "seed": cfg.run["seed"], "quantiles": qs, "critical_value": crit,
            "statistics": stats,
            "reject": {k: bool(v > crit) for k, v in stats.items()}}


def _json_dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int = None) -> dict:
    """Execute every configured analysis and write the artifact tree."""
    workers = cfg.run["workers"] if workers is None else workers
    os.makedirs(os.path.join(out_dir, "reports"), exist_ok=True)
    with open(os.path.join(out_dir, "config.echo"), "w") as fh:
        fh.write(cfg.echo())
    a = cfg.analyses
    params = cfg.params
    summary = {"name": cfg.name, "seed": cfg.run["seed"], "checks": {}}

    try:
        s, alpha = invariant_parameters(params)
    except Exception as exc:
        raise StageError("invariant", exc) from exc
    summary["theoretical_s"] = s
    summary["alpha_star"] = alpha

    try:
        ens = _ensemble_stage(cfg, alpha, out_dir, workers)
    except Exception as exc:
        raise StageError("ensemble", exc) from exc
    times, means = ens["times"], ens["means"]
    rel = np.abs(means[:, 0] - s) / s
    summary["final_time"] = float(times[-1])
    summary["final_mean"] = means[-1].tolist()
    summary["final_relative_error"] = float(rel[-1])

    if "mean_tracking" in a:
        m = a["mean_tracking"]
        sel = times >= m["t_min"] - 0.5 * cfg.run["h"]
        worst = float(rel[sel].max()) if sel.any() else float("nan")
        rep = {"t_min": m["t_min"], "tolerance": m["tolerance"],
               "max_relative_error": worst, "n_snapshots": int(sel.sum()),
               "pass": bool(worst <= m["tolerance"])}
        _json_dump(rep, os.path.join(out_dir, "reports", "mean_tracking.json"))
        summary["mean_tracking"] = {k: rep[k] for k in ("max_relative_error", "pass")}
        summary["checks"]["mean_tracking"] = rep["pass"]

    if "ad_test" in a:
        rows = ens["ad_rows"]
        acc = float(np.mean([not r["reject"] for r in rows])) if rows else float("nan")
        null = ens["ad_null"]
        rep = {"method": "AndersonDarling", "null": [s, 1 - s], "n": cfg.run["N"],
               "B": a["ad_test"]["B"], "seed": cfg.run["seed"],
               "quantiles": {f"{lv:.2f}": float(np.quantile(null, lv))
                             for lv in sorted(a["ad_test"]["levels"])},
               "critical_value": ens["ad_crit"], "snapshots": rows,
               "nonrejection_fraction": acc,
               "pass": bool(acc >= a["ad_test"]["min_nonrejection"])}
        _json_dump(rep, os.path.join(out_dir, "reports", "ad_test.json"))
        summary["ad_test"] = {"nonrejection_fraction": acc, "n_snapshots": len(rows),
                              "pass": rep["pass"]}
        summary["checks"]["ad_test"] = rep["pass"]

    if "tn_test" in a:
        try:
            rep = _tn_stage(cfg, alpha, workers)
        except Exception as exc:
            raise StageError("tn_test", exc) from exc
        rep["pass"] = not any(rep["reject"].values())
        _json_dump(rep, os.path.join(out_dir, "reports", "tn_test.json"))
        summary["tn_test"] = {"critical_value": rep["critical_value"],
                              "statistics": rep["statistics"], "pass": rep["pass"]}
        summary["checks"]["tn_test"] = rep["pass"]

    if "poc" in a:
        q = a["poc"]
        try:
            res = poc_experiment(q["N_list"], q["M"], params, q["T"], cfg.integrator,
                                 N_ref=q["N_ref"], law=cfg.init_law)
        except Exception as exc:
            raise StageError("poc", exc) from exc
        lo, hi = sorted(q["slope_range"])
        rep = res.to_dict()
        rep["pass"] = bool(lo <= res.slope <= hi)
        _json_dump(rep, os.path.join(out_dir, "reports", "poc.json"))
        summary["poc"] = {"slope": res.slope, "pass": rep["pass"]}
        summary["checks"]["poc"] = rep["pass"]

    if "persistence" in a:
        pc = a["persistence"]
        cert = ens["cert"]
        rep = {"certificate": cert.to_dict() if cert is not None else None,
               "occupation": {f"{e:g}": f for e, f in ens["ext"].items()}}
        ok = cert is not None
        if params.d == 2:
            oracle = {f"{e:g}": beta_tail_mass(e, s, 1 - s) for e in ens["ext"]}
            rep["occupation_oracle"] = oracle
            key = "0.01" if "0.01" in oracle else next(iter(oracle))
            emp, ref = rep["occupation"][key], oracle[key]
            rep["ext_relative_error"] = {key: abs(emp - ref) / ref}
            ok = ok and abs(emp - ref) <= pc["relative_tolerance"] * ref
        hbar = ens["hbar"]
        per_unit = max(1, int(round(1.0 / (cfg.run["h"] * cfg.run["snapshot_stride"]))))
        if hbar.size // per_unit >= 3:
            rep["drift_check"] = fit_drift(hbar, per_unit, pc["cap"]).to_dict()
        rep["pass"] = bool(ok)
        _json_dump(rep, os.path.join(out_dir, "reports", "persistence.json"))
        write_occupation_csv(ens["ext"], os.path.join(out_dir, "reports", "occupation.csv"))
        summary["persistence"] = {
            "rho": cert.rho if cert is not None else None,
            "p": cert.p.tolist() if cert is not None else None,
            "occupation": rep["occupation"], "pass": rep["pass"]}
        summary["checks"]["persistence"] = rep["pass"]

    summary["all_passed"] = all(summary["checks"].values())
    _json_dump(summary, os.path.join(out_dir, "summary.json"))
    return summary


__all__ = ["run_experiment", "plan", "Plan", "StageError", "invariant_parameters"]
