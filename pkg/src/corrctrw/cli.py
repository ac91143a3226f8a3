"""Command-line front end: ``corrctrw {simulate,experiment,pde,report} --config FILE``.

Exit codes: 0 success, 2 configuration or parameter error, 3 numeric failure.
Errors are printed to stderr as JSON and also written to ``error.json``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, load
from .convergence_lab import (
    ExperimentReport,
    increment_dependence_check,
    ks_standard_error,
    ltbm_ensemble,
    mittag_leffler_moment,
    run_theorem_experiment,
    self_similarity_check,
)
from .ctrw_engine import CtrwConfig, simulate_scaled_ctrw
from .errors import ConfigurationError, CtrwError, NumericError
from .frac_pde import (
    FracDiffusionProblem,
    solve_gl_l1,
    stable_density,
    subordinated_density,
)
from .parallel import run_blocks
from .process_gen import (
    LfsmConfig,
    PathGrid,
    compose,
    gen_fbm,
    gen_lfsm,
    gen_stable_levy,
    gen_subordinator,
    sample_fbm_of_inverse,
    sample_inverse_subordinator,
    sample_levy_of_inverse,
    sample_lfsm_of_inverse,
)
from .stable_rng import RngStream, StableParams


def _need(section, key, where):
    if key not in section:
        raise ConfigurationError(f"{where} config needs {key!r}", code="missing_field", field=key)
    return section[key]


def _stable(sec):
    return StableParams(float(_need(sec, "alpha", "stable")), float(sec.get("p", 0.5)),
                        float(sec.get("q", 0.5)), float(sec.get("a", 1.0)))


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not serializable: {type(o)}")


def _metadata(cfg: RunConfig, outputs, extra=None):
    meta = {"command": cfg.command, "master_seed": cfg.master_seed, "config": cfg.to_dict(),
            "outputs": sorted(outputs), "version": __version__,
            "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    if extra:
        meta.update(extra)
    return meta


# ---------------------------------------------------------------------------
# simulate


def _ctrw_paths(cfg_dict, n, g):
    return simulate_scaled_ctrw(CtrwConfig.from_dict(cfg_dict), g, n).values


def _simulate_path(sec, cfg: RunConfig) -> PathGrid:
    kind = _need(sec, "generator", "simulate")
    n_paths = int(sec.get("n_paths", 1))
    m = None if n_paths == 1 else n_paths
    g = RngStream(cfg.master_seed, 0).generator()
    if kind == "ctrw":
        ccfg = CtrwConfig.from_dict(_need(sec, "ctrw", "simulate"))
        vals = run_blocks(_ctrw_paths, n_paths, cfg.master_seed, 0, ccfg.to_dict(),
                          block=int(sec.get("block", 256)), workers=cfg.workers)
        return PathGrid(np.asarray(ccfg.t_grid), vals[0] if m is None else vals)
    if kind == "stable_levy":
        return gen_stable_levy(_stable(sec), float(sec.get("T", 1.0)), int(sec.get("n", 1000)),
                               g, m)
    if kind == "subordinator":
        return gen_subordinator(float(_need(sec, "beta", "simulate")), float(sec.get("X", 1.0)),
                                int(sec.get("n", 1000)), g, m)
    if kind == "inverse_subordinator":
        t_grid = np.asarray(_need(sec, "t_grid", "simulate"), dtype=float)
        E = sample_inverse_subordinator(float(_need(sec, "beta", "simulate")), t_grid, n_paths, g,
                                        dx=sec.get("dx"))
        return PathGrid(t_grid, E[0] if m is None else E, continuous=True)
    if kind == "fbm":
        return gen_fbm(float(_need(sec, "H", "simulate")), float(sec.get("T", 1.0)),
                       int(sec.get("n", 1000)), g, m)
    if kind == "lfsm":
        lc = LfsmConfig(float(_need(sec, "alpha", "simulate")), float(_need(sec, "H", "simulate")),
                        T=float(sec.get("T", 1.0)), n_steps=int(sec.get("n", 100)),
                        M=sec.get("M"), delta=sec.get("delta"))
        return gen_lfsm(lc, _stable(sec), g, m)
    if kind == "composed":
        return _simulate_composed(sec, g, n_paths, m)
    raise ConfigurationError(f"unknown generator {kind!r}", code="generator_id", generator=kind)


def _simulate_composed(sec, g, n_paths, m):
    t_grid = np.asarray(_need(sec, "t_grid", "simulate"), dtype=float)
    beta = float(_need(sec, "beta", "simulate"))
    E = sample_inverse_subordinator(beta, t_grid, n_paths, g, dx=sec.get("dx"))
    inner = PathGrid(t_grid, E, continuous=True)
    outer_kind = sec.get("outer", "stable_levy")
    n = int(sec.get("n", 1000))
    T = float(E.max()) * (1.0 + 1e-9) + 1e-12
    if outer_kind == "stable_levy":
        outer = gen_stable_levy(_stable(sec), T, n, g, n_paths)
    elif outer_kind == "fbm":
        outer = gen_fbm(float(_need(sec, "H", "simulate")), T, n, g, n_paths)
    elif outer_kind == "lfsm":
        lc = LfsmConfig(float(_need(sec, "alpha", "simulate")), float(_need(sec, "H", "simulate")),
                        T=T, n_steps=n)
        outer = gen_lfsm(lc, _stable(sec), g, n_paths)
    else:
        raise ConfigurationError(f"unknown outer process {outer_kind!r}", code="generator_id")
    out = compose(outer, inner)
    return PathGrid(t_grid, out.values[0] if m is None else out.values)


def cmd_simulate(cfg: RunConfig, out_dir: str) -> dict:
    path = _simulate_path(cfg.simulate, cfg)
    path.to_csv(os.path.join(out_dir, "paths.csv"))
    return {"outputs": ["paths.csv"]}


# ---------------------------------------------------------------------------
# experiment


def _marginal_sampler(sec):
    proc = _need(sec, "process", "experiment")
    beta = float(_need(sec, "beta", "experiment"))
    if proc == "inverse_subordinator":
        return lambda t, n, g: sample_inverse_subordinator(beta, t, n, g)[:, 0], beta
    if proc == "levy_of_inverse":
        p = _stable(sec)

        def f(t, n, g):
            E = sample_inverse_subordinator(beta, t, n, g)[:, 0]
            return sample_levy_of_inverse(p, beta, t, n, g, E=E)
        return f, beta / p.alpha
    if proc == "fbm_of_inverse":
        H = float(_need(sec, "H", "experiment"))

        def f(t, n, g):
            E = sample_inverse_subordinator(beta, t, n, g)[:, 0]
            return sample_fbm_of_inverse(H, beta, t, n, g, E=E)
        return f, H * beta
    if proc == "lfsm_of_inverse":
        p, H = _stable(sec), float(_need(sec, "H", "experiment"))

        def f(t, n, g):
            E = sample_inverse_subordinator(beta, t, n, g)[:, 0]
            return sample_lfsm_of_inverse(p, H, beta, t, n, g, E=E)
        return f, H * beta
    raise ConfigurationError(f"unknown process {proc!r}", code="process_id", process=proc)


def _row_report(kind, rows, cfg, verdict, extra=None):
    rep = {"kind": kind, "rows": rows, "verdicts": verdict, "master_seed": cfg.master_seed,
           "config": cfg.to_dict()}
    if extra:
        rep.update(extra)
    return rep


def _write_rows_csv(path, rows):
    keys = sorted({k for r in rows for k, v in r.items() if not isinstance(v, (dict, list))})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([repr(r.get(k)) if isinstance(r.get(k), float) else r.get(k) for k in keys])


def cmd_experiment(cfg: RunConfig, out_dir: str) -> dict:
    sec = cfg.experiment
    kind = sec.get("kind", "theorem")
    g = RngStream(cfg.master_seed, 0).generator()
    if kind == "theorem":
        ccfg = CtrwConfig.from_dict(_need(sec, "ctrw", "experiment"))
        rep = run_theorem_experiment(ccfg.theorem, ccfg, _need(sec, "scales", "experiment"),
                                     int(sec.get("m", 2000)), sec.get("t_points", [1.0]),
                                     master_seed=cfg.master_seed, workers=cfg.workers,
                                     ks_tol=float(sec.get("ks_tol", 0.05)),
                                     m_limit=sec.get("m_limit"), block=int(sec.get("block", 2000)))
        report = rep.to_dict()
        report["kind"] = "theorem"
        report["config"] = cfg.to_dict()
        rep.to_csv(os.path.join(out_dir, "report.csv"))
    elif kind == "self_similarity":
        sampler, h = _marginal_sampler(sec)
        row = self_similarity_check(sampler, float(sec.get("h", h)), float(sec.get("c", 2.0)),
                                    int(sec.get("m", 10_000)), g, t=float(sec.get("t", 1.0)),
                                    tol=float(sec.get("tol", 0.03)))
        report = _row_report(kind, [row], cfg, {"self_similarity": "pass" if row["pass"] else "fail"})
        _write_rows_csv(os.path.join(out_dir, "report.csv"), [row])
    elif kind == "mittag_leffler":
        beta, t = float(_need(sec, "beta", "experiment")), float(sec.get("t", 1.0))
        m = int(sec.get("m", 10_000))
        E = sample_inverse_subordinator(beta, t, m, g, dx=sec.get("dx"))[:, 0]
        rows = []
        for n in sec.get("orders", [1, 2]):
            exact = mittag_leffler_moment(beta, t, int(n))
            est = float(np.mean(E ** int(n)))
            se = float(np.std(E ** int(n)) / math.sqrt(m))
            rows.append({"order": int(n), "exact": exact, "estimate": est, "se": se, "m": m,
                         "rel_error": est / exact - 1.0, "pass": abs(est - exact) < 4 * se})
        report = _row_report(kind, rows, cfg,
                             {"moments": "pass" if all(r["pass"] for r in rows) else "fail"})
        _write_rows_csv(os.path.join(out_dir, "report.csv"), rows)
    elif kind == "increments":
        beta, m = float(_need(sec, "beta", "experiment")), int(sec.get("m", 10_000))
        V = ltbm_ensemble(beta, [1.0, 2.0], m, g, H=float(sec.get("H", 0.5)))
        row = increment_dependence_check(np.column_stack([np.zeros(m), V]))
        report = _row_report(kind, [row], cfg, {
            "uncorrelated": "pass" if row["uncorrelated"] else "fail",
            "dependent": "pass" if row["dependent"] else "fail"})
        _write_rows_csv(os.path.join(out_dir, "report.csv"), [row])
    else:
        raise ConfigurationError(f"unknown experiment kind {kind!r}", code="experiment_kind")
    report.pop("created_utc", None)
    _write_json(os.path.join(out_dir, "report.json"), report)
    return {"outputs": ["report.json", "report.csv"]}


# ---------------------------------------------------------------------------
# pde


def _bin_probabilities(outer, beta, edges, t, fn=None):
    """Probabilities of histogram bins under the reference density (Simpson per bin)."""
    mids = 0.5 * (edges[:-1] + edges[1:])
    pts = np.sort(np.concatenate([edges, mids]))
    dens = fn(pts) if fn is not None else subordinated_density(outer, beta, pts, t)
    f0, fm, f1 = dens[0:-1:2], dens[1::2], dens[2::2]
    return np.diff(edges) / 6.0 * (f0 + 4 * fm + f1)


def _mc_block(params_dict, beta, t, n, g):
    p = StableParams(**params_dict)
    if beta == 1.0:
        from .stable_rng import sample_stable
        return sample_stable(p, t, n, g)
    return sample_levy_of_inverse(p, beta, t, n, g)


def cmd_pde(cfg: RunConfig, out_dir: str) -> dict:
    sec = cfg.pde
    stable = _stable(sec)
    beta = float(sec.get("beta", 1.0))
    prob = FracDiffusionProblem(beta, stable, x_max=float(sec.get("x_max", 20.0)),
                                t_final=float(sec.get("t_final", 1.0)),
                                boundary_tol=float(sec.get("boundary_tol", 1e-4)))
    n_x, n_t = int(sec.get("n_x", 512)), int(sec.get("n_t", 512))
    surf = solve_gl_l1(prob, n_x, n_t)
    outputs = ["surface.csv", "summary.json"]
    surf.to_csv(os.path.join(out_dir, "surface.csv"), stride=int(sec.get("surface_stride", 8)))
    for t in sec.get("t_slices", [prob.t_final]):
        name = f"slice_t{float(t):g}.csv"
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "h"])
            for xv, hv in zip(surf.x_grid, surf.at(float(t))):
                w.writerow([repr(float(xv)), repr(float(hv))])
        outputs.append(name)

    x, dx, T = surf.x_grid, surf.dx, prob.t_final
    final = surf.values[-1]
    masses = surf.mass()
    summary = {"master_seed": cfg.master_seed, "grid": {"n_x": n_x, "n_t": n_t, "dx": dx,
                                                        "dt": T / n_t, "x_max": prob.x_max},
               "mass": {"initial": float(masses[0]), "final": float(masses[-1]),
                        "max_change": float(np.max(np.abs(masses - masses[0])))},
               "min_value": float(surf.values.min())}
    edge = max(1, int(round(prob.boundary_fraction * n_x)))
    summary["boundary_mass"] = float((final[:edge].sum() + final[-edge:].sum()) * dx)
    if sec.get("compare", True):
        if beta == 1.0:
            ref = stable_density(stable, x, T)
            moll = stable_density(stable, x, T, mollifier=2 * dx)
            ref_fn = lambda pts: stable_density(stable, pts, T)
        else:
            ref = subordinated_density(stable, beta, x, T)
            moll = subordinated_density(stable, beta, x, T, mollifier=2 * dx)
            ref_fn = None
        summary["oracle"] = {
            "solver_vs_reference_max": float(np.max(np.abs(final - ref))),
            "solver_vs_mollified_reference_max": float(np.max(np.abs(final - moll))),
            "reference_mass_in_domain": float(moll.sum() * dx),
            "mass_drift_vs_reference": float(abs(masses[-1] - moll.sum() * dx)),
        }
        m = int(sec.get("histogram_m", 0))
        if m > 0:
            lim = float(sec.get("histogram_range", 10.0))
            edges = np.linspace(-lim, lim, int(sec.get("histogram_bins", 80)) + 1)
            samples = run_blocks(_mc_block, m, cfg.master_seed, 0, stable.to_dict(), beta, T,
                                 block=10_000, workers=cfg.workers)
            counts, _ = np.histogram(samples, edges)
            probs = _bin_probabilities(stable, beta, edges, T, ref_fn)
            outside_mc = 1.0 - counts.sum() / m
            outside_ref = 1.0 - probs.sum()
            l1 = float(np.sum(np.abs(counts / m - probs)) + abs(outside_mc - outside_ref))
            summary["oracle"]["histogram_vs_reference_l1"] = l1
            summary["oracle"]["histogram_m"] = m
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return {"outputs": outputs}


# ---------------------------------------------------------------------------
# report


def cmd_report(cfg: RunConfig, out_dir: str) -> dict:
    inputs = _need(cfg.report, "inputs", "report")
    rows = []
    for path in inputs:
        try:
            with open(path) as fh:
                rep = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigurationError(f"cannot read report {path}: {exc}", code="report_read") \
                from exc
        row = {"file": path, "kind": rep.get("kind", "theorem"),
               "master_seed": rep.get("master_seed")}
        for k, v in sorted(rep.get("verdicts", {}).items()):
            row[f"verdict_{k}"] = v
        rows.append(row)
    _write_rows_csv(os.path.join(out_dir, "summary.csv"), rows)
    _write_json(os.path.join(out_dir, "summary.json"), {"master_seed": cfg.master_seed,
                                                         "reports": rows})
    return {"outputs": ["summary.csv", "summary.json"]}


COMMAND_FUNCS = {"simulate": cmd_simulate, "experiment": cmd_experiment, "pde": cmd_pde,
                 "report": cmd_report}


def build_parser():
    ap = argparse.ArgumentParser(prog="corrctrw", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMAND_FUNCS))
    ap.add_argument("--config", required=True, help="JSON or YAML run configuration")
    ap.add_argument("--seed", type=int, help="override master_seed")
    ap.add_argument("--output-dir", help="override output_dir (default $CORRCTRW_OUTPUT_DIR)")
    ap.add_argument("--workers", type=int, help="override worker count")
    return ap


def run(cfg: RunConfig) -> str:
    out_dir = cfg.resolved_output_dir()
    os.makedirs(out_dir, exist_ok=True)
    res = COMMAND_FUNCS[cfg.command](cfg, out_dir)
    _write_json(os.path.join(out_dir, "run.json"), _metadata(cfg, res["outputs"]))
    return out_dir


def _as_ctrw_error(err) -> CtrwError:
    if isinstance(err, CtrwError):
        return err
    if isinstance(err, (ArithmeticError, np.linalg.LinAlgError)):
        return NumericError(str(err), code="numeric_failure", exception=type(err).__name__)
    return ConfigurationError(str(err), code="invalid_config", exception=type(err).__name__)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = args.output_dir
    try:
        cfg = load(args.config)
        d = cfg.to_dict()
        d["command"] = args.command
        if args.seed is not None:
            d["master_seed"] = args.seed
        if args.output_dir is not None:
            d["output_dir"] = args.output_dir
        if args.workers is not None:
            d["workers"] = args.workers
        cfg = RunConfig.from_dict(d)
        out_dir = cfg.resolved_output_dir()
        run(cfg)
    except (CtrwError, TypeError, KeyError, ValueError, ArithmeticError, np.linalg.LinAlgError) as err:
        err = _as_ctrw_error(err)
        payload = err.to_dict()
        print(json.dumps(payload, sort_keys=True, default=_json_default), file=sys.stderr)
        if out_dir or os.environ.get("CORRCTRW_OUTPUT_DIR"):
            target = out_dir or os.environ["CORRCTRW_OUTPUT_DIR"]
            try:
                os.makedirs(target, exist_ok=True)
                _write_json(os.path.join(target, "error.json"), payload)
            except OSError:
                pass
        return err.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
