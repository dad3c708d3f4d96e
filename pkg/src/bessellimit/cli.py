"""Experiment runner: config file -> classification, simulation, analytics,
comparison reports and CSV/JSON artifacts.

Config files are INI-style with [model], [sim] and [compare] sections; array
values are JSON lists. Every tolerance used by a verdict is explicit in the
file, so a report is reproducible from the config alone.

Exit codes: 0 pass, 2 verdict failure, 1 error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from . import analytic, stats
from .model import Model, PerturbationSpec, ScaledModel
from .sampler import (
    RngPolicy,
    SimScheme,
    monte_carlo_exit,
    monte_carlo_marginal,
    monte_carlo_occupations,
    write_sample_set,
)

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "main"]


class ConfigError(ValueError):
    """Configuration problem; the message names the offending key."""


@dataclass
class ExperimentConfig:
    model: Model
    n_list: list[float]
    t_final: float
    dt: float
    paths: int
    master_seed: int
    workers: int
    compare_time: float
    alpha: float
    epsilon_list: list[float]
    ks_tol: float
    exit_sigma: float
    occupation_tol: float
    exit_paths: int
    exit_dt: float
    occupation_paths: int
    occupation_dt: float
    raw: dict = field(default_factory=dict)


def _get(parser, section, key, conv, *, default=None, required=True):
    tag = f"{section}.{key}"
    if not parser.has_option(section, key):
        if required and default is None:
            raise ConfigError(f"{tag}: missing required key")
        return default
    text = parser.get(section, key)
    try:
        return conv(text)
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{tag}: {exc}") from exc


def _json_list(text):
    val = json.loads(text)
    if not isinstance(val, list):
        raise ValueError(f"expected a JSON array, got {val!r}")
    return [float(v) for v in val]


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    for section in ("model", "sim", "compare"):
        if not parser.has_section(section):
            raise ConfigError(f"{section}: missing section")

    bp = _get(parser, "model", "atilde.breakpoints", _json_list, default=[], required=False)
    vals = _get(parser, "model", "atilde.values", _json_list, default=[], required=False)
    try:
        pert = PerturbationSpec(tuple(bp), tuple(vals))
    except ValueError as exc:
        raise ConfigError(f"model.atilde.breakpoints: {exc}") from exc
    c_minus = _get(parser, "model", "c_minus", float)
    c_plus = _get(parser, "model", "c_plus", float)
    x0 = _get(parser, "model", "x0", float)
    try:
        model = Model(pert, c_minus, c_plus, x0)
    except ValueError as exc:
        msg = str(exc)
        key = "model.c_minus" if "c_minus" in msg else (
            "model.c_plus" if "c_plus" in msg else "model.x0")
        raise ConfigError(f"{key}: {msg}") from exc

    n_list = _get(parser, "sim", "n_list", _json_list)
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("sim.n_list: must be a nonempty ascending array")
    if any(n < 1 for n in n_list):
        raise ConfigError("sim.n_list: scaling indices must be >= 1")
    t_final = _get(parser, "sim", "T", float)
    dt = _get(parser, "sim", "dt", float)
    paths = int(_get(parser, "sim", "paths", float))
    master_seed = int(_get(parser, "sim", "master_seed", float))
    workers = int(_get(parser, "sim", "workers", float, default=1.0, required=False))
    if t_final <= 0 or dt <= 0:
        raise ConfigError("sim.T: T and sim.dt must be positive")
    if paths < 1:
        raise ConfigError("sim.paths: must be >= 1")
    if workers < 1:
        raise ConfigError("sim.workers: must be >= 1")

    compare_time = _get(parser, "compare", "time", float, default=t_final, required=False)
    alpha = _get(parser, "compare", "alpha", float, default=1.0, required=False)
    eps_list = _get(parser, "compare", "epsilon_list", _json_list,
                    default=[1.0, 0.3, 0.1], required=False)
    ks_tol = _get(parser, "compare", "ks_tol", float, default=0.02, required=False)
    exit_sigma = _get(parser, "compare", "exit_sigma", float, default=3.0, required=False)
    occupation_tol = _get(parser, "compare", "occupation_tol", float,
                          default=0.05, required=False)
    exit_paths = int(_get(parser, "compare", "exit_paths", float,
                          default=float(paths), required=False))
    exit_dt = _get(parser, "compare", "exit_dt", float, default=dt, required=False)
    occupation_paths = int(_get(parser, "compare", "occupation_paths", float,
                                default=float(paths), required=False))
    occupation_dt = _get(parser, "compare", "occupation_dt", float,
                         default=dt, required=False)
    if alpha <= 0:
        raise ConfigError("compare.alpha: must be positive")
    if not abs(model.x0) < alpha:
        raise ConfigError(f"compare.alpha: needs |x0| < alpha, got x0={model.x0}")
    for e in eps_list:
        if not 0.0 < e <= 1.0:
            raise ConfigError(f"compare.epsilon_list: entries must lie in (0, 1], got {e}")

    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    return ExperimentConfig(
        model=model, n_list=n_list, t_final=t_final, dt=dt, paths=paths,
        master_seed=master_seed, workers=workers, compare_time=compare_time,
        alpha=alpha, epsilon_list=eps_list, ks_tol=ks_tol,
        exit_sigma=exit_sigma, occupation_tol=occupation_tol,
        exit_paths=exit_paths, exit_dt=exit_dt,
        occupation_paths=occupation_paths, occupation_dt=occupation_dt,
        raw=raw)


def _model_meta(model: Model) -> dict:
    return {
        "model.atilde.breakpoints": json.dumps(list(model.perturbation.breakpoints)),
        "model.atilde.values": json.dumps(list(model.perturbation.values)),
        "model.c_minus": model.c_minus,
        "model.c_plus": model.c_plus,
        "model.x0": model.x0,
    }


def _law_dict(law: analytic.LimitLaw) -> dict:
    out = {"case": law.case, "c_minus": law.c_minus, "c_plus": law.c_plus,
           "x0": law.x0}
    if law.gamma is not None:
        out["gamma"] = law.gamma
    if law.p is not None:
        out["p"] = law.p
    return out


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header: list[str], rows: list[tuple]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, (int, float, np.floating))
                              and not isinstance(v, bool) else str(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_classify(cfg: ExperimentConfig, out_dir: FsPath) -> int:
    law = analytic.classify(cfg.model)
    payload = _law_dict(law)
    print(json.dumps(payload, indent=2, sort_keys=True))
    _write_json(out_dir / "classify.json", payload)
    return 0


def cmd_simulate(cfg: ExperimentConfig, out_dir: FsPath, kind: str) -> int:
    policy = RngPolicy(cfg.master_seed)
    meta = _model_meta(cfg.model)
    meta["T"] = cfg.t_final
    if kind == "prelimit":
        scheme = SimScheme(kind="prelimit", dt=cfg.dt)
        for n in cfg.n_list:
            scaled = ScaledModel(cfg.model, n)
            sample = monte_carlo_marginal("prelimit", scaled, cfg.t_final,
                                          cfg.paths, policy, scheme,
                                          workers=cfg.workers)
            write_sample_set(sample, out_dir / f"sample_prelimit_n{n:g}.csv",
                             extra_meta=meta)
            print(f"wrote sample_prelimit_n{n:g}.csv ({cfg.paths} paths)")
    else:
        law = analytic.classify(cfg.model)
        scheme = SimScheme(kind="limit", dt=cfg.dt)
        sample = monte_carlo_marginal("limit", law, cfg.t_final, cfg.paths,
                                      policy, scheme, workers=cfg.workers)
        write_sample_set(sample, out_dir / "sample_limit.csv",
                         extra_meta={**meta, "case": law.case})
        print(f"wrote sample_limit.csv ({cfg.paths} paths)")
    return 0


def _exit_rows(cfg: ExperimentConfig, law, policy) -> list[dict]:
    rows = []
    scheme = SimScheme(kind="prelimit", dt=cfg.exit_dt)
    p_inf = analytic.limit_exit_prob(law, cfg.model.x0, cfg.alpha)
    for n in cfg.n_list:
        scaled = ScaledModel(cfg.model, n)
        est = monte_carlo_exit("prelimit", scaled, cfg.alpha, cfg.exit_paths,
                               policy, scheme, workers=cfg.workers)
        p_n = analytic.prelimit_exit_prob(scaled, cfg.model.x0, cfg.alpha)
        rows.append({"n": n, "mc": est.fraction_plus, "analytic_prelimit": p_n,
                     "analytic_limit": p_inf, "std_err": est.std_err})
    return rows


def _occupation_rows(cfg: ExperimentConfig, policy) -> list[dict]:
    rows = []
    scheme = SimScheme(kind="prelimit", dt=cfg.occupation_dt)
    eps_sorted = sorted(cfg.epsilon_list)
    for n in cfg.n_list:
        scaled = ScaledModel(cfg.model, n)
        ests = monte_carlo_occupations(scaled, eps_sorted, cfg.occupation_paths,
                                       policy, scheme, workers=cfg.workers)
        for eps, est in zip(eps_sorted, ests):
            bvp = analytic.occupation_bvp(scaled, eps, cfg.model.x0)
            rows.append({"n": n, "epsilon": eps, "mc": est.mean_occupation,
                         "bvp": bvp, "std_err": est.std_err})
    return rows


def cmd_exitprob(cfg: ExperimentConfig, out_dir: FsPath) -> int:
    if not abs(cfg.model.x0) < cfg.alpha:
        raise ConfigError("compare.alpha: exit probability needs |x0| < alpha")
    law = analytic.classify(cfg.model)
    policy = RngPolicy(cfg.master_seed)
    rows = _exit_rows(cfg, law, policy)
    _write_csv(out_dir / "exit_probs.csv",
               ["n", "mc", "analytic_prelimit", "analytic_limit", "std_err"],
               [(r["n"], r["mc"], r["analytic_prelimit"], r["analytic_limit"],
                 r["std_err"]) for r in rows])
    print(f"wrote exit_probs.csv ({len(rows)} rows)")
    return 0


def cmd_occupation(cfg: ExperimentConfig, out_dir: FsPath) -> int:
    policy = RngPolicy(cfg.master_seed)
    rows = _occupation_rows(cfg, policy)
    _write_csv(out_dir / "occupation.csv",
               ["n", "epsilon", "mc", "bvp", "std_err"],
               [(r["n"], r["epsilon"], r["mc"], r["bvp"], r["std_err"])
                for r in rows])
    print(f"wrote occupation.csv ({len(rows)} rows)")
    return 0


def cmd_compare(cfg: ExperimentConfig, out_dir: FsPath) -> int:
    law = analytic.classify(cfg.model)
    policy = RngPolicy(cfg.master_seed)
    meta = _model_meta(cfg.model)

    limit_scheme = SimScheme(kind="limit", dt=cfg.dt)
    limit_sample = monte_carlo_marginal("limit", law, cfg.compare_time,
                                        cfg.paths, policy, limit_scheme,
                                        workers=cfg.workers)
    write_sample_set(limit_sample, out_dir / "sample_limit.csv",
                     extra_meta={**meta, "case": law.case})

    prelimit_scheme = SimScheme(kind="prelimit", dt=cfg.dt)
    ks_rows = []
    for n in cfg.n_list:
        scaled = ScaledModel(cfg.model, n)
        sample = monte_carlo_marginal("prelimit", scaled, cfg.compare_time,
                                      cfg.paths, policy, prelimit_scheme,
                                      workers=cfg.workers)
        write_sample_set(sample, out_dir / f"sample_prelimit_n{n:g}.csv",
                         extra_meta=meta)
        report = stats.ks_two_sample(sample.values, limit_sample.values)
        ks_rows.append({"n": n, "ks_statistic": report.statistic})

    exit_rows = _exit_rows(cfg, law, policy)
    occ_rows = _occupation_rows(cfg, policy)

    ks_stats = [r["ks_statistic"] for r in ks_rows]
    verdicts = {
        "ks_decreasing": all(b < a + 1e-12 for a, b in zip(ks_stats, ks_stats[1:])),
        "ks_final_within_tol": ks_stats[-1] <= cfg.ks_tol,
        "exit_within_sigma": all(
            abs(r["mc"] - r["analytic_prelimit"]) <= cfg.exit_sigma * r["std_err"]
            for r in exit_rows),
        "occupation_within_tol": all(
            abs(r["mc"] - r["bvp"]) <= max(cfg.exit_sigma * r["std_err"],
                                           cfg.occupation_tol * max(r["bvp"], 1e-12))
            for r in occ_rows),
    }
    verdicts["overall"] = all(verdicts.values())

    _write_csv(out_dir / "ks_by_n.csv", ["n", "ks_statistic"],
               [(r["n"], r["ks_statistic"]) for r in ks_rows])
    _write_csv(out_dir / "exit_probs.csv",
               ["n", "mc", "analytic_prelimit", "analytic_limit", "std_err"],
               [(r["n"], r["mc"], r["analytic_prelimit"], r["analytic_limit"],
                 r["std_err"]) for r in exit_rows])
    _write_csv(out_dir / "occupation.csv",
               ["n", "epsilon", "mc", "bvp", "std_err"],
               [(r["n"], r["epsilon"], r["mc"], r["bvp"], r["std_err"])
                for r in occ_rows])

    report = {
        "case": law.case,
        "params": _law_dict(law),
        "ks_by_n": ks_rows,
        "exit_probs": exit_rows,
        "occupation": occ_rows,
        "verdicts": verdicts,
        "config_echo": cfg.raw,
    }
    _write_json(out_dir / "report.json", report)
    for name, ok in verdicts.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    return 0 if verdicts["overall"] else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bessellimit",
        description="Simulate singular-drift SDEs, their Bessel-type limits, "
                    "and verify the convergence numerically.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("classify", "simulate", "compare", "exitprob", "occupation"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None,
                        help="override sim.master_seed")
        sp.add_argument("--workers", type=int, default=None,
                        help="override sim.workers")
        if name == "simulate":
            sp.add_argument("--kind", choices=("prelimit", "limit"),
                            required=True)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.master_seed = args.seed
        if args.workers is not None:
            cfg.workers = args.workers
        out_dir = FsPath(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "classify":
            return cmd_classify(cfg, out_dir)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir, args.kind)
        if args.command == "compare":
            return cmd_compare(cfg, out_dir)
        if args.command == "exitprob":
            return cmd_exitprob(cfg, out_dir)
        return cmd_occupation(cfg, out_dir)
    except (ConfigError, OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
