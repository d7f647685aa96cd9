"""Command-line front end: rank tables, analytic metrics, simulation, sweeps.

Subcommands:
  rank      tabulate rank functions and age cutoffs as CSV
  mg1       analytic single-server metrics and the k-server bound, one CSV row
  simulate  run the event simulator (optionally the coupled 1-vs-k mode)
  sweep     (policy, rho, k) grid: analytics, bound, simulation, Gittins ratio
  verify    run the cross-module invariant matrix and report pass/fail

Exit codes: 0 success, 1 invariant failure, 2 parse error, 3 invalid config.
All floats print with 17 significant digits so repeated runs are
byte-identical. Every random quantity derives from --seed. SOAP_MGK_THREADS
caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import distributions as dl
from . import mg1, rank, sim
from .errors import ConfigError, SoapmgkError, SpecParseError

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_PARSE = 2
EXIT_CONFIG = 3


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.17g}"
    return str(v)


def _row(values) -> str:
    return ",".join(_fmt(v) for v in values)


# -- distribution spec strings ----------------------------------------------------


def parse_dist(spec: str) -> dl.SizeDistribution:
    """Parse a distribution spec like exp(rate=1) or hyperexp(p=0.9:0.1,mu=2:0.05)."""
    spec = spec.strip()
    if "(" not in spec or not spec.endswith(")"):
        raise SpecParseError(f"malformed distribution spec {spec!r}")
    name, _, body = spec.partition("(")
    name = name.strip().lower()
    body = body[:-1]
    kwargs = {}
    if body.strip():
        for part in body.split(","):
            if "=" not in part:
                raise SpecParseError(f"expected key=value in {part!r}")
            key, _, val = part.partition("=")
            key = key.strip()
            vals = val.split(":")
            try:
                parsed = [float(v) for v in vals]
            except ValueError as e:
                raise SpecParseError(f"non-numeric value in {part!r}") from e
            kwargs[key] = parsed if len(parsed) > 1 else parsed[0]
    try:
        if name in ("exp", "exponential"):
            return dl.Exponential(rate=kwargs["rate"])
        if name == "uniform":
            return dl.Uniform(lo=kwargs["lo"], hi=kwargs["hi"])
        if name == "pareto":
            return dl.Pareto(xm=kwargs["xm"], alpha=kwargs["alpha"])
        if name == "boundedpareto":
            return dl.BoundedPareto(
                xm=kwargs["xm"], alpha=kwargs["alpha"], xmax=kwargs["xmax"]
            )
        if name == "hyperexp":
            p = kwargs["p"]
            mu = kwargs["mu"]
            p = p if isinstance(p, list) else [p]
            mu = mu if isinstance(mu, list) else [mu]
            return dl.Hyperexponential(probs=tuple(p), rates=tuple(mu))
        if name == "weibull":
            return dl.Weibull(shape=kwargs["shape"], scale=kwargs["scale"])
        if name == "pointmass":
            a = kwargs["atoms"]
            w = kwargs["weights"]
            a = a if isinstance(a, list) else [a]
            w = w if isinstance(w, list) else [w]
            return dl.PointMassMixture(atoms=tuple(a), weights=tuple(w))
    except KeyError as e:
        raise SpecParseError(f"missing parameter {e} for {name!r}") from None
    except ValueError as e:
        raise ConfigError(str(e)) from None
    raise SpecParseError(f"unknown distribution family {name!r}")


def _load_config_file(path: str) -> dict:
    """Optional key=value file; command-line flags win over file entries."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SpecParseError(f"expected key=value line, got {line!r}")
            key, _, val = line.partition("=")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _apply_config_file(args, parser_defaults):
    if not getattr(args, "config", None):
        return args
    file_vals = _load_config_file(args.config)
    for key, raw in file_vals.items():
        if not hasattr(args, key):
            raise SpecParseError(f"unknown config key {key!r}")
        if getattr(args, key) == parser_defaults.get(key):
            default = parser_defaults.get(key)
            if isinstance(default, bool):
                val = raw.lower() in ("1", "true", "yes")
            elif isinstance(default, int) and default is not None:
                val = int(raw)
            elif isinstance(default, float) and default is not None:
                val = float(raw)
            else:
                val = raw
            setattr(args, key, val)
    return args


def _parse_floats(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_policies(text: str):
    pols = [p.strip().lower() for p in text.split(",") if p.strip()]
    for p in pols:
        if p not in sim.SIM_POLICIES:
            raise ConfigError(f"unknown policy {p!r}")
    return pols


def _lam_list(dist, args):
    if args.rho:
        return [(mg1.lam_for_rho(dist, r), r) for r in _parse_floats(args.rho)]
    if args.lam:
        out = []
        for lam in _parse_floats(args.lam):
            rho = lam * dist.mean
            if rho >= 1:
                raise ConfigError(f"lambda {lam} gives rho {rho} >= 1")
            out.append((lam, rho))
        return out
    raise ConfigError("need --rho or --lambda")


def _write(path, lines):
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# -- subcommands ----------------------------------------------------------------


def cmd_rank(args) -> int:
    dist = parse_dist(args.dist)
    policies = _parse_policies(args.policies)
    if "srpt" in policies:
        raise ConfigError("srpt has no age-based rank function")
    n = args.grid_points
    hi = args.max_age if args.max_age else dist.x_trunc
    import numpy as np

    ages = np.concatenate([[0.0], np.geomspace(hi * 1e-6, hi, n - 1)])
    fns = {p: rank.build_rank_function(p, dist) for p in policies}
    header = "age," + ",".join(f"rank_{p.replace('-', '')}" for p in policies)
    lines = [header]
    for a in ages:
        lines.append(_row([a] + [float(fns[p](a)) for p in policies]))
    _write(args.output, lines)

    sizes = np.geomspace(max(hi * 1e-4, 1e-6), hi, args.cutoff_points)
    for p in policies:
        if p not in rank.MONOTONE_POLICIES:
            continue
        lines = ["size,y,z"]
        for x in sizes:
            c = fns[p].cutoffs(float(x))
            lines.append(_row([x, c.y, c.z]))
        if args.output == "-":
            _write("-", lines)
        else:
            stem, dot, ext = args.output.rpartition(".")
            base = stem if dot else args.output
            ext = ext if dot else "csv"
            _write(f"{base}_cutoffs_{p.replace('-', '')}.{ext}", lines)
    return EXIT_OK


MG1_HEADER = "policy,dist,lambda,rho,Q,R,S,T,Qa,Qb,Rb,Rc,Sb,Sc,bound_k"


def _mg1_row(policy, dist, lam, rho, k):
    rf = rank.build_rank_function(policy, dist)
    met = mg1.mg1_metrics(rf, dist, lam)
    kq = mg1.key_quantities(rf, dist, lam)
    bound = mg1.mgk_bound(rf, dist, lam, k)
    return _row(
        [
            policy, dist.spec_string(), lam, rho,
            met.Q, met.R, met.S, met.T,
            kq.Qa, kq.Qb, kq.Rb, kq.Rc, kq.Sb, kq.Sc,
            bound.total,
        ]
    )


def cmd_mg1(args) -> int:
    dist = parse_dist(args.dist)
    policies = _parse_policies(args.policies)
    lines = [MG1_HEADER]
    for policy in policies:
        if policy not in rank.MONOTONE_POLICIES:
            raise ConfigError(f"analytic metrics need a monotone policy, not {policy!r}")
        for lam, rho in _lam_list(dist, args):
            lines.append(_mg1_row(policy, dist, lam, rho, args.k))
    _write(args.output, lines)
    return EXIT_OK


SIM_HEADER = "policy,dist,lambda,rho,k,n_jobs,seed,mean_T,ci_half,max_delta,delta_bound"


def cmd_simulate(args) -> int:
    dist = parse_dist(args.dist)
    policies = _parse_policies(args.policies)
    lines = [SIM_HEADER]
    for policy in policies:
        for lam, rho in _lam_list(dist, args):
            cfg = sim.SimConfig(
                dist=dist, lam=lam, k=args.k, policy=policy,
                n_jobs=args.n_jobs, seed=args.seed, quantum=args.quantum,
            )
            if args.coupled_x is not None:
                tr = sim.run_coupled(cfg, args.coupled_x, n_events=args.coupled_events)
                lines.append(
                    _row([policy, dist.spec_string(), lam, rho, args.k,
                          args.n_jobs, args.seed, "", "", tr.max_delta, tr.bound])
                )
            else:
                rep = sim.run(cfg)
                lines.append(
                    _row([policy, dist.spec_string(), lam, rho, args.k,
                          args.n_jobs, args.seed, rep.mean_T, rep.ci_half, "", ""])
                )
    _write(args.output, lines)
    return EXIT_OK


SWEEP_HEADER = (
    "policy,dist,lambda,rho,k,n_jobs,seed,Q,R,S,T,bound,mean_T,ci_half,ratio_gittins1"
)


def _sweep_cell(payload):
    spec, policy, lam, rho, k, n_jobs, seed, quantum = payload
    dist = parse_dist(spec)
    cfg = sim.SimConfig(
        dist=dist, lam=lam, k=k, policy=policy, n_jobs=n_jobs, seed=seed,
        quantum=quantum,
    )
    rep = sim.run(cfg)
    if policy in rank.MONOTONE_POLICIES:
        rf = rank.build_rank_function(policy, dist)
        met = mg1.mg1_metrics(rf, dist, lam)
        bound = mg1.mgk_bound(rf, dist, lam, k).total
        return (met.Q, met.R, met.S, met.T, bound, rep.mean_T, rep.ci_half)
    return (math.nan, math.nan, math.nan, math.nan, math.nan, rep.mean_T, rep.ci_half)


def cmd_sweep(args) -> int:
    dist = parse_dist(args.dist)
    policies = _parse_policies(args.policies)
    loads = _lam_list(dist, args)
    rhos = [r for _, r in loads]
    if rhos != sorted(rhos):
        raise ConfigError("rho list must be ascending")
    ks = [int(v) for v in _parse_floats(args.k_list)]
    cells = []
    baselines = {}
    for lam, rho in loads:
        baselines[rho] = (
            dist.spec_string(), "gittins", lam, rho, 1, args.n_jobs, args.seed,
            args.quantum,
        )
    for policy in policies:
        for lam, rho in loads:
            for k in ks:
                cells.append(
                    (dist.spec_string(), policy, lam, rho, k, args.n_jobs,
                     args.seed, args.quantum)
                )
    jobs = args.jobs
    cap = os.environ.get("SOAP_MGK_THREADS")
    if cap:
        jobs = min(jobs, max(1, int(cap)))
    work = list(baselines.values()) + cells
    failures = 0
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell_safe, work))
    else:
        results = [_sweep_cell_safe(w) for w in work]
    base_T = {}
    for payload, res in zip(work[: len(baselines)], results[: len(baselines)]):
        rho = payload[3]
        if isinstance(res, str):
            failures += 1
            base_T[rho] = math.nan
        else:
            base_T[rho] = res[5]
    lines = [SWEEP_HEADER]
    for payload, res in zip(work[len(baselines):], results[len(baselines):]):
        spec, policy, lam, rho, k, n_jobs, seed, _ = payload
        if isinstance(res, str):
            failures += 1
            sys.stderr.write(f"cell failed: {policy} rho={rho} k={k}: {res}\n")
            continue
        Q, R, S, T, bound, mean_T, ci = res
        ratio = mean_T / base_T[rho] if base_T.get(rho) else math.nan
        lines.append(
            _row([policy, spec, lam, rho, k, n_jobs, seed,
                  Q, R, S, T, bound, mean_T, ci, ratio])
        )
    _write(args.output, lines)
    return EXIT_INVARIANT if failures else EXIT_OK


def _sweep_cell_safe(payload):
    try:
        return _sweep_cell(payload)
    except SoapmgkError as e:
        return f"{type(e).__name__}: {e}"


def cmd_verify(args) -> int:
    from .verify import run_verification

    dists = [parse_dist(s) for s in args.dists.split(";") if s.strip()]
    policies = _parse_policies(args.policies) if args.policies else list(
        rank.MONOTONE_POLICIES
    )
    if not dists or not policies:
        raise ConfigError("verification matrix is empty")
    rhos = _parse_floats(args.rho) if args.rho else [0.5, 0.8]
    results = run_verification(dists, policies, rhos, inject_fault=args.inject_fault)
    width = max(len(name) for name, _, _ in results)
    all_ok = True
    for name, ok, detail in results:
        status = "pass" if ok else "FAIL"
        print(f"{name:<{width}}  {status}  {detail}")
        all_ok &= ok
    return EXIT_OK if all_ok else EXIT_INVARIANT


# -- argument wiring ----------------------------------------------------------------


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="soapmgk",
        description="Scheduling-policy analysis and M/G/k simulation toolkit",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--dist", required=True, help="distribution spec, e.g. exp(rate=1)")
        p.add_argument("--config", default=None, help="optional key=value config file")
        p.add_argument("--output", "-o", default="-", help="output CSV path (- for stdout)")

    p = sub.add_parser("rank", help="tabulate rank functions and age cutoffs")
    common(p)
    p.add_argument("--policies", "--policy", default="serpt,m-serpt,gittins,m-gittins")
    p.add_argument("--grid-points", type=int, default=200)
    p.add_argument("--cutoff-points", type=int, default=50)
    p.add_argument("--max-age", type=float, default=None)

    p = sub.add_parser("mg1", help="analytic single-server metrics")
    common(p)
    p.add_argument("--policies", "--policy", default="m-serpt")
    p.add_argument("--rho", default=None, help="comma list of loads")
    p.add_argument("--lambda", dest="lam", default=None, help="comma list of rates")
    p.add_argument("--k", type=int, default=1)

    p = sub.add_parser("simulate", help="event-driven simulation")
    common(p)
    p.add_argument("--policies", "--policy", default="m-serpt")
    p.add_argument("--rho", default=None)
    p.add_argument("--lambda", dest="lam", default=None)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--n-jobs", type=int, default=125_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quantum", type=float, default=None)
    p.add_argument("--coupled-x", type=float, default=None,
                   help="run the coupled 1-vs-k mode for this tagged size")
    p.add_argument("--coupled-events", type=int, default=None)

    p = sub.add_parser("sweep", help="grid of (policy, rho, k) cells")
    common(p)
    p.add_argument("--policies", "--policy", default="m-serpt,m-gittins")
    p.add_argument("--rho", default="0.5,0.8", help="ascending comma list")
    p.add_argument("--lambda", dest="lam", default=None)
    p.add_argument("--k-list", default="1")
    p.add_argument("--n-jobs", type=int, default=125_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quantum", type=float, default=None)
    p.add_argument("--jobs", type=int, default=1, help="parallel cells (capped by SOAP_MGK_THREADS)")

    p = sub.add_parser("verify", help="run the cross-module invariant matrix")
    p.add_argument("--dists", default="exp(rate=1);boundedpareto(xm=1,alpha=1.5,xmax=100)",
                   help="semicolon-separated distribution specs")
    p.add_argument("--policies", default=None)
    p.add_argument("--rho", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--inject-fault", action="store_true",
                   help="negative control: flip a sign in the identity check")
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_PARSE if e.code not in (0, None) else 0
    defaults = {a.dest: a.default for a in ap._actions}
    try:
        args = _apply_config_file(args, defaults)
        if args.command == "rank":
            return cmd_rank(args)
        if args.command == "mg1":
            return cmd_mg1(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "verify":
            return cmd_verify(args)
        return EXIT_PARSE
    except SpecParseError as e:
        sys.stderr.write(f"parse error: {e}\n")
        return EXIT_PARSE
    except (ConfigError, OverflowError) as e:
        sys.stderr.write(f"invalid config: {e}\n")
        return EXIT_CONFIG
    except SoapmgkError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
