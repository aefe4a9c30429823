"""Command-line entry point: ``netgame <command> [options]``.

Every command accepts ``--config FILE --seed INT --out DIR --threads INT``
and writes CSV tables plus a ``<command>.json`` metadata sidecar into the
output directory.  Exit codes: 0 success, 1 unexpected failure, 2 usage,
3 invalid configuration, 4 bad input data, 5 output failure, 6 no
convergence.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ENV_VAR, RunConfig, parse_k_process
from .errors import ConfigError, DataError, NetgameError, OutputError
from .io import DatasetBundle, School, load_dataset, save_dataset, write_csv, write_metadata
from .model import COEF_NAMES, AttributeTable, ModelParameters, NetworkState

_SCENARIO_NAMES = {"full": "full", "no-net": "no_net_data", "fixed-net": "fixed_net",
                   "no-pe": "no_pe", "no-tri": "no_tri"}


# ----------------------------------------------------------------- helpers

class _Ctx:
    """Resolved configuration, output directory and input files of one run."""

    def __init__(self, args, section: str | None = None, **overrides):
        cfg = RunConfig.load(args.config)
        top = {"seed": args.seed, "threads": args.threads}
        cfg = cfg.override(None, **top)
        if section is not None:
            cfg = cfg.override(section, **overrides)
        self.cfg = cfg
        self.out = Path(args.out)
        self.inputs: list[Path] = []
        self.args = args
        if args.config or os.environ.get(ENV_VAR):
            self.inputs.append(Path(args.config or os.environ[ENV_VAR]))
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"cannot create output directory {self.out}: {exc}") from None

    def theta(self) -> ModelParameters:
        path = getattr(self.args, "theta", None)
        if path:
            self.inputs.append(Path(path))
            return read_theta(path)
        if self.cfg["theta"]:
            return self.cfg.theta()
        from .synthetic import RECOVERY_THETA
        return RECOVERY_THETA

    def data(self) -> DatasetBundle:
        d = self.args.data
        if d is None:
            raise ConfigError("this command needs --data DIR (with nodes.csv and edges.csv)")
        d = Path(d)
        nodes, edges = d / "nodes.csv", d / "edges.csv"
        self.inputs += [nodes, edges]
        dc = self.cfg["data"]
        return load_dataset(nodes, edges, directed=dc["directed"],
                            split_by_grade=dc["split_by_grade"])

    def csv(self, name: str, header, rows) -> Path:
        return write_csv(self.out / name, header, rows)

    def meta(self, command: str, **extra):
        write_metadata(self.out / f"{command}.json", self.cfg.seed, self.cfg.data,
                       self.inputs, command=command, version=__version__, **extra)


def read_theta(path) -> ModelParameters:
    """Parameter vector from a JSON mapping, optionally nested under ``"theta"``."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None
    if isinstance(obj, dict) and isinstance(obj.get("theta"), dict):
        obj = obj["theta"]
    if not isinstance(obj, dict):
        raise DataError(f"{path}: expected a JSON object of coefficients")
    try:
        return ModelParameters.from_mapping(obj)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _pick_school(bundle: DatasetBundle, sid: str | None) -> School:
    if sid is None:
        return bundle.schools[0]
    try:
        return bundle.school(sid)
    except KeyError:
        raise DataError(f"no school {sid!r} in the dataset") from None


# ---------------------------------------------------------------- commands

def cmd_gen_data(args) -> int:
    from .synthetic import RECOVERY_PROFILE, CovariateProfile, generate_synthetic
    ctx = _Ctx(args, "data", n_schools=args.n_schools, sizes=args.size,
               burn_in_sweeps=args.burn_in_sweeps)
    dc = ctx.cfg["data"]
    profile = CovariateProfile.from_mapping({**RECOVERY_PROFILE.to_mapping(), **dc["profile"]})
    bundle = generate_synthetic(dc["n_schools"], dc["sizes"], ctx.theta(), profile,
                                seed=ctx.cfg.seed, burn_in_sweeps=dc["burn_in_sweeps"],
                                k_process=parse_k_process(dc["k_process"]), spec=ctx.cfg.spec)
    save_dataset(bundle, ctx.out)
    ctx.meta("gen-data", outputs=["nodes.csv", "edges.csv", "provenance.json"])
    return 0


def cmd_simulate(args) -> int:
    from .dynamics import ChainConfig, run_chain
    ctx = _Ctx(args, "simulate", steps=args.steps, thin=args.thin, mode=args.mode,
               k_process=args.k, start=args.start, school=args.school)
    sc = ctx.cfg["simulate"]
    school = _pick_school(ctx.data(), sc.get("school"))
    theta = ctx.theta()
    n = school.n
    if sc["start"] == "observed":
        S0 = school.S
    elif sc["start"] == "empty":
        S0 = NetworkState.empty(n)
    else:
        S0 = NetworkState.random(n, np.random.default_rng(ctx.cfg.seed))
    chain = ChainConfig(k_process=parse_k_process(sc["k_process"]), steps=sc["steps"],
                        seed=ctx.cfg.seed, mode=sc["mode"], thin=sc["thin"],
                        exact_max_bits=sc["exact_max_bits"])
    try:
        res = run_chain(S0, school.X, theta, chain, ctx.cfg.spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = []
    for r, step in enumerate(res.steps):
        bits = res.states[r]
        rows.append([int(step), "".join(str(int(b)) for b in bits), res.potentials[r],
                     res.prevalence[r], res.rb_prevalence[r],
                     float(bits[n:].mean()) if bits.size > n else 0.0])
    ctx.csv("trajectory.csv", ["step", "state", "potential", "prevalence", "rb_prevalence",
                               "density"], rows)
    extra = {"school_id": school.school_id, "steps_run": int(res.steps_run),
             "theta": theta.to_mapping()}
    if res.converged is not None:
        extra["converged"] = bool(res.converged)
    ctx.meta("simulate", **extra)
    return 0


def _small_table(ctx, n: int | None) -> AttributeTable:
    if ctx.args.data is not None:
        return _pick_school(ctx.data(), ctx.args.school).X
    return AttributeTable.uniform(n)


def cmd_enumerate_eq(args) -> int:
    from .equilibrium import neksn_mask, pairwise_stable_mask
    from .model import as_design
    from .statespace import potential_table
    ctx = _Ctx(args, "enumerate", k=args.k, n=args.n)
    ec = ctx.cfg["enumerate"]
    X = _small_table(ctx, ec.get("n", 3))
    theta = ctx.theta()
    if X.n > 5:
        raise ConfigError("exhaustive enumeration supports n <= 5")
    d = as_design(X, ctx.cfg.spec)
    table = potential_table(d, theta.as_vector())
    try:
        mask = neksn_mask(d, theta, ec["k"], ctx.cfg.spec, table)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    pw = pairwise_stable_mask(d, theta, ctx.cfg.spec, table)
    rows = []
    for idx in np.flatnonzero(mask):
        S = NetworkState.from_index(X.n, int(idx))
        rows.append([int(idx), S.bitstring(), table[idx], bool(pw[idx])])
    ctx.csv("equilibria.csv", ["state_index", "state", "potential", "pairwise_stable"], rows)
    ctx.meta("enumerate-eq", n=X.n, k=ec["k"], count=len(rows), theta=theta.to_mapping())
    return 0


def cmd_spectrum(args) -> int:
    from .dynamics import (one_sided_second_eigenvalue, second_eigenvalue, spectrum_flat,
                           spectrum_numeric)
    ctx = _Ctx(args, "spectrum", n=args.n, k=args.k)
    sc = ctx.cfg["spectrum"]
    n = sc["n"]
    ks = [sc["k"]] if sc.get("k") else list(range(2, n + 1))
    rows = []
    summary = {}
    try:
        for k in ks:
            closed = np.sort(spectrum_flat(n, k))[::-1]
            numeric = np.sort(spectrum_numeric(n, k))[::-1] if n <= 4 else \
                np.full(closed.size, np.nan)
            for r, (c, e) in enumerate(zip(closed, numeric)):
                rows.append([k, r, c, e])
            summary[str(k)] = {"second_eigenvalue": second_eigenvalue(n, k),
                               "one_sided_formula": one_sided_second_eigenvalue(n, k)}
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ctx.csv("spectrum.csv", ["k", "rank", "eigenvalue", "numeric"], rows)
    ctx.meta("spectrum", n=n, ks=ks, summary=summary)
    return 0


def _prior(ctx, data):
    from .estimation import PriorSpec, prior_from_data
    pc = ctx.cfg["estimate"]["prior"]
    base = prior_from_data(data, pc["default_sd"]) if pc["center_intercepts"] else \
        PriorSpec.normal(0.0, pc["default_sd"])
    idx = {c: r for r, c in enumerate(COEF_NAMES)}
    for name, spec in pc["coefficients"].items():
        if "mean" in spec:
            base.mean[idx[name]] = spec["mean"]
        if "sd" in spec:
            base.sd[idx[name]] = spec["sd"]
    return base


def cmd_estimate(args) -> int:
    from .estimation import EstimationConfig, double_mh, posterior_summary, transform
    ctx = _Ctx(args, "estimate", T=args.T, R=args.R, scenario=args.scenario,
               likelihood=args.likelihood)
    ec = ctx.cfg["estimate"]
    bundle = ctx.data()
    data = bundle.pairs()
    init = ec["init"]
    if isinstance(init, dict):
        init = ModelParameters.from_mapping(init).as_vector()
    elif init == "prior":
        init = "prior_mean"
    try:
        cfg = EstimationConfig(
            T=ec["T"], R=ec["R"], k_process=parse_k_process(ec["k_process"]),
            large_step_prob=ec["large_step_prob"], proposal_scale=ec["proposal_scale"],
            adapt=ec["adapt"], target_accept=ec["target_accept"],
            burn_in_frac=ec["burn_in_frac"], seed=ctx.cfg.seed,
            scenario=_SCENARIO_NAMES[ec["scenario"]], init=init,
            likelihood=ec["likelihood"], free=ec.get("free"), clamp=ec.get("clamp", {}))
        chain = double_mh(data, _prior(ctx, data), cfg, ctx.cfg.spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ctx.csv("chain.csv", ["iter", "accepted"] + list(COEF_NAMES) + ["log_prior"],
            ([t, bool(chain.accepted[t])] + list(chain.theta[t]) + [chain.log_prior[t]]
             for t in range(len(chain))))
    levels = [float(x) for x in ec["levels"]]
    summ = posterior_summary(chain, cfg.burn_in_frac, levels)
    header = ["coefficient", "mean"]
    for lv in levels:
        header += [f"lo{100 * lv:g}", f"hi{100 * lv:g}"]
    rows = []
    for r in summ:
        row = [r.coefficient, r.mean]
        for lv in levels:
            row += list(r.intervals[lv])
        rows.append(row)
    ctx.csv("summary.csv", header, rows)
    mean = chain.posterior_mean()
    n_avg = int(round(np.mean([S.n for S, _ in data])))
    tr = transform(mean, n_avg).as_dict()
    ctx.csv("transformed.csv", ["quantity", "value"], [[k, v] for k, v in tr.items()])
    (ctx.out / "posterior_mean.json").write_text(
        json.dumps({"theta": mean.to_mapping()}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    ctx.meta("estimate", acceptance_rate=chain.acceptance_rate(),
             scenario=ec["scenario"], n_networks=len(data))
    return 0


def _fit_rows(model, data_report):
    rows = []
    for (name, mv), (_, dv) in zip(model.as_rows(), data_report.as_rows()):
        rows.append([name, mv, dv])
    return rows


def cmd_fit(args) -> int:
    from .experiments import ScenarioConfig, fit_statistics, simulate_distribution
    ctx = _Ctx(args, "fit", steps=args.steps, thin=args.thin)
    fc = ctx.cfg["fit"]
    bundle = ctx.data()
    theta = ctx.theta()
    sc = ScenarioConfig(replications=1, steps=fc["steps"], thin=fc["thin"],
                        burn_in=fc["burn_in"], k_process=parse_k_process(fc["k_process"]),
                        seed=ctx.cfg.seed)
    ss = np.random.SeedSequence(ctx.cfg.seed)
    states = []
    for school, child in zip(bundle.schools, ss.spawn(len(bundle.schools))):
        smp = simulate_distribution(school.X, theta, "endogenous",
                                    sc.replace(seed=int(child.generate_state(1)[0])),
                                    ctx.cfg.spec, start=school.S)
        states.extend(smp)
    model = fit_statistics(states)
    observed = fit_statistics([s.S for s in bundle.schools])
    ctx.csv("fit.csv", ["statistic", "model", "data"], _fit_rows(model, observed))
    ctx.meta("fit", theta=theta.to_mapping(), n_samples=model.n_samples)
    return 0


def _scenario(ctx, kind):
    from .experiments import ScenarioConfig
    cc = ctx.cfg["counterfact"]
    try:
        return ScenarioConfig(kind=kind, replications=cc["replications"], steps=cc["steps"],
                              thin=cc["thin"], burn_in=cc["burn_in"],
                              k_process=parse_k_process(cc["k_process"]), seed=ctx.cfg.seed,
                              pe_off=cc["pe_off"], targeted=cc["targeted"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_counterfact(args) -> int:
    from .experiments import campaign_experiment, composition_experiment, price_experiment
    ctx = _Ctx(args, "counterfact", replications=args.replications, steps=args.steps)
    cc = ctx.cfg["counterfact"]
    bundle = ctx.data()
    theta = ctx.theta()
    try:
        if args.policy == "price":
            no_pe = cc.get("theta_no_pe")
            table = price_experiment(bundle, theta, cc["increases"], cc["modes"],
                                     _scenario(ctx, "price_shift"), ctx.cfg.spec,
                                     ModelParameters.from_mapping(no_pe) if no_pe else None)
            ctx.csv("price.csv", table.header(), table.rows())
            extra = {"baseline": table.baseline}
        elif args.policy == "mix":
            ids = cc.get("schools") or [s.school_id for s in bundle.schools[:2]]
            if len(bundle.schools) < 2:
                raise DataError("the composition experiment needs two schools")
            A, B = (bundle.school(i) for i in ids)
            res = composition_experiment(A.X, B.X, theta, cc["swap_fractions"],
                                         _scenario(ctx, "composition_swap"), ctx.cfg.spec)
            ctx.csv("composition.csv", res.header(), res.rows())
            ctx.csv("composition_tests.csv", res.test_header(), res.test_rows())
            extra = {"schools": list(ids)}
        else:
            tab = campaign_experiment(bundle, theta, cc["fractions"], _scenario(ctx, "campaign"),
                                      ctx.cfg.spec)
            ctx.csv("campaign.csv", tab.header(), tab.rows())
            extra = {"baseline": tab.baseline}
    except KeyError as exc:
        raise DataError(f"unknown school {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ctx.meta(f"counterfact-{args.policy}", theta=theta.to_mapping(), **extra)
    return 0


# ------------------------------------------------------------------ parser

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help=f"JSON run configuration (default: ${ENV_VAR})")
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, help="cap on worker threads")


def _k_arg(value: str):
    if value == "mixture":
        return value
    try:
        k = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("k must be an integer >= 2 or 'mixture'") from None
    return k


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netgame",
                                description="Strategic network formation with smoking choices")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    g = sub.add_parser("gen-data", help="draw synthetic school networks")
    _common(g)
    g.add_argument("--n-schools", type=int)
    g.add_argument("--size", type=int, help="students per school")
    g.add_argument("--burn-in-sweeps", type=int)
    g.add_argument("--theta", help="JSON file with coefficients")
    g.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("simulate", help="run the consensual dynamics on one school")
    _common(s)
    s.add_argument("--data", help="directory with nodes.csv and edges.csv")
    s.add_argument("--school")
    s.add_argument("--theta")
    s.add_argument("--steps", type=int)
    s.add_argument("--thin", type=int)
    s.add_argument("--k", type=_k_arg)
    s.add_argument("--mode", choices=["perturbed", "deterministic"])
    s.add_argument("--start", choices=["empty", "observed", "random"])
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("enumerate-eq", help="list the k-player stable equilibria (n <= 5)")
    _common(e)
    e.add_argument("--data")
    e.add_argument("--school")
    e.add_argument("--theta")
    e.add_argument("--n", type=int, help="uniform-covariate network size without --data")
    e.add_argument("--k", type=int)
    e.set_defaults(func=cmd_enumerate_eq)

    sp = sub.add_parser("spectrum", help="eigenvalues of the flat-potential dynamics")
    _common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--k", type=int)
    sp.set_defaults(func=cmd_spectrum)

    es = sub.add_parser("estimate", help="posterior sampling by double Metropolis-Hastings")
    _common(es)
    es.add_argument("--data")
    es.add_argument("--T", type=int)
    es.add_argument("--R", type=int)
    es.add_argument("--scenario", choices=list(_SCENARIO_NAMES))
    es.add_argument("--likelihood", choices=["double_mh", "exact", "none"])
    es.set_defaults(func=cmd_estimate)

    f = sub.add_parser("fit", help="model versus data descriptive statistics")
    _common(f)
    f.add_argument("--data")
    f.add_argument("--theta", help="JSON coefficients, e.g. posterior_mean.json")
    f.add_argument("--steps", type=int)
    f.add_argument("--thin", type=int)
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("counterfact", help="policy experiments")
    _common(c)
    c.add_argument("policy", choices=["price", "mix", "campaign"])
    c.add_argument("--data")
    c.add_argument("--theta")
    c.add_argument("--replications", type=int)
    c.add_argument("--steps", type=int)
    c.set_defaults(func=cmd_counterfact)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is not None and args.threads < 1:
        print("netgame: usage: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return int(args.func(args) or 0)
    except NetgameError as exc:
        print(f"netgame: {exc.category} error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"netgame: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
