"""Command-line entry point: ``ehswitch {schedule,predict,simulate,compare}``.

Exit codes: 0 success, 2 configuration error, 3 infeasible target,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import logging
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig, load_config
from .energy_model import HarvestTrace, loads_traces
from .errors import ConfigError, EHSwitchError, InfeasibleTarget, NumericalFailure
from .power_schedule import write_schedule
from .prediction import PredictionInput, mc_working_time_oracle, mean_working_time
from .sim_engine import monte_carlo, plan_run, run_policies, sample_run, write_work_log

log = logging.getLogger("ehswitch")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4
COMPARE_HEADER = "policy,mean_switches,std_switches,mean_completion_s,n_runs"


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
        cfg.system.rng_seed = args.seed
    if getattr(args, "runs", None) is not None:
        cfg.n_runs = args.runs
    if getattr(args, "policies", None):
        cfg.policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    if getattr(args, "paper_literal_mean", False):
        cfg.paper_literal_mean = True
    # re-run validation after overrides
    return replace(cfg)


def _load_trace_file(path: str, cfg: ExperimentConfig) -> list[HarvestTrace]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read trace file {path}: {exc}") from None
    return loads_traces(text, len(cfg.system.transmitters))


def _plan(args, cfg: ExperimentConfig):
    if args.trace:
        return plan_run(cfg.system, _load_trace_file(args.trace, cfg))
    return sample_run(cfg.system, cfg.master_seed, args.run_index)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_schedule(args) -> int:
    cfg = _config(args)
    plan = _plan(args, cfg)
    buf = io.StringIO()
    buf.write(cfg.provenance() + "\n")
    total = sum(tr.total_energy for tr in plan.traces)
    buf.write(
        f"# T_e_s={plan.target_time:.9f} B_e_Mbit={plan.target_bits:.9f} "
        f"segments={len(plan.schedule)} trace_energy_mJ={total:.6f}\n"
    )
    buf.write("t_start,t_end,power_mW\n")
    write_schedule(plan.schedule, buf)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _config(args)
    txs = {tx.id: tx for tx in cfg.system.transmitters}
    if args.tx not in txs:
        raise ConfigError(f"no transmitter {args.tx} in config")
    tx = txs[args.tx]
    inputs = PredictionInput(args.energy, args.power, tx.lam, tx.dn, tx.up, args.elapsed)
    res = mean_working_time(inputs, paper_literal_mean=cfg.paper_literal_mean, n_max=args.n_max,
                            inner=args.inner)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, args.tx]))
    mean, se = mc_working_time_oracle(inputs, args.samples, rng)
    buf = io.StringIO()
    buf.write(cfg.provenance() + "\n")
    buf.write("n,T_n_s,PP_n,cum_PP,flag\n")
    cum = np.cumsum(res.pp)
    for k in range(res.n_terms):
        flag = "truncated" if res.truncated and k == res.n_terms - 1 else ""
        buf.write(f"{k + 1},{res.terms[k]:.6f},{res.pp[k]:.9f},{cum[k]:.9f},{flag}\n")
    gap = (res.mean_working_time - mean) / mean if mean > 0 else 0.0
    buf.write(f"# mean_working_time_s={res.mean_working_time:.6f} n_terms={res.n_terms} truncated={res.truncated}\n")
    buf.write(f"# oracle_mean_s={mean:.6f} oracle_stderr_s={se:.6f} relative_gap={gap:+.6f}\n")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    plan = _plan(args, cfg)
    results = run_policies(plan, cfg.system, cfg.policies, mode=cfg.mode,
                           paper_literal_mean=cfg.paper_literal_mean)
    buf = io.StringIO()
    buf.write(cfg.provenance() + "\n")
    buf.write(f"# T_e_s={plan.target_time:.9f} B_e_Mbit={plan.target_bits:.9f}\n")
    buf.write("policy,switches,completion_s,bits_Mbit,harvests,termination\n")
    for r in sorted(results, key=lambda r: r.policy):
        buf.write(f"{r.policy},{r.switch_count},{r.completion_time:.6f},{r.bits_sent:.6f},"
                  f"{r.harvest_count},{r.termination}\n")
    sys.stdout.write(buf.getvalue())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(cfg.provenance() + "\n")
            for r in sorted(results, key=lambda r: r.policy):
                fh.write(f"# policy={r.policy}\n")
                fh.write("id,t_start,t_end,power_mW,bits\n")
                write_work_log(r.work_log, fh)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    mc = monte_carlo(cfg.system, cfg.policies, cfg.n_runs, cfg.master_seed, mode=cfg.mode,
                     paper_literal_mean=cfg.paper_literal_mean, workers=args.workers)
    buf = io.StringIO()
    buf.write(cfg.provenance() + "\n")
    buf.write(COMPARE_HEADER + "\n")
    for row in sorted(mc.summary(), key=lambda r: r["policy"]):
        buf.write(f"{row['policy']},{row['mean_switches']:.6f},{row['std_switches']:.6f},"
                  f"{row['mean_completion_s']:.6f},{row['n_runs']}\n")
    _emit(buf.getvalue(), args.out or cfg.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ehswitch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, runs=False):
        p.add_argument("--config", default=None, help="config file (default: bundled paper.config)")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--paper-literal-mean", action="store_true",
                       help="use (up-dn)/2 as the mean harvest in predictions")
        if runs:
            p.add_argument("--runs", type=int, default=None)
            p.add_argument("--policies", default=None, help="comma-separated policy names")
            p.add_argument("--mode", choices=["known", "predicted"], default=None)

    p = sub.add_parser("schedule", help="optimal whole-transmitter power staircase")
    common(p)
    p.add_argument("--run-index", type=int, default=0)
    p.add_argument("--trace", default=None, help="replay a time_s,transmitter_id,amount_mJ file")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("predict", help="working-time predictor diagnostics")
    common(p)
    p.add_argument("--tx", type=int, required=True, help="transmitter id")
    p.add_argument("--energy", type=float, required=True, help="left energy in mJ")
    p.add_argument("--power", type=float, required=True, help="slot power in mW")
    p.add_argument("--elapsed", type=float, default=0.0, help="seconds since last arrival")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--n-max", type=int, default=64)
    p.add_argument("--inner", choices=["quadrature", "closed-form"], default="quadrature")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="one run of each policy on the same traces")
    common(p, runs=True)
    p.add_argument("--run-index", type=int, default=0)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="paired Monte Carlo switch-count comparison")
    common(p, runs=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleTarget as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if exc.energy_mj is not None:
            print(f"  trace energy {exc.energy_mj:.6g} mJ, reachable {exc.reachable_bits:.6g} Mbit,"
                  f" target {exc.target_bits:.6g} Mbit", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EHSwitchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
