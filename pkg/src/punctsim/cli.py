"""Command line front end.

Subcommands: pretrain, run, eval, compare.  Simulation output goes to
metrics.csv, whose bytes depend only on the configuration and seed;
wall-clock codebook timings live in a timing.csv sidecar so the metrics
file stays comparable across machines.

Exit codes: 0 success, 2 configuration error, 3 checkpoint error.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, default_config, dumps, load_config
from .engine import POLICIES, acl_pretrain, make_world, run_many
from .sac import load_agent, make_agent, save_agent
from .seeding import substream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECKPOINT = 3

METRICS_FIELDS = ("tti", "policy", "reward", "goodput_scs", "goodput_bits",
                  "queue_len", "decode_bitmap", "seed")
TIMING_FIELDS = ("tti", "policy", "gen_ns", "per_branch_us")


def _load(args) -> "SimConfig":
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(run_seed=args.seed)
    if getattr(args, "ttis", None) is not None:
        cfg = cfg.replace(run_ttis=args.ttis)
    if getattr(args, "policy", None) is not None:
        cfg = cfg.replace(run_policy=args.policy)
    return cfg.validate()


def _metrics_row(trace, policy: str, seed: int, cell, mcs_table) -> dict:
    from .core import goodput_bits, goodput_scs
    bitmap = "".join("1" if ok else "0" for ok in trace.outcome.ok)
    return {
        "tti": trace.tti,
        "policy": policy,
        "reward": repr(trace.reward),
        "goodput_scs": goodput_scs(trace.schedule, trace.outcome),
        "goodput_bits": repr(goodput_bits(trace.schedule, trace.outcome,
                                          mcs_table)),
        "queue_len": trace.queue_len,
        "decode_bitmap": bitmap,
        "seed": seed,
    }


def _write_csv(path: Path, fields, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _simulate(cfg, policy: str, agent, train: bool, deterministic: bool):
    cell = cfg.cell()
    world = make_world(cell=cell, traffic_cfg=cfg.traffic(),
                       channel=cfg.channel(), distances=cfg.distances(),
                       decoder=cfg.decoder(), policy=policy,
                       master_seed=cfg.get("run.seed"), agent=agent,
                       hyper=cfg.hyper(), train=train,
                       deterministic_policy=deterministic,
                       pf_beta=cfg.get("scheduler.ewma_beta"))
    traces = run_many(world, cfg.get("run.ttis"))
    return world, traces


def _trace_rows(cfg, policy: str, traces):
    cell = cfg.cell()
    seed = cfg.get("run.seed")
    from .scheduler import DEFAULT_MCS_TABLE
    metrics, timing = [], []
    for tr in traces:
        metrics.append(_metrics_row(tr, policy, seed, cell, DEFAULT_MCS_TABLE))
        if policy == "cyrus":
            branches = cell.num_branches
            timing.append({
                "tti": tr.tti,
                "policy": policy,
                "gen_ns": tr.gen_ns,
                "per_branch_us": f"{tr.gen_ns / 1e3 / branches:.3f}",
            })
    return metrics, timing


def _summary(policy: str, traces) -> str:
    rewards = np.array([t.reward for t in traces])
    decoded = np.array([sum(t.outcome.ok) for t in traces], dtype=float)
    users = len(traces[0].outcome.ok)
    return (f"{policy:6s}  ttis={len(traces)}  mean_reward={rewards.mean():+.4f}"
            f"  decode_rate={decoded.mean() / users:.4f}")


def cmd_pretrain(args) -> int:
    cfg = _load(args)
    cell = cfg.cell()
    init_rng = substream(cfg.get("run.seed"), "agent-init")
    agent = make_agent(cell, cfg.hyper(), init_rng)

    def progress(stage, episode, avg):
        if not args.quiet:
            print(f"stage {stage + 1} episode {episode}: "
                  f"avg reward {avg:+.4f}", flush=True)

    per_stage = acl_pretrain(agent, decoder=cfg.decoder(),
                             stages=cfg.stages(),
                             master_seed=cfg.get("run.seed"),
                             progress=progress)
    out = Path(args.out)
    save_agent(out, agent)
    rows = []
    for si, rewards in enumerate(per_stage):
        for ep, r in enumerate(rewards):
            rows.append({"stage": si + 1, "episode": ep, "reward": repr(float(r))})
    _write_csv(out / "pretrain_rewards.csv", ("stage", "episode", "reward"),
               rows)
    for si, rewards in enumerate(per_stage):
        tail = rewards[-256:]
        print(f"stage {si + 1}: episodes={rewards.size} "
              f"final_avg_reward={np.mean(tail):+.4f}")
    print(f"checkpoint written to {out}")
    return EXIT_OK


def _resolve_agent(cfg, args):
    """Checkpoint if given, else a fresh seeded network."""
    if getattr(args, "checkpoint", None):
        try:
            return load_agent(Path(args.checkpoint), cfg.cell(), cfg.hyper())
        except (FileNotFoundError, ValueError, OSError) as exc:
            raise CheckpointError(str(exc)) from exc
    return None


class CheckpointError(RuntimeError):
    pass


def cmd_run(args, deterministic: bool = False, train: bool = None) -> int:
    cfg = _load(args)
    policy = cfg.get("run.policy")
    agent = _resolve_agent(cfg, args) if policy == "cyrus" else None
    do_train = bool(getattr(args, "train", False)) if train is None else train
    world, traces = _simulate(cfg, policy, agent, train=do_train,
                              deterministic=deterministic)
    metrics, timing = _trace_rows(cfg, policy, traces)
    out = Path(args.out)
    _write_csv(out / "metrics.csv", METRICS_FIELDS, metrics)
    if timing:
        _write_csv(out / "timing.csv", TIMING_FIELDS, timing)
    if getattr(args, "save_checkpoint", None) and world.agent is not None:
        save_agent(Path(args.save_checkpoint), world.agent)
    print(_summary(policy, traces))
    return EXIT_OK


def cmd_eval(args) -> int:
    return cmd_run(args, deterministic=True, train=False)


def cmd_compare(args) -> int:
    cfg = _load(args)
    agent = _resolve_agent(cfg, args)
    out = Path(args.out)
    all_metrics, all_timing = [], []
    for policy in POLICIES:
        cfg_p = cfg.replace(run_policy=policy).validate()
        use_agent = agent if policy == "cyrus" else None
        _, traces = _simulate(cfg_p, policy, use_agent, train=False,
                              deterministic=True)
        metrics, timing = _trace_rows(cfg_p, policy, traces)
        all_metrics.extend(metrics)
        all_timing.extend(timing)
        print(_summary(policy, traces))
    _write_csv(out / "metrics.csv", METRICS_FIELDS, all_metrics)
    if all_timing:
        _write_csv(out / "timing.csv", TIMING_FIELDS, all_timing)
    return EXIT_OK


def cmd_show_config(args) -> int:
    cfg = _load(args)
    sys.stdout.write(dumps(cfg))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="punctsim",
        description="Link-level puncturing simulator and policy trainer.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, policy_flag=True):
        p.add_argument("--config", type=Path, default=None,
                       help="config file; defaults apply when omitted")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed")

    p = sub.add_parser("pretrain", help="curriculum-train a fresh policy")
    common(p)
    p.add_argument("--out", type=Path, required=True,
                   help="checkpoint directory")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_pretrain)

    for name, fn, extra in (("run", cmd_run, True),
                            ("eval", cmd_eval, False)):
        p = sub.add_parser(name, help=f"{name} a policy over the cell")
        common(p)
        p.add_argument("--policy", choices=POLICIES, default=None,
                       help="override run.policy")
        p.add_argument("--ttis", type=int, default=None,
                       help="override run.ttis")
        p.add_argument("--checkpoint", type=Path, default=None,
                       help="policy network directory (cyrus only)")
        p.add_argument("--out", type=Path, required=True,
                       help="directory for metrics.csv / timing.csv")
        if extra:
            p.add_argument("--train", action="store_true",
                           help="keep updating the networks while running")
            p.add_argument("--save-checkpoint", type=Path, default=None,
                           help="write the post-run networks here")
        p.set_defaults(fn=fn)

    p = sub.add_parser("compare",
                       help="run every policy on identical traffic and channel")
    common(p)
    p.add_argument("--ttis", type=int, default=None)
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("show-config", help="print the resolved configuration")
    common(p)
    p.set_defaults(fn=cmd_show_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT


if __name__ == "__main__":
    sys.exit(main())
