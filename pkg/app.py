"""
trafficlab command line
gen / run / train / compare / charts / runs. Each command that produces
output registers itself in the run registry and is marked failed on error.
"""

import argparse
import logging
import sys
from pathlib import Path

from config import Config
from trafficlab import __version__, run_registry
from trafficlab.charts import render_charts
from trafficlab.errors import TrafficLabError
from trafficlab.harness import ExperimentConfig, compare, load_experiment, load_report, run_experiment
from trafficlab.network import CityGenConfig, generate_city, save_network, validate_network
from trafficlab.ppo_config import load_hyperparams
from trafficlab.ppo_trainer import train
from trafficlab.presets import list_presets, load_scenario
from trafficlab.rl_env import TrafficSignalEnv

LOG = logging.getLogger("trafficlab.cli")


# ================================================================== #
#  COMMANDS
# ================================================================== #

def _register(args, kind, name, config_path=None, output_dir=None):
    args.registry_entry = run_registry.add_run(kind, name, config_path, output_dir)
    return args.registry_entry


def cmd_gen(args):
    """Generate a city network and write it as JSON."""
    if args.scenario:
        city = load_scenario(args.scenario).city
    else:
        city = CityGenConfig(scale=args.scale, seed=args.seed, block_layout_index=args.layout)
    out = Path(args.out or Config.OUTPUT_DIR / "networks" / f"{city.scale.value.lower()}_{city.seed}.json")
    run = _register(args, "gen", out.stem, output_dir=out)
    network = generate_city(city)
    report = validate_network(network)
    if not report["ok"]:
        LOG.warning("network validation flagged issues: %s", report)
    save_network(network, out)
    LOG.info("network %s written to %s", network.summary(), out)
    return run, f"{len(network.containers)} containers, {len(network.signals)} signals"


def cmd_run(args):
    """Run an experiment: baseline, policy or fixed-action over seeds."""
    overrides = {
        "scenario": args.scenario,
        "mode": args.mode,
        "seeds": args.seeds,
        "checkpoint": args.checkpoint,
        "output_dir": args.out,
        "hash_every": args.hash_every,
        "workers": args.workers,
    }
    if args.config:
        config = load_experiment(args.config, **overrides)
    else:
        config = ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    if config.hash_every:
        logging.getLogger("trafficlab.engine").setLevel(logging.DEBUG)
    run = _register(args, "run", f"{config.scenario}/{config.mode}", args.config, config.out)
    result = run_experiment(config)
    return run, f"{len(result['seeds'])} seeds in {result['output_dir']}"


def cmd_train(args):
    """Train a PPO policy on a scenario."""
    hp = load_hyperparams(args.config, run_id=args.run_id, seed=args.seed,
                          resume=True if args.resume else None, scenario=args.scenario)
    run_dir = Path(args.out) if args.out else Config.OUTPUT_DIR / "train" / hp.run_id
    run = _register(args, "train", hp.run_id, args.config, run_dir)
    env = TrafficSignalEnv(load_scenario(hp.scenario, seed=hp.seed))
    trainer = train(env, hp, run_dir, args.max_steps)
    return run, f"{trainer.step} steps, {trainer.episodes} episodes"


def cmd_compare(args):
    """Compare a model run directory against a baseline directory."""
    run = _register(args, "compare", f"{Path(args.model).name} vs {Path(args.baseline).name}",
                    output_dir=args.out)
    report = compare(args.baseline, args.model, args.out)
    print(report.summary_text(), end="")
    if args.charts:
        render_charts(report, {"baseline": args.baseline, "model": args.model},
                      Path(args.out) / "charts")
    return run, f"{len(report.rows)} metrics"


def cmd_charts(args):
    """Render charts from a written comparison report."""
    report = load_report(args.report)
    out = Path(args.out or Path(args.report) / "charts")
    paths = render_charts(report, {"baseline": args.baseline, "model": args.model}, out)
    print(f"{len(paths)} charts in {out}")
    return None, ""


def cmd_runs(args):
    """List registered runs, or delete one."""
    if args.delete:
        ok = run_registry.delete_run(args.delete)
        print("deleted" if ok else f"no run {args.delete}")
        return None, ""
    if args.presets:
        print("\n".join(list_presets()))
        return None, ""
    for r in run_registry.list_runs(args.kind):
        print(f"{r['id']}  {r['kind']:<8} {r['status']:<10} {r['created_at'][:19]}  {r['name']}"
              + (f"  ({r['status_message']})" if r["status_message"] else ""))
    return None, ""


# ================================================================== #
#  PARSER
# ================================================================== #

def build_parser():
    parser = argparse.ArgumentParser(prog="trafficlab", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"trafficlab {__version__}")
    parser.add_argument("--log-level", default=Config.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help=cmd_gen.__doc__)
    p.add_argument("--scenario", help="take the city config from a preset")
    p.add_argument("--scale", default="Small", choices=["VerySmall", "Small", "Medium", "Large"])
    p.add_argument("--layout", type=int, default=0, help="block layout index")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help=cmd_run.__doc__)
    p.add_argument("--config", help="experiment YAML (path or name under data/experiments)")
    p.add_argument("--scenario")
    p.add_argument("--mode", choices=["baseline", "policy", "fixed_action"])
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--checkpoint")
    p.add_argument("--out")
    p.add_argument("--hash-every", type=int, help="log the world hash every N ticks")
    p.add_argument("--workers", type=int, help="one seed per worker process")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("train", help=cmd_train.__doc__)
    p.add_argument("--config", required=True, help="trainer YAML (path or name under data/train)")
    p.add_argument("--scenario")
    p.add_argument("--run-id")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help=cmd_compare.__doc__)
    p.add_argument("--baseline", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--charts", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("charts", help=cmd_charts.__doc__)
    p.add_argument("--report", required=True, help="directory holding comparison.csv")
    p.add_argument("--baseline", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_charts)

    p = sub.add_parser("runs", help=cmd_runs.__doc__)
    p.add_argument("--kind", choices=list(run_registry.KINDS))
    p.add_argument("--delete", metavar="RUN_ID")
    p.add_argument("--presets", action="store_true", help="list scenario presets instead")
    p.set_defaults(func=cmd_runs)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s [%(name)s]: %(message)s")
    try:
        run, message = args.func(args)
    except TrafficLabError as e:
        LOG.error("%s failed: %s", args.command, e)
        run = getattr(args, "registry_entry", None)
        if run:
            run_registry.update_run(run["id"], "failed", str(e))
        return 1
    if run:
        run_registry.update_run(run["id"], "completed", message)
        LOG.info("%s %s: %s", args.command, run["id"], message)
    return 0


if __name__ == '__main__':
    sys.exit(main())
