"""Command-line front end.

Every command resolves its configuration (defaults, then config file,
then flags), serializes it into the output directory before doing any
work, and writes machine-readable outputs there. CSV and summary JSON
outputs are deterministic given a seed; measured wall times go to a
separate timing.json. Exit codes: 0 success, 1 runtime failure, 2 usage.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bundled_airfoil_dir, __version__
from .aero import CountingSolver, FlowConditions, SolverConfig
from .env import AirfoilEnv, EnvConfig
from .errors import EmptyEvalError, FoilRlError
from .evaluate import (
    compare_report,
    evaluate_policy,
    load_dataset,
    pareto_front,
    read_records_csv,
    write_comparison_csv,
    write_pareto_csv,
    write_records_csv,
    write_summary_json,
)
from .geometry import fit_cst, read_dat
from .nets import AgentCheckpoint, AdamState, Mlp, Policy, load_checkpoint, save_checkpoint
from .plotting import write_svg_lines, write_svg_scatter
from .ppo import PRESETS, PpoConfig, preset, train
from .pso import PsoConfig, pso_optimize_airfoil
from .transfer import TlStrategy, finetune, time_reduction, write_ledger_json

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "env": {
        "sigma": 0.0,
        "fidelity": "low",
        "episode_max_length": 100,
    },
    "flow": {"angle_of_attack_deg": 2.0, "reynolds": 1e6, "mach": 0.5},
    "solver": {
        "high": {
            "panel_count": 255,
            "max_iterations": 200,
            "timeout_s": 30.0,
            "nominal_cost_ms": 73.0,
        },
        "low": {
            "panel_count": 255,
            "max_iterations": 200,
            "timeout_s": 30.0,
            "nominal_cost_ms": 4.0,
        },
    },
    "ppo": {"preset": "from-scratch", "total_timesteps": None, "n_envs": 1},
    "pso": {
        "swarm_size": 30,
        "max_iterations": 700,
        "inertia": 0.729,
        "cognitive": 1.49,
        "social": 1.49,
        "velocity_clamp": 0.2,
        "thickness_tolerance": None,
    },
    "eval": {"dataset": None, "deterministic": True},
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _load_config(path: str | None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        cfg = _deep_merge(cfg, json.loads(Path(path).read_text()))
    return cfg


def _out_dir(args, command: str) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        root = os.environ.get("FOILRL_OUT_ROOT", "runs")
        out = Path(root) / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved(out: Path, cfg: dict) -> None:
    (out / "resolved_config.json").write_text(
        json.dumps(cfg, indent=1, sort_keys=True) + "\n"
    )


def _solver_config(cfg: dict, fidelity: str) -> SolverConfig:
    section = cfg["solver"][fidelity]
    return SolverConfig(
        panel_count=int(section["panel_count"]),
        max_iterations=int(section["max_iterations"]),
        timeout_s=float(section["timeout_s"]),
        fidelity=fidelity,
        nominal_cost_ms=float(section["nominal_cost_ms"]),
    )


def _env_config(cfg: dict, fidelity: str | None = None, sigma: float | None = None) -> EnvConfig:
    env = cfg["env"]
    fid = fidelity if fidelity is not None else env["fidelity"]
    return EnvConfig(
        sigma=float(sigma if sigma is not None else env["sigma"]),
        fidelity=fid,
        episode_max_length=int(env["episode_max_length"]),
        flow=FlowConditions(**cfg["flow"]),
        solver_config=_solver_config(cfg, fid),
        rng_seed=int(cfg["seed"]),
    )


def _ppo_config(cfg: dict, preset_name: str, timesteps: int | None) -> PpoConfig:
    overrides = {}
    if timesteps is not None:
        overrides["total_timesteps"] = int(timesteps)
    elif cfg["ppo"].get("total_timesteps"):
        overrides["total_timesteps"] = int(cfg["ppo"]["total_timesteps"])
    overrides["n_envs"] = int(cfg["ppo"].get("n_envs", 1))
    return preset(preset_name, **overrides)


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    if args.sigma is not None:
        cfg["env"]["sigma"] = args.sigma
    if args.solver is not None:
        cfg["env"]["fidelity"] = args.solver
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.n_envs is not None:
        cfg["ppo"]["n_envs"] = args.n_envs
    cfg["ppo"]["preset"] = args.preset

    out = _out_dir(args, "train")
    env_config = _env_config(cfg)
    ppo_config = _ppo_config(cfg, args.preset, args.timesteps)
    cfg["ppo"]["total_timesteps"] = ppo_config.total_timesteps
    _write_resolved(out, cfg)

    result = train(
        env_config,
        ppo_config,
        seed=int(cfg["seed"]),
        checkpoint_path=out / "checkpoint.ckpt",
        log_path=out / "training_log.csv",
    )
    if args.svg:
        rows = result.log_rows
        write_svg_lines(
            out / "reward_curve.svg",
            {"mean episode reward": (
                np.array([r["timesteps"] for r in rows]),
                np.array([r["mean_episode_reward"] for r in rows]),
            )},
            title="Training reward",
            xlabel="timesteps",
            ylabel="mean episode reward",
        )
    print(
        f"trained {result.total_steps} steps "
        f"(solver calls {result.solver_calls}, nominal {result.nominal_cost_s:.1f}s); "
        f"outputs in {out}"
    )
    return 0


def cmd_finetune(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.high_cost_ms is not None:
        cfg["solver"]["high"]["nominal_cost_ms"] = args.high_cost_ms
    if args.low_cost_ms is not None:
        cfg["solver"]["low"]["nominal_cost_ms"] = args.low_cost_ms
    out = _out_dir(args, "finetune")
    source = load_checkpoint(args.source)
    env_config = _env_config(cfg, fidelity="high", sigma=args.sigma)
    ppo_config = _ppo_config(cfg, "finetune", args.timesteps)
    cfg["ppo"]["preset"] = "finetune"
    cfg["ppo"]["total_timesteps"] = ppo_config.total_timesteps
    _write_resolved(out, cfg)

    fres = finetune(
        source,
        TlStrategy(args.strategy),
        env_config,
        ppo_config,
        seed=int(cfg["seed"]),
        checkpoint_path=out / "checkpoint.ckpt",
        log_path=out / "training_log.csv",
    )
    ledger = fres.ledger
    if args.low_cost_ms is not None:
        from .transfer import CostLedger

        ledger = CostLedger(
            ledger.pretrain_calls, args.low_cost_ms,
            ledger.finetune_calls, ledger.finetune_cost_ms_per_call,
        )
    tl_free_cost_s = args.tl_free_steps * env_config.solver_config.nominal_cost_ms / 1000.0
    write_ledger_json(out / "cost_ledger.json", ledger, tl_free_cost_s)
    tr = time_reduction(tl_free_cost_s, ledger.total_cost_s)
    print(
        f"fine-tuned strategy #{int(fres.strategy)}: "
        f"pretrain {ledger.pretrain_cost_s:.1f}s + finetune {ledger.finetune_cost_s:.1f}s "
        f"vs baseline {tl_free_cost_s:.1f}s -> time reduction {tr:.1f}%"
    )
    return 0


def cmd_optimize(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = _out_dir(args, "optimize")
    ckpt = load_checkpoint(args.checkpoint)
    _, coords = read_dat(args.airfoil)
    params, residual = fit_cst(coords)
    env_config = _env_config(cfg, fidelity="high", sigma=ckpt.sigma)
    _write_resolved(out, cfg)

    env = AirfoilEnv(env_config, np.random.default_rng(int(cfg["seed"])))
    solve_t0 = time.perf_counter()
    obs = env.reset(params)
    solver_s = time.perf_counter() - solve_t0

    rows = [{
        "step": 0,
        "cl": float("nan"),
        "cd": float("nan"),
        "ratio": env.state.prev_term,
        "mt": env.state.mt0,
        "kappa": 1.0,
        "lambda": 1.0,
        **{f"p{i}": env.state.params[i] for i in range(18)},
    }]
    inference_s = 0.0
    best_ratio = env.state.prev_term
    best_params = env.state.params.copy()
    while True:
        t0 = time.perf_counter()
        action = ckpt.actor.mean(obs[None, :])[0]
        inference_s += time.perf_counter() - t0
        t0 = time.perf_counter()
        outcome = env.step(action)
        solver_s += time.perf_counter() - t0
        if "ratio" in outcome.info:
            rows.append({
                "step": len(rows),
                "cl": outcome.info["cl"],
                "cd": outcome.info["cd"],
                "ratio": outcome.info["ratio"],
                "mt": outcome.info["mt"],
                "kappa": outcome.info["kappa"],
                "lambda": outcome.info["lambda"],
                **{f"p{i}": env.state.params[i] for i in range(18)},
            })
            if outcome.info["ratio"] > best_ratio:
                best_ratio = outcome.info["ratio"]
                best_params = env.state.params.copy()
        if outcome.terminated:
            break
        obs = outcome.observation

    import csv as _csv

    cols = ["step", "cl", "cd", "ratio", "mt", "kappa", "lambda"] + [f"p{i}" for i in range(18)]
    with open(out / "trace.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([row["step"]] + [f"{row[c]:.10g}" for c in cols[1:]])
    (out / "metrics.json").write_text(json.dumps({
        "airfoil": Path(args.airfoil).stem,
        "fit_residual": residual,
        "initial_ratio": rows[0]["ratio"],
        "best_ratio": best_ratio,
        "improvement": best_ratio - rows[0]["ratio"],
        "episode_length": len(rows) - 1,
        "best_params": best_params.tolist(),
    }, indent=1, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps({
        "inference_s": inference_s,
        "solver_metric_s": solver_s,
    }, indent=1, sort_keys=True) + "\n")
    print(
        f"optimized {Path(args.airfoil).stem}: ratio {rows[0]['ratio']:.1f} -> {best_ratio:.1f} "
        f"(inference {inference_s*1e3:.1f} ms, solver metrics {solver_s:.2f} s)"
    )
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = _out_dir(args, "evaluate")
    ckpt = load_checkpoint(args.checkpoint)
    dataset_dir = args.dataset or cfg["eval"]["dataset"] or bundled_airfoil_dir()
    _write_resolved(out, cfg)

    dataset = load_dataset(dataset_dir)
    if not dataset:
        raise EmptyEvalError(f"no usable coordinate files in {dataset_dir}")
    env_config = _env_config(cfg, fidelity="high", sigma=ckpt.sigma)
    t0 = time.perf_counter()
    records, summary = evaluate_policy(
        ckpt, dataset, env_config,
        deterministic=not args.sample,
        rng=np.random.default_rng(int(cfg["seed"])),
    )
    wall = time.perf_counter() - t0
    write_records_csv(out / "records.csv", records)
    write_summary_json(out / "summary.json", summary, {"sigma": ckpt.sigma})
    (out / "timing.json").write_text(json.dumps({
        "wall_s_total": wall,
        "wall_s_per_airfoil": wall / max(len(records), 1),
    }, indent=1, sort_keys=True) + "\n")
    if args.svg:
        ok = [r for r in records if r.converged]
        write_svg_scatter(
            out / "best_vs_initial.svg",
            {"airfoils": (
                np.array([r.initial_ratio for r in ok]),
                np.array([r.best_ratio for r in ok]),
            )},
            title="Best vs initial lift-to-drag",
            xlabel="initial cl/cd",
            ylabel="best cl/cd",
        )
    print(
        f"evaluated {summary.n_evaluated} airfoils ({summary.n_excluded} excluded): "
        f"improvement {summary.improvement_mean:.1f} +- {summary.improvement_std:.1f}, "
        f"best median {summary.best_median:.1f} (IQR {summary.best_iqr:.1f}), "
        f"dMT {summary.delta_mt_mean:.1f}%"
    )
    return 0


def cmd_pso(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.swarm is not None:
        cfg["pso"]["swarm_size"] = args.swarm
    if args.iterations is not None:
        cfg["pso"]["max_iterations"] = args.iterations
    if args.keep_thickness is not None:
        cfg["pso"]["thickness_tolerance"] = args.keep_thickness
    out = _out_dir(args, "pso")
    _, coords = read_dat(args.airfoil)
    params, _ = fit_cst(coords)
    _write_resolved(out, cfg)

    solver = CountingSolver("high", FlowConditions(**cfg["flow"]), _solver_config(cfg, "high"))
    pso_config = PsoConfig(**cfg["pso"])
    t0 = time.perf_counter()
    result = pso_optimize_airfoil(
        params, solver, pso_config, np.random.default_rng(int(cfg["seed"]))
    )
    wall = time.perf_counter() - t0

    import csv as _csv

    with open(out / "trace.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["iteration", "gbest_fitness"])
        for i, fit in enumerate(result.trace, start=1):
            writer.writerow([i, f"{fit:.10g}"])
    (out / "result.json").write_text(json.dumps({
        "airfoil": Path(args.airfoil).stem,
        "best_fitness": result.best_fitness,
        "best_params": result.best_params.tolist(),
        "solver_calls": result.n_evaluations,
        "nominal_cost_s": result.n_evaluations * solver.cfg.nominal_cost_ms / 1000.0,
    }, indent=1, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps({"wall_s": wall}, indent=1, sort_keys=True) + "\n")
    print(
        f"pso on {Path(args.airfoil).stem}: best cl/cd {result.best_fitness:.1f} "
        f"in {result.n_evaluations} solver calls ({wall:.1f} s)"
    )
    return 0


def cmd_compare(args) -> int:
    out = _out_dir(args, "compare")
    drl = read_records_csv(args.drl)
    pso_records = read_records_csv(args.pso)
    rows, aggregate = compare_report(drl, pso_records)
    write_comparison_csv(out / "comparison.csv", rows)
    (out / "comparison_summary.json").write_text(
        json.dumps(aggregate, indent=1, sort_keys=True) + "\n"
    )
    if args.sweep:
        points = []
        for path in args.sweep:
            payload = json.loads(Path(path).read_text())
            points.append({
                "sigma": payload["sigma"],
                "delta_mt": payload["delta_mt_mean"],
                "best": payload["best_median"],
            })
        flagged = pareto_front(points)
        write_pareto_csv(out / "pareto.csv", flagged)
        if args.svg:
            front = [p for p in flagged if p["on_front"]]
            rest = [p for p in flagged if not p["on_front"]]
            groups = {}
            if front:
                groups["front"] = (
                    np.array([p["delta_mt"] for p in front]),
                    np.array([p["best"] for p in front]),
                )
            if rest:
                groups["dominated"] = (
                    np.array([p["delta_mt"] for p in rest]),
                    np.array([p["best"] for p in rest]),
                )
            write_svg_scatter(
                out / "pareto.svg", groups,
                title="Aerodynamic best vs thickness deviation",
                xlabel="delta MT (%)", ylabel="best cl/cd",
            )
    print(
        f"compared {aggregate['n_common']} airfoils: "
        f"drl wins {aggregate['drl_wins']}, pso wins {aggregate['pso_wins']}, "
        f"ties {aggregate['ties']}"
    )
    return 0


def cmd_export_weights(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    arrays = {}
    for k, (w, b) in enumerate(zip(ckpt.actor.net.weights, ckpt.actor.net.biases)):
        arrays[f"actor_w{k}"] = w
        arrays[f"actor_b{k}"] = b
    arrays["actor_log_std"] = ckpt.actor.log_std
    for k, (w, b) in enumerate(zip(ckpt.critic.weights, ckpt.critic.biases)):
        arrays[f"critic_w{k}"] = w
        arrays[f"critic_b{k}"] = b
    meta = {
        "train_steps": ckpt.train_steps,
        "env_config_hash": ckpt.env_config_hash,
        "sigma": ckpt.sigma,
        "fidelity": ckpt.fidelity,
    }
    np.savez(args.out, meta=json.dumps(meta, sort_keys=True), **arrays)
    print(f"exported weights to {args.out}")
    return 0


def cmd_import_weights(args) -> int:
    data = np.load(args.weights, allow_pickle=False)
    meta = json.loads(str(data["meta"]))
    n_actor = sum(1 for k in data.files if k.startswith("actor_w"))
    n_critic = sum(1 for k in data.files if k.startswith("critic_w"))
    actor = Policy(
        Mlp(
            [data[f"actor_w{k}"] for k in range(n_actor)],
            [data[f"actor_b{k}"] for k in range(n_actor)],
        ),
        data["actor_log_std"],
    )
    critic = Mlp(
        [data[f"critic_w{k}"] for k in range(n_critic)],
        [data[f"critic_b{k}"] for k in range(n_critic)],
    )
    ckpt = AgentCheckpoint(
        actor=actor,
        critic=critic,
        adam=AdamState.for_tensors(actor.tensors() + critic.tensors()),
        train_steps=int(meta["train_steps"]),
        env_config_hash=meta["env_config_hash"],
        sigma=float(meta["sigma"]),
        fidelity=meta["fidelity"],
    )
    save_checkpoint(args.out, ckpt)
    print(f"imported weights into {args.out}")
    return 0


def _nonnegative_float(value: str) -> float:
    out = float(value)
    if out < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foilrl",
        description="Airfoil shape optimization: PPO training, cross-fidelity "
        "transfer, swarm baseline, and evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--svg", action="store_true", help="also emit SVG plots")

    p = sub.add_parser("train", parents=[common], help="train an agent")
    p.add_argument("--solver", choices=["high", "low"])
    p.add_argument("--sigma", type=_nonnegative_float, default=None)
    p.add_argument("--timesteps", type=int, default=None)
    p.add_argument("--preset", choices=sorted(PRESETS), default="from-scratch")
    p.add_argument("--n-envs", type=int, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("finetune", parents=[common], help="transfer and fine-tune")
    p.add_argument("--from", dest="source", required=True, help="source checkpoint")
    p.add_argument("--strategy", type=int, choices=[1, 2, 3, 4], required=True)
    p.add_argument("--sigma", type=_nonnegative_float, default=None)
    p.add_argument("--timesteps", type=int, default=None)
    p.add_argument("--tl-free-steps", type=int, default=81920,
                   help="baseline step count for the time-reduction report")
    p.add_argument("--high-cost-ms", type=float, default=None,
                   help="override the high-fidelity per-call nominal cost")
    p.add_argument("--low-cost-ms", type=float, default=None,
                   help="override the low-fidelity per-call nominal cost")
    p.set_defaults(fn=cmd_finetune)

    p = sub.add_parser("optimize", parents=[common], help="roll one episode on an airfoil")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--airfoil", required=True, help="coordinate .dat file")
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate on a dataset directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", default=None, help="directory of .dat files (default: bundled)")
    p.add_argument("--sample", action="store_true", help="sample actions instead of means")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("pso", parents=[common], help="swarm baseline on one airfoil")
    p.add_argument("--airfoil", required=True)
    p.add_argument("--keep-thickness", type=_nonnegative_float, default=None,
                   help="relative thickness tolerance (constrained mode)")
    p.add_argument("--swarm", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.set_defaults(fn=cmd_pso)

    p = sub.add_parser("compare", parents=[common], help="side-by-side record comparison")
    p.add_argument("--drl", required=True, help="records.csv from evaluate")
    p.add_argument("--pso", required=True, help="records.csv for the baseline")
    p.add_argument("--sweep", nargs="*", default=None,
                   help="summary.json files from a sigma sweep (emits a Pareto CSV)")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("export-weights", help="dump checkpoint weights to npz")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export_weights)

    p = sub.add_parser("import-weights", help="rebuild a checkpoint from npz weights")
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_import_weights)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (FoilRlError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
