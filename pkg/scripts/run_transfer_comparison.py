#!/usr/bin/env python3
"""Full transfer-learning comparison at desk scale.

Pretrains on the cheap surrogate, fine-tunes on the panel solver with a
chosen strategy, trains a from-scratch baseline at the same budget, and
evaluates all three agents on the bundled dataset. Prints the cost ledger
and the time-reduction figure computed from nominal per-call prices.
"""
import argparse
import json
import subprocess
import sys
from pathlib import Path


def run(cmd: list[str]) -> None:
    print("+", " ".join(cmd), flush=True)
    subprocess.run(cmd, check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--budget", type=int, default=24576,
                        help="pretrain and from-scratch step budget")
    parser.add_argument("--finetune-fraction", type=float, default=0.25)
    parser.add_argument("--strategy", type=int, default=1, choices=[1, 2, 3, 4])
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="runs/transfer_comparison")
    parser.add_argument("--config", default=None)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ["--config", args.config] if args.config else []
    ft_steps = int(args.budget * args.finetune_fraction)

    run([sys.executable, "-m", "foilrl.cli", "train", "--solver", "low",
         "--sigma", "0", "--preset", "pretrain", "--timesteps", str(args.budget),
         "--seed", str(args.seed), "--out", str(out / "pretrain"), *cfg])
    run([sys.executable, "-m", "foilrl.cli", "train", "--solver", "high",
         "--sigma", "0", "--preset", "from-scratch", "--timesteps", str(args.budget),
         "--seed", str(args.seed), "--out", str(out / "scratch"), *cfg])
    run([sys.executable, "-m", "foilrl.cli", "finetune",
         "--from", str(out / "pretrain" / "checkpoint.ckpt"),
         "--strategy", str(args.strategy), "--timesteps", str(ft_steps),
         "--tl-free-steps", str(args.budget), "--seed", str(args.seed),
         "--out", str(out / "finetune"), *cfg])

    for tag in ("pretrain", "scratch", "finetune"):
        run([sys.executable, "-m", "foilrl.cli", "evaluate",
             "--checkpoint", str(out / tag / "checkpoint.ckpt"),
             "--out", str(out / f"eval_{tag}"), "--seed", str(args.seed), *cfg])

    improvements = {}
    for tag in ("pretrain", "scratch", "finetune"):
        payload = json.loads((out / f"eval_{tag}" / "summary.json").read_text())
        improvements[tag] = payload["improvement_mean"]
        print(f"{tag}: improvement {payload['improvement_mean']:.1f} "
              f"+- {payload['improvement_std']:.1f}, best median {payload['best_median']:.1f}")
    ledger = json.loads((out / "finetune" / "cost_ledger.json").read_text())
    print(f"nominal cost: {ledger['total_cost_s']:.1f}s vs TL-free {ledger['tl_free_cost_s']:.1f}s "
          f"-> time reduction {ledger['time_reduction_percent']:.1f}%")
    print(f"finetune / scratch improvement ratio: "
          f"{improvements['finetune'] / improvements['scratch']:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
