#!/usr/bin/env python3
"""Train agents across a range of thickness-penalty strengths and build the
Pareto view of aerodynamic gain versus thickness preservation.

Desk-scale defaults finish in roughly ten minutes; pass --timesteps to go
bigger. Outputs land under --out (default runs/sigma_sweep).
"""
import argparse
import json
import subprocess
import sys
from pathlib import Path

SIGMAS = [0.0, 15.0, 100.0]


def run(cmd: list[str]) -> None:
    print("+", " ".join(cmd), flush=True)
    subprocess.run(cmd, check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--timesteps", type=int, default=24576)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default="runs/sigma_sweep")
    parser.add_argument("--config", default=None)
    parser.add_argument("--sigmas", type=float, nargs="*", default=SIGMAS)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ["--config", args.config] if args.config else []

    summaries = []
    for sigma in args.sigmas:
        tag = f"sigma{sigma:g}"
        train_dir = out / f"train_{tag}"
        eval_dir = out / f"eval_{tag}"
        run([sys.executable, "-m", "foilrl.cli", "train",
             "--solver", "low", "--sigma", str(sigma),
             "--timesteps", str(args.timesteps), "--seed", str(args.seed),
             "--preset", "pretrain", "--out", str(train_dir), *cfg])
        run([sys.executable, "-m", "foilrl.cli", "evaluate",
             "--checkpoint", str(train_dir / "checkpoint.ckpt"),
             "--out", str(eval_dir), "--seed", str(args.seed), "--svg", *cfg])
        summaries.append(str(eval_dir / "summary.json"))

    # one evaluation doubles as both comparison sides so the command runs
    # standalone; the sweep files are what matter here
    first_records = str(Path(summaries[0]).parent / "records.csv")
    run([sys.executable, "-m", "foilrl.cli", "compare",
         "--drl", first_records, "--pso", first_records,
         "--sweep", *summaries, "--out", str(out / "pareto"), "--svg"])

    for path in summaries:
        payload = json.loads(Path(path).read_text())
        print(f"sigma={payload['sigma']:g}: improvement {payload['improvement_mean']:.1f} "
              f"dMT {payload['delta_mt_mean']:.1f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
