"""Dataset ingestion and the evaluation protocol.

A trained policy is rolled for one full episode per dataset airfoil,
starting from that airfoil's fitted design vector. Metrics are always
computed with the high-fidelity solver so agents are compared fairly:
`best` is the highest cl/cd seen in the episode (step 0 included),
`improvement` is best minus the initial ratio, and the thickness
deviation is taken at the step where `best` occurred.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .env import AirfoilEnv, EnvConfig, StepReason
from .errors import EmptyEvalError, FitError, ResetError
from .geometry import CstParams, fit_cst, read_dat
from .nets import AgentCheckpoint

log = logging.getLogger(__name__)

RECORD_SCHEMA_VERSION = 1

RECORD_COLUMNS = [
    "airfoil",
    "initial_ratio",
    "best_ratio",
    "improvement",
    "mt_initial",
    "mt_at_best",
    "delta_mt_percent",
    "episode_length",
    "termination_reason",
    "nominal_solver_cost_s",
]


@dataclass
class EvalRecord:
    airfoil: str
    initial_ratio: float
    best_ratio: float
    improvement: float
    mt_initial: float
    mt_at_best: float
    delta_mt_percent: float
    episode_length: int
    termination_reason: str
    nominal_solver_cost_s: float
    wall_time_s: float
    converged: bool


@dataclass
class EvalSummary:
    n_evaluated: int
    n_excluded: int
    improvement_mean: float
    improvement_std: float
    best_median: float
    best_iqr: float
    delta_mt_mean: float
    delta_mt_std: float


def load_dataset(directory: str | Path) -> list[tuple[str, CstParams, float]]:
    """Fit every coordinate file in a directory; unfittable files are skipped."""
    directory = Path(directory)
    if not directory.is_dir():
        raise OSError(f"not a readable directory: {directory}")
    entries = []
    for path in sorted(directory.glob("*.dat")):
        try:
            name, coords = read_dat(path)
            params, residual = fit_cst(coords)
        except (FitError, ValueError) as exc:
            log.warning("skipping %s: %s", path.name, exc)
            continue
        entries.append((path.stem, params, residual))
    return entries


def _roll_episode(
    env: AirfoilEnv,
    checkpoint: AgentCheckpoint,
    params: CstParams,
    deterministic: bool,
    rng: np.random.Generator,
) -> EvalRecord | None:
    start = time.perf_counter()
    calls_before = env.solver.calls
    try:
        obs = env.reset(params)
    except ResetError:
        return EvalRecord(
            airfoil="",
            initial_ratio=float("nan"),
            best_ratio=float("nan"),
            improvement=float("nan"),
            mt_initial=float("nan"),
            mt_at_best=float("nan"),
            delta_mt_percent=float("nan"),
            episode_length=0,
            termination_reason="initial_solve_failed",
            nominal_solver_cost_s=(env.solver.calls - calls_before)
            * env.solver.cfg.nominal_cost_ms / 1000.0,
            wall_time_s=time.perf_counter() - start,
            converged=False,
        )

    initial_ratio = env.state.prev_term  # kappa = 1 for the high-fidelity solver
    mt_initial = env.state.mt0
    best_ratio = initial_ratio
    mt_at_best = mt_initial
    reason = StepReason.RUNNING
    length = 0
    while True:
        mean = checkpoint.actor.mean(obs[None, :])[0]
        if deterministic:
            action = mean
        else:
            std = np.exp(np.clip(checkpoint.actor.log_std, -5.0, 2.0))
            action = mean + std * rng.standard_normal(mean.shape)
        outcome = env.step(action)
        length += 1
        if "ratio" in outcome.info and outcome.info["ratio"] > best_ratio:
            best_ratio = outcome.info["ratio"]
            mt_at_best = outcome.info["mt"]
        if outcome.terminated:
            reason = outcome.reason
            break
        obs = outcome.observation
    return EvalRecord(
        airfoil="",
        initial_ratio=float(initial_ratio),
        best_ratio=float(best_ratio),
        improvement=float(best_ratio - initial_ratio),
        mt_initial=float(mt_initial),
        mt_at_best=float(mt_at_best),
        delta_mt_percent=float(100.0 * abs(mt_at_best - mt_initial) / mt_initial),
        episode_length=length,
        termination_reason=reason.value,
        nominal_solver_cost_s=(env.solver.calls - calls_before)
        * env.solver.cfg.nominal_cost_ms / 1000.0,
        wall_time_s=time.perf_counter() - start,
        converged=True,
    )


def evaluate_policy(
    checkpoint: AgentCheckpoint,
    dataset: list[tuple[str, CstParams, float]],
    env_config: EnvConfig | None = None,
    deterministic: bool = True,
    rng: np.random.Generator | None = None,
) -> tuple[list[EvalRecord], EvalSummary]:
    """One episode per airfoil; never raises on per-airfoil failures."""
    if env_config is None:
        env_config = EnvConfig(fidelity="high", sigma=checkpoint.sigma)
    if env_config.fidelity != "high":
        raise ValueError("evaluation metrics must come from the high-fidelity solver")
    rng = rng if rng is not None else np.random.default_rng(0)

    env = AirfoilEnv(env_config, np.random.default_rng(0))
    records = []
    for name, params, _residual in sorted(dataset, key=lambda e: e[0]):
        record = _roll_episode(env, checkpoint, params, deterministic, rng)
        record.airfoil = name
        records.append(record)
    return records, summarize(records)


def summarize(records: list[EvalRecord]) -> EvalSummary:
    """Statistics over records whose initial solve converged."""
    ok = [r for r in records if r.converged]
    if not ok:
        raise EmptyEvalError("no converged records to summarize")
    improvement = np.array([r.improvement for r in ok])
    best = np.array([r.best_ratio for r in ok])
    dmt = np.array([r.delta_mt_percent for r in ok])
    q1, q3 = np.percentile(best, [25.0, 75.0])
    return EvalSummary(
        n_evaluated=len(ok),
        n_excluded=len(records) - len(ok),
        improvement_mean=float(improvement.mean()),
        improvement_std=float(improvement.std()),
        best_median=float(np.median(best)),
        best_iqr=float(q3 - q1),
        delta_mt_mean=float(dmt.mean()),
        delta_mt_std=float(dmt.std()),
    )


def write_records_csv(path: str | Path, records: list[EvalRecord]) -> None:
    """Deterministic per-airfoil CSV; measured wall time stays out of it."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow([
                r.airfoil,
                _fmt(r.initial_ratio),
                _fmt(r.best_ratio),
                _fmt(r.improvement),
                _fmt(r.mt_initial),
                _fmt(r.mt_at_best),
                _fmt(r.delta_mt_percent),
                r.episode_length,
                r.termination_reason,
                _fmt(r.nominal_solver_cost_s),
            ])


def read_records_csv(path: str | Path) -> list[EvalRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                EvalRecord(
                    airfoil=row["airfoil"],
                    initial_ratio=float(row["initial_ratio"]),
                    best_ratio=float(row["best_ratio"]),
                    improvement=float(row["improvement"]),
                    mt_initial=float(row["mt_initial"]),
                    mt_at_best=float(row["mt_at_best"]),
                    delta_mt_percent=float(row["delta_mt_percent"]),
                    episode_length=int(row["episode_length"]),
                    termination_reason=row["termination_reason"],
                    nominal_solver_cost_s=float(row["nominal_solver_cost_s"]),
                    wall_time_s=float("nan"),
                    converged=row["termination_reason"] != "initial_solve_failed",
                )
            )
    return records


def write_summary_json(path: str | Path, summary: EvalSummary, extra: dict | None = None) -> None:
    payload = {"schema_version": RECORD_SCHEMA_VERSION, **asdict(summary)}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def compare_report(
    drl_records: list[EvalRecord],
    pso_records: list[EvalRecord],
) -> tuple[list[dict], dict]:
    """Per-airfoil side-by-side bests plus aggregate summaries."""
    if not drl_records or not pso_records:
        raise EmptyEvalError("both record sets must be non-empty")
    pso_by_name = {r.airfoil: r for r in pso_records}
    rows = []
    for drl in sorted(drl_records, key=lambda r: r.airfoil):
        pso = pso_by_name.get(drl.airfoil)
        if pso is None or not (drl.converged and pso.converged):
            continue
        if drl.best_ratio > pso.best_ratio:
            winner = "drl"
        elif pso.best_ratio > drl.best_ratio:
            winner = "pso"
        else:
            winner = "tie"
        rows.append({
            "airfoil": drl.airfoil,
            "initial_ratio": drl.initial_ratio,
            "drl_best": drl.best_ratio,
            "pso_best": pso.best_ratio,
            "winner": winner,
            "drl_cost_s": drl.nominal_solver_cost_s,
            "pso_cost_s": pso.nominal_solver_cost_s,
        })
    if not rows:
        raise EmptyEvalError("no common converged airfoils")
    aggregate = {
        "n_common": len(rows),
        "drl_wins": sum(1 for r in rows if r["winner"] == "drl"),
        "pso_wins": sum(1 for r in rows if r["winner"] == "pso"),
        "ties": sum(1 for r in rows if r["winner"] == "tie"),
        "drl": asdict(summarize([r for r in drl_records if r.converged])),
        "pso": asdict(summarize([r for r in pso_records if r.converged])),
    }
    return rows, aggregate


def write_comparison_csv(path: str | Path, rows: list[dict]) -> None:
    cols = ["airfoil", "initial_ratio", "drl_best", "pso_best", "winner", "drl_cost_s", "pso_cost_s"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_fmt(row[c]) if isinstance(row[c], float) else row[c] for c in cols])


def pareto_front(points: list[dict]) -> list[dict]:
    """Flag non-dominated (delta_mt down, best up) points in a sigma sweep."""
    out = []
    for p in points:
        dominated = any(
            q is not p
            and q["delta_mt"] <= p["delta_mt"]
            and q["best"] >= p["best"]
            and (q["delta_mt"] < p["delta_mt"] or q["best"] > p["best"])
            for q in points
        )
        out.append({**p, "on_front": not dominated})
    return out


def write_pareto_csv(path: str | Path, points: list[dict]) -> None:
    cols = ["sigma", "delta_mt", "best", "on_front"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for p in sorted(points, key=lambda q: q["sigma"]):
            writer.writerow([_fmt(p["sigma"]), _fmt(p["delta_mt"]), _fmt(p["best"]), p["on_front"]])


def _fmt(v) -> str:
    return f"{v:.10g}"
