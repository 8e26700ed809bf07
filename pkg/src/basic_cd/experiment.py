"""Monte-Carlo experiment plans: BASIC vs SCORE on simulated scenarios.

A plan is a JSON document::

    {
      "schema_version": 1,
      "seed": 2024,
      "replications": 50,
      "methods": ["BASIC", "SCORE"],
      "scenarios": [{"id": "n600-K3", "n": 600, "m": 300, "K": 3, "beta_primary": 0.5}],
      "cases": [{"name": "case1", "beta_bipartite": [0.5, 0.5, 0.5, 0.5, 0.5]}]
    }

Scenario entries take any :class:`~basic_cd.genmodel.ScenarioConfig` field
except ``beta_bipartite``, ``seed`` and ``replications``, which come from the
case and the plan.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .clustering import KMeansOptions, ari
from .errors import BasicError, ValidationError
from .genmodel import CLUSTER_STREAM, ScenarioConfig, build_scenario, substream
from .graph import save_edge_list
from .spectral import basic_detect, score_detect

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
METHODS = ("BASIC", "SCORE")
WORKERS_ENV = "BASIC_CD_WORKERS"
RESULT_FIELDS = ["scenario_id", "case", "method", "replication", "ari", "seed", "error"]
SUMMARY_FIELDS = ["scenario_id", "case", "method", "reps", "mean_ari", "sd_ari", "errors"]


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class ExperimentPlan:
    scenarios: list[dict]
    cases: list[dict]
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    replications: int = 50
    seed: int = 0
    name: str = "plan"
    kmeans: dict = field(default_factory=dict)
    output: str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.schema_version != SCHEMA_VERSION:
            problems.append(f"schema_version must be {SCHEMA_VERSION}")
        if not self.methods:
            problems.append("methods: at least one method required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            problems.append(f"methods: unknown {bad}")
        if not isinstance(self.replications, int) or self.replications < 1:
            problems.append("replications must be an integer >= 1")
        if not self.scenarios:
            problems.append("scenarios: at least one scenario required")
        if not self.cases:
            problems.append("cases: at least one case required")
        for i, c in enumerate(self.cases):
            if "name" not in c or "beta_bipartite" not in c:
                problems.append(f"cases[{i}]: needs 'name' and 'beta_bipartite'")
        ids = [s.get("id", f"s{i}") for i, s in enumerate(self.scenarios)]
        if len(set(ids)) != len(ids):
            problems.append("scenarios: ids must be unique")
        for i, s in enumerate(self.scenarios):
            for key in ("beta_bipartite", "seed", "replications"):
                if key in s:
                    problems.append(f"scenarios[{i}]: {key!r} is set by the plan, not the scenario")
        if problems:
            raise ValidationError(problems)
        for i, s in enumerate(self.scenarios):
            for c in self.cases:
                try:
                    self.config(i, c)
                except ValidationError as exc:
                    raise ValidationError([f"scenarios[{i}] / case {c.get('name')}: {p}" for p in exc.problems])

    def scenario_id(self, i: int) -> str:
        return str(self.scenarios[i].get("id", f"s{i}"))

    def config(self, i: int, case: dict) -> ScenarioConfig:
        d = {k: v for k, v in self.scenarios[i].items() if k != "id"}
        d.update(beta_bipartite=list(case["beta_bipartite"]), seed=self.seed, replications=self.replications)
        d.pop("Q", None)
        return ScenarioConfig.from_dict(d)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError([f"unknown plan field {k!r}" for k in unknown])
        missing = [k for k in ("scenarios", "cases") if k not in d]
        if missing:
            raise ValidationError([f"missing plan field {k!r}" for k in missing])
        return cls(**d)

    @classmethod
    def load(cls, path_or_name) -> "ExperimentPlan":
        """Load a plan file, falling back to the bundled plan of that name."""
        p = Path(path_or_name)
        if p.exists():
            text = p.read_text(encoding="utf-8")
        else:
            name = p.name if p.suffix == ".json" else p.name + ".json"
            res = resources.files("basic_cd") / "plans" / name
            if not res.is_file():
                raise ValidationError(f"plan {path_or_name!r} not found (bundled: {', '.join(bundled_plans())})")
            text = res.read_text(encoding="utf-8")
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"plan is not valid JSON: {exc}") from None


def bundled_plans() -> list[str]:
    root = resources.files("basic_cd") / "plans"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


@dataclass
class ResultRow:
    scenario_id: str
    case: str
    method: str
    replication: int
    ari: float | None
    runtime_ms: int
    seed: int
    error: str = ""


def _run_cell(plan: ExperimentPlan, si: int, ci: int, rep: int) -> list[ResultRow]:
    case = plan.cases[ci]
    sid = plan.scenario_id(si)
    rows = []
    try:
        cfg = plan.config(si, case)
        sc = build_scenario(cfg, replication=rep, scenario_index=si)
    except BasicError as exc:
        return [ResultRow(sid, case["name"], m, rep, None, 0, plan.seed, f"{type(exc).__name__}: {exc}")
                for m in plan.methods]
    opts = KMeansOptions(K=cfg.K, **plan.kmeans)
    for method in plan.methods:
        # both methods share the clustering stream so SCORE == BASIC with Q = 0
        rng = substream(plan.seed, si, rep, CLUSTER_STREAM)
        t0 = time.perf_counter()
        try:
            if method == "BASIC":
                labels = basic_detect(sc.primary, sc.bipartite, cfg.K, opts, rng)
            else:
                labels = score_detect(sc.primary, cfg.K, opts, rng)
            score, err = ari(sc.labels, labels), ""
        except (BasicError, np.linalg.LinAlgError) as exc:
            score, err = None, f"{type(exc).__name__}: {exc}"
        ms = int(round((time.perf_counter() - t0) * 1000))
        rows.append(ResultRow(sid, case["name"], method, rep, score, ms, plan.seed, err))
    return rows


def _worker_count(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, workers)


def run_plan(plan: ExperimentPlan, workers: int | None = None) -> list[ResultRow]:
    """Run every (scenario, case, replication) cell; rows come back in that order."""
    cells = [
        (si, ci, rep)
        for si in range(len(plan.scenarios))
        for ci in range(len(plan.cases))
        for rep in range(plan.replications)
    ]
    workers = _worker_count(workers)
    if workers == 1:
        chunks = [_run_cell(plan, *c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, plan, *c) for c in cells]
            chunks = [f.result() for f in futures]
    return [row for chunk in chunks for row in chunk]


def summarize(rows: list[ResultRow]) -> list[dict]:
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.scenario_id, r.case, r.method), []).append(r)
    out = []
    for (sid, case, method), rs in groups.items():
        vals = np.array([r.ari for r in rs if r.ari is not None], dtype=float)
        out.append({
            "scenario_id": sid,
            "case": case,
            "method": method,
            "reps": len(vals),
            "mean_ari": float(vals.mean()) if len(vals) else float("nan"),
            "sd_ari": float(vals.std(ddof=1)) if len(vals) > 1 else float("nan"),
            "errors": len(rs) - len(vals),
        })
    return out


def results_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for r in rows:
        w.writerow([r.scenario_id, r.case, r.method, r.replication,
                    "" if r.ari is None else fmt_float(r.ari), r.seed, r.error])
    return buf.getvalue()


def timing_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario_id", "case", "method", "replication", "runtime_ms"])
    for r in rows:
        w.writerow([r.scenario_id, r.case, r.method, r.replication, r.runtime_ms])
    return buf.getvalue()


def summary_csv(summary: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for s in summary:
        w.writerow([s["scenario_id"], s["case"], s["method"], s["reps"],
                    fmt_float(s["mean_ari"]), fmt_float(s["sd_ari"]), s["errors"]])
    return buf.getvalue()


def write_outputs(rows: list[ResultRow], output: str | os.PathLike) -> dict[str, Path]:
    """Write results, summary and timing CSVs next to each other.

    Run times go to a separate file so the results file is byte-identical
    across runs with the same plan and seed.
    """
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    stem = out.with_suffix("")
    paths = {
        "results": out,
        "summary": Path(f"{stem}.summary.csv"),
        "timing": Path(f"{stem}.timing.csv"),
    }
    paths["results"].write_text(results_csv(rows), encoding="utf-8")
    paths["summary"].write_text(summary_csv(summarize(rows)), encoding="utf-8")
    paths["timing"].write_text(timing_csv(rows), encoding="utf-8")
    return paths


def dump_networks(plan: ExperimentPlan, directory, replication: int = 0) -> list[Path]:
    """Write one replication's networks as edge-list files for inspection."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    for si in range(len(plan.scenarios)):
        for case in plan.cases:
            sc = build_scenario(plan.config(si, case), replication=replication, scenario_index=si)
            base = f"{plan.scenario_id(si)}_{case['name']}_rep{replication}"
            p = d / f"{base}_primary.txt"
            save_edge_list(sc.primary, p)
            written.append(p)
            for q, b in enumerate(sc.bipartite, start=1):
                p = d / f"{base}_bipartite{q}.txt"
                save_edge_list(b, p)
                written.append(p)
            p = d / f"{base}_labels.txt"
            p.write_text("".join(f"{i + 1} {l}\n" for i, l in enumerate(sc.labels.tolist())), encoding="utf-8")
            written.append(p)
    return written
