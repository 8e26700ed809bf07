"""Command-line entry point: ``basic-cd {simulate,analyze,scree,verify}``.

Exit codes: 0 success, 1 validation error, 2 numeric failure,
3 verification-clause failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .clustering import KMeansOptions
from .errors import BasicError, DomainError, NumericError
from .experiment import ExperimentPlan, bundled_plans, dump_networks, fmt_float, run_plan, write_outputs
from .genmodel import sample_bipartite, sample_symmetric, substream
from .graph import (
    NodeSubset,
    c_core,
    density,
    largest_connected_component,
    load_edge_list,
    restrict,
    restrict_rows,
)
from .population import (
    WEAK_SIGNAL_GAP,
    PopulationSpec,
    assumption2_check,
    check_proposition1,
    check_separation,
    deviation_check,
    eigengap_ratio,
    population_aggregate,
    population_means,
    random_spec,
    sbar_condition,
    snr_basic,
    snr_primary,
)
from .spectral import EigenTieWarning, aggregate, basic_pipeline, top_k_eigen

logger = logging.getLogger("basic_cd")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
FULL_REPLICATIONS = 200


def _load_networks(primary, bipartite, zero_based):
    a = load_edge_list(primary, "primary", zero_based=zero_based)
    bs = [load_edge_list(p, "bipartite", n=a.n, zero_based=zero_based) for p in bipartite]
    return a, bs


def _write_matrix_csv(path, M):
    M = np.atleast_2d(M)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in M:
            w.writerow([fmt_float(x) for x in row])


# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    plan = ExperimentPlan.load(args.plan)
    if args.seed is not None:
        plan.seed = args.seed
    if args.full:
        plan.replications = FULL_REPLICATIONS
    if args.reps is not None:
        plan.replications = args.reps
    plan.validate()
    output = args.output or plan.output or f"{plan.name}.csv"
    rows = run_plan(plan, workers=args.workers)
    paths = write_outputs(rows, output)
    if args.dump_dir:
        dump_networks(plan, args.dump_dir)
    for p in paths.values():
        print(f"wrote {p}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    a, bs = _load_networks(args.primary, args.bipartite, args.zero_based)
    subset = NodeSubset.of(range(a.n))
    if args.core is not None:
        subset = c_core(a, args.core)
        if len(subset) == 0:
            raise DomainError(f"the {args.core}-core is empty")
        a, bs = restrict(a, subset), [restrict_rows(b, subset) for b in bs]
    if args.core is not None or args.lcc:
        lcc = largest_connected_component(a)
        subset = NodeSubset.of(subset.kept[i] for i in lcc.kept)
        a, bs = restrict(a, lcc), [restrict_rows(b, lcc) for b in bs]
    if args.K > a.n:
        raise DomainError(f"K={args.K} exceeds the {a.n} surviving nodes")

    opts = KMeansOptions(K=args.K, n_init=args.n_init)
    det = basic_pipeline(a, bs, args.K, opts, substream(args.seed, 0))
    M = aggregate(a, bs)
    n_eig = min(a.n, max(args.K + 1, args.kmax))
    eig = top_k_eigen(M, n_eig)
    gap = eigengap_ratio(eig.values, args.K) if a.n > args.K else None

    offset = 0 if args.zero_based else 1
    prefix = Path(args.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    labels_path = Path(f"{prefix}.labels.txt")
    with open(labels_path, "w", encoding="utf-8") as fh:
        fh.write("node_id community\n")
        for node, lab in zip(subset.kept, det.labels.tolist()):
            fh.write(f"{node + offset} {lab}\n")
    diag = {
        "nodes": a.n,
        "edges": a.n_edges,
        "density": density(a) if a.n >= 2 else None,
        "bipartite_edges": [b.n_edges for b in bs],
        "K": args.K,
        "eigenvalues": eig.values.tolist(),
        "eigengap_ratio": gap,
        "weak_signal": None if gap is None else bool(gap < WEAK_SIGNAL_GAP),
        "weak_signal_threshold": WEAK_SIGNAL_GAP,
        "kmeans_inertia": det.inertia,
        "T_n": det.ratio.threshold,
    }
    diag_path = Path(f"{prefix}.diagnostics.json")
    diag_path.write_text(json.dumps(diag, indent=2) + "\n", encoding="utf-8")
    if args.dump_dir:
        d = Path(args.dump_dir)
        d.mkdir(parents=True, exist_ok=True)
        _write_matrix_csv(d / "M.csv", M)
        _write_matrix_csv(d / "eigenvalues.csv", det.eigen.values)
        _write_matrix_csv(d / "ratio.csv", det.ratio.values)
    if gap is not None:
        flag = "  [weak signal]" if gap < WEAK_SIGNAL_GAP else ""
        print(f"eigengap 1 - l{args.K + 1}/l{args.K} = {gap:.4f}{flag}")
    print(f"wrote {labels_path}\nwrote {diag_path}")
    return EXIT_OK


def scree_table(M, kmax: int) -> list[tuple[int, float, float | None]]:
    with warnings.catch_warnings():
        # ties are what a scree table is meant to show
        warnings.simplefilter("ignore", EigenTieWarning)
        eig = top_k_eigen(M, kmax, check=False)
    vals = eig.values
    rows = []
    for k in range(kmax):
        gap = eigengap_ratio(vals, k + 1) if k + 1 < kmax and vals[k] != 0 else None
        rows.append((k + 1, float(vals[k]), gap))
    return rows


def cmd_scree(args) -> int:
    a, bs = _load_networks(args.primary, args.bipartite, args.zero_based)
    kmax = args.kmax
    if kmax is None:
        kmax = min(30, a.n)
    elif kmax > a.n:
        raise DomainError(f"kmax={kmax} exceeds n={a.n}")
    rows = scree_table(aggregate(a, bs), kmax)
    out = open(args.output, "w", encoding="utf-8", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["k", "eigenvalue", "gap_ratio"])
        for k, v, g in rows:
            w.writerow([k, fmt_float(v), "" if g is None else fmt_float(g)])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def verify_spec(spec: PopulationSpec, draws: int = 1, seed: int = 0) -> dict:
    decomp = population_aggregate(spec)
    report = {
        "n": len(spec.theta),
        "K": spec.K,
        "Q": spec.Q,
        "proposition1": check_proposition1(decomp),
        "reconstruction_error": decomp.reconstruction_error,
        "diagonal_discrepancy": decomp.diagonal_discrepancy,
        "rank_deficient": decomp.rank_deficient,
        "sbar_condition": sbar_condition(spec),
        "warnings": [],
    }
    if decomp.rank_deficient:
        report["warnings"].append("aggregated transition matrix is rank deficient")
    if spec.K >= 2:
        report["separation"] = check_separation(spec)
    a2 = assumption2_check(spec)
    report["assumption2"] = a2
    if not a2["satisfied"]:
        report["warnings"].append("largest transition signal does not exceed sqrt(log(n) Z)/(|theta||delta|)")
    try:
        report["snr_primary"] = snr_primary(spec.E)
    except DomainError:
        report["snr_primary"] = None
    try:
        report["snr_basic"] = snr_basic(spec.E, spec.Fs)
    except DomainError:
        report["snr_basic"] = None
    if draws:
        omega0, omegas = population_means(spec, check=False)
        ratios = []
        for r in range(draws):
            a = sample_symmetric(omega0, substream(seed, r, 0))
            bs = [sample_bipartite(om, substream(seed, r, q + 1)) for q, om in enumerate(omegas)]
            ratios.append(deviation_check(a, bs, spec)["ratio"])
        report["deviation"] = {"draws": draws, "max_ratio": max(ratios), "mean_ratio": float(np.mean(ratios))}
    failed = not report["proposition1"]["passed"] or not report.get("separation", {"passed": True})["passed"]
    report["passed"] = not failed
    return report


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def cmd_verify(args) -> int:
    if args.random:
        n, K, Q, seed = args.random
        spec = random_spec(n, K, Q, seed)
    elif args.spec:
        spec = PopulationSpec.from_json(args.spec)
    else:
        raise DomainError("give a spec file or --random n K Q seed")
    report = verify_spec(spec, draws=args.draws, seed=args.seed)
    text = json.dumps(_jsonable(report), indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    for w in report["warnings"]:
        logger.warning(w)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="basic-cd", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a Monte-Carlo plan and write CSV results")
    s.add_argument("plan", help=f"plan file or bundled plan name ({', '.join(bundled_plans())})")
    s.add_argument("--seed", type=int)
    s.add_argument("--reps", type=int, help="override the plan's replication count")
    s.add_argument("--full", action="store_true", help=f"use {FULL_REPLICATIONS} replications")
    s.add_argument("--output", help="results CSV path (summary/timing written alongside)")
    s.add_argument("--workers", type=int, help="worker processes (default: $BASIC_CD_WORKERS or 1)")
    s.add_argument("--dump-dir", help="also write replication-0 networks as edge lists here")
    s.set_defaults(func=cmd_simulate)

    def network_args(sp):
        sp.add_argument("primary")
        sp.add_argument("bipartite", nargs="*")
        sp.add_argument("--zero-based", action="store_true", help="node ids in files start at 0")

    s = sub.add_parser("analyze", help="detect communities in a real network")
    network_args(s)
    s.add_argument("-K", type=int, required=True)
    s.add_argument("--core", type=int, help="restrict to the c-core, then its largest component")
    s.add_argument("--lcc", action="store_true", help="restrict to the largest connected component")
    s.add_argument("--kmax", type=int, default=30, help="eigenvalues reported in diagnostics")
    s.add_argument("--n-init", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", default="basic", help="output prefix")
    s.add_argument("--dump-dir", help="write M, eigenvalues and ratio matrix as CSV")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("scree", help="leading eigenvalues of the aggregated matrix")
    network_args(s)
    s.add_argument("--kmax", type=int)
    s.add_argument("--output")
    s.set_defaults(func=cmd_scree)

    s = sub.add_parser("verify", help="numerically verify the population eigen-structure")
    s.add_argument("spec", nargs="?", help="population spec JSON")
    s.add_argument("--random", nargs=4, type=int, metavar=("N", "K", "Q", "SEED"))
    s.add_argument("--draws", type=int, default=1, help="sampled draws for the deviation ratio")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (BasicError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
