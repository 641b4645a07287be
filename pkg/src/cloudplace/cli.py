"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 infeasible plan, 4 privacy
infeasibility, 5 simulation disagrees with the analytic value.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from cloudplace.catalog import (
    SECONDS_PER_YEAR,
    Catalog,
    CatalogError,
    Provider,
    availability_to_downtime,
    data_path,
    load_catalog,
)
from cloudplace.chunkplan import (
    ChunkAssignment,
    ReplicaSet,
    equal_chunks,
    load_chunks,
    solve_max_expected_value,
)
from cloudplace.costmodel import CANONICAL_WORKLOAD, WorkloadProfile, load_workload, monthly_cost
from cloudplace.fragment import (
    FragmentError,
    PrivacyInfeasibleError,
    UnknownAttributeError,
    decompose,
    load_schema,
    place_fragments,
    validate_plan,
)
from cloudplace.maxavail import KnapsackTable, solve_max_availability
from cloudplace.qosfilter import (
    DEFAULT_REGION,
    NoProvidersError,
    QosRequirements,
    filter_providers,
    load_requirements,
)
from cloudplace.simulate import simulate_chunk_availability, simulate_data_loss

log = logging.getLogger("cloudplace")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_PRIVACY = 4
EXIT_MISMATCH = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- input helpers ------------------------------------------------------------


def _read_json(path: str, what: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError(f"{what} file not found: {path}", EXIT_INPUT) from None
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read {what} file {path}: {exc}", EXIT_INPUT) from None


def _catalog(args: argparse.Namespace) -> Catalog:
    path = args.catalog or str(data_path("catalog_2013.json"))
    if not Path(path).exists():
        raise CliError(f"catalog file not found: {path}", EXIT_INPUT)
    try:
        return load_catalog(path)
    except CatalogError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def _workload(args: argparse.Namespace) -> WorkloadProfile:
    if not args.workload:
        return CANONICAL_WORKLOAD
    _read_json(args.workload, "workload")
    try:
        return load_workload(args.workload)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid workload {args.workload}: {exc}", EXIT_INPUT) from None


def _requirements(args: argparse.Namespace) -> QosRequirements | None:
    if args.requirements:
        _read_json(args.requirements, "requirements")
        try:
            return load_requirements(args.requirements)
        except (TypeError, ValueError) as exc:
            raise CliError(f"invalid requirements {args.requirements}: {exc}", EXIT_INPUT) from None
    if args.max_response_ms is None and not args.require_cert:
        return None
    return QosRequirements(args.region, args.max_response_ms, frozenset(args.require_cert))


def _providers(args: argparse.Namespace) -> list[Provider]:
    catalog = _catalog(args)
    req = _requirements(args)
    if req is None:
        return list(catalog)
    try:
        return filter_providers(catalog, req)
    except NoProvidersError as exc:
        raise CliError(str(exc), EXIT_INFEASIBLE) from None


def _budget(args: argparse.Namespace) -> int:
    if args.budget is None:
        raise CliError("--budget is required", EXIT_INPUT)
    if args.budget < 0:
        raise CliError("--budget must be >= 0", EXIT_INPUT)
    return args.budget


# -- output helpers -----------------------------------------------------------


def _render_table(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> str:
    def fmt(v: Any) -> str:
        if isinstance(v, float):
            return f"{v:.6f}".rstrip("0").rstrip(".") if abs(v) < 1e6 else f"{v:.2f}"
        if isinstance(v, (list, tuple)):
            return ",".join(str(x) for x in v) or "-"
        return str(v)

    cells = [[fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _csv(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (" ".join(map(str, v)) if isinstance(v, (list, tuple)) else v) for k, v in row.items()})
    return buf.getvalue()


def _emit(args: argparse.Namespace, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_doc(args: argparse.Namespace, doc: Any, table: str) -> None:
    _emit(args, json.dumps(doc, indent=2) if args.format == "json" else table)


# -- commands -----------------------------------------------------------------


def cmd_cost(args: argparse.Namespace) -> int:
    catalog = _catalog(args)
    workload = _workload(args)
    rows = []
    for p in catalog:
        row: dict[str, Any] = {"id": p.id, "name": p.name, "catalog_usd": p.monthly_cost_usd}
        if p.pricing is None:
            row.update(computed_usd=None, delta_percent=None)
        else:
            cost = monthly_cost(p.pricing, workload)
            row.update(
                computed_usd=round(cost.total_usd, 2),
                delta_percent=round(100 * (cost.total_usd - p.monthly_cost_usd) / p.monthly_cost_usd, 2)
                if p.monthly_cost_usd
                else None,
                breakdown={k: round(v, 2) for k, v in cost.to_dict().items()},
            )
        rows.append(row)
    doc = {"workload": workload.to_dict(), "providers": rows}
    _emit_doc(args, doc, _render_table(rows, ["id", "name", "computed_usd", "catalog_usd", "delta_percent"]))
    return EXIT_OK


def cmd_filter(args: argparse.Namespace) -> int:
    providers = _providers(args)
    rows = [
        {"id": p.id, "name": p.name, "availability_percent": p.availability_percent,
         "monthly_cost_usd": p.monthly_cost_usd}
        for p in providers
    ]
    _emit_doc(args, {"providers": rows}, _render_table(rows, ["id", "name", "availability_percent", "monthly_cost_usd"]))
    return EXIT_OK


def _plan_row(plan: Any) -> dict[str, Any]:
    return {
        "budget_usd": plan.budget_usd,
        "total_value": round(plan.total_value, 6),
        "failure_index": plan.failure_index,
        "availability_percent": plan.availability_percent,
        "selected": sorted(plan.selected_ids),
        "total_cost_usd": plan.total_cost_usd,
    }


def cmd_plan_availability(args: argparse.Namespace) -> int:
    providers = _providers(args)
    columns = ["budget_usd", "total_value", "failure_index", "availability_percent", "selected", "total_cost_usd"]
    if args.sweep:
        start, stop, step = args.sweep
        if step <= 0 or start < 0 or stop < start:
            raise CliError("--sweep needs 0 <= START <= STOP and STEP > 0", EXIT_INPUT)
        budgets = list(range(start, stop + 1, step))
        rows = []
        if args.timing:
            for b in budgets:
                t0 = time.perf_counter()
                plan = solve_max_availability(providers, b)
                rows.append({**_plan_row(plan), "time_ms": round(1000 * (time.perf_counter() - t0), 3)})
            columns.append("time_ms")
        else:
            table = KnapsackTable(providers, max(budgets))
            rows = [_plan_row(table.plan(b)) for b in budgets]
        _emit(args, _csv(rows, columns))
        return EXIT_OK

    plan = solve_max_availability(providers, _budget(args))
    if not plan.selected:
        log.info("empty selection: failure index 1 by the empty-set convention")
    doc = plan.to_dict()
    table = _render_table(
        [{"id": p.id, "name": p.name, "cost_usd": p.monthly_cost_usd, "log_value": p.log_value} for p in plan.selected],
        ["id", "name", "cost_usd", "log_value"],
    )
    table += (
        f"\n\nbudget {plan.budget_usd}  cost {plan.total_cost_usd}  value {plan.total_value:.6f}"
        f"  failure index {plan.failure_index:.6g}  availability {plan.availability_percent:.10f}%"
    )
    _emit_doc(args, doc, table)
    return EXIT_OK


def _chunk_specs(args: argparse.Namespace, workload: WorkloadProfile, m: int | None = None):
    if m is None and args.chunk_spec:
        _read_json(args.chunk_spec, "chunk spec")
        try:
            return load_chunks(args.chunk_spec)
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError(f"invalid chunk spec {args.chunk_spec}: {exc}", EXIT_INPUT) from None
    m = args.chunks if m is None else m
    if m < 0:
        raise CliError("--chunks must be >= 0", EXIT_INPUT)
    total = args.total_gb if args.total_gb is not None else workload.storage_gb_month
    if m and total <= 0:
        raise CliError("total data size must be > 0", EXIT_INPUT)
    return equal_chunks(m, total)


def _solve_chunks(providers, chunks, r, budget, workload) -> ChunkAssignment:
    if not 1 <= r <= len(providers):
        raise CliError(f"replication factor r={r} needs 1 <= r <= {len(providers)} providers", EXIT_INFEASIBLE)
    return solve_max_expected_value(providers, chunks, r, budget, workload)


def cmd_plan_chunks(args: argparse.Namespace) -> int:
    providers = _providers(args)
    workload = _workload(args)
    budget = _budget(args)
    if args.sweep_chunks:
        start, stop, step = args.sweep_chunks
        if step <= 0 or start < 0 or stop < start:
            raise CliError("--sweep-chunks needs 0 <= START <= STOP and STEP > 0", EXIT_INPUT)
        rows = []
        for m in range(start, stop + 1, step):
            chunks = _chunk_specs(args, workload, m)
            t0 = time.perf_counter()
            a = _solve_chunks(providers, chunks, args.replication, budget, workload)
            row = {"chunks": m, "total_expected_value": a.total_expected_value, "total_cost_usd": a.total_cost_usd}
            if args.timing:
                row["time_ms"] = round(1000 * (time.perf_counter() - t0), 3)
            rows.append(row)
        columns = ["chunks", "total_expected_value", "total_cost_usd"] + (["time_ms"] if args.timing else [])
        _emit(args, _csv(rows, columns))
        return EXIT_OK

    chunks = _chunk_specs(args, workload)
    a = _solve_chunks(providers, chunks, args.replication, budget, workload)
    doc = a.to_dict()
    table = _render_table(doc["chunks"], ["chunk_id", "providers", "cost_usd", "expected_value"])
    table += (
        f"\n\nbudget {a.budget_usd}  cost {a.total_cost_usd}  r {a.r}"
        f"  expected available chunks {a.total_expected_value:.6f}"
    )
    _emit_doc(args, doc, table)
    return EXIT_OK


def cmd_fragment(args: argparse.Namespace) -> int:
    if not args.schema:
        raise CliError("--schema is required", EXIT_INPUT)
    _read_json(args.schema, "schema")
    try:
        sd = load_schema(args.schema)
        plan = decompose(sd.schema, sd.constraints, sd.transforms)
        violations = validate_plan(sd.schema, sd.constraints, plan)
        if violations:
            raise PrivacyInfeasibleError("; ".join(v.detail for v in violations))
        providers = _providers(args)
        table = place_fragments(
            plan, providers, r=args.replication, seed=args.seed, schema=sd.schema, constraints=sd.constraints,
            chunks_per_fragment=args.chunks_per_fragment,
        )
    except (PrivacyInfeasibleError, UnknownAttributeError) as exc:
        raise CliError(str(exc), EXIT_PRIVACY) from None
    except FragmentError as exc:
        raise CliError(f"invalid schema {args.schema}: {exc}", EXIT_INPUT) from None
    doc = {"plan": plan.to_dict(), "violations": [], "mapping_table": table.to_dict()}
    text = _render_table(
        [{"fragment_id": f.fragment_id, "attributes": f.attributes} for f in plan.fragments],
        ["fragment_id", "attributes"],
    )
    text += "\n\n" + _render_table([e.to_dict() for e in table.entries],
                                   ["chunk_name", "fragment_id", "sequence_index", "provider_ids"])
    _emit_doc(args, doc, text)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    if not args.document:
        raise CliError("--document is required", EXIT_INPUT)
    if args.trials < 1:
        raise CliError("--trials must be >= 1", EXIT_INPUT)
    doc = _read_json(args.document, "plan")
    catalog = _catalog(args)
    known = {p.id: p for p in catalog}
    try:
        if "selected" in doc:
            kind = "data_loss"
            ids = [int(s["id"]) for s in doc["selected"]]
            missing = [i for i in ids if i not in known]
            if missing:
                raise CliError(f"plan references unknown provider ids {missing}", EXIT_INPUT)
            analytic = float(doc["failure_index"])
            report = simulate_data_loss([known[i].failure_index for i in ids], args.trials, args.seed)
        elif "chunks" in doc:
            kind = "chunk_availability"
            assignment = ChunkAssignment(
                tuple(str(c["chunk_id"]) for c in doc["chunks"]),
                tuple(
                    ReplicaSet(tuple(int(i) for i in c["providers"]), int(c["cost_usd"]), float(c["expected_value"]))
                    for c in doc["chunks"]
                ),
                int(doc.get("budget_usd", 0)),
                int(doc.get("r", 0)),
            )
            analytic = float(doc["total_expected_value"])
            report = simulate_chunk_availability(assignment, list(catalog), args.trials, args.seed)
        else:
            raise CliError("document is neither a plan nor a chunk assignment", EXIT_INPUT)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid document {args.document}: {exc}", EXIT_INPUT) from None

    ok = report.within(analytic, 3.0)
    out = {"kind": kind, **report.to_dict(), "analytic": analytic, "pass": ok}
    line = (
        f"{'PASS' if ok else 'FAIL'} {kind}: estimate {report.estimate:.6g} vs analytic {analytic:.6g}"
        f" (3 SE = {3 * report.std_error:.3g})"
    )
    _emit_doc(args, out, _render_table([report.to_dict()], ["trials", "estimate", "std_error", "ci95", "seed"])
              + "\n" + line)
    print(line, file=sys.stderr)
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_nines(args: argparse.Namespace) -> int:
    rows = []
    for k in range(args.min_nines, args.max_nines + 1):
        availability = round(100 - 10.0 ** (2 - k), k)
        seconds = availability_to_downtime(availability, SECONDS_PER_YEAR)
        rows.append({"nines": k, "availability_percent": availability,
                     "downtime_seconds_per_year": round(seconds, 4), "downtime": _human(seconds)})
    _emit_doc(args, {"period_seconds": SECONDS_PER_YEAR, "rows": rows},
              _render_table(rows, ["nines", "availability_percent", "downtime_seconds_per_year", "downtime"]))
    return EXIT_OK


def _human(seconds: float) -> str:
    for unit, size in (("days", 86400), ("hours", 3600), ("minutes", 60)):
        if seconds >= size:
            return f"{seconds / size:.2f} {unit}"
    return f"{seconds:.2f} seconds"


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--catalog", help="catalog document (default: shipped 2013 catalog)")
    g.add_argument("--workload", help="workload document (default: the 51.66 TB canonical workload)")
    g.add_argument("--budget", type=int, help="monthly budget in whole USD")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=("json", "table"), default="json")
    g.add_argument("--output", help="write the document here instead of standard output")
    g.add_argument("--requirements", help="QoS requirements document")
    g.add_argument("--region", default=DEFAULT_REGION)
    g.add_argument("--max-response-ms", type=int)
    g.add_argument("--require-cert", action="append", default=[], metavar="TAG")
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cloudplace", description="Multi-cloud storage placement planner.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cost", parents=[common], help="monthly cost per provider for a workload")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("filter", parents=[common], help="apply QoS requirements to the catalog")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("plan-availability", parents=[common], help="maximum availability within a budget")
    p.add_argument("--sweep", type=int, nargs=3, metavar=("START", "STOP", "STEP"), help="emit a budget sweep as CSV")
    p.add_argument("--timing", action="store_true", help="add a solver wall-time column to sweeps")
    p.set_defaults(func=cmd_plan_availability)

    p = sub.add_parser("plan-chunks", parents=[common], help="maximum expected available chunks within a budget")
    p.add_argument("--chunks", type=int, default=40, help="number of equal-size chunks")
    p.add_argument("--chunk-spec", help="chunk document with chunk_id and size_gb per chunk")
    p.add_argument("--total-gb", type=float, help="total data size (default: workload storage volume)")
    p.add_argument("-r", "--replication", type=int, default=2)
    p.add_argument("--sweep-chunks", type=int, nargs=3, metavar=("START", "STOP", "STEP"))
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_plan_chunks)

    p = sub.add_parser("fragment", parents=[common], help="privacy fragmentation and placement")
    p.add_argument("--schema", help="schema document")
    p.add_argument("-r", "--replication", type=int, default=2)
    p.add_argument("--chunks-per-fragment", type=int, default=1)
    p.set_defaults(func=cmd_fragment)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo check of a plan or assignment")
    p.add_argument("--document", help="plan-availability or plan-chunks output document")
    p.add_argument("--trials", type=int, default=1_000_000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("nines", parents=[common], help="availability nines and yearly downtime")
    p.add_argument("--min-nines", type=int, default=2)
    p.add_argument("--max-nines", type=int, default=7)
    p.set_defaults(func=cmd_nines)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
