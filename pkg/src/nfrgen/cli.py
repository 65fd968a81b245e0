"""Command-line entry point covering the whole workflow: ingest, select,
generate, sample, assign, serve, analyze, export."""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from . import analysis, fixtures, quality
from .corpus import (FrSubset, RequirementKind, RequirementRecord,
                     SelectionStrategy, parse_requirements_file, select_fr_subset)
from .errors import (ArgumentError, CapacityError, IntegrityError, NfrgenError,
                     TransportError, ValidationError)
from .evalsvc import SCORING, SELECTION, EvalService, EvalStore, Evaluator
from .gateway import GatewayConfig, MockTransport, build_gateway
from .generation import load_run, resume_run, run_generation
from .prompting import ALL_TECHNIQUES, PromptSpec

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_TRANSPORT = 5
EXIT_INTEGRITY = 6
EXIT_CAPACITY = 7

_EXIT_CODE_HELP = """\
exit codes:
  0  success
  2  usage error (unknown command or flag)
  3  validation error (bad values, unknown names)
  4  I/O error (unreadable input, output exists without --force)
  5  transport error (provider requests failed)
  6  integrity error (corrupt or mismatched artifacts)
  7  capacity error (request exceeds the available pool)
"""


class OutputExistsError(NfrgenError):
    pass


def _emit(args, text_lines: list[str], doc: dict) -> None:
    if getattr(args, "output", "text") == "json":
        print(json.dumps(doc, indent=2, ensure_ascii=False))
    else:
        for line in text_lines:
            print(line)


def _write_output(path: Path, content: str, force: bool) -> bool:
    """Write idempotently: identical existing content is fine, different
    content requires --force. Returns True when the file was (re)written."""
    if path.exists() and not force:
        if path.read_text(encoding="utf-8") == content:
            return False
        raise OutputExistsError(f"{path} exists with different content; use --force")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")
    return True


def _load_subset(path: Path) -> FrSubset:
    if path.suffix.lower() in (".tsv", ".csv"):
        with path.open("rb") as handle:
            result = parse_requirements_file(handle, path.suffix.lower().lstrip("."))
        members = tuple(r for r in result.records if r.kind is RequirementKind.FR)
        return FrSubset(members=members, selection_seed=0,
                        strategy=SelectionStrategy.EXPLICIT_LIST)
    data = json.loads(path.read_text(encoding="utf-8"))
    if "members" in data:
        return FrSubset.from_dict(data)
    if "records" in data:
        members = tuple(RequirementRecord.from_dict(r) for r in data["records"]
                        if r["kind"] == "FR")
        return FrSubset(members=members, selection_seed=0,
                        strategy=SelectionStrategy.EXPLICIT_LIST)
    raise ValidationError(f"{path} is neither a requirement table nor a subset file")


def _relatedness(args) -> quality.RelatednessMap:
    if getattr(args, "map", None):
        return quality.load_relatedness_map(args.map)
    return quality.DEFAULT_RELATEDNESS


def default_models_path() -> Path:
    return Path(str(resources.files("nfrgen").joinpath("data/models.json")))


def demo_frs_path() -> Path:
    return Path(str(resources.files("nfrgen").joinpath("data/fr_demo.tsv")))


# -- commands -----------------------------------------------------------------

def cmd_ingest(args) -> int:
    path = Path(args.input)
    format = args.format or path.suffix.lower().lstrip(".") or "tsv"
    with path.open("rb") as handle:
        result = parse_requirements_file(handle, format)
    doc = {
        "command": "ingest",
        "ok": True,
        "records": len(result.records),
        "frs": result.count(RequirementKind.FR),
        "nfrs": result.count(RequirementKind.NFR),
        "rejected": [{"row_number": r.row_number, "reason": r.reason}
                     for r in result.rejected],
        "warnings": result.warnings,
        "out": args.out,
    }
    content = json.dumps({
        "records": [r.to_dict() for r in result.records],
        "rejected": [{"row_number": r.row_number, "raw": r.raw, "reason": r.reason}
                     for r in result.rejected],
        "warnings": result.warnings,
    }, indent=2, ensure_ascii=False)
    _write_output(Path(args.out), content, args.force)
    _emit(args, [
        f"parsed {len(result.records)} records "
        f"({doc['frs']} FR, {doc['nfrs']} NFR), "
        f"{len(result.rejected)} rejected rows",
        f"wrote {args.out}",
    ], doc)
    return EXIT_OK


def cmd_select(args) -> int:
    data = json.loads(Path(args.records).read_text(encoding="utf-8"))
    records = [RequirementRecord.from_dict(r) for r in data["records"]]
    explicit_ids = None
    if args.ids:
        ids_path = Path(args.ids)
        raw = ids_path.read_text(encoding="utf-8")
        explicit_ids = (json.loads(raw) if raw.lstrip().startswith("[")
                        else [line.strip() for line in raw.splitlines() if line.strip()])
    subset = select_fr_subset(records, args.count, args.strategy, args.seed,
                              explicit_ids=explicit_ids)
    content = json.dumps(subset.to_dict(), indent=2, ensure_ascii=False)
    _write_output(Path(args.out), content, args.force)
    doc = {"command": "select", "ok": True, "count": len(subset.members),
           "strategy": subset.strategy.value, "seed": subset.selection_seed,
           "member_ids": list(subset.member_ids), "out": args.out}
    _emit(args, [f"selected {len(subset.members)} FRs ({subset.strategy.value}, "
                 f"seed {subset.selection_seed})", f"wrote {args.out}"], doc)
    return EXIT_OK


def cmd_generate(args) -> int:
    out_dir = Path(args.out)
    manifest = out_dir / "run.json"
    if manifest.exists() and not (args.resume or args.force):
        raise OutputExistsError(f"{manifest} exists; use --resume or --force")

    config = GatewayConfig.load(args.models or default_models_path())
    mock_transport = None
    if args.mock:
        mock_transport = MockTransport(nfrs_per_fr=args.mock_nfrs)
    gateway = build_gateway(config, mock=args.mock, mock_transport=mock_transport)

    if args.resume and manifest.exists():
        run = resume_run(out_dir, gateway)
    else:
        subset = _load_subset(Path(args.frs))
        techniques = (frozenset(t.strip() for t in args.techniques.split(","))
                      if args.techniques else frozenset(ALL_TECHNIQUES))
        spec = PromptSpec(frs=subset.members, enabled_techniques=techniques)
        run = run_generation(subset, config.models, spec, out_dir, gateway,
                             run_id=args.run_id, batch_size=args.batch_size)
    artifacts = sorted(p.name for p in out_dir.glob("LLM-*.json"))
    doc = {"command": "generate", "ok": True, "run_id": run.run_id,
           "out_dir": str(out_dir), "statuses": run.statuses,
           "counts": run.counts, "total": run.total_nfrs, "artifacts": artifacts}
    _emit(args, [f"run {run.run_id}: {run.total_nfrs} NFRs across "
                 f"{len(artifacts)} artifact files in {out_dir}"], doc)
    return EXIT_OK


def _service(args) -> EvalService:
    store = EvalStore(args.store)
    return EvalService(store)


def cmd_sample(args) -> int:
    service = _service(args)
    if args.run:
        service.import_run(load_run(Path(args.run)))
    allowed = None
    if args.fr_pool is not None:
        allowed = service.seeded_fr_pool(args.task, args.fr_pool, args.seed)
    sample = service.create_sample(args.task, args.n, args.seed,
                                   allowed_fr_ids=allowed, force=args.force)
    doc = {"command": "sample", "ok": True, "task": sample.task,
           "sample_id": sample.sample_id, "size": len(sample.members),
           "strata": sample.strata, "out": args.out}
    if args.out:
        content = json.dumps({
            "sample_id": sample.sample_id, "task": sample.task,
            "seed": sample.seed, "strata": sample.strata,
            "members": list(sample.members)}, indent=2, ensure_ascii=False)
        _write_output(Path(args.out), content, args.force)
    _emit(args, [f"{sample.task} sample {sample.sample_id}: "
                 f"{len(sample.members)} NFRs over {len(sample.strata)} models"], doc)
    return EXIT_OK


def cmd_assign(args) -> int:
    service = _service(args)
    evaluators = None
    if args.evaluators:
        rows = json.loads(Path(args.evaluators).read_text(encoding="utf-8"))
        evaluators = [Evaluator(r["evaluator_id"], r.get("display_name", ""),
                                int(r.get("years_experience", 0)),
                                r.get("role_title", "")) for r in rows]
    assignments = service.assign(args.per_fr, args.seed, evaluators)
    tokens = {e.evaluator_id: service.store.token_for(e.evaluator_id)
              for e in service.store.evaluators()}
    doc = {"command": "assign", "ok": True,
           "assignments": [{"evaluator_id": a.evaluator_id, "task": a.task,
                            "fr_ids": list(a.fr_ids),
                            "nfr_count": len(a.nfr_ids)} for a in assignments],
           "tokens": tokens}
    if args.out:
        _write_output(Path(args.out),
                      json.dumps(doc["assignments"], indent=2, ensure_ascii=False),
                      args.force)
    lines = [f"{len(assignments)} assignments for {len(tokens)} evaluators"]
    lines += [f"  {eid}: token {token}" for eid, token in sorted(tokens.items())]
    _emit(args, lines, doc)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .evalsvc.api import create_app

    service = _service(args)
    static_dir = args.static
    if static_dir is None:
        candidate = Path("frontend/dist")
        if candidate.is_dir():
            static_dir = str(candidate)
    app = create_app(service, static_dir=static_dir, admin_token=args.admin_token)
    doc = {"command": "serve", "ok": True, "host": args.host, "port": args.port,
           "static": static_dir}
    _emit(args, [f"serving on http://{args.host}:{args.port} "
                 f"(static: {static_dir or 'none'})"], doc)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_analyze(args) -> int:
    relatedness = _relatedness(args)
    model_ids = None
    if args.fixture:
        data = fixtures.fixture_dataset()
        scores, selections, refs = data.scores, data.selections, data.refs()
        model_ids = list(fixtures.MODEL_IDS)
    else:
        if not args.store:
            raise ValidationError("analyze requires --store (or --fixture)")
        store = EvalStore(args.store)
        scores, selections = store.scores(), store.selections()
        refs = store.nfr_refs()
        model_ids = store.model_ids()
        if args.run:
            loaded = load_run(Path(args.run))
            for artifact in loaded.artifacts:
                for entry in artifact.entries:
                    refs.setdefault(entry.nfr_id, analysis.NfrRef(
                        entry.nfr_id, entry.fr_id, entry.model_id, entry.attribute))
            model_ids = sorted(set(model_ids) | {m.model_id for m in loaded.run.models})
    report = analysis.build_report(scores, selections, refs, relatedness, model_ids)
    content = json.dumps(report, indent=2, ensure_ascii=False)
    _write_output(Path(args.report), content, args.force)
    summary = {
        "command": "analyze", "ok": True, "report_path": args.report,
        "mean_validity": (report["score_distributions"] or {}).get(
            "validity", {}).get("mean"),
        "mean_applicability": (report["score_distributions"] or {}).get(
            "applicability", {}).get("mean"),
        "exact_rate_pct": ((report["match_breakdown"] or {}).get("rates_pct") or
                           {}).get("exact"),
    }
    lines = [f"wrote {args.report}"]
    if summary["mean_validity"] is not None:
        lines.insert(0, f"validity mean {summary['mean_validity']}, "
                        f"applicability mean {summary['mean_applicability']}")
    if summary["exact_rate_pct"] is not None:
        lines.insert(1, f"attribute accuracy {summary['exact_rate_pct']}%")
    if args.bars and report["score_distributions"]:
        for dimension in quality.DIMENSIONS:
            dist = analysis.score_distribution(scores, dimension)
            lines.append(analysis.render_text_bars(dist))
    _emit(args, lines, summary)
    return EXIT_OK


def cmd_export(args) -> int:
    store = EvalStore(args.store)
    written = analysis.export_dataset(store, Path(args.out), args.format,
                                      _relatedness(args))
    doc = {"command": "export", "ok": True, "format": args.format,
           "files": [str(p) for p in written]}
    _emit(args, [f"wrote {len(written)} files to {args.out}"], doc)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfrgen",
        description="Generate quality-driven NFRs from functional requirements, "
                    "run the dual human-evaluation workflow, and compute metrics.",
        epilog=_EXIT_CODE_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, force=True):
        p.add_argument("--output", choices=("text", "json"), default="text",
                       help="human-readable text or a machine-readable JSON document")
        if force:
            p.add_argument("--force", action="store_true",
                           help="overwrite outputs that exist with different content")

    p = sub.add_parser("ingest", help="parse a TSV/CSV requirement table")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("tsv", "csv"))
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("select", help="select the FR subset for generation")
    p.add_argument("--records", required=True, help="ingest output JSON")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--strategy", default="uniform_random",
                   choices=[s.value for s in SelectionStrategy])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ids", help="id list file for explicit_list (JSON or one per line)")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("generate", help="run the generation pipeline")
    p.add_argument("--frs", required=True,
                   help="requirement table (.tsv/.csv), ingest output, or subset JSON")
    p.add_argument("--models", help="gateway config JSON (default: bundled eight-model config)")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--mock", action="store_true",
                   help="route every provider to the deterministic offline mock")
    p.add_argument("--mock-nfrs", type=int, default=5,
                   help="NFRs per FR the mock synthesizes (default 5)")
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--run-id")
    p.add_argument("--resume", action="store_true",
                   help="resume an interrupted run in --out")
    p.add_argument("--techniques",
                   help="comma-separated prompt techniques (default: all ten)")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sample", help="draw a stratified evaluation sample")
    p.add_argument("--task", required=True, choices=(SCORING, SELECTION))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--store", required=True, help="evaluation store (SQLite file)")
    p.add_argument("--run", help="run directory to import before sampling")
    p.add_argument("--fr-pool", type=int,
                   help="restrict the draw to this many seeded FRs (match "
                        "assign's --per-fr so every model's sample stays "
                        "coverable)")
    p.add_argument("--out", help="also write the sample as JSON")
    common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("assign", help="assign evaluators to both tasks")
    p.add_argument("--store", required=True)
    p.add_argument("--evaluators", help="JSON list of evaluator records")
    p.add_argument("--per-fr", type=int, default=3, dest="per_fr",
                   help="FRs per evaluator per task (default 3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="also write assignments as JSON")
    common(p)
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("serve", help="serve the evaluation HTTP API (and UI assets)")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", help="static asset directory (default: frontend/dist)")
    p.add_argument("--admin-token", help="require this token on admin endpoints")
    common(p, force=False)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("analyze", help="compute every metric into a report")
    p.add_argument("--store", help="evaluation store with recorded submissions")
    p.add_argument("--run", help="run directory for NFR attribution")
    p.add_argument("--fixture", action="store_true",
                   help="analyze the bundled study-consistent fixture instead")
    p.add_argument("--map", help="relatedness map override (JSON pairs)")
    p.add_argument("--report", required=True, help="report output path")
    p.add_argument("--bars", action="store_true",
                   help="also print plain-text histograms")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("export", help="export the dataset and computed reports")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--map", help="relatedness map override (JSON pairs)")
    common(p, force=False)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OutputExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ArgumentError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except IntegrityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except NfrgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
