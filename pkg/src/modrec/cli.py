"""Command-line interface.

Subcommands: scan, ground-truth, recover, evaluate, gen-synthetic, report.
Exit codes: 0 success, 2 input error, 3 invariant violation, 4 success with a
degenerate-corpus fallback.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import corpus, embedding, metrics, pipeline, synthetic
from .errors import (
    EXIT_DEGENERATE_FALLBACK,
    EXIT_INPUT_ERROR,
    EXIT_INVARIANT_VIOLATION,
    EXIT_OK,
    InputError,
    InvariantViolation,
)
from .reduction import ReductionParams

log = logging.getLogger("modrec")

_GRANULARITY = {"class": embedding.GRANULARITY_CLASS, "package": embedding.GRANULARITY_PACKAGE}


def _parse_config_file(path: Path) -> dict:
    """Flat TOML-style key = value pairs; strings, numbers, and booleans."""
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    out: dict = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("["):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip()
        value = value.split("#", 1)[0].strip().strip("\"'")
        if value.lower() in ("true", "false"):
            out[key] = value.lower() == "true"
        else:
            try:
                out[key] = int(value)
            except ValueError:
                try:
                    out[key] = float(value)
                except ValueError:
                    out[key] = value
    return out


def _build_config(args: argparse.Namespace) -> pipeline.PipelineConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(_parse_config_file(Path(args.config)))

    def pick(flag_name: str, key: str, default):
        flag = getattr(args, flag_name, None)
        if flag is not None:
            return flag
        return values.get(key, default)

    embedder = pick("embedder", "embedder", pipeline.EMBEDDER_LEXICAL)
    vectors_file = None
    if isinstance(embedder, str) and embedder.startswith("file:"):
        vectors_file = embedder[len("file:") :]
        embedder = pipeline.EMBEDDER_EXTERNAL

    reduction_params = ReductionParams(
        n_neighbors=int(pick("n_neighbors", "n_neighbors", 15)),
        out_dim=int(pick("out_dim", "out_dim", 5)),
        min_dist=float(pick("min_dist", "min_dist", 0.0)),
        epochs=int(pick("epochs", "epochs", 200)),
        negative_sample_rate=int(values.get("negative_sample_rate", 5)),
    )
    granularity = pick("granularity", "granularity", "class")
    if granularity in _GRANULARITY:
        granularity = _GRANULARITY[granularity]

    no_repair = bool(getattr(args, "no_repair", False)) or not values.get("repair_enabled", True)
    return pipeline.PipelineConfig(
        embedder=embedder,
        vectors_file=vectors_file,
        embedder_dim=int(pick("dim", "dim", embedding.DEFAULT_DIM)),
        reduction=reduction_params,
        min_cluster_size=int(pick("min_cluster_size", "min_cluster_size", 2)),
        min_samples=getattr(args, "min_samples", None) or values.get("min_samples"),
        repair_enabled=not no_repair,
        granularity=granularity,
        runs=int(pick("runs", "runs", 3)),
        seed=int(pick("seed", "seed", 0)),
        seed_stride=int(values.get("seed_stride", 1)),
        exclude_globs=tuple(getattr(args, "exclude", None) or ()),
    )


def _emit(doc: dict, args: argparse.Namespace) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    out = getattr(args, "out", None)
    if out and out != "-":
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_scan(args: argparse.Namespace) -> int:
    manifest = corpus.scan_sources(args.root, tuple(args.exclude or ()))
    if args.names_only:
        text = "\n".join(manifest.fqcns) + "\n"
        if args.out and args.out != "-":
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    else:
        _emit(manifest.to_json(), args)
    return EXIT_OK


def _cmd_ground_truth(args: argparse.Namespace) -> int:
    manifest = corpus.scan_sources(args.root, tuple(args.exclude or ()))
    arch = corpus.extract_ground_truth(args.root, manifest)
    _emit(arch.to_json(), args)
    return EXIT_OK


def _cmd_recover(args: argparse.Namespace) -> int:
    config = _build_config(args)
    result = pipeline.recover(config, args.source)
    out_dir = Path(args.out or "recovered")
    out_dir.mkdir(parents=True, exist_ok=True)
    result.architecture.save(out_dir / "architecture.json")
    for i, arch in enumerate(result.per_run_architectures):
        run_dir = out_dir / f"run_{i}"
        run_dir.mkdir(exist_ok=True)
        arch.save(run_dir / "architecture.json")
    report_doc = result.report.to_json()
    report_doc["representative_run"] = result.representative_run
    (out_dir / "report.json").write_text(
        json.dumps(report_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if args.format == "text":
        print(f"recovered {len(result.architecture.modules)} modules -> {out_dir}/architecture.json")
        print(f"representative run: {result.representative_run} of {config.runs}")
    return EXIT_DEGENERATE_FALLBACK if result.fallbacks else EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    recovered = corpus.Architecture.load(args.recovered)
    ground_truth = corpus.Architecture.load(args.ground_truth)
    deps = metrics.load_dependencies(args.deps) if args.deps else None
    report = pipeline.evaluate(recovered, ground_truth, deps)
    if args.format == "text":
        text, _ = pipeline.report_table([(Path(args.recovered).stem, report)])
        sys.stdout.write(text)
        if args.out and args.out != "-":
            _emit(report, args)
    else:
        _emit(report, args)
    return EXIT_OK


def _cmd_gen_synthetic(args: argparse.Namespace) -> int:
    spec = synthetic.SyntheticSpec(
        n_modules=args.modules,
        classes_per_module=(args.classes_min, args.classes_max),
        noise_rate=args.noise,
        seed=args.seed if args.seed is not None else 0,
    )
    paths = synthetic.gen_synthetic(spec, args.out or "synthetic")
    for kind, path in sorted(paths.items()):
        print(f"{kind}: {path}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    rows = []
    for path in args.reports:
        p = Path(path)
        if not p.is_file():
            raise InputError(f"report file not found: {p}")
        doc = json.loads(p.read_text(encoding="utf-8"))
        if "averaged" in doc:  # a recovery report; metrics live under averaged
            doc = doc["averaged"]
        rows.append((p.stem, doc))
    text, structured = pipeline.report_table(rows)
    if args.format == "json":
        _emit({"rows": structured}, args)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_common_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML-style key = value config file; flags win")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--embedder", default=None, help="lexical or file:<vectors path>")
    p.add_argument("--dim", type=int, default=None, help="lexical embedding dimension")
    p.add_argument("--n-neighbors", dest="n_neighbors", type=int, default=None)
    p.add_argument("--out-dim", dest="out_dim", type=int, default=None)
    p.add_argument("--min-dist", dest="min_dist", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--min-cluster-size", dest="min_cluster_size", type=int, default=None)
    p.add_argument("--min-samples", dest="min_samples", type=int, default=None)
    p.add_argument("--no-repair", dest="no_repair", action="store_true")
    p.add_argument("--granularity", choices=sorted(_GRANULARITY), default=None)
    p.add_argument("--exclude", action="append", help="glob of paths to skip (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modrec",
        description="Recover Java module structure from class names and score it "
        "against a ground-truth architecture.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="list classes in a Java source tree")
    p.add_argument("root")
    p.add_argument("--exclude", action="append")
    p.add_argument("--names-only", action="store_true", help="emit one fqcn per line")
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("ground-truth", help="extract developer modules from module-info placement")
    p.add_argument("root")
    p.add_argument("--exclude", action="append")
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_ground_truth)

    p = sub.add_parser("recover", help="recover a module architecture from a tree or name list")
    p.add_argument("source", help="Java source tree or name-list file")
    _add_common_pipeline_flags(p)
    p.add_argument("--out", default="recovered", help="output directory")
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.set_defaults(func=_cmd_recover)

    p = sub.add_parser("evaluate", help="score a recovered architecture against ground truth")
    p.add_argument("--recovered", required=True)
    p.add_argument("--ground-truth", dest="ground_truth", required=True)
    p.add_argument("--deps", default=None, help="dependency file for MQ")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic corpus with known modules")
    p.add_argument("--modules", type=int, default=6)
    p.add_argument("--classes-min", dest="classes_min", type=int, default=20)
    p.add_argument("--classes-max", dest="classes_max", type=int, default=40)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synthetic")
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("report", help="tabulate one or more metric reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except InvariantViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
