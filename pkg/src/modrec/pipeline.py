"""End-to-end orchestration: ingest, embed, reduce, cluster, repair, evaluate.

Recovery runs the stage chain ``runs`` times with per-run seeds, evaluates
mutual a2a between the run architectures, and keeps the run closest to the
middle of the pack as the representative artifact. All randomness flows from
one master seed through named per-stage streams.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from hashlib import blake2b
from pathlib import Path

from . import clustering, corpus, embedding, metrics, reduction, repair
from .errors import InputError

EMBEDDER_LEXICAL = "lexical"
EMBEDDER_EXTERNAL = "external_file"


def stage_seed(master: int, stage: str, run_index: int = 0) -> int:
    """Independent deterministic seed for one stage of one run."""
    digest = blake2b(f"{master}:{run_index}:{stage}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") % (2**31)


@dataclass
class PipelineConfig:
    embedder: str = EMBEDDER_LEXICAL
    vectors_file: str | None = None
    embedder_dim: int = embedding.DEFAULT_DIM
    reduction: reduction.ReductionParams = field(default_factory=reduction.ReductionParams)
    min_cluster_size: int = 2
    min_samples: int | None = None
    repair_enabled: bool = True
    granularity: str = embedding.GRANULARITY_CLASS
    runs: int = 3
    seed: int = 0
    seed_stride: int = 1
    exclude_globs: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise InputError("runs must be >= 1")
        if self.min_cluster_size < 1:
            raise InputError("min_cluster_size must be positive")
        if self.min_samples is not None and self.min_samples < 1:
            raise InputError("min_samples must be positive")
        if self.embedder not in (EMBEDDER_LEXICAL, EMBEDDER_EXTERNAL):
            raise InputError(f"unknown embedder: {self.embedder!r}")
        if self.embedder == EMBEDDER_EXTERNAL and not self.vectors_file:
            raise InputError("external embedder needs a vectors file")

    def to_json(self) -> dict:
        return {
            "embedder": self.embedder,
            "vectors_file": self.vectors_file,
            "embedder_dim": self.embedder_dim,
            "reduction": self.reduction.to_json(),
            "min_cluster_size": self.min_cluster_size,
            "min_samples": self.min_samples,
            "repair_enabled": self.repair_enabled,
            "granularity": self.granularity,
            "runs": self.runs,
            "seed": self.seed,
            "seed_stride": self.seed_stride,
            "exclude_globs": list(self.exclude_globs),
        }


@dataclass
class RunReport:
    per_run: list[dict]
    averaged: dict
    wall_clock_seconds: dict
    config: dict

    def to_json(self) -> dict:
        return {
            "per_run": self.per_run,
            "averaged": self.averaged,
            "wall_clock_seconds": self.wall_clock_seconds,
            "config": self.config,
        }


@dataclass
class RecoveryResult:
    architecture: corpus.Architecture
    per_run_architectures: list[corpus.Architecture]
    representative_run: int
    report: RunReport
    fallbacks: list[str]


def average_numeric(records: list[dict]) -> dict:
    """Field-wise arithmetic mean of the numeric leaves shared by all records."""
    if not records:
        return {}
    out: dict = {}
    for key in records[0]:
        if not all(key in r for r in records):
            continue
        values = [r[key] for r in records]
        if all(isinstance(v, bool) for v in values):
            continue
        if all(isinstance(v, (int, float)) for v in values):
            out[key] = sum(values) / len(values)
        elif all(isinstance(v, dict) for v in values):
            nested = average_numeric(values)
            if nested:
                out[key] = nested
    return out


def ingest(source: str | Path, exclude_globs: tuple[str, ...] = ()) -> corpus.CorpusManifest:
    """Scan a directory of Java sources, or read a flat name-list file."""
    path = Path(source)
    if path.is_dir():
        return corpus.scan_sources(path, exclude_globs)
    return corpus.load_name_list(path)


def _noise_to_singletons(assignment: clustering.ClusterAssignment) -> clustering.ClusterAssignment:
    """Give each noise point its own cluster id (the no-repair path still has
    to place every class somewhere)."""
    labels = list(assignment.labels)
    next_id = max((l for l in labels if l != clustering.NOISE), default=-1) + 1
    for i, label in enumerate(labels):
        if label == clustering.NOISE:
            labels[i] = next_id
            next_id += 1
    return clustering.ClusterAssignment(
        fqcns=list(assignment.fqcns), labels=labels, min_cluster_size=assignment.min_cluster_size
    )


def run_once(
    manifest: corpus.CorpusManifest, config: PipelineConfig, run_seed: int
) -> tuple[corpus.Architecture, dict]:
    """One deterministic pass of the recovery chain for a given seed."""
    timings: dict[str, float] = {}
    fallbacks: list[str] = []

    t0 = time.perf_counter()
    view = embedding.granularity_view(manifest, config.granularity)
    timings["granularity"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if config.embedder == EMBEDDER_LEXICAL:
        matrix = embedding.embed_lexical(
            view, dim=config.embedder_dim, seed=stage_seed(run_seed, "embed")
        )
    else:
        matrix = embedding.load_external_embeddings(config.vectors_file, view)
    timings["embed"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    params = replace(config.reduction, seed=stage_seed(run_seed, "reduce"))
    reduced = reduction.reduce(matrix, params)
    if reduced.params.identity_fallback:
        fallbacks.append("reduction bypassed: corpus not larger than n_neighbors")
    timings["reduce"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    assignment = clustering.cluster(
        reduced, min_cluster_size=config.min_cluster_size, min_samples=config.min_samples
    )
    timings["cluster"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    n_noise = assignment.n_noise()
    n_singletons = sum(1 for size in assignment.sizes().values() if size == 1)
    if config.repair_enabled:
        assignment, repair_fallbacks = repair.repair(assignment, manifest)
        fallbacks.extend(repair_fallbacks)
    else:
        assignment = _noise_to_singletons(assignment)
    timings["repair"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    architecture = repair.finalize(assignment, manifest)
    timings["finalize"] = time.perf_counter() - t0

    record = {
        "seed": run_seed,
        "n_modules": len(architecture.modules),
        "pre_repair_noise_points": n_noise,
        "pre_repair_singleton_clusters": n_singletons,
        "stage_seconds": timings,
        "fallbacks": fallbacks,
    }
    return architecture, record


def recover(config: PipelineConfig, corpus_source: str | Path) -> RecoveryResult:
    """Run recovery ``config.runs`` times and pick the representative run.

    The representative is the run whose mean a2a against the other runs is the
    median of those means (ties to the lower run index).
    """
    total_start = time.perf_counter()
    t0 = time.perf_counter()
    manifest = ingest(corpus_source, config.exclude_globs)
    ingest_seconds = time.perf_counter() - t0

    architectures: list[corpus.Architecture] = []
    records: list[dict] = []
    fallbacks: list[str] = []
    for i in range(config.runs):
        run_seed = config.seed + config.seed_stride * i
        arch, record = run_once(manifest, config, run_seed)
        record["run"] = i
        architectures.append(arch)
        records.append(record)
        fallbacks.extend(record["fallbacks"])

    if config.runs == 1:
        representative = 0
        for record in records:
            record["mutual_a2a_mean"] = 100.0
    else:
        means = []
        for i, arch_i in enumerate(architectures):
            scores = [
                metrics.a2a(arch_i, arch_j)[0]
                for j, arch_j in enumerate(architectures)
                if j != i
            ]
            means.append(sum(scores) / len(scores))
        for record, mean in zip(records, means):
            record["mutual_a2a_mean"] = mean
        order = sorted(range(config.runs), key=lambda i: (means[i], i))
        representative = order[(config.runs - 1) // 2]

    stage_totals: dict[str, float] = {"ingest": ingest_seconds}
    for record in records:
        for stage, seconds in record["stage_seconds"].items():
            stage_totals[stage] = stage_totals.get(stage, 0.0) + seconds
    stage_totals["total"] = time.perf_counter() - total_start

    report = RunReport(
        per_run=records,
        averaged=average_numeric(records),
        wall_clock_seconds=stage_totals,
        config=config.to_json(),
    )
    return RecoveryResult(
        architecture=architectures[representative],
        per_run_architectures=architectures,
        representative_run=representative,
        report=report,
        fallbacks=fallbacks,
    )


def evaluate(
    recovered: corpus.Architecture,
    ground_truth: corpus.Architecture,
    deps: metrics.DependencyGraph | None = None,
) -> dict:
    """Similarity of a recovered architecture to the ground truth, plus MQ of
    the recovered one when a dependency graph is given."""
    if not (recovered.universe & ground_truth.universe):
        raise InputError("recovered and ground-truth architectures share no classes")
    score, cost = metrics.a2a(ground_truth, recovered)
    table = metrics.contingency(ground_truth, recovered)
    h, c, _ = metrics.h_c_scores(table)
    out = {
        "a2a": score,
        "h_score": h,
        "c_score": c,
        "mq_sum": None,
        "mq_normalized": None,
        "transform_cost": cost.to_json(),
        "params": {
            "n_ground_truth_modules": len(ground_truth.modules),
            "n_recovered_modules": len(recovered.modules),
            "n_common_classes": table.total,
        },
    }
    if deps is not None:
        mq_sum, mq_norm, _ = metrics.mq(recovered, deps)
        out["mq_sum"] = mq_sum
        out["mq_normalized"] = mq_norm
    return out


METRIC_COLUMNS = ["a2a", "c_score", "h_score", "mq_normalized"]


def report_table(rows: list[tuple[str, dict]]) -> tuple[str, list[dict]]:
    """Summary table over labeled metric reports.

    Columns follow the usual presentation order: a2a, c-score, h-score, MQ.
    With more than one row, deltas against the first row are appended.
    """
    if not rows:
        raise InputError("no reports to tabulate")

    def fmt(value) -> str:
        if value is None:
            return "-"
        return f"{value * 100:.2f}%" if abs(value) <= 1.0 else f"{value:.2f}%"

    structured = []
    for label, report in rows:
        entry = {"label": label}
        for col in METRIC_COLUMNS:
            entry[col] = report.get(col)
        structured.append(entry)
    base = structured[0]
    if len(structured) > 1:
        for entry in structured[1:]:
            entry["delta_a2a_pp"] = (
                None
                if entry["a2a"] is None or base["a2a"] is None
                else entry["a2a"] - base["a2a"]
            )

    headers = ["config"] + METRIC_COLUMNS + (["delta_a2a_pp"] if len(structured) > 1 else [])
    lines = []
    widths = [max(len(h), 14) for h in headers]
    lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for entry in structured:
        cells = [str(entry["label"])]
        for col in METRIC_COLUMNS:
            value = entry[col]
            if col in ("h_score", "c_score"):
                cells.append(fmt(value))
            else:
                cells.append("-" if value is None else f"{value:.2f}%")
        if len(structured) > 1:
            delta = entry.get("delta_a2a_pp")
            cells.append("-" if delta is None else f"{delta:+.2f}pp")
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines) + "\n", structured
