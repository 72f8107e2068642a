"""Undersized module repair.

Two defects disqualify a raw clustering as a module structure: singleton
modules and split packages (a package spanning several modules is a
compile-time error under the Java module system). Singletons, including
noise points, are merged into the most lexically similar larger cluster via
class-based TF-IDF; split packages are then resolved by moving each package
to the cluster holding the plurality of it.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .clustering import NOISE, ClusterAssignment
from .corpus import Architecture, CorpusManifest
from .embedding import tokenize
from .errors import InputError, InvariantViolation

log = logging.getLogger(__name__)


@dataclass
class ClusterDocument:
    """All member classes' name tokens of one cluster, concatenated."""

    cluster_id: int
    token_counts: Counter


@dataclass
class CtfidfModel:
    vocabulary: list[str]
    cluster_ids: list[int]
    cluster_vectors: np.ndarray  # (n_clusters, len(vocabulary)), rows L2-normalized
    avg_tokens_per_cluster: float
    idf: np.ndarray  # log(1 + avg / total count of token), vocabulary order
    cluster_sizes: dict[int, int]


def _entity_tokens(manifest: CorpusManifest) -> list[tuple[str, ...]]:
    return [tokenize(e.embed_text).tokens for e in manifest.entities]


def _split_assignment(assignment: ClusterAssignment) -> tuple[dict[int, list[int]], list[int]]:
    """Partition rows into real clusters (size >= 2) and singleton rows.

    Noise points and size-1 clusters are both singletons for repair purposes.
    """
    groups = assignment.groups()
    clusters = {cid: rows for cid, rows in groups.items() if len(rows) >= 2}
    singles = [rows[0] for cid, rows in groups.items() if len(rows) == 1]
    singles.extend(i for i, label in enumerate(assignment.labels) if label == NOISE)
    return clusters, sorted(singles)


def build_ctfidf(assignment: ClusterAssignment, manifest: CorpusManifest) -> CtfidfModel:
    """Class-based TF-IDF over the non-singleton clusters.

    weight(token, cluster) = tf * log(1 + A / f), where tf is the token count
    in the cluster's concatenated document, f the token's count across all
    cluster documents, and A the mean token count per cluster.
    """
    if assignment.fqcns != manifest.fqcns:
        raise InputError("assignment and manifest list different classes")
    clusters, _ = _split_assignment(assignment)
    if not clusters:
        raise InputError("cannot repair: every cluster is a singleton")

    tokens = _entity_tokens(manifest)
    docs = [
        ClusterDocument(cluster_id=cid, token_counts=Counter(t for row in rows for t in tokens[row]))
        for cid, rows in sorted(clusters.items())
    ]
    totals: Counter = Counter()
    for doc in docs:
        totals.update(doc.token_counts)
    vocabulary = sorted(totals)
    col = {tok: i for i, tok in enumerate(vocabulary)}
    avg = sum(totals.values()) / len(docs)
    idf = np.array([np.log(1.0 + avg / totals[tok]) for tok in vocabulary])

    vectors = np.zeros((len(docs), len(vocabulary)))
    for row, doc in enumerate(docs):
        for tok, count in doc.token_counts.items():
            vectors[row, col[tok]] = count * idf[col[tok]]
        vectors[row] /= np.linalg.norm(vectors[row])
    return CtfidfModel(
        vocabulary=vocabulary,
        cluster_ids=[doc.cluster_id for doc in docs],
        cluster_vectors=vectors,
        avg_tokens_per_cluster=avg,
        idf=idf,
        cluster_sizes={cid: len(rows) for cid, rows in clusters.items()},
    )


def merge_singletons(assignment: ClusterAssignment, model: CtfidfModel, manifest: CorpusManifest) -> ClusterAssignment:
    """Merge every singleton (size-1 cluster or noise point) into the
    non-singleton cluster with the most similar c-TF-IDF vector.

    Ties go to the larger cluster, then the lower cluster id; singletons with
    no in-vocabulary tokens go to the largest cluster.
    """
    clusters, singles = _split_assignment(assignment)
    if not singles:
        return assignment

    tokens = _entity_tokens(manifest)
    col = {tok: i for i, tok in enumerate(model.vocabulary)}
    largest = max(model.cluster_ids, key=lambda cid: (model.cluster_sizes[cid], -cid))

    target: dict[int, int] = {}
    for row in singles:
        vec = np.zeros(len(model.vocabulary))
        for tok, count in Counter(tokens[row]).items():
            if tok in col:
                vec[col[tok]] = count * model.idf[col[tok]]
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            log.warning(
                "singleton %s shares no tokens with any cluster; assigning to the largest",
                manifest.entities[row].fqcn,
            )
            target[row] = largest
            continue
        sims = model.cluster_vectors @ (vec / norm)
        ranked = sorted(
            range(len(model.cluster_ids)),
            key=lambda i: (
                -sims[i],
                -model.cluster_sizes[model.cluster_ids[i]],
                model.cluster_ids[i],
            ),
        )
        target[row] = model.cluster_ids[ranked[0]]

    relabel = {cid: new for new, cid in enumerate(sorted(clusters))}
    labels = [0] * len(assignment.labels)
    for cid, rows in clusters.items():
        for row in rows:
            labels[row] = relabel[cid]
    for row, cid in target.items():
        labels[row] = relabel[cid]
    return ClusterAssignment(
        fqcns=list(assignment.fqcns), labels=labels, min_cluster_size=assignment.min_cluster_size
    )


def resolve_split_packages(assignment: ClusterAssignment, manifest: CorpusManifest) -> ClusterAssignment:
    """Relocate every package spanning several clusters to the cluster holding
    the plurality of its classes; ties go to the bigger cluster, then the
    lower id. Emptied clusters are deleted and ids recompacted."""
    if any(label == NOISE for label in assignment.labels):
        raise InputError("split-package resolution requires singleton-free input")

    labels = list(assignment.labels)
    packages: dict[str, list[int]] = {}
    for row, entity in enumerate(manifest.entities):
        packages.setdefault(entity.package_name, []).append(row)

    while True:
        sizes = Counter(labels)
        split = {
            pkg: rows
            for pkg, rows in packages.items()
            if len({labels[r] for r in rows}) > 1
        }
        if not split:
            break
        for pkg in sorted(split):
            rows = split[pkg]
            votes = Counter(labels[r] for r in rows)
            best = sorted(votes, key=lambda cid: (-votes[cid], -sizes[cid], cid))[0]
            for r in rows:
                if labels[r] != best:
                    sizes[labels[r]] -= 1
                    sizes[best] += 1
                    labels[r] = best

    survivors = sorted({l for l in labels})
    relabel = {cid: new for new, cid in enumerate(survivors)}
    labels = [relabel[l] for l in labels]
    return ClusterAssignment(
        fqcns=list(assignment.fqcns), labels=labels, min_cluster_size=assignment.min_cluster_size
    )


def repair(assignment: ClusterAssignment, manifest: CorpusManifest) -> tuple[ClusterAssignment, list[str]]:
    """Full repair: merge singletons, then resolve split packages.

    Split resolution can drain a cluster down to one class; in that case the
    singleton pass re-runs once. Returns the repaired assignment plus any
    degenerate-fallback notes. Raises if the structure still oscillates.
    """
    fallbacks: list[str] = []
    clusters, _ = _split_assignment(assignment)
    if not clusters:
        log.warning("every cluster is a singleton; falling back to one merged module")
        fallbacks.append("all-singleton corpus merged into a single module")
        merged = ClusterAssignment(
            fqcns=list(assignment.fqcns),
            labels=[0] * len(assignment.labels),
            min_cluster_size=assignment.min_cluster_size,
        )
        return merged, fallbacks

    current = assignment
    for round_no in (1, 2):
        clusters, singles = _split_assignment(current)
        if singles:
            if not clusters:
                log.warning("repair drained every cluster; falling back to one merged module")
                fallbacks.append("all clusters drained during repair; merged into a single module")
                return (
                    ClusterAssignment(
                        fqcns=list(current.fqcns),
                        labels=[0] * len(current.labels),
                        min_cluster_size=current.min_cluster_size,
                    ),
                    fallbacks,
                )
            model = build_ctfidf(current, manifest)
            current = merge_singletons(current, model, manifest)
        current = resolve_split_packages(current, manifest)
        _, singles = _split_assignment(current)
        if not singles:
            return current, fallbacks
        if round_no == 2:
            break
    raise InvariantViolation("repair oscillates: split resolution keeps creating singletons")


def finalize(assignment: ClusterAssignment, manifest: CorpusManifest) -> Architecture:
    """Name clusters module_<id> and check the partition property."""
    if len(assignment.fqcns) != len(manifest.entities):
        raise InvariantViolation("assignment does not cover the manifest")
    modules: dict[str, set[str]] = {}
    for fqcn, label in zip(assignment.fqcns, assignment.labels):
        if label == NOISE:
            raise InvariantViolation(f"unassigned class after repair: {fqcn}")
        modules.setdefault(f"module_{label}", set()).add(fqcn)
    arch = Architecture(modules=modules)
    if arch.universe != set(manifest.fqcns):
        raise InvariantViolation("finalized architecture does not cover the corpus")
    return arch
