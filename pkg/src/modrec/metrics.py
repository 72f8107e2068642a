"""Architecture comparison and encapsulation metrics.

a2a scores system-level similarity as 1 - (transform operations / construction
operations); h-score and c-score are the entropy-based homogeneity and
completeness of the module partition; MQ sums per-module cluster factors over
a class-level dependency graph.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from math import log
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import Architecture, validate_fqcn
from .errors import InputError

logger = logging.getLogger(__name__)


@dataclass
class ContingencyTable:
    """Co-occurrence counts between developer modules (rows) and recovered
    modules (columns) over their common class universe."""

    dev_modules: list[str]
    rec_modules: list[str]
    counts: np.ndarray
    total: int

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(self.dev_modules), len(self.rec_modules)):
            raise InputError("contingency counts shape does not match module lists")
        if self.counts.min(initial=0) < 0:
            raise InputError("negative contingency count")
        if int(self.counts.sum()) != self.total:
            raise InputError("contingency counts do not sum to the class total")


@dataclass(frozen=True)
class EntropyDecomposition:
    """Partition entropies in nats."""

    h_dev: float
    h_rec: float
    h_dev_given_rec: float
    h_rec_given_dev: float


@dataclass(frozen=True)
class TransformCost:
    """Edit operations turning one architecture into another."""

    module_adds: int
    module_removes: int
    entity_adds: int
    entity_removes: int
    entity_moves: int
    total_ops: int
    construction_ops_i: int
    construction_ops_j: int

    def to_json(self) -> dict:
        return {
            "addC": self.module_adds,
            "remC": self.module_removes,
            "addE": self.entity_adds,
            "remE": self.entity_removes,
            "movE": self.entity_moves,
            "mto": self.total_ops,
            "aco_i": self.construction_ops_i,
            "aco_j": self.construction_ops_j,
        }


@dataclass
class DependencyGraph:
    """Directed class-level dependencies; self-edges are never stored."""

    edges: set[tuple[str, str]]

    def __post_init__(self) -> None:
        self.edges = {(s, d) for s, d in self.edges if s != d}


def contingency(dev: Architecture, rec: Architecture) -> ContingencyTable:
    """Count shared classes for every (developer module, recovered module) pair."""
    common = dev.universe & rec.universe
    if not common:
        raise InputError("architectures share no classes; nothing to compare")
    dev_names = sorted(dev.modules)
    rec_names = sorted(rec.modules)
    dev_of = dev.module_of()
    rec_of = rec.module_of()
    dev_index = {name: i for i, name in enumerate(dev_names)}
    rec_index = {name: j for j, name in enumerate(rec_names)}
    counts = np.zeros((len(dev_names), len(rec_names)), dtype=np.int64)
    for fqcn in common:
        counts[dev_index[dev_of[fqcn]], rec_index[rec_of[fqcn]]] += 1
    return ContingencyTable(dev_modules=dev_names, rec_modules=rec_names, counts=counts, total=len(common))


def _xlogy(x: float, y: float) -> float:
    return 0.0 if x == 0.0 else x * log(y)


def h_c_scores(table: ContingencyTable) -> tuple[float, float, EntropyDecomposition]:
    """Homogeneity and completeness of the recovered partition.

    h = 1 - H(dev|rec)/H(dev) and c = 1 - H(rec|dev)/H(rec), with the
    degenerate partitions pinned to 1: a single developer module gives h = 1,
    a single recovered module gives c = 1.
    """
    a = table.counts.astype(np.float64)
    n = float(table.total)
    dev_marginal = a.sum(axis=1)
    rec_marginal = a.sum(axis=0)

    h_dev = -sum(_xlogy(m / n, m / n) for m in dev_marginal)
    h_rec = -sum(_xlogy(m / n, m / n) for m in rec_marginal)

    h_dev_given_rec = 0.0
    for j, col_total in enumerate(rec_marginal):
        for i in range(a.shape[0]):
            if a[i, j] > 0:
                h_dev_given_rec -= _xlogy(a[i, j] / n, a[i, j] / col_total)
    h_rec_given_dev = 0.0
    for i, row_total in enumerate(dev_marginal):
        for j in range(a.shape[1]):
            if a[i, j] > 0:
                h_rec_given_dev -= _xlogy(a[i, j] / n, a[i, j] / row_total)

    h = 1.0 if h_dev == 0.0 else 1.0 - h_dev_given_rec / h_dev
    c = 1.0 if h_rec == 0.0 else 1.0 - h_rec_given_dev / h_rec
    entropies = EntropyDecomposition(
        h_dev=h_dev,
        h_rec=h_rec,
        h_dev_given_rec=h_dev_given_rec,
        h_rec_given_dev=h_rec_given_dev,
    )
    return h, c, entropies


def construction_ops(arch: Architecture) -> int:
    """Operations building an architecture from nothing: one add per module,
    one add plus one move per entity."""
    n_entities = sum(len(m) for m in arch.modules.values())
    return len(arch.modules) + 2 * n_entities


def a2a(arch_i: Architecture, arch_j: Architecture) -> tuple[float, TransformCost]:
    """Architecture-to-architecture similarity percentage.

    The module correspondence minimizing moves is found by maximum-weight
    bipartite matching on shared-entity counts; every matchable module pair is
    matched (zero-overlap matches still save an add/remove pair).
    """
    if not arch_i.modules and not arch_j.modules:
        raise InputError("cannot compare two empty architectures")

    ents_i = arch_i.universe
    ents_j = arch_j.universe
    common = ents_i & ents_j
    rem_e = len(ents_i - ents_j)
    add_e = len(ents_j - ents_i)

    names_i = sorted(arch_i.modules)
    names_j = sorted(arch_j.modules)
    overlap = np.zeros((len(names_i), len(names_j)), dtype=np.int64)
    if common:
        idx_j = {name: j for j, name in enumerate(names_j)}
        mod_j = arch_j.module_of()
        for i, name in enumerate(names_i):
            for fqcn in arch_i.modules[name]:
                if fqcn in common:
                    overlap[i, idx_j[mod_j[fqcn]]] += 1

    matched = 0
    if len(names_i) and len(names_j):
        rows, cols = linear_sum_assignment(overlap, maximize=True)
        matched = int(overlap[rows, cols].sum())
        n_matched_pairs = len(rows)
    else:
        n_matched_pairs = 0

    mov_e = add_e + (len(common) - matched)
    add_c = len(names_j) - n_matched_pairs
    rem_c = len(names_i) - n_matched_pairs
    mto = add_c + rem_c + add_e + rem_e + mov_e
    aco_i = construction_ops(arch_i)
    aco_j = construction_ops(arch_j)
    score = (1.0 - mto / (aco_i + aco_j)) * 100.0
    cost = TransformCost(
        module_adds=add_c,
        module_removes=rem_c,
        entity_adds=add_e,
        entity_removes=rem_e,
        entity_moves=mov_e,
        total_ops=mto,
        construction_ops_i=aco_i,
        construction_ops_j=aco_j,
    )
    return score, cost


def mq(arch: Architecture, deps: DependencyGraph) -> tuple[float, float, dict[str, float]]:
    """Modularization quality: per-module cluster factors, their sum, and the
    sum normalized by module count as a percentage.

    Edges with endpoints outside the architecture are dropped with a warning.
    """
    universe = arch.universe
    module_of = arch.module_of()
    internal: dict[str, int] = {name: 0 for name in arch.modules}
    external: dict[str, int] = {name: 0 for name in arch.modules}
    dropped = 0
    for src, dst in deps.edges:
        if src not in universe or dst not in universe:
            dropped += 1
            continue
        m_src = module_of[src]
        m_dst = module_of[dst]
        if m_src == m_dst:
            internal[m_src] += 1
        else:
            external[m_src] += 1
            external[m_dst] += 1
    if dropped:
        logger.warning("dropped %d dependency edges with endpoints outside the architecture", dropped)

    factors: dict[str, float] = {}
    for name in arch.modules:
        mu2 = 2 * internal[name]
        denom = mu2 + external[name]
        factors[name] = 0.0 if denom == 0 else mu2 / denom
    mq_sum = float(sum(factors.values()))
    k = len(arch.modules)
    mq_normalized = 0.0 if k == 0 else mq_sum / k * 100.0
    return mq_sum, mq_normalized, factors


_EDGE_RE = re.compile(r"^(?P<src>\S+)\s*->\s*(?P<dst>\S+)$")


def load_dependencies(path: str | Path) -> DependencyGraph:
    """Read a dependency file: ``src -> dst`` lines, or a JSON edge list."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"dependency file not found: {p}")
    text = p.read_text(encoding="utf-8")
    edges: set[tuple[str, str]] = set()
    if text.lstrip().startswith("["):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"cannot parse dependency file {p}: {exc}") from exc
        for pair in doc:
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise InputError(f"{p}: JSON edges must be [src, dst] pairs, got {pair!r}")
            src, dst = str(pair[0]), str(pair[1])
            validate_fqcn(src)
            validate_fqcn(dst)
            edges.add((src, dst))
    else:
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            m = _EDGE_RE.match(line)
            if not m:
                raise InputError(f"{p}:{lineno}: expected '<src> -> <dst>'")
            try:
                validate_fqcn(m.group("src"))
                validate_fqcn(m.group("dst"))
            except InputError as exc:
                raise InputError(f"{p}:{lineno}: {exc}") from exc
            edges.add((m.group("src"), m.group("dst")))
    return DependencyGraph(edges=edges)
