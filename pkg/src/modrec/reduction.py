"""Dimensionality reduction of embedding vectors under a cosine neighborhood.

The procedure follows the standard manifold-projection recipe: exact k-nearest
neighbors under cosine distance, per-point bandwidth calibration into a fuzzy
graph symmetrized with a + b - a*b, spectral initialization (seeded random on
eigensolver failure), then stochastic gradient attraction/repulsion with
negative sampling. Same input, params, and seed give bit-identical output.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse
from numba import njit
from scipy.optimize import curve_fit
from scipy.sparse.csgraph import connected_components

from .embedding import EmbeddingMatrix
from .errors import InputError, InvariantViolation

log = logging.getLogger(__name__)

_SMOOTH_K_TOLERANCE = 1e-5
_MIN_K_DIST_SCALE = 1e-3
_DENSE_EIG_LIMIT = 2048


@dataclass(frozen=True)
class ReductionParams:
    n_neighbors: int = 15
    out_dim: int = 5
    min_dist: float = 0.0
    epochs: int = 200
    seed: int = 0
    negative_sample_rate: int = 5
    identity_fallback: bool = False

    def __post_init__(self) -> None:
        if self.n_neighbors < 2:
            raise InputError("n_neighbors must be >= 2")
        if self.out_dim < 1 or self.epochs < 1:
            raise InputError("out_dim and epochs must be positive")
        if self.min_dist < 0:
            raise InputError("min_dist must be non-negative")

    def to_json(self) -> dict:
        return {
            "n_neighbors": self.n_neighbors,
            "out_dim": self.out_dim,
            "min_dist": self.min_dist,
            "epochs": self.epochs,
            "seed": self.seed,
            "negative_sample_rate": self.negative_sample_rate,
            "identity_fallback": self.identity_fallback,
        }


@dataclass
class ReducedMatrix:
    fqcns: list[str]
    points: np.ndarray
    out_dim: int
    params: ReductionParams

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.shape != (len(self.fqcns), self.out_dim):
            raise InvariantViolation(
                f"reduced shape {self.points.shape} != ({len(self.fqcns)}, {self.out_dim})"
            )
        if not np.isfinite(self.points).all():
            raise InvariantViolation("non-finite coordinates in reduced matrix")


@dataclass
class KnnGraph:
    """Each node's k nearest neighbors under cosine distance (self excluded)."""

    fqcns: list[str]
    indices: np.ndarray  # (n, k) neighbor row indices
    distances: np.ndarray  # (n, k) cosine distances, ascending

    def neighbors(self, fqcn: str) -> list[tuple[str, float]]:
        row = self.fqcns.index(fqcn)
        return [
            (self.fqcns[j], float(d))
            for j, d in zip(self.indices[row], self.distances[row])
        ]


def knn_graph(matrix: EmbeddingMatrix, k: int) -> KnnGraph:
    """Exact k-nearest neighbors, ties broken by lexicographic class name."""
    n = len(matrix.fqcns)
    if k >= n:
        raise InputError(f"k={k} must be smaller than the corpus size {n}")
    unit = matrix.vectors / np.linalg.norm(matrix.vectors, axis=1, keepdims=True)

    # Columns pre-permuted into name order make a stable argsort break
    # distance ties lexicographically.
    name_order = np.argsort(np.asarray(matrix.fqcns))
    indices = np.empty((n, k), dtype=np.int64)
    distances = np.empty((n, k), dtype=np.float64)
    block = max(1, min(n, 2_000_000 // max(n, 1) + 1))
    for start in range(0, n, block):
        stop = min(start + block, n)
        dist = 1.0 - unit[start:stop] @ unit.T
        np.clip(dist, 0.0, None, out=dist)
        dist_perm = dist[:, name_order]
        order = np.argsort(dist_perm, axis=1, kind="stable")
        for local, row in enumerate(range(start, stop)):
            cols = name_order[order[local]]
            cols = cols[cols != row][:k]
            indices[row] = cols
            distances[row] = dist[local, cols]
    return KnnGraph(fqcns=list(matrix.fqcns), indices=indices, distances=distances)


@njit(cache=True)
def _smooth_knn(distances, target, min_scale_all):  # pragma: no cover - jit
    n, k = distances.shape
    rhos = np.zeros(n)
    sigmas = np.zeros(n)
    for i in range(n):
        lo = 0.0
        hi = np.inf
        mid = 1.0
        row = distances[i]
        nz_min = np.inf
        row_sum = 0.0
        for j in range(k):
            row_sum += row[j]
            if 0.0 < row[j] < nz_min:
                nz_min = row[j]
        if nz_min < np.inf:
            rhos[i] = nz_min
        for _ in range(64):
            psum = 0.0
            for j in range(k):
                d = row[j] - rhos[i]
                psum += np.exp(-(d / mid)) if d > 0 else 1.0
            if abs(psum - target) < _SMOOTH_K_TOLERANCE:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                mid = mid * 2.0 if hi == np.inf else (lo + hi) / 2.0
        sigmas[i] = mid
        if rhos[i] > 0.0:
            floor = _MIN_K_DIST_SCALE * (row_sum / k)
        else:
            floor = _MIN_K_DIST_SCALE * min_scale_all
        if sigmas[i] < floor:
            sigmas[i] = floor
    return sigmas, rhos


def _fuzzy_graph(knn: KnnGraph) -> scipy.sparse.csr_matrix:
    n, k = knn.distances.shape
    sigmas, rhos = _smooth_knn(knn.distances, np.log2(k), float(knn.distances.mean()))
    rows = np.repeat(np.arange(n), k)
    cols = knn.indices.ravel()
    gaps = knn.distances - rhos[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.exp(-np.maximum(gaps, 0.0) / sigmas[:, None])
    vals = np.where((gaps <= 0.0) | (sigmas[:, None] == 0.0), 1.0, vals)
    w = scipy.sparse.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    wt = w.T.tocsr()
    graph = w + wt - w.multiply(wt)
    graph.eliminate_zeros()
    return graph.tocsr()


class _SpectralFailure(Exception):
    pass


def _spectral_init(graph: scipy.sparse.csr_matrix, out_dim: int, rng: np.random.Generator) -> np.ndarray:
    n = graph.shape[0]
    if out_dim + 2 > n:
        raise _SpectralFailure("too few points for a spectral layout")
    n_components, _ = connected_components(graph, directed=False)
    if n_components > 1:
        raise _SpectralFailure(f"graph has {n_components} components")

    degrees = np.asarray(graph.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(degrees)
    if n <= _DENSE_EIG_LIMIT:
        dense = graph.toarray()
        lap = np.eye(n) - (inv_sqrt[:, None] * dense) * inv_sqrt[None, :]
        _, vecs = np.linalg.eigh(lap)
        coords = vecs[:, 1 : out_dim + 1]
    else:
        # Lanczos on 2I - L needs no factorization; its largest eigenpairs are
        # the Laplacian's smallest.
        d_inv = scipy.sparse.diags(inv_sqrt)
        flipped = scipy.sparse.identity(n, format="csr") + d_inv @ graph @ d_inv
        v0 = rng.uniform(-1.0, 1.0, n)
        try:
            vals, vecs = scipy.sparse.linalg.eigsh(
                flipped, k=out_dim + 1, which="LM", v0=v0, tol=1e-4, maxiter=n * 5
            )
        except Exception as exc:  # ArpackError, non-convergence, ...
            raise _SpectralFailure(str(exc)) from exc
        ascending_lap = np.argsort(-vals, kind="stable")
        coords = vecs[:, ascending_lap[1 : out_dim + 1]]

    # Canonical eigenvector signs: largest-magnitude component positive.
    for col in range(coords.shape[1]):
        pivot = coords[np.argmax(np.abs(coords[:, col])), col]
        if pivot < 0:
            coords[:, col] = -coords[:, col]
    max_abs = np.abs(coords).max()
    if not np.isfinite(max_abs) or max_abs == 0.0:
        raise _SpectralFailure("degenerate spectral coordinates")
    coords = coords * (10.0 / max_abs)
    return coords + rng.normal(0.0, 1e-4, coords.shape)


def _find_ab_params(spread: float, min_dist: float) -> tuple[float, float]:
    """Fit the low-dimensional similarity curve 1/(1 + a*d^(2b))."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.zeros_like(xv)
    yv[xv < min_dist] = 1.0
    yv[xv >= min_dist] = np.exp(-(xv[xv >= min_dist] - min_dist) / spread)
    (a, b), _ = curve_fit(curve, xv, yv)
    return float(a), float(b)


def _make_epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    result = np.full(weights.shape[0], -1.0)
    n_samples = n_epochs * (weights / weights.max())
    result[n_samples > 0] = float(n_epochs) / n_samples[n_samples > 0]
    return result


@njit(cache=True)
def _splitmix64(state):  # pragma: no cover - jit
    state[0] = (state[0] + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state[0]
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _sgd_layout(
    embedding,
    head,
    tail,
    epochs_per_sample,
    a,
    b,
    gamma,
    initial_alpha,
    negative_sample_rate,
    n_epochs,
    seed,
):  # pragma: no cover - jit
    n_vertices = embedding.shape[0]
    dim = embedding.shape[1]
    n_edges = head.shape[0]
    epochs_per_negative_sample = epochs_per_sample / negative_sample_rate
    epoch_of_next_sample = epochs_per_sample.copy()
    epoch_of_next_negative_sample = epochs_per_negative_sample.copy()
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)

    for n in range(n_epochs):
        alpha = initial_alpha * (1.0 - n / n_epochs)
        for e in range(n_edges):
            if epoch_of_next_sample[e] > n:
                continue
            j = head[e]
            k = tail[e]
            dist_sq = 0.0
            for d in range(dim):
                diff = embedding[j, d] - embedding[k, d]
                dist_sq += diff * diff
            if dist_sq > 0.0:
                grad_coeff = -2.0 * a * b * dist_sq ** (b - 1.0)
                grad_coeff /= a * dist_sq**b + 1.0
            else:
                grad_coeff = 0.0
            for d in range(dim):
                grad_d = grad_coeff * (embedding[j, d] - embedding[k, d])
                if grad_d > 4.0:
                    grad_d = 4.0
                elif grad_d < -4.0:
                    grad_d = -4.0
                embedding[j, d] += grad_d * alpha
                embedding[k, d] -= grad_d * alpha
            epoch_of_next_sample[e] += epochs_per_sample[e]

            n_neg = int((n - epoch_of_next_negative_sample[e]) / epochs_per_negative_sample[e])
            for _ in range(n_neg):
                other = int(_splitmix64(state) % np.uint64(n_vertices))
                if other == j:
                    continue
                dist_sq = 0.0
                for d in range(dim):
                    diff = embedding[j, d] - embedding[other, d]
                    dist_sq += diff * diff
                if dist_sq > 0.0:
                    grad_coeff = 2.0 * gamma * b
                    grad_coeff /= (0.001 + dist_sq) * (a * dist_sq**b + 1.0)
                else:
                    grad_coeff = 0.0
                for d in range(dim):
                    if grad_coeff > 0.0:
                        grad_d = grad_coeff * (embedding[j, d] - embedding[other, d])
                        if grad_d > 4.0:
                            grad_d = 4.0
                        elif grad_d < -4.0:
                            grad_d = -4.0
                    else:
                        grad_d = 4.0
                    embedding[j, d] += grad_d * alpha
            epoch_of_next_negative_sample[e] += n_neg * epochs_per_negative_sample[e]
    return embedding


def reduce(matrix: EmbeddingMatrix, params: ReductionParams) -> ReducedMatrix:
    """Project embedding vectors to ``params.out_dim`` dimensions.

    Corpora no larger than ``n_neighbors`` bypass the projection and pass
    through unchanged, with ``identity_fallback`` set on the output params.
    """
    n = len(matrix.fqcns)
    if n <= params.n_neighbors:
        log.warning(
            "corpus of %d points <= n_neighbors=%d; reduction bypassed", n, params.n_neighbors
        )
        fallback = replace(params, identity_fallback=True)
        return ReducedMatrix(
            fqcns=list(matrix.fqcns),
            points=matrix.vectors.copy(),
            out_dim=matrix.dim,
            params=fallback,
        )

    knn = knn_graph(matrix, params.n_neighbors)
    graph = _fuzzy_graph(knn)

    rng = np.random.default_rng(params.seed)
    try:
        init = _spectral_init(graph, params.out_dim, rng)
    except _SpectralFailure as exc:
        log.info("spectral init unavailable (%s); using seeded random init", exc)
        init = rng.uniform(-10.0, 10.0, (n, params.out_dim))

    # Edges too weak to be sampled even once are dropped up front.
    pruned = graph.copy()
    pruned.data[pruned.data < pruned.data.max() / float(params.epochs)] = 0.0
    pruned.eliminate_zeros()
    coo = pruned.tocoo()
    epochs_per_sample = _make_epochs_per_sample(coo.data, params.epochs)

    a, b = _find_ab_params(1.0, params.min_dist)
    embedding = np.ascontiguousarray(init, dtype=np.float64)
    embedding = _sgd_layout(
        embedding,
        coo.row.astype(np.int64),
        coo.col.astype(np.int64),
        epochs_per_sample,
        a,
        b,
        1.0,
        1.0,
        float(params.negative_sample_rate),
        params.epochs,
        np.uint64((params.seed ^ 0x5DEECE66D) & 0xFFFFFFFFFFFFFFFF),
    )
    if not np.isfinite(embedding).all():
        raise InvariantViolation("layout produced non-finite coordinates")
    return ReducedMatrix(
        fqcns=list(matrix.fqcns), points=embedding, out_dim=params.out_dim, params=params
    )


def write_points_tsv(reduced: ReducedMatrix, path) -> None:
    """Dump reduced coordinates as ``fqcn\\tx1 ... xd`` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for fqcn, point in zip(reduced.fqcns, reduced.points):
            coords = " ".join(repr(float(x)) for x in point)
            fh.write(f"{fqcn}\t{coords}\n")
