import numpy as np
import pytest
from sklearn.manifold import trustworthiness

from modrec.embedding import EmbeddingMatrix
from modrec.errors import InputError
from modrec.reduction import KnnGraph, ReductionParams, knn_graph, reduce, write_points_tsv


def matrix_of(vectors, names=None):
    vectors = np.asarray(vectors, dtype=np.float64)
    names = names or [f"p.C{i}" for i in range(len(vectors))]
    return EmbeddingMatrix(fqcns=names, vectors=vectors, dim=vectors.shape[1], provenance="lexical")


def blob_matrix(n_blobs=4, per_blob=50, dim=64, data_seed=0):
    rng = np.random.default_rng(data_seed)
    centers = rng.normal(0.0, 10.0, size=(n_blobs, dim))
    rows = []
    labels = []
    for b, center in enumerate(centers):
        rows.append(center + rng.normal(0.0, 1.0, size=(per_blob, dim)))
        labels.extend([b] * per_blob)
    return matrix_of(np.vstack(rows)), np.array(labels)


# --- knn graph ------------------------------------------------------------------


def test_knn_orthogonal_vectors():
    matrix = matrix_of(np.eye(3))
    graph = knn_graph(matrix, k=1)
    assert np.allclose(graph.distances, 1.0)


def test_knn_identical_vectors_mutual_zero_edges():
    matrix = matrix_of([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    graph = knn_graph(matrix, k=1)
    assert graph.indices[0, 0] == 1
    assert graph.indices[1, 0] == 0
    assert graph.distances[0, 0] == 0.0
    assert graph.distances[1, 0] == 0.0


def test_knn_matches_brute_force_oracle():
    rng = np.random.default_rng(13)
    vectors = rng.normal(size=(10, 6))
    names = [f"n.C{i}" for i in range(10)]
    matrix = matrix_of(vectors, names)
    graph = knn_graph(matrix, k=3)

    unit = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    for i in range(10):
        dists = [(1.0 - float(unit[i] @ unit[j]), names[j], j) for j in range(10) if j != i]
        expected = [j for _, _, j in sorted(dists)[:3]]
        assert list(graph.indices[i]) == expected


def test_knn_tie_break_is_lexicographic():
    # Rows 1 and 2 are identical, equidistant from row 0; z-name loses to a-name.
    matrix = matrix_of(
        [[1.0, 0.0], [1.0, 1.0], [1.0, 1.0]],
        names=["base.Origin", "z.Far", "a.Near"],
    )
    graph = knn_graph(matrix, k=1)
    assert graph.indices[0, 0] == 2  # "a.Near" sorts before "z.Far"


def test_knn_k_must_be_smaller_than_corpus():
    with pytest.raises(InputError):
        knn_graph(matrix_of(np.eye(3)), k=3)


def test_knn_neighbors_helper():
    matrix = matrix_of(np.eye(3), names=["a.A", "b.B", "c.C"])
    graph = knn_graph(matrix, k=2)
    pairs = graph.neighbors("a.A")
    assert len(pairs) == 2 and all(d == pytest.approx(1.0) for _, d in pairs)


# --- reduce ----------------------------------------------------------------------


def test_reduce_identity_fallback_for_tiny_corpus():
    matrix = matrix_of(np.random.default_rng(0).normal(size=(5, 16)))
    out = reduce(matrix, ReductionParams(n_neighbors=15, out_dim=3, seed=1))
    assert out.params.identity_fallback
    assert out.out_dim == 16
    assert np.array_equal(out.points, matrix.vectors)


def test_reduce_separates_two_blobs():
    matrix, labels = blob_matrix(n_blobs=2, per_blob=50, dim=64, data_seed=3)
    out = reduce(matrix, ReductionParams(n_neighbors=15, out_dim=5, epochs=200, seed=0))
    pts = out.points
    same = []
    cross = []
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = float(np.linalg.norm(pts[i] - pts[j]))
            (same if labels[i] == labels[j] else cross).append(d)
    assert np.mean(cross) > np.mean(same)


def test_reduce_bitwise_deterministic():
    matrix, _ = blob_matrix(n_blobs=3, per_blob=20, dim=32, data_seed=5)
    params = ReductionParams(n_neighbors=10, out_dim=4, epochs=50, seed=42)
    first = reduce(matrix, params)
    second = reduce(matrix, params)
    assert np.array_equal(first.points, second.points)


def test_reduce_seed_changes_layout():
    matrix, _ = blob_matrix(n_blobs=2, per_blob=20, dim=32, data_seed=6)
    a = reduce(matrix, ReductionParams(n_neighbors=10, out_dim=3, epochs=50, seed=1))
    b = reduce(matrix, ReductionParams(n_neighbors=10, out_dim=3, epochs=50, seed=2))
    assert not np.array_equal(a.points, b.points)


def test_reduce_outputs_bounded_and_finite():
    matrix, _ = blob_matrix(n_blobs=4, per_blob=30, dim=48, data_seed=7)
    out = reduce(matrix, ReductionParams(n_neighbors=12, out_dim=5, epochs=150, seed=3))
    assert np.isfinite(out.points).all()
    assert np.abs(out.points).max() < 1e6


def test_reduce_neighborhood_preservation():
    matrix, _ = blob_matrix(n_blobs=4, per_blob=50, dim=64, data_seed=0)
    out = reduce(matrix, ReductionParams(n_neighbors=15, out_dim=5, epochs=200, seed=11))
    score = trustworthiness(matrix.vectors, out.points, n_neighbors=10)
    assert score >= 0.80


def test_row_shuffle_gives_same_downstream_partition():
    # Same kNN structure regardless of row order (ties are name-broken), so a
    # clean corpus must cluster into the same named groups after a shuffle.
    from modrec.clustering import NOISE, cluster

    rng = np.random.default_rng(1)
    centers = np.zeros((3, 32))
    centers[1, 0] = 25.0
    centers[2, 1] = 25.0
    blocks = []
    names = []
    for b, center in enumerate(centers):
        blocks.append(center + rng.normal(0, 1, (30, 32)))
        names += [f"blob{b}.C{i}" for i in range(30)]
    points = np.vstack(blocks)

    def named_partition(order):
        matrix = matrix_of(points[order], [names[i] for i in order])
        out = reduce(matrix, ReductionParams(n_neighbors=10, out_dim=4, epochs=150, seed=5))
        assignment = cluster(out, min_cluster_size=5)
        groups = {}
        for fqcn, label in zip(assignment.fqcns, assignment.labels):
            if label != NOISE:
                groups.setdefault(label, set()).add(fqcn)
        return frozenset(frozenset(g) for g in groups.values())

    identity = np.arange(len(points))
    shuffled = np.random.default_rng(9).permutation(len(points))
    assert named_partition(identity) == named_partition(shuffled)


def test_points_tsv_dump(tmp_path):
    matrix = matrix_of(np.eye(3), names=["a.A", "b.B", "c.C"])
    out = reduce(matrix, ReductionParams(n_neighbors=2, out_dim=2, epochs=10, seed=0))
    path = tmp_path / "points.tsv"
    write_points_tsv(out, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    name, _, coords = lines[0].partition("\t")
    assert name == "a.A"
    assert len(coords.split()) == 2
