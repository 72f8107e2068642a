import math
import random

import numpy as np
import pytest

from modrec.clustering import NOISE, ClusterAssignment
from modrec.corpus import ClassEntity, CorpusManifest
from modrec.errors import InputError
from modrec.repair import (
    build_ctfidf,
    finalize,
    merge_singletons,
    repair,
    resolve_split_packages,
)


def corpus_of(*fqcns):
    return CorpusManifest(entities=[ClassEntity.from_fqcn(f) for f in fqcns])


def assignment_for(manifest, labels, mcs=2):
    return ClusterAssignment(fqcns=manifest.fqcns, labels=list(labels), min_cluster_size=mcs)


def modules_by_member(arch):
    return arch.module_of()


# --- c-TF-IDF model -----------------------------------------------------------


def test_ctfidf_hand_computed_two_cluster_fixture():
    # doc0 = {com:2, x:1, y:1}, doc1 = {com:2, z:1, w:1}; A = 4;
    # idf(com) = ln(1 + 4/4) = ln 2 is the corpus minimum, idf(x) = ln 5.
    manifest = corpus_of("com.X", "com.Y", "com.Z", "com.W")
    assignment = assignment_for(manifest, [0, 0, 1, 1])
    model = build_ctfidf(assignment, manifest)

    assert model.avg_tokens_per_cluster == 4.0
    idf = dict(zip(model.vocabulary, model.idf))
    assert idf["com"] == pytest.approx(math.log(2), abs=1e-12)
    assert idf["x"] == pytest.approx(math.log(5), abs=1e-12)
    assert min(idf.values()) == idf["com"]

    vec0 = dict(zip(model.vocabulary, model.cluster_vectors[0]))
    norm = math.sqrt((2 * math.log(2)) ** 2 + 2 * math.log(5) ** 2)
    assert vec0["com"] == pytest.approx(2 * math.log(2) / norm, abs=1e-12)
    assert vec0["x"] == pytest.approx(math.log(5) / norm, abs=1e-12)
    assert vec0["z"] == 0.0
    assert np.allclose(np.linalg.norm(model.cluster_vectors, axis=1), 1.0)


def test_ctfidf_single_cluster_self_similarity():
    manifest = corpus_of("p.A", "p.B", "p.C")
    assignment = assignment_for(manifest, [0, 0, 0])
    model = build_ctfidf(assignment, manifest)
    assert model.cluster_ids == [0]
    assert float(model.cluster_vectors[0] @ model.cluster_vectors[0]) == pytest.approx(1.0)


def test_ctfidf_all_singletons_is_fatal():
    manifest = corpus_of("a.A", "b.B")
    assignment = assignment_for(manifest, [0, 1])
    with pytest.raises(InputError, match="singleton"):
        build_ctfidf(assignment, manifest)


# --- singleton merge -----------------------------------------------------------


def fig3_fixture():
    """The narrated repair walk-through: cluster A holds p1/p2 classes plus
    p3.A1, cluster B holds the bulk of p3, and p2.A2 / p3.A5 are undersized."""
    manifest = corpus_of(
        "p1.A1", "p1.A2", "p2.A1", "p2.A3", "p3.A1",  # cluster A
        "p3.A2", "p3.A3", "p3.A4",  # cluster B
        "p2.A2",  # noise point
        "p3.A5",  # singleton cluster
    )
    labels = [0, 0, 0, 0, 0, 1, 1, 1, NOISE, 2]
    return manifest, assignment_for(manifest, labels)


def test_singleton_merge_follows_narrated_moves():
    manifest, assignment = fig3_fixture()
    model = build_ctfidf(assignment, manifest)
    merged = merge_singletons(assignment, model, manifest)
    by_fqcn = dict(zip(merged.fqcns, merged.labels))
    assert by_fqcn["p2.A2"] == by_fqcn["p1.A1"]  # joins A
    assert by_fqcn["p3.A5"] == by_fqcn["p3.A2"]  # joins B
    assert merged.n_noise() == 0
    assert all(size >= 2 for size in merged.sizes().values())


def test_merge_without_singletons_is_identity():
    manifest = corpus_of("p.A", "p.B", "q.C", "q.D")
    assignment = assignment_for(manifest, [0, 0, 1, 1])
    model = build_ctfidf(assignment, manifest)
    assert merge_singletons(assignment, model, manifest) is assignment


def test_merge_prefers_higher_cosine():
    # Hand-computed: the singleton red.Cherry shares "red" with cluster 0 only
    # (cos = 0.695), and nothing with cluster 1 (cos = 0).
    manifest = corpus_of("red.Rose", "red.Ruby", "blue.Sky", "blue.Sea", "red.Cherry")
    assignment = assignment_for(manifest, [0, 0, 1, 1, NOISE])
    model = build_ctfidf(assignment, manifest)

    idf_red = math.log(1 + 4 / 2)
    vec_c0 = model.cluster_vectors[0]
    singleton = np.zeros(len(model.vocabulary))
    singleton[model.vocabulary.index("red")] = idf_red
    singleton /= np.linalg.norm(singleton)
    assert float(vec_c0 @ singleton) == pytest.approx(0.695, abs=5e-3)

    merged = merge_singletons(assignment, model, manifest)
    by_fqcn = dict(zip(merged.fqcns, merged.labels))
    assert by_fqcn["red.Cherry"] == by_fqcn["red.Rose"]


def test_merge_out_of_vocabulary_goes_to_largest(caplog):
    manifest = corpus_of("p.A", "p.B", "p.C", "q.D", "q.E", "zzz.Qqq")
    assignment = assignment_for(manifest, [0, 0, 0, 1, 1, NOISE])
    model = build_ctfidf(assignment, manifest)
    with caplog.at_level("WARNING"):
        merged = merge_singletons(assignment, model, manifest)
    by_fqcn = dict(zip(merged.fqcns, merged.labels))
    assert by_fqcn["zzz.Qqq"] == by_fqcn["p.A"]  # cluster of size 3 beats size 2
    assert any("zzz.Qqq" in rec.message for rec in caplog.records)


# --- split package resolution -----------------------------------------------------


def test_resolve_narrated_package_move():
    manifest, assignment = fig3_fixture()
    model = build_ctfidf(assignment, manifest)
    merged = merge_singletons(assignment, model, manifest)
    resolved = resolve_split_packages(merged, manifest)
    by_fqcn = dict(zip(resolved.fqcns, resolved.labels))
    # p3.A1 relocates to the cluster holding p3's majority.
    assert by_fqcn["p3.A1"] == by_fqcn["p3.A2"]
    a_final = {f for f, l in by_fqcn.items() if l == by_fqcn["p1.A1"]}
    b_final = {f for f, l in by_fqcn.items() if l == by_fqcn["p3.A2"]}
    assert a_final == {"p1.A1", "p1.A2", "p2.A1", "p2.A2", "p2.A3"}
    assert b_final == {"p3.A1", "p3.A2", "p3.A3", "p3.A4", "p3.A5"}


def test_resolve_leaves_whole_packages_alone():
    manifest = corpus_of("p.A", "p.B", "q.C", "q.D")
    assignment = assignment_for(manifest, [0, 0, 1, 1])
    resolved = resolve_split_packages(assignment, manifest)
    assert resolved.labels == assignment.labels


def test_resolve_tie_goes_to_bigger_cluster():
    filler0 = [f"f{i}.X{i}" for i in range(8)]
    filler1 = ["g0.Y0"]
    manifest = corpus_of(*filler0, *filler1, "q.A", "q.B", "q.C", "q.D")
    labels = [0] * 8 + [1] + [0, 0, 1, 1]  # q split 2/2; sizes 10 vs 3
    resolved = resolve_split_packages(assignment_for(manifest, labels), manifest)
    by_fqcn = dict(zip(resolved.fqcns, resolved.labels))
    assert {by_fqcn[f"q.{x}"] for x in "ABCD"} == {by_fqcn["f0.X0"]}


def test_resolve_deletes_drained_clusters_and_recompacts():
    manifest = corpus_of("p.A", "p.B", "p.C", "q.D", "q.E")
    # Cluster 1 holds only p.C, which gets pulled back to cluster 0.
    labels = [0, 0, 1, 2, 2]
    resolved = resolve_split_packages(assignment_for(manifest, labels), manifest)
    assert sorted(set(resolved.labels)) == [0, 1]


# --- full repair -------------------------------------------------------------------


def test_repair_full_pass_on_fig3():
    manifest, assignment = fig3_fixture()
    repaired, fallbacks = repair(assignment, manifest)
    assert fallbacks == []
    arch = finalize(repaired, manifest)
    assert arch.modules == {
        "module_0": {"p1.A1", "p1.A2", "p2.A1", "p2.A2", "p2.A3"},
        "module_1": {"p3.A1", "p3.A2", "p3.A3", "p3.A4", "p3.A5"},
    }


def test_repair_all_singletons_falls_back_to_one_module(caplog):
    manifest = corpus_of("a.A", "b.B", "c.C")
    assignment = assignment_for(manifest, [NOISE, NOISE, NOISE])
    with caplog.at_level("WARNING"):
        repaired, fallbacks = repair(assignment, manifest)
    assert repaired.labels == [0, 0, 0]
    assert fallbacks


def split_package_count(labels, manifest):
    clusters_of_pkg = {}
    for entity, label in zip(manifest.entities, labels):
        clusters_of_pkg.setdefault(entity.package_name, set()).add(label)
    return sum(1 for v in clusters_of_pkg.values() if len(v) > 1)


@pytest.mark.parametrize("seed", range(6))
def test_repair_invariants_on_random_assignments(seed):
    rng = random.Random(seed)
    packages = [f"pkg{i}" for i in range(rng.randint(3, 8))]
    fqcns = []
    for p, pkg in enumerate(packages):
        for c in range(rng.randint(2, 6)):
            fqcns.append(f"{pkg}.Class{p}x{c}")
    manifest = corpus_of(*fqcns)
    n_clusters = rng.randint(2, 5)
    labels = [rng.choice([NOISE] + list(range(n_clusters))) for _ in fqcns]
    used = sorted({l for l in labels if l != NOISE})
    relabel = {old: new for new, old in enumerate(used)}
    labels = [relabel.get(l, NOISE) for l in labels]

    repaired, _ = repair(assignment_for(manifest, labels), manifest)

    sizes = repaired.sizes()
    assert repaired.n_noise() == 0
    assert all(size >= 2 for size in sizes.values())
    assert split_package_count(repaired.labels, manifest) == 0
    assert sorted(repaired.fqcns) == sorted(fqcns)

    again, _ = repair(repaired, manifest)
    assert again.labels == repaired.labels


# --- finalize ----------------------------------------------------------------------


def test_finalize_names_and_partition():
    manifest = corpus_of("p.A", "p.B", "q.C", "q.D")
    arch = finalize(assignment_for(manifest, [0, 0, 1, 1]), manifest)
    assert set(arch.modules) == {"module_0", "module_1"}
    assert arch.universe == set(manifest.fqcns)


def test_finalize_rejects_unassigned():
    manifest = corpus_of("p.A", "p.B")
    from modrec.errors import InvariantViolation

    with pytest.raises(InvariantViolation):
        finalize(assignment_for(manifest, [0, NOISE]), manifest)
