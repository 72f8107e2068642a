"""Turn class names into dense vectors.

The built-in embedder is purely lexical: TF-IDF over name tokens and their
character 3-grams, hashed into a fixed number of dimensions with a seeded
sign hash. Externally computed vectors (e.g. from a neural code model) are
consumed through a file interface instead of in-process inference.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from hashlib import blake2b
from math import log
from pathlib import Path

import numpy as np

from .corpus import CorpusManifest
from .errors import InputError

_WORD_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z0-9]+|[A-Z]+|[0-9]+")

GRANULARITY_CLASS = "class_name"
GRANULARITY_PACKAGE = "package_name"
DEFAULT_DIM = 256


@dataclass(frozen=True)
class TokenizedName:
    fqcn: str
    tokens: tuple[str, ...]


def tokenize(fqcn: str) -> TokenizedName:
    """Split a dotted name on dots, underscores, and camel-case boundaries.

    An uppercase run followed by a lowercase letter splits before its last
    capital ("XMLParser" -> xml, parser); digits stay attached to the token
    they follow ("utf8" stays one token). All tokens are lowercased.
    """
    tokens: list[str] = []
    for segment in fqcn.replace("_", ".").split("."):
        tokens.extend(w.lower() for w in _WORD_RE.findall(segment))
    return TokenizedName(fqcn=fqcn, tokens=tuple(tokens))


@dataclass
class EmbeddingMatrix:
    fqcns: list[str]
    vectors: np.ndarray  # shape (len(fqcns), dim)
    dim: int
    provenance: str  # "lexical" or "external_file"

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.shape != (len(self.fqcns), self.dim):
            raise InputError(
                f"embedding shape {self.vectors.shape} does not match "
                f"{len(self.fqcns)} names x dim {self.dim}"
            )
        norms = np.linalg.norm(self.vectors, axis=1)
        if len(norms) and norms.min() == 0.0:
            idx = int(np.argmin(norms))
            raise InputError(f"all-zero embedding vector for {self.fqcns[idx]}")


def _char_ngrams(token: str, n: int = 3) -> list[str]:
    padded = f"#{token}#"
    if len(padded) <= n:
        return [padded]
    return [padded[i : i + n] for i in range(len(padded) - n + 1)]


def _features(text: str) -> list[str]:
    toks = tokenize(text).tokens
    feats = list(toks)
    for tok in toks:
        feats.extend(_char_ngrams(tok))
    return feats


def _hash_slot(feature: str, dim: int, seed: int) -> tuple[int, float]:
    key = seed.to_bytes(8, "little", signed=True)
    digest = blake2b(feature.encode("utf-8"), digest_size=8, key=key).digest()
    value = int.from_bytes(digest, "little")
    sign = 1.0 if value & 1 else -1.0
    return (value >> 1) % dim, sign


def embed_lexical(manifest: CorpusManifest, dim: int = DEFAULT_DIM, seed: int = 0) -> EmbeddingMatrix:
    """Deterministic corpus-only embedding: hashed TF-IDF of tokens + 3-grams.

    Identical corpora and seed give identical matrices; rows only depend on
    the entity's own text and corpus-level document frequencies.
    """
    if dim < 8:
        raise InputError(f"embedding dim must be >= 8, got {dim}")
    n = len(manifest.entities)
    if n < 2:
        raise InputError("lexical embedding needs a corpus of at least 2 classes")

    bags = [Counter(_features(e.embed_text)) for e in manifest.entities]
    df: Counter[str] = Counter()
    for bag in bags:
        df.update(bag.keys())
    idf = {f: log((1.0 + n) / (1.0 + d)) + 1.0 for f, d in df.items()}

    slots = {f: _hash_slot(f, dim, seed) for f in df}
    vectors = np.zeros((n, dim), dtype=np.float64)
    for row, bag in enumerate(bags):
        for feat, count in bag.items():
            col, sign = slots[feat]
            vectors[row, col] += sign * count * idf[feat]
        norm = np.linalg.norm(vectors[row])
        if norm == 0.0:
            # Sign-hash cancellation; fall back to a one-hot keyed on the name.
            col, _ = _hash_slot(manifest.entities[row].fqcn, dim, seed)
            vectors[row, col] = 1.0
            norm = 1.0
        vectors[row] /= norm
    return EmbeddingMatrix(fqcns=manifest.fqcns, vectors=vectors, dim=dim, provenance="lexical")


def _parse_vectors_file(path: Path) -> dict[str, list[float]]:
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"cannot parse vectors file {path}: {exc}") from exc
        return {str(k): [float(x) for x in v] for k, v in doc.items()}
    out: dict[str, list[float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        name, sep, rest = line.partition("\t")
        if not sep:
            raise InputError(f"{path}:{lineno}: expected '<fqcn>\\t<v1> <v2> ...'")
        try:
            out[name] = [float(x) for x in rest.split()]
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: bad float: {exc}") from exc
    return out


def load_external_embeddings(path: str | Path, manifest: CorpusManifest) -> EmbeddingMatrix:
    """Load precomputed vectors and restrict them to the manifest, in order."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"vectors file not found: {p}")
    table = _parse_vectors_file(p)
    if not table:
        raise InputError(f"vectors file {p} is empty")

    missing = [f for f in manifest.fqcns if f not in table]
    if missing:
        shown = ", ".join(missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise InputError(f"vectors file {p} missing {len(missing)} classes: {shown}{more}")

    dims = {len(table[f]) for f in manifest.fqcns}
    if len(dims) != 1:
        raise InputError(f"inconsistent vector dimensions in {p}: {sorted(dims)}")
    dim = dims.pop()
    vectors = np.array([table[f] for f in manifest.fqcns], dtype=np.float64)
    return EmbeddingMatrix(fqcns=manifest.fqcns, vectors=vectors, dim=dim, provenance="external_file")


def granularity_view(manifest: CorpusManifest, mode: str) -> CorpusManifest:
    """Choose what text each class exposes to the embedder.

    ``class_name`` is the identity view; ``package_name`` embeds only the
    package, falling back to the simple name for default-package classes so no
    class embeds empty text. Entities keep their fqcn identity either way.
    """
    if mode == GRANULARITY_CLASS:
        return manifest
    if mode != GRANULARITY_PACKAGE:
        raise InputError(f"unknown granularity mode: {mode!r}")
    entities = [
        e.with_embed_text(e.package_name if e.package_name else e.simple_name)
        for e in manifest.entities
    ]
    return CorpusManifest(
        entities=entities,
        source_root=manifest.source_root,
        skipped_files=list(manifest.skipped_files),
    )
