"""Synthetic Java corpora with known module structure.

Each generated module owns a token theme; its packages and class names draw
from that pool, so a name-based pipeline can recover the planted modules.
With probability ``noise_rate`` a class is generated off-theme: it lands in a
generic package (misc.core3, ...) and its name mixes in a foreign token.
Output is deterministic per seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Architecture, ClassEntity, CorpusManifest
from .errors import InputError

THEME_BANK: dict[str, list[str]] = {
    "billing": ["invoice", "payment", "ledger", "refund", "taxrate", "receipt", "tariff", "balance"],
    "ui": ["widget", "button", "layout", "canvas", "styling", "font", "cursor", "dialog"],
    "net": ["socket", "packet", "proxy", "router", "channel", "gateway", "session", "datagram"],
    "storage": ["cache", "shard", "bucket", "volume", "archive", "snapshot", "segment", "compactor"],
    "auth": ["login", "credential", "password", "certificate", "signer", "realm", "principal", "keyring"],
    "analytics": ["metric", "chart", "histogram", "funnel", "cohort", "dashboard", "sampler", "percentile"],
    "scheduler": ["cron", "job", "queue", "timer", "backoff", "lease", "worker", "deadline"],
    "parsing": ["lexer", "grammar", "syntax", "asttree", "scanner", "symbol", "literal", "production"],
    "media": ["codec", "frame", "pixel", "audio", "video", "subtitle", "playlist", "encoder"],
    "geo": ["latitude", "longitude", "polygon", "route", "waypoint", "region", "tile", "bearing"],
    "crypto": ["cipher", "nonce", "entropy", "keypair", "vault", "seal", "hashchain", "padding"],
    "mail": ["inbox", "mailbox", "smtp", "envelope", "attachment", "newsletter", "bounce", "digest"],
    "search": ["query", "ranker", "snippet", "facet", "crawler", "stemmer", "relevance", "indexer"],
    "config": ["property", "profile", "setting", "flagset", "override", "prefs", "registry", "binding"],
    "logging": ["logger", "appender", "rotation", "severity", "tracepoint", "journal", "sink", "formatter"],
    "inventory": ["stock", "warehouse", "pallet", "shipment", "barcode", "supplier", "reorder", "catalog"],
}

ROLES = ["Writer", "Reader", "Manager", "Factory", "Handler", "Builder", "Service", "Helper", "Provider", "Validator"]
GENERIC_TOKENS = ["internal", "impl", "core", "util", "common", "base", "misc", "extra"]


@dataclass
class SyntheticSpec:
    n_modules: int = 6
    classes_per_module: tuple[int, int] = (20, 40)
    noise_rate: float = 0.05
    seed: int = 0
    vocab_themes: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_modules < 2:
            raise InputError("synthetic corpus needs at least 2 modules")
        lo, hi = self.classes_per_module
        if lo < 2 or hi < lo:
            raise InputError(f"bad classes_per_module range: {self.classes_per_module}")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise InputError("noise_rate must be in [0, 1]")


def _cap(token: str) -> str:
    return token[:1].upper() + token[1:]


def _pick_themes(spec: SyntheticSpec) -> dict[str, list[str]]:
    themes = spec.vocab_themes or THEME_BANK
    if spec.n_modules > len(themes):
        raise InputError(
            f"{spec.n_modules} modules requested but only {len(themes)} token themes available; "
            "pass vocab_themes to add more"
        )
    names = list(themes)[: spec.n_modules]
    return {name: list(themes[name]) for name in names}


@dataclass
class SyntheticCorpus:
    ground_truth: Architecture
    manifest: CorpusManifest
    dependencies: list[tuple[str, str]]


def generate(spec: SyntheticSpec) -> SyntheticCorpus:
    """Generate the corpus in memory."""
    rng = random.Random(spec.seed)
    themes = _pick_themes(spec)
    theme_names = list(themes)

    modules: dict[str, set[str]] = {}
    entities: list[ClassEntity] = []
    lo, hi = spec.classes_per_module
    for m_index, (theme, pool) in enumerate(themes.items()):
        size = rng.randint(lo, hi)
        members: set[str] = set()
        subpackages = rng.sample(pool, k=min(2, len(pool)))
        while len(members) < size:
            noisy = rng.random() < spec.noise_rate
            if noisy:
                generic = rng.choice(GENERIC_TOKENS)
                package = f"misc.{generic}{m_index}"
                foreign_theme = rng.choice([t for t in theme_names if t != theme])
                simple = _cap(rng.choice(themes[foreign_theme])) + _cap(rng.choice(pool))
            else:
                package = f"{theme}.{rng.choice(subpackages)}"
                first, second = rng.sample(pool, k=2)
                simple = _cap(first) + _cap(second) + rng.choice(ROLES)
            fqcn = f"{package}.{simple}"
            salt = 2
            while fqcn in members or any(fqcn in mem for mem in modules.values()):
                fqcn = f"{package}.{simple}{salt}"
                salt += 1
            members.add(fqcn)
            entities.append(ClassEntity.from_fqcn(fqcn))
        modules[theme] = members

    deps: list[tuple[str, str]] = []
    seen_edges: set[tuple[str, str]] = set()
    all_by_module = {name: sorted(mem) for name, mem in modules.items()}
    for theme, member_list in all_by_module.items():
        others = [f for t, mem in all_by_module.items() if t != theme for f in mem]
        for fqcn in member_list:
            targets = [f for f in member_list if f != fqcn]
            for dst in rng.sample(targets, k=min(2, len(targets))):
                if (fqcn, dst) not in seen_edges:
                    seen_edges.add((fqcn, dst))
                    deps.append((fqcn, dst))
        n_inter = max(1, len(member_list) // 20)
        for _ in range(n_inter):
            src = rng.choice(member_list)
            dst = rng.choice(others)
            if (src, dst) not in seen_edges:
                seen_edges.add((src, dst))
                deps.append((src, dst))

    entities.sort(key=lambda e: e.fqcn)
    manifest = CorpusManifest(entities=entities, source_root=f"synthetic(seed={spec.seed})")
    return SyntheticCorpus(
        ground_truth=Architecture(modules=modules),
        manifest=manifest,
        dependencies=deps,
    )


def gen_synthetic(spec: SyntheticSpec, out_dir: str | Path) -> dict[str, Path]:
    """Generate and write ground truth, name list, and dependency files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = generate(spec)

    gt_path = out / "ground_truth.json"
    corpus.ground_truth.save(gt_path)

    classes_path = out / "classes.txt"
    classes_path.write_text(
        "\n".join(e.fqcn for e in corpus.manifest.entities) + "\n", encoding="utf-8"
    )

    deps_path = out / "deps.txt"
    deps_path.write_text(
        "\n".join(f"{src} -> {dst}" for src, dst in sorted(corpus.dependencies)) + "\n",
        encoding="utf-8",
    )
    return {"ground_truth": gt_path, "classes": classes_path, "deps": deps_path}
