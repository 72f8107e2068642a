"""Corpus ingestion: scan Java source trees or flat name lists into class entities,
and extract developer-defined modules from module descriptor placement."""

from __future__ import annotations

import fnmatch
import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import InputError

log = logging.getLogger(__name__)

UNMODULARIZED = "__unmodularized__"

_PACKAGE_RE = re.compile(r"^\s*package\s+([A-Za-z_$][\w$]*(?:\.[A-Za-z_$][\w$]*)*)\s*;")
_MODULE_DECL_RE = re.compile(r"\bmodule\s+([A-Za-z_$][\w$]*(?:\.[A-Za-z_$][\w$]*)*)")


def validate_fqcn(fqcn: str) -> None:
    """Reject names with whitespace or empty dot-separated segments."""
    if not fqcn:
        raise InputError("empty class name")
    if any(ch.isspace() for ch in fqcn):
        raise InputError(f"whitespace inside class name: {fqcn!r}")
    if any(not seg for seg in fqcn.split(".")):
        raise InputError(f"empty segment in class name: {fqcn!r}")


@dataclass(frozen=True)
class ClassEntity:
    """One Java class, identified by its fully-qualified name.

    ``embed_text`` is the text the embedder sees; it defaults to the fqcn and
    is only changed by granularity views. ``source_path`` is set for entities
    that came from a source scan.
    """

    fqcn: str
    package_name: str
    simple_name: str
    embed_text: str
    source_path: str | None = None

    @classmethod
    def from_fqcn(cls, fqcn: str, source_path: str | None = None) -> "ClassEntity":
        validate_fqcn(fqcn)
        package, _, simple = fqcn.rpartition(".")
        return cls(
            fqcn=fqcn,
            package_name=package,
            simple_name=simple,
            embed_text=fqcn,
            source_path=source_path,
        )

    def with_embed_text(self, text: str) -> "ClassEntity":
        return replace(self, embed_text=text)


@dataclass
class CorpusManifest:
    entities: list[ClassEntity]
    source_root: str = ""
    skipped_files: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for e in self.entities:
            if e.fqcn in seen:
                raise InputError(f"duplicate fully-qualified name in corpus: {e.fqcn}")
            seen.add(e.fqcn)

    @property
    def fqcns(self) -> list[str]:
        return [e.fqcn for e in self.entities]

    def __len__(self) -> int:
        return len(self.entities)

    def to_json(self) -> dict:
        return {
            "source_root": self.source_root,
            "entities": [
                {
                    "fqcn": e.fqcn,
                    "package": e.package_name,
                    "simple": e.simple_name,
                    "source_path": e.source_path,
                }
                for e in self.entities
            ],
            "skipped_files": [list(s) for s in self.skipped_files],
        }


@dataclass
class Architecture:
    """A partition of class entities into named modules."""

    modules: dict[str, set[str]]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for name, members in self.modules.items():
            if not members:
                raise InputError(f"module {name!r} is empty")
            overlap = seen & set(members)
            if overlap:
                raise InputError(
                    f"classes assigned to more than one module: {sorted(overlap)[:5]}"
                )
            seen.update(members)

    @property
    def universe(self) -> set[str]:
        out: set[str] = set()
        for members in self.modules.values():
            out.update(members)
        return out

    def module_of(self) -> dict[str, str]:
        """Map each class to the module containing it."""
        out: dict[str, str] = {}
        for name, members in self.modules.items():
            for fqcn in members:
                out[fqcn] = name
        return out

    def to_json(self) -> dict:
        return {"modules": {name: sorted(members) for name, members in sorted(self.modules.items())}}

    def dumps(self) -> str:
        """Canonical JSON form: sorted module names, sorted member lists."""
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_json(cls, doc: dict) -> "Architecture":
        if not isinstance(doc, dict) or "modules" not in doc:
            raise InputError("architecture JSON must be an object with a 'modules' key")
        modules = {str(name): set(map(str, members)) for name, members in doc["modules"].items()}
        return cls(modules=modules)

    @classmethod
    def load(cls, path: str | Path) -> "Architecture":
        p = Path(path)
        if not p.is_file():
            raise InputError(f"architecture file not found: {p}")
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot parse architecture file {p}: {exc}") from exc
        return cls.from_json(doc)


def _strip_comments(text: str) -> str:
    """Remove // and /* */ comments; string literals are not honored (names only)."""
    text = re.sub(r"/\*.*?\*/", " ", text, flags=re.DOTALL)
    return re.sub(r"//[^\n]*", " ", text)


def _read_package_name(path: Path) -> str:
    """First non-comment ``package X;`` statement, or "" for the default package."""
    text = path.read_text(encoding="utf-8")
    for line in _strip_comments(text).splitlines():
        m = _PACKAGE_RE.match(line)
        if m:
            return m.group(1)
    return ""


def _excluded(rel_posix: str, exclude_globs: tuple[str, ...]) -> bool:
    return any(
        fnmatch.fnmatch(rel_posix, pat) or fnmatch.fnmatch("/" + rel_posix, pat)
        for pat in exclude_globs
    )


def scan_sources(root: str | Path, exclude_globs: tuple[str, ...] = ()) -> CorpusManifest:
    """Scan a Java source tree, yielding one entity per ``.java`` file.

    The entity is named after the file stem; the package comes from the file's
    ``package`` declaration. ``module-info.java`` and ``package-info.java``
    yield no entities. Unreadable or undecodable files are recorded and the
    scan continues.
    """
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"source root not found or not a directory: {root}")

    entities: list[ClassEntity] = []
    skipped: list[tuple[str, str]] = []
    by_fqcn: dict[str, str] = {}
    for path in sorted(root.rglob("*.java")):
        rel = path.relative_to(root).as_posix()
        if path.name in ("module-info.java", "package-info.java"):
            continue
        if _excluded(rel, exclude_globs):
            skipped.append((rel, "excluded by glob"))
            continue
        try:
            package = _read_package_name(path)
        except (OSError, UnicodeDecodeError) as exc:
            skipped.append((rel, f"unreadable: {exc.__class__.__name__}"))
            continue
        fqcn = f"{package}.{path.stem}" if package else path.stem
        try:
            validate_fqcn(fqcn)
        except InputError as exc:
            skipped.append((rel, f"bad name: {exc}"))
            continue
        if fqcn in by_fqcn:
            raise InputError(
                f"duplicate class {fqcn}: declared in both {by_fqcn[fqcn]} and {rel}; "
                "use --exclude to drop one of the trees"
            )
        by_fqcn[fqcn] = rel
        entities.append(ClassEntity.from_fqcn(fqcn, source_path=rel))

    if not entities:
        raise InputError(f"no Java classes found under {root}")
    entities.sort(key=lambda e: e.fqcn)
    return CorpusManifest(entities=entities, source_root=str(root), skipped_files=skipped)


def load_name_list(path: str | Path) -> CorpusManifest:
    """Load a corpus from a text file with one fqcn per line.

    Blank lines and ``#`` comments are ignored; duplicate names collapse.
    """
    p = Path(path)
    if not p.is_file():
        raise InputError(f"name list not found: {p}")
    entities: list[ClassEntity] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            validate_fqcn(line)
        except InputError as exc:
            raise InputError(f"{p}:{lineno}: {exc}") from exc
        if line in seen:
            continue
        seen.add(line)
        entities.append(ClassEntity.from_fqcn(line))
    if not entities:
        raise InputError(f"no class names found in {p}")
    return CorpusManifest(entities=entities, source_root=str(p))


def _read_module_name(descriptor: Path) -> str | None:
    """Module name from a module-info.java declaration; `open` modifier ignored."""
    try:
        text = descriptor.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError):
        return None
    m = _MODULE_DECL_RE.search(_strip_comments(text))
    return m.group(1) if m else None


def extract_ground_truth(root: str | Path, manifest: CorpusManifest) -> Architecture:
    """Build the developer-created architecture from module descriptor placement.

    Every directory holding a ``module-info.java`` roots a module containing
    all scanned classes beneath it; when descriptors nest, the nearest
    enclosing descriptor wins. Classes under no descriptor go to the reserved
    ``__unmodularized__`` module.
    """
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"source root not found or not a directory: {root}")

    descriptor_dirs: dict[str, str] = {}  # module root (posix, relative) -> module name
    names_seen: dict[str, str] = {}
    for descriptor in sorted(root.rglob("module-info.java")):
        name = _read_module_name(descriptor)
        rel_dir = descriptor.parent.relative_to(root).as_posix()
        if name is None:
            log.warning("unparseable module descriptor at %s; skipped", descriptor)
            continue
        if name in names_seen:
            raise InputError(
                f"module {name!r} declared by two descriptors: "
                f"{names_seen[name]!r} and {rel_dir!r}"
            )
        names_seen[name] = rel_dir
        descriptor_dirs[rel_dir] = name

    # Sort deepest-first so the first prefix match is the nearest ancestor.
    roots_by_depth = sorted(descriptor_dirs, key=lambda d: d.count("/") if d != "." else -1, reverse=True)

    modules: dict[str, set[str]] = {}
    for entity in manifest.entities:
        if entity.source_path is None:
            raise InputError(
                f"entity {entity.fqcn} has no source path; ground truth requires a scanned tree"
            )
        owner = None
        for mod_root in roots_by_depth:
            if mod_root == "." or entity.source_path.startswith(mod_root + "/"):
                owner = descriptor_dirs[mod_root]
                break
        if owner is None:
            owner = UNMODULARIZED
        modules.setdefault(owner, set()).add(entity.fqcn)

    for name, mod_root in sorted(names_seen.items()):
        if name not in modules:
            log.warning("module %s at %s contains no classes; omitted", name, mod_root or ".")

    return Architecture(modules=modules)
