"""Corpus and label loading for review simulations.

Documents come in as JSONL (one object per line with ``doc_id`` and
``text``), relevance judgments as whitespace-separated qrels rows
``category_id doc_id relevance``. Everything is immutable after load so
collections can be shared across concurrently executing runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

logger = logging.getLogger(__name__)

# \W plus underscore: splits on anything that is not a unicode letter or digit.
_NONALNUM = re.compile(r"[\W_]+", re.UNICODE)


@dataclass(frozen=True)
class TokenizerConfig:
    """Settings for the default whitespace-free tokenizer.

    Lowercases (via NFKC + casefold), splits on any non-alphanumeric run,
    and drops pathological tokens longer than ``max_token_len`` characters.
    No stemming, no stopword removal.
    """

    lowercase: bool = True
    max_token_len: int = 64


def tokenize(text: str, cfg: TokenizerConfig | None = None) -> tuple[str, ...]:
    cfg = cfg or TokenizerConfig()
    norm = unicodedata.normalize("NFKC", text)
    if cfg.lowercase:
        norm = norm.casefold()
    parts = _NONALNUM.split(norm)
    return tuple(t for t in parts if t and len(t) <= cfg.max_token_len)


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    tokens: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class CategoryLabels:
    """Gold positives for one category, with optional difficulty/prevalence group."""

    category_id: str
    positives: frozenset[str]
    difficulty: str | None = None
    prevalence: str | None = None


@dataclass(frozen=True)
class LabeledCollection:
    """Immutable document collection plus per-category gold labels.

    Document order is fixed at load time and defines the row index used by
    every feature matrix built downstream.
    """

    documents: tuple[Document, ...]
    categories: Mapping[str, CategoryLabels] = field(default_factory=dict)

    @property
    def n_docs(self) -> int:
        return len(self.documents)

    @property
    def avg_doc_length(self) -> float:
        if not self.documents:
            return 0.0
        return sum(d.length for d in self.documents) / len(self.documents)

    def doc_index(self) -> dict[str, int]:
        return {d.doc_id: i for i, d in enumerate(self.documents)}

    def positive_rows(self, category_id: str) -> list[int]:
        """Row indices of the category's positives, in collection order."""
        positives = self.categories[category_id].positives
        return [i for i, d in enumerate(self.documents) if d.doc_id in positives]


class CorpusFormatError(ValueError):
    """Raised on malformed or inconsistent corpus/label files."""


def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}: malformed JSON on line {lineno}: {exc}") from exc
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"{path}: line {lineno} is not an object")
            yield lineno, obj


def load_corpus(corpus_path: str | Path, tokenizer_cfg: TokenizerConfig | None = None) -> LabeledCollection:
    """Load a JSONL corpus, tokenizing each document.

    Raises :class:`CorpusFormatError` on duplicate doc_ids or records missing
    ``doc_id``/``text``; empty-text documents are kept (they just never become
    seeds).
    """
    cfg = tokenizer_cfg or TokenizerConfig()
    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(corpus_path):
        if "doc_id" not in obj or "text" not in obj:
            raise CorpusFormatError(f"{corpus_path}: line {lineno} missing doc_id or text")
        doc_id = str(obj["doc_id"])
        if doc_id in seen:
            raise CorpusFormatError(f"duplicate doc_id {doc_id} (line {lineno})")
        seen.add(doc_id)
        text = str(obj["text"])
        docs.append(Document(doc_id=doc_id, text=text, tokens=tokenize(text, cfg)))
    return LabeledCollection(documents=tuple(docs))


def load_labels(labels_path: str | Path, collection: LabeledCollection) -> LabeledCollection:
    """Attach qrels-style labels (``category_id doc_id relevance``) to a collection.

    Rows naming unknown doc_ids are a hard error. Categories that end up with
    zero positives are excluded with a warning: a run needs at least one
    relevant seed candidate.
    """
    known = {d.doc_id for d in collection.documents}
    positives: dict[str, set[str]] = {}
    seen_categories: list[str] = []
    with open(labels_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise CorpusFormatError(
                    f"{labels_path}: line {lineno}: expected 'category_id doc_id relevance', got {len(parts)} fields"
                )
            category_id, doc_id, rel = parts
            if rel not in ("0", "1"):
                raise CorpusFormatError(f"{labels_path}: line {lineno}: relevance must be 0 or 1, got {rel!r}")
            if doc_id not in known:
                raise CorpusFormatError(f"unknown doc_id {doc_id} (line {lineno})")
            if category_id not in positives:
                positives[category_id] = set()
                seen_categories.append(category_id)
            if rel == "1":
                positives[category_id].add(doc_id)

    categories: dict[str, CategoryLabels] = {}
    for category_id in seen_categories:
        pos = positives[category_id]
        if not pos:
            logger.warning("category %s has no positive documents; excluded from runs", category_id)
            continue
        categories[category_id] = CategoryLabels(category_id=category_id, positives=frozenset(pos))
    return LabeledCollection(documents=collection.documents, categories=categories)


def load_category_groups(groups_path: str | Path, collection: LabeledCollection) -> LabeledCollection:
    """Attach difficulty/prevalence groups from a CSV ``category_id,difficulty,prevalence``.

    Unknown categories in the CSV are ignored (group files often cover a
    superset of the labeled categories).
    """
    groups: dict[str, tuple[str, str]] = {}
    with open(groups_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("category_id,"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise CorpusFormatError(f"{groups_path}: line {lineno}: expected 3 comma-separated fields")
            groups[parts[0]] = (parts[1], parts[2])

    categories = {}
    for category_id, labels in collection.categories.items():
        difficulty, prevalence = groups.get(category_id, (None, None))
        categories[category_id] = CategoryLabels(
            category_id=category_id,
            positives=labels.positives,
            difficulty=difficulty,
            prevalence=prevalence,
        )
    return LabeledCollection(documents=collection.documents, categories=categories)


def dedupe_corpus(in_path: str | Path, out_path: str | Path) -> tuple[int, int]:
    """Drop documents whose text MD5 was already seen; returns (kept, dropped).

    Preprocessing utility: runs on the raw JSONL before any load.
    """
    kept = dropped = 0
    seen: set[str] = set()
    with open(in_path, encoding="utf-8") as src, open(out_path, "w", encoding="utf-8") as dst:
        for lineno, line in enumerate(src, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{in_path}: malformed JSON on line {lineno}: {exc}") from exc
            digest = hashlib.md5(str(obj.get("text", "")).encode("utf-8")).hexdigest()
            if digest in seen:
                dropped += 1
                continue
            seen.add(digest)
            dst.write(stripped + "\n")
            kept += 1
    return kept, dropped
