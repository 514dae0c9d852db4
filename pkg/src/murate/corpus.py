"""Document model, corpus ingestion, deterministic token counting, language registry.

A corpus is an immutable, ordered collection of documents read from a JSON
Lines file with keys {id, lang, text}. Token counts use a deterministic rule:
whitespace-delimited runs are tokens, except that scalars from the CJK
Unified Ideographs, Hiragana, Katakana, Hangul Syllables, and Thai blocks
each count as their own token.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

# "en" plus the 17 target languages, in registry order.
LANGUAGES: tuple[str, ...] = (
    "en",
    "ar", "de", "es", "fr", "id", "it", "ja", "ko",
    "ms", "nl", "pt", "ru", "th", "tl", "tr", "vi", "zh",
)
TARGET_LANGUAGES: tuple[str, ...] = LANGUAGES[1:]

_LANG_RE = re.compile(r"^[a-z]{2,3}$")

# Blocks whose scalars are single-character tokens.
_CHAR_TOKEN_RANGES = (
    (0x4E00, 0x9FFF),   # CJK Unified Ideographs
    (0x3040, 0x309F),   # Hiragana
    (0x30A0, 0x30FF),   # Katakana
    (0xAC00, 0xD7AF),   # Hangul Syllables
    (0x0E00, 0x0E7F),   # Thai
)


def validate_lang(code: str) -> str:
    if not isinstance(code, str) or not _LANG_RE.match(code):
        raise ValidationError(f"invalid language code {code!r}: must match [a-z]{{2,3}}")
    if code not in LANGUAGES:
        raise ValidationError(
            f"unregistered language {code!r}; registered codes: {', '.join(LANGUAGES)}"
        )
    return code


def _is_char_token(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CHAR_TOKEN_RANGES)


def tokenize(text: str) -> list[str]:
    """Split text into tokens under the deterministic counting rule.

    Whitespace separates tokens; within a non-whitespace run, each scalar
    from the single-character blocks is its own token and the remaining
    maximal sub-runs are one token each.
    """
    tokens: list[str] = []
    buf: list[str] = []
    for ch in text:
        if ch.isspace():
            if buf:
                tokens.append("".join(buf))
                buf = []
        elif _is_char_token(ch):
            if buf:
                tokens.append("".join(buf))
                buf = []
            tokens.append(ch)
        else:
            buf.append(ch)
    if buf:
        tokens.append("".join(buf))
    return tokens


def count_tokens(text: str) -> int:
    return len(tokenize(text))


@dataclass(frozen=True)
class Document:
    """A text unit: the atom of scoring and selection."""

    id: str
    lang: str
    text: str
    token_count: int = field(init=False)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("document id must be non-empty")
        validate_lang(self.lang)
        if not self.text:
            raise ValidationError(f"document {self.id!r}: text must be non-empty")
        object.__setattr__(self, "token_count", count_tokens(self.text))


class Corpus:
    """Immutable ordered document collection with per-language token totals."""

    def __init__(self, documents: list[Document] | tuple[Document, ...]):
        self._documents: tuple[Document, ...] = tuple(documents)
        self._by_id: dict[str, Document] = {}
        totals: dict[str, int] = {}
        for doc in self._documents:
            if doc.id in self._by_id:
                raise ValidationError(f"duplicate document id {doc.id!r}")
            self._by_id[doc.id] = doc
            totals[doc.lang] = totals.get(doc.lang, 0) + doc.token_count
        self._token_totals = totals

    def __len__(self) -> int:
        return len(self._documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._documents)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    @property
    def documents(self) -> tuple[Document, ...]:
        return self._documents

    def get(self, doc_id: str) -> Document:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise ValidationError(f"unknown document id {doc_id!r}") from None

    def token_total(self, lang: str | None = None) -> int:
        if lang is None:
            return sum(self._token_totals.values())
        return self._token_totals.get(lang, 0)

    @property
    def languages(self) -> tuple[str, ...]:
        """Languages present, in registry order."""
        return tuple(l for l in LANGUAGES if l in self._token_totals)

    def merged_with(self, other: "Corpus") -> "Corpus":
        return Corpus(self._documents + other._documents)


def load_corpus(path: str | Path) -> Corpus:
    """Read a JSON Lines corpus ({id, lang, text} per line).

    Extra keys are ignored with a warning; duplicate ids, unknown languages,
    and empty texts are rejected.
    """
    path = Path(path)
    docs: list[Document] = []
    seen: set[str] = set()
    extra_keys: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise ParseError(f"{path}: line {lineno}: expected an object")
            missing = {"id", "lang", "text"} - record.keys()
            if missing:
                raise ParseError(
                    f"{path}: line {lineno}: missing field(s) {', '.join(sorted(missing))}"
                )
            extra_keys |= record.keys() - {"id", "lang", "text"}
            try:
                doc = Document(id=str(record["id"]), lang=record["lang"], text=record["text"])
            except ValidationError as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc}") from exc
            if doc.id in seen:
                raise ValidationError(f"{path}: line {lineno}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    if extra_keys:
        logger.warning("%s: ignored extra field(s): %s", path, ", ".join(sorted(extra_keys)))
    return Corpus(docs)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus:
            fh.write(json.dumps(
                {"id": doc.id, "lang": doc.lang, "text": doc.text},
                ensure_ascii=False, sort_keys=True,
            ) + "\n")
