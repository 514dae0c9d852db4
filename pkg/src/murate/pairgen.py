"""Multilingual training-pair construction via a pluggable translation provider.

English preference pairs are projected onto translated monolingual and
cross-lingual pairs (label copied unchanged), and neutral parallel pairs are
built from single documents translated into two different languages. A
deterministic pseudo-translator stands in for a real MT system in tests; a
file-backed provider serves pre-translated documents keyed by (id, lang).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .corpus import Corpus, Document, load_corpus, tokenize, validate_lang
from .errors import MurateError, ValidationError
from .features import fnv1a64
from .raters import KINDS, PairJudgment

DEFAULT_RATIO = (75000, 150000, 150000, 75000)  # english : mono : cross : parallel

_KIND_ORDER = {k: i for i, k in enumerate(KINDS)}
_BASE36 = "0123456789abcdefghijklmnopqrstuvwxyz"


class TranslationProvider(Protocol):
    def translate(self, doc: Document, target: str) -> Document: ...


def _base36(value: int) -> str:
    if value == 0:
        return "0"
    digits = []
    while value:
        value, rem = divmod(value, 36)
        digits.append(_BASE36[rem])
    return "".join(reversed(digits))


class PseudoTranslator:
    """Deterministic surrogate translation.

    Each source token maps to one target token (the language code plus a
    base36 token hash), so token counts are preserved and surface forms are
    distinct per language while staying reproducible under the seed.
    """

    def __init__(self, seed: int):
        self.seed = seed

    def translate(self, doc: Document, target: str) -> Document:
        validate_lang(target)
        words = [
            target + _base36(fnv1a64(f"{self.seed}|{target}|{tok}".encode("utf-8")))
            for tok in tokenize(doc.text)
        ]
        return Document(id=f"{doc.id}:{target}", lang=target, text=" ".join(words))


class FileTranslator:
    """Serves pre-translated documents from a corpus keyed by derived id."""

    def __init__(self, source: Corpus | str | Path):
        corpus = source if isinstance(source, Corpus) else load_corpus(source)
        self._by_id = {doc.id: doc for doc in corpus}

    def translate(self, doc: Document, target: str) -> Document:
        validate_lang(target)
        derived = f"{doc.id}:{target}"
        found = self._by_id.get(derived)
        if found is None:
            raise ValidationError(
                f"no pre-translated document for ({doc.id!r}, {target!r})"
            )
        if found.lang != target:
            raise ValidationError(
                f"pre-translated document {derived!r} has lang {found.lang!r}, expected {target!r}"
            )
        return found


def make_provider(spec: str) -> TranslationProvider:
    """Build a provider from a CLI spec: `pseudo:<seed>` or `file:<path>`."""
    kind, _, arg = spec.partition(":")
    if kind == "pseudo":
        try:
            return PseudoTranslator(seed=int(arg))
        except ValueError:
            raise ValidationError(f"pseudo provider needs an integer seed, got {arg!r}") from None
    if kind == "file":
        if not arg:
            raise ValidationError("file provider needs a path: file:<path>")
        return FileTranslator(arg)
    raise ValidationError(f"unknown provider {spec!r}; expected pseudo:<seed> or file:<path>")


class _CachingProvider:
    """Memoizes translations and collects every produced document."""

    def __init__(self, inner: TranslationProvider):
        self._inner = inner
        self.produced: dict[str, Document] = {}

    def translate(self, doc: Document, target: str) -> Document:
        key = f"{doc.id}:{target}"
        cached = self.produced.get(key)
        if cached is None:
            cached = self._inner.translate(doc, target)
            if cached.lang != target or cached.id != key:
                raise ValidationError(
                    f"provider violated its contract for ({doc.id!r}, {target!r}): "
                    f"returned id {cached.id!r}, lang {cached.lang!r}"
                )
            self.produced[key] = cached
        return cached


def _translated(doc: Document, target: str, tp: TranslationProvider) -> Document:
    return doc if doc.lang == target else tp.translate(doc, target)


@dataclass(frozen=True)
class PairMixSpec:
    """Requested pair counts per kind, target languages, and sampling seed."""

    n_english: int
    n_monolingual: int
    n_crosslingual: int
    n_parallel: int
    languages: tuple[str, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_english", "n_monolingual", "n_crosslingual", "n_parallel"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.n_monolingual or self.n_crosslingual or self.n_parallel:
            if not self.languages:
                raise ValidationError("translated kinds requested but no target languages given")
        for lang in self.languages:
            validate_lang(lang)
        if "en" in self.languages:
            raise ValidationError("target languages must not include 'en'")
        if (self.n_crosslingual or self.n_parallel) and len(self.languages) < 2:
            raise ValidationError(
                "cross-lingual and parallel pairs need at least two target languages"
            )

    @classmethod
    def from_scale(cls, scale: float, languages: tuple[str, ...], seed: int = 0) -> "PairMixSpec":
        counts = [round(r * scale) for r in DEFAULT_RATIO]
        return cls(*counts, languages=tuple(languages), seed=seed)

    @property
    def total(self) -> int:
        return self.n_english + self.n_monolingual + self.n_crosslingual + self.n_parallel


def _source_pair_id(j: PairJudgment) -> str:
    return j.source_pair or f"{j.doc_a}|{j.doc_b}"


def project_monolingual(
    j: PairJudgment, m: str, tp: TranslationProvider, docs: Corpus
) -> PairJudgment:
    """Translate both sides of an English pair into language m, keeping the label."""
    if j.kind != "english":
        raise ValidationError(f"can only project english pairs, got kind {j.kind!r}")
    validate_lang(m)
    if m == "en":
        raise ValidationError("monolingual projection target must not be 'en'")
    try:
        ta = tp.translate(docs.get(j.doc_a), m)
        tb = tp.translate(docs.get(j.doc_b), m)
    except MurateError as exc:
        raise MurateError(
            f"pair ({j.doc_a!r}, {j.doc_b!r}) -> {m}: {exc}"
        ) from exc
    return PairJudgment(
        doc_a=ta.id, doc_b=tb.id, p_b_over_a=j.p_b_over_a,
        kind="monolingual", source_pair=_source_pair_id(j),
    )


def project_crosslingual(
    j: PairJudgment, m: str, m2: str, tp: TranslationProvider, docs: Corpus
) -> PairJudgment:
    """Translate the two sides into different languages, keeping the label."""
    if j.kind != "english":
        raise ValidationError(f"can only project english pairs, got kind {j.kind!r}")
    validate_lang(m)
    validate_lang(m2)
    if m == m2:
        raise ValidationError(
            f"cross-lingual projection needs two distinct languages, got {m!r} twice "
            "(that is a monolingual projection)"
        )
    try:
        ta = _translated(docs.get(j.doc_a), m, tp)
        tb = _translated(docs.get(j.doc_b), m2, tp)
    except MurateError as exc:
        raise MurateError(
            f"pair ({j.doc_a!r}, {j.doc_b!r}) -> ({m}, {m2}): {exc}"
        ) from exc
    return PairJudgment(
        doc_a=ta.id, doc_b=tb.id, p_b_over_a=j.p_b_over_a,
        kind="crosslingual", source_pair=_source_pair_id(j),
    )


def make_parallel(doc: Document, m: str, m2: str, tp: TranslationProvider) -> PairJudgment:
    """Pair a document's translations into two languages with a neutral label."""
    validate_lang(m)
    validate_lang(m2)
    if m == m2:
        raise ValidationError(f"parallel pair needs two distinct languages, got {m!r} twice")
    try:
        ta = _translated(doc, m, tp)
        tb = _translated(doc, m2, tp)
    except MurateError as exc:
        raise MurateError(f"parallel pair for {doc.id!r} -> ({m}, {m2}): {exc}") from exc
    return PairJudgment(
        doc_a=ta.id, doc_b=tb.id, p_b_over_a=0.5, kind="parallel", source_pair=doc.id,
    )


@dataclass(frozen=True)
class MixResult:
    pairs: tuple[PairJudgment, ...]
    documents: tuple[Document, ...]  # translated documents only


def build_mix(
    judgments: list[PairJudgment],
    docs: Corpus,
    spec: PairMixSpec,
    tp: TranslationProvider,
) -> MixResult:
    """Assemble the requested pair mix, deterministically under spec.seed.

    Source judgments are sampled without replacement within each kind, and
    language assignments round-robin over a seed-shuffled language list so
    per-language counts are balanced to within one.
    """
    for j in judgments:
        if j.kind != "english":
            raise ValidationError(f"build_mix expects english judgments, got kind {j.kind!r}")
    n = len(judgments)
    doc_pool = sorted({d for j in judgments for d in (j.doc_a, j.doc_b)})

    shortfalls = []
    for name, want, have in (
        ("english", spec.n_english, n),
        ("monolingual", spec.n_monolingual, n),
        ("crosslingual", spec.n_crosslingual, n),
        ("parallel", spec.n_parallel, len(doc_pool)),
    ):
        if want > have:
            shortfalls.append(f"{name}: need {want}, have {have}")
    if shortfalls:
        raise MurateError("insufficient source pairs -- " + "; ".join(shortfalls))

    rng = np.random.default_rng(spec.seed)
    langs = sorted(spec.languages)
    rng.shuffle(langs)
    nlangs = len(langs)

    cache = _CachingProvider(tp)
    out: list[PairJudgment] = []

    for i in rng.choice(n, size=spec.n_english, replace=False) if spec.n_english else []:
        j = judgments[i]
        out.append(PairJudgment(
            doc_a=j.doc_a, doc_b=j.doc_b, p_b_over_a=j.p_b_over_a,
            kind="english", source_pair=_source_pair_id(j),
        ))
    for pos, i in enumerate(
        rng.choice(n, size=spec.n_monolingual, replace=False) if spec.n_monolingual else []
    ):
        out.append(project_monolingual(judgments[i], langs[pos % nlangs], cache, docs))
    for pos, i in enumerate(
        rng.choice(n, size=spec.n_crosslingual, replace=False) if spec.n_crosslingual else []
    ):
        m = langs[(2 * pos) % nlangs]
        m2 = langs[(2 * pos + 1) % nlangs]
        out.append(project_crosslingual(judgments[i], m, m2, cache, docs))
    if spec.n_parallel:
        chosen = rng.choice(len(doc_pool), size=spec.n_parallel, replace=False)
        for pos, di in enumerate(chosen):
            m = langs[(2 * pos) % nlangs]
            m2 = langs[(2 * pos + 1) % nlangs]
            out.append(make_parallel(docs.get(doc_pool[di]), m, m2, cache))

    out.sort(key=lambda j: (_KIND_ORDER[j.kind], j.source_pair or "", j.doc_a, j.doc_b))
    translated = tuple(cache.produced[k] for k in sorted(cache.produced))
    return MixResult(pairs=tuple(out), documents=translated)
