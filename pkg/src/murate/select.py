"""Corpus scoring and top-fraction token-budget selection.

Documents are scored independently (shardable across workers with a
deterministic merge) and selected greedily per language in (score desc,
doc_id asc) order until the token budget ceil(fraction * total) is covered,
so every manifest minimally overshoots its budget and is byte-stable.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Corpus, LANGUAGES
from .errors import ParseError, ValidationError
from .scorer import ScorerState, score

GLOBAL_POOL = "*"  # lang key used when selection ignores language


@dataclass(frozen=True)
class ScoredDocument:
    doc_id: str
    lang: str
    score: float
    token_count: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValidationError(f"document {self.doc_id!r}: score must be finite")
        if self.token_count < 1:
            raise ValidationError(f"document {self.doc_id!r}: token_count must be >= 1")


@dataclass(frozen=True)
class LanguageSelection:
    lang: str
    fraction: float
    budget_tokens: int
    selected: tuple[str, ...]
    selected_tokens: int
    total_tokens: int


@dataclass(frozen=True)
class SelectionManifest:
    fraction: float
    by_language: bool
    entries: tuple[LanguageSelection, ...]
    checkpoint_hash: str = ""

    def selected_ids(self) -> set[str]:
        return {doc_id for entry in self.entries for doc_id in entry.selected}

    def to_json(self) -> str:
        return json.dumps(
            {
                "fraction": self.fraction,
                "by_language": self.by_language,
                "checkpoint_hash": self.checkpoint_hash,
                "entries": [
                    {
                        "lang": e.lang,
                        "fraction": e.fraction,
                        "budget_tokens": e.budget_tokens,
                        "selected": list(e.selected),
                        "selected_tokens": e.selected_tokens,
                        "total_tokens": e.total_tokens,
                    }
                    for e in self.entries
                ],
            },
            ensure_ascii=False, sort_keys=True, indent=2,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SelectionManifest":
        data = json.loads(text)
        return cls(
            fraction=data["fraction"],
            by_language=data["by_language"],
            checkpoint_hash=data.get("checkpoint_hash", ""),
            entries=tuple(
                LanguageSelection(
                    lang=e["lang"],
                    fraction=e["fraction"],
                    budget_tokens=e["budget_tokens"],
                    selected=tuple(e["selected"]),
                    selected_tokens=e["selected_tokens"],
                    total_tokens=e["total_tokens"],
                )
                for e in data["entries"]
            ),
        )


def score_corpus(state: ScorerState, corpus: Corpus, workers: int = 1) -> list[ScoredDocument]:
    """Score every document, in corpus order; sharding never changes output."""
    docs = corpus.documents
    if workers < 1:
        raise ValidationError("workers must be >= 1")

    def score_chunk(chunk) -> list[ScoredDocument]:
        return [
            ScoredDocument(
                doc_id=d.id, lang=d.lang, score=score(state, d), token_count=d.token_count,
            )
            for d in chunk
        ]

    if workers == 1 or len(docs) == 0:
        return score_chunk(docs)
    size = math.ceil(len(docs) / workers)
    chunks = [docs[i:i + size] for i in range(0, len(docs), size)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(score_chunk, chunks))
    return [sd for part in results for sd in part]


def select_top_fraction(
    scored: Sequence[ScoredDocument],
    fraction: float,
    by_language: bool = True,
    checkpoint_hash: str = "",
) -> SelectionManifest:
    """Greedy top-score selection until >= ceil(fraction * total) tokens per pool."""
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"fraction {fraction} outside (0, 1]")
    if not scored:
        raise ValidationError("cannot select from an empty scored set")

    pools: dict[str, list[ScoredDocument]] = {}
    for sd in scored:
        pools.setdefault(sd.lang if by_language else GLOBAL_POOL, []).append(sd)

    lang_order = [l for l in LANGUAGES if l in pools] + sorted(
        k for k in pools if k not in LANGUAGES
    )
    entries = []
    for lang in lang_order:
        pool = pools[lang]
        total = sum(sd.token_count for sd in pool)
        budget = math.ceil(fraction * total)
        pool.sort(key=lambda sd: (-sd.score, sd.doc_id))
        taken: list[str] = []
        covered = 0
        for sd in pool:
            if covered >= budget:
                break
            taken.append(sd.doc_id)
            covered += sd.token_count
        entries.append(LanguageSelection(
            lang=lang, fraction=fraction, budget_tokens=budget,
            selected=tuple(taken), selected_tokens=covered, total_tokens=total,
        ))
    return SelectionManifest(
        fraction=fraction, by_language=by_language,
        entries=tuple(entries), checkpoint_hash=checkpoint_hash,
    )


def overlap_fraction(m1: SelectionManifest, m2: SelectionManifest) -> float:
    """Jaccard overlap of the selected document sets, pooled over languages."""
    if m1.fraction != m2.fraction:
        raise ValidationError(
            f"manifest fractions differ: {m1.fraction} vs {m2.fraction}"
        )
    pools1 = {(e.lang, e.total_tokens) for e in m1.entries}
    pools2 = {(e.lang, e.total_tokens) for e in m2.entries}
    if pools1 != pools2:
        raise ValidationError("manifests cover different corpora")
    sel1, sel2 = m1.selected_ids(), m2.selected_ids()
    union = sel1 | sel2
    if not union:
        raise ValidationError("manifests select nothing")
    return len(sel1 & sel2) / len(union)


# -- file I/O --

def save_scored(scored: Sequence[ScoredDocument], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for sd in scored:
            fh.write(json.dumps(
                {"doc_id": sd.doc_id, "lang": sd.lang, "score": sd.score,
                 "token_count": sd.token_count},
                ensure_ascii=False, sort_keys=True,
            ) + "\n")


def load_scored(path: str | Path) -> list[ScoredDocument]:
    path = Path(path)
    out: list[ScoredDocument] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(ScoredDocument(
                    doc_id=str(rec["doc_id"]), lang=str(rec["lang"]),
                    score=float(rec["score"]), token_count=int(rec["token_count"]),
                ))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            except KeyError as exc:
                raise ParseError(f"{path}: line {lineno}: missing field {exc}") from exc
            except ValidationError as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc}") from exc
    return out
