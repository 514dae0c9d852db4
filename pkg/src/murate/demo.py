"""Deterministic synthetic data for demos, tests, and the bundled pipeline run.

Documents carry a latent quality drawn from N(0, 1); their text mixes words
from a "high" and a "low" vocabulary with a quality-dependent proportion, so
both scorer backends have signal to recover. Raters observe the latent
quality plus independent Gaussian noise.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .corpus import Corpus, Document
from .raters import PairJudgment, aggregate_pair

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def _random_words(rng: np.random.Generator, count: int, min_len: int = 4, max_len: int = 8) -> list[str]:
    words: set[str] = set()
    while len(words) < count:
        length = int(rng.integers(min_len, max_len + 1))
        words.add("".join(_LETTERS[i] for i in rng.integers(0, 26, size=length)))
    return sorted(words)


def make_vocabularies(seed: int, size: int = 120) -> tuple[list[str], list[str]]:
    """Disjoint high- and low-quality vocabularies."""
    rng = np.random.default_rng(seed)
    pool = _random_words(rng, 2 * size)
    order = rng.permutation(2 * size)
    return [pool[i] for i in order[:size]], [pool[i] for i in order[size:]]


def make_corpus(
    n_docs: int,
    seed: int,
    lang: str = "en",
    id_prefix: str = "d",
    min_tokens: int = 20,
    max_tokens: int = 80,
    vocab_seed: int = 11,
    vocab_size: int = 120,
    quality_slope: float = 1.5,
) -> tuple[Corpus, dict[str, float]]:
    """Generate documents whose word mix encodes a latent quality."""
    hi, lo = make_vocabularies(vocab_seed, size=vocab_size)
    rng = np.random.default_rng(seed)
    qualities = rng.normal(0.0, 1.0, size=n_docs)
    width = len(str(max(n_docs - 1, 1)))
    docs: list[Document] = []
    latent: dict[str, float] = {}
    for i in range(n_docs):
        q = float(qualities[i])
        p_hi = 1.0 / (1.0 + math.exp(-quality_slope * q))
        length = int(rng.integers(min_tokens, max_tokens + 1))
        take_hi = rng.random(length) < p_hi
        hi_idx = rng.integers(0, len(hi), size=length)
        lo_idx = rng.integers(0, len(lo), size=length)
        words = [hi[hi_idx[t]] if take_hi[t] else lo[lo_idx[t]] for t in range(length)]
        doc_id = f"{id_prefix}{i:0{width}d}"
        docs.append(Document(id=doc_id, lang=lang, text=" ".join(words)))
        latent[doc_id] = q
    return Corpus(docs), latent


def make_rater_scores(
    qualities: dict[str, float],
    n_raters: int = 4,
    noise: float = 0.3,
    seed: int = 0,
) -> dict[str, dict[str, float]]:
    """Per-rater noisy observations of the latent quality."""
    rng = np.random.default_rng(seed)
    ids = sorted(qualities)
    scores: dict[str, dict[str, float]] = {}
    for r in range(n_raters):
        eps = rng.normal(0.0, noise, size=len(ids)) if noise > 0 else np.zeros(len(ids))
        scores[f"r{r}"] = {doc_id: qualities[doc_id] + float(eps[k]) for k, doc_id in enumerate(ids)}
    return scores


def noisy_pair_judgments(
    qualities: dict[str, float],
    n_pairs: int,
    n_raters: int = 4,
    noise: float = 0.3,
    seed: int = 0,
) -> list[PairJudgment]:
    """Aggregate random pairs whose rater scores carry fresh noise per evaluation.

    Unlike `make_rater_scores` (one noisy score per document, reused across
    pairs), each pair evaluation draws independent noise, so aggregation over
    many pairs can average it out.
    """
    rng = np.random.default_rng(seed)
    ids = sorted(qualities)
    n = len(ids)
    out: list[PairJudgment] = []
    while len(out) < n_pairs:
        a, b = rng.integers(0, n, size=2)
        if a == b:
            continue
        id_a, id_b = ids[a], ids[b]
        eps = rng.normal(0.0, noise, size=(n_raters, 2)) if noise > 0 else np.zeros((n_raters, 2))
        out.append(aggregate_pair(
            id_a, id_b,
            {f"r{k}": qualities[id_a] + float(eps[k, 0]) for k in range(n_raters)},
            {f"r{k}": qualities[id_b] + float(eps[k, 1]) for k in range(n_raters)},
        ))
    return out


def sample_pairs(ids: list[str], n_pairs: int, seed: int) -> list[tuple[str, str]]:
    """Random document pairs with distinct members (repeats across pairs allowed)."""
    rng = np.random.default_rng(seed)
    pairs: list[tuple[str, str]] = []
    n = len(ids)
    while len(pairs) < n_pairs:
        a, b = rng.integers(0, n, size=2)
        if a != b:
            pairs.append((ids[a], ids[b]))
    return pairs


def judgments_from_scores(
    pairs: list[tuple[str, str]],
    rater_scores: dict[str, dict[str, float]],
) -> list[PairJudgment]:
    out = []
    for a, b in pairs:
        scores_a = {r: rater_scores[r][a] for r in rater_scores}
        scores_b = {r: rater_scores[r][b] for r in rater_scores}
        out.append(aggregate_pair(a, b, scores_a, scores_b))
    return out


def write_demo_files(
    out_dir: str | Path,
    n_docs: int = 500,
    n_pairs: int = 1200,
    n_raters: int = 4,
    noise: float = 0.3,
    seed: int = 2024,
) -> dict[str, Path]:
    """Write corpus.jsonl, one score file per rater, and pairs.txt."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus, latent = make_corpus(n_docs, seed=seed)
    rater_scores = make_rater_scores(latent, n_raters=n_raters, noise=noise, seed=seed + 1)
    pairs = sample_pairs(sorted(latent), n_pairs, seed=seed + 2)

    paths: dict[str, Path] = {}
    corpus_path = out_dir / "corpus.jsonl"
    with corpus_path.open("w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus:
            fh.write(json.dumps(
                {"id": doc.id, "lang": doc.lang, "text": doc.text},
                ensure_ascii=False, sort_keys=True,
            ) + "\n")
    paths["corpus"] = corpus_path

    for rater in sorted(rater_scores):
        score_path = out_dir / f"scores_{rater}.jsonl"
        with score_path.open("w", encoding="utf-8", newline="\n") as fh:
            for doc_id in sorted(rater_scores[rater]):
                fh.write(json.dumps(
                    {"rater_id": rater, "doc_id": doc_id, "score": rater_scores[rater][doc_id]},
                    ensure_ascii=False, sort_keys=True,
                ) + "\n")
        paths[rater] = score_path

    pairs_path = out_dir / "pairs.txt"
    with pairs_path.open("w", encoding="utf-8", newline="\n") as fh:
        for a, b in pairs:
            fh.write(f"{a}\t{b}\n")
    paths["pairs"] = pairs_path
    return paths
