"""Trainable scalar quality scorer.

Two backends share the same objective: a latent table (one parameter per
registered document, for verification on closed corpora) and a hashed-feature
linear model (generalizes to unseen documents). Preference pairs are fit with
a binary cross-entropy loss on score differences; parallel translation pairs
add a symmetric regularizer that pulls their scores together, weighted by
`parallel_weight`. Updates use adaptive moment estimation with bias
correction, and training is deterministic given the config seed.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, Document
from .errors import CheckpointError, MurateError, ValidationError
from .features import FeatureVector, featurize
from .raters import PairJudgment

BACKENDS = ("latent_table", "hashed_linear")

_BACKEND_DEFAULT_LR = {"latent_table": 0.1, "hashed_linear": 0.05}


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def log_sigmoid(x: float) -> float:
    """log(sigma(x)), stable for large |x|."""
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


def pairwise_loss(s_a: float, s_b: float, p_b_over_a: float) -> float:
    """Cross-entropy between the preference label and sigma(s_b - s_a)."""
    if not 0.0 <= p_b_over_a <= 1.0:
        raise ValidationError(f"p_b_over_a {p_b_over_a} outside [0, 1]")
    d = s_b - s_a
    return -p_b_over_a * log_sigmoid(d) - (1.0 - p_b_over_a) * log_sigmoid(-d)


def parallel_loss(s_a: float, s_b: float) -> float:
    """Symmetric score-gap penalty; minimized (2 ln 2) exactly at s_a == s_b."""
    d = s_a - s_b
    return -log_sigmoid(d) - log_sigmoid(-d)


@dataclass(frozen=True)
class TrainingConfig:
    backend: str = "hashed_linear"
    parallel_weight: float = 0.5
    learning_rate: float | None = None  # None = backend default
    epochs: int = 30
    batch_size: int = 64
    margin: float = 0.5
    seed: int = 0
    hash_bits: int = 18
    max_tokens_per_doc: int = 512
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ValidationError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.parallel_weight < 0:
            raise ValidationError("parallel_weight must be non-negative")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be positive")
        if not 0.0 <= self.margin <= 1.0:
            raise ValidationError("margin must lie in [0, 1]")
        if not 10 <= self.hash_bits <= 24:
            raise ValidationError("hash_bits must lie in [10, 24]")
        if self.max_tokens_per_doc < 1:
            raise ValidationError("max_tokens_per_doc must be positive")

    @property
    def effective_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return _BACKEND_DEFAULT_LR[self.backend]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainingConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class ScorerState:
    """Scorer parameters plus optimizer moments; equal-shape params/m/v."""

    backend: str
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    step: int
    config: TrainingConfig
    doc_ids: tuple[str, ...] | None = None  # latent_table only
    _doc_index: dict[str, int] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.backend == "latent_table":
            if self.doc_ids is None:
                raise ValidationError("latent_table state requires doc_ids")
            if len(self.params) != len(self.doc_ids):
                raise ValidationError("latent_table params length must equal #documents")
        else:
            expected = (1 << self.config.hash_bits) + 1
            if len(self.params) != expected:
                raise ValidationError(
                    f"hashed_linear params length {len(self.params)} != 2^b + 1 = {expected}"
                )

    @property
    def doc_index(self) -> dict[str, int]:
        if self.doc_ids is None:
            raise ValidationError("doc index only exists for the latent_table backend")
        if self._doc_index is None:
            self._doc_index = {d: i for i, d in enumerate(self.doc_ids)}
        return self._doc_index

    def equals(self, other: "ScorerState") -> bool:
        return (
            self.backend == other.backend
            and self.step == other.step
            and self.config == other.config
            and self.doc_ids == other.doc_ids
            and np.array_equal(self.params, other.params)
            and np.array_equal(self.m, other.m)
            and np.array_equal(self.v, other.v)
        )


def init_state(config: TrainingConfig, corpus: Corpus | None = None) -> ScorerState:
    if config.backend == "latent_table":
        if corpus is None:
            raise ValidationError("latent_table init requires a corpus to register documents")
        n = len(corpus)
        return ScorerState(
            backend=config.backend,
            params=np.zeros(n), m=np.zeros(n), v=np.zeros(n),
            step=0, config=config,
            doc_ids=tuple(d.id for d in corpus),
        )
    n = (1 << config.hash_bits) + 1  # weights + trailing bias
    return ScorerState(
        backend=config.backend,
        params=np.zeros(n), m=np.zeros(n), v=np.zeros(n),
        step=0, config=config,
    )


def score(state: ScorerState, doc: Document) -> float:
    if state.backend == "latent_table":
        idx = state.doc_index.get(doc.id)
        if idx is None:
            raise ValidationError(f"document {doc.id!r} was not registered at training time")
        return float(state.params[idx])
    fv = featurize(doc, state.config.hash_bits, state.config.max_tokens_per_doc)
    return float(state.params[fv.indices] @ fv.values + state.params[-1])


# -- batch computation ----------------------------------------------------
#
# A resolved pair caches whatever the backend needs to score its documents:
# a parameter index for latent_table, a FeatureVector for hashed_linear.

@dataclass(frozen=True)
class _ResolvedPair:
    ref_a: object
    ref_b: object
    p_b_over_a: float
    parallel: bool


def _resolve_pairs(
    batch: Sequence[PairJudgment],
    state: ScorerState,
    corpus: Corpus,
) -> list[_ResolvedPair]:
    refs: dict[str, object] = {}

    def ref(doc_id: str) -> object:
        cached = refs.get(doc_id)
        if cached is None:
            if state.backend == "latent_table":
                idx = state.doc_index.get(doc_id)
                if idx is None:
                    raise ValidationError(
                        f"document {doc_id!r} was not registered at training time"
                    )
                cached = idx
            else:
                doc = corpus.get(doc_id)
                cached = featurize(doc, state.config.hash_bits, state.config.max_tokens_per_doc)
            refs[doc_id] = cached
        return cached

    return [
        _ResolvedPair(ref(j.doc_a), ref(j.doc_b), j.p_b_over_a, j.kind == "parallel")
        for j in batch
    ]


def _score_ref(params: np.ndarray, ref: object) -> float:
    if isinstance(ref, FeatureVector):
        return float(params[ref.indices] @ ref.values + params[-1])
    return float(params[ref])


def _accumulate(grad: np.ndarray, ref: object, coef: float) -> None:
    if isinstance(ref, FeatureVector):
        grad[ref.indices] += coef * ref.values
        grad[-1] += coef
    else:
        grad[ref] += coef


def _loss_and_grad(
    pairs: Sequence[_ResolvedPair],
    params: np.ndarray,
    parallel_weight: float,
    want_grad: bool,
) -> tuple[float, np.ndarray | None]:
    n_plain = sum(1 for p in pairs if not p.parallel)
    n_par = len(pairs) - n_plain
    grad = np.zeros_like(params) if want_grad else None
    loss_plain = 0.0
    loss_par = 0.0
    for pair in pairs:
        s_a = _score_ref(params, pair.ref_a)
        s_b = _score_ref(params, pair.ref_b)
        d = s_b - s_a
        if pair.parallel:
            loss_par += -log_sigmoid(d) - log_sigmoid(-d)
            if parallel_weight == 0.0:
                continue
            g = sigmoid(d) - sigmoid(-d)
            weight = parallel_weight / n_par
        else:
            loss_plain += -pair.p_b_over_a * log_sigmoid(d) \
                - (1.0 - pair.p_b_over_a) * log_sigmoid(-d)
            g = sigmoid(d) - pair.p_b_over_a
            weight = 1.0 / n_plain
        if grad is not None:
            coef = weight * g
            _accumulate(grad, pair.ref_b, coef)
            _accumulate(grad, pair.ref_a, -coef)
    loss = 0.0
    if n_plain:
        loss += loss_plain / n_plain
    if n_par:
        loss += parallel_weight * (loss_par / n_par)
    return loss, grad


def total_loss(batch: Sequence[PairJudgment], state: ScorerState, corpus: Corpus) -> float:
    """Mean preference loss over non-parallel pairs plus the weighted mean
    parallel penalty; each mean is over its own sub-batch."""
    pairs = _resolve_pairs(batch, state, corpus)
    loss, _ = _loss_and_grad(pairs, state.params, state.config.parallel_weight, want_grad=False)
    return loss


def gradient(batch: Sequence[PairJudgment], state: ScorerState, corpus: Corpus) -> np.ndarray:
    """Exact analytic gradient of `total_loss` with respect to the parameters."""
    pairs = _resolve_pairs(batch, state, corpus)
    _, grad = _loss_and_grad(pairs, state.params, state.config.parallel_weight, want_grad=True)
    assert grad is not None
    return grad


# -- training ---------------------------------------------------------------

def _adam_update(state: ScorerState, grad: np.ndarray) -> None:
    cfg = state.config
    state.step += 1
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = state.m / (1.0 - cfg.beta1 ** state.step)
    v_hat = state.v / (1.0 - cfg.beta2 ** state.step)
    state.params = state.params - cfg.effective_learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


def train(
    judgments: Sequence[PairJudgment],
    corpus: Corpus,
    config: TrainingConfig,
    log_path: str | Path | None = None,
) -> ScorerState:
    """Fit a scorer on margin-filtered judgments.

    Runs seed-shuffled mini-batch epochs with adaptive-moment updates. The
    optional log receives one JSON line per epoch with the mean batch loss
    and the mean absolute score gap over parallel pairs.
    """
    if not judgments:
        raise ValidationError("cannot train on an empty judgment set")
    state = init_state(config, corpus)
    pairs = _resolve_pairs(judgments, state, corpus)
    parallel_pairs = [p for p in pairs if p.parallel]

    rng = np.random.default_rng(config.seed)
    n = len(pairs)
    log_lines: list[str] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            chunk = [pairs[i] for i in order[start:start + config.batch_size]]
            loss, grad = _loss_and_grad(
                chunk, state.params, config.parallel_weight, want_grad=True)
            if not math.isfinite(loss):
                raise MurateError(f"non-finite loss at step {state.step}")
            loss_sum += loss * len(chunk)
            _adam_update(state, grad)
        gap = None
        if parallel_pairs:
            gap = float(np.mean([
                abs(_score_ref(state.params, p.ref_a) - _score_ref(state.params, p.ref_b))
                for p in parallel_pairs
            ]))
        log_lines.append(json.dumps(
            {"epoch": epoch, "mean_loss": loss_sum / n, "parallel_gap_mean": gap},
            sort_keys=True,
        ))
    if log_path is not None:
        Path(log_path).write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    return state


def evaluate_accuracy(
    state: ScorerState,
    judgments: Sequence[PairJudgment],
    corpus: Corpus,
    margins: Iterable[float],
) -> dict[float, float | None]:
    """Pairwise sign-agreement accuracy per confidence-margin threshold.

    Parallel pairs and pairs below the margin are excluded; exact score ties
    count as incorrect. A margin whose restricted set is empty maps to None.
    """
    if not judgments:
        raise ValidationError("cannot evaluate on an empty judgment set")
    cache: dict[str, float] = {}

    def doc_score(doc_id: str) -> float:
        s = cache.get(doc_id)
        if s is None:
            if state.backend == "latent_table":
                idx = state.doc_index.get(doc_id)
                if idx is None:
                    raise ValidationError(
                        f"document {doc_id!r} was not registered at training time"
                    )
                s = float(state.params[idx])
            else:
                s = score(state, corpus.get(doc_id))
            cache[doc_id] = s
        return s

    results: dict[float, float | None] = {}
    for margin in margins:
        kept = [
            j for j in judgments
            if j.kind != "parallel" and j.confidence_margin >= margin
        ]
        if not kept:
            results[margin] = None
            continue
        correct = 0
        for j in kept:
            sdiff = doc_score(j.doc_b) - doc_score(j.doc_a)
            want = j.p_b_over_a - 0.5
            if (sdiff > 0 and want > 0) or (sdiff < 0 and want < 0):
                correct += 1
        results[margin] = correct / len(kept)
    return results


# -- checkpointing ----------------------------------------------------------

_MAGIC = b"MURA"
_VERSION = 1
_BACKEND_TAGS = {"latent_table": 0, "hashed_linear": 1}
_TAG_BACKENDS = {v: k for k, v in _BACKEND_TAGS.items()}


def save_checkpoint(state: ScorerState, path: str | Path) -> None:
    header = json.dumps(
        {
            "config": state.config.to_dict(),
            "step": state.step,
            "param_len": len(state.params),
            "doc_ids": list(state.doc_ids) if state.doc_ids is not None else None,
        },
        sort_keys=True,
        ensure_ascii=False,
    ).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HB", _VERSION, _BACKEND_TAGS[state.backend]))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for arr in (state.params, state.m, state.v):
            fh.write(np.asarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path, expected_hash_bits: int | None = None) -> ScorerState:
    path = Path(path)
    data = path.read_bytes()

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise CheckpointError(f"{path}: truncated while reading {what}")
        chunk = data[offset:offset + n]
        offset += n
        return chunk

    offset = 0
    if take(4, "magic") != _MAGIC:
        raise CheckpointError(f"{path}: not a scorer checkpoint (bad magic)")
    version, tag = struct.unpack("<HB", take(3, "version/backend"))
    if version != _VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if tag not in _TAG_BACKENDS:
        raise CheckpointError(f"{path}: unknown backend tag {tag}")
    (header_len,) = struct.unpack("<I", take(4, "header length"))
    try:
        header = json.loads(take(header_len, "header"))
        config = TrainingConfig.from_dict(header["config"])
        step = int(header["step"])
        param_len = int(header["param_len"])
        doc_ids = header["doc_ids"]
    except (KeyError, ValueError, ValidationError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from exc
    backend = _TAG_BACKENDS[tag]
    if backend != config.backend:
        raise CheckpointError(f"{path}: backend tag {backend!r} contradicts config")
    if expected_hash_bits is not None and config.hash_bits != expected_hash_bits:
        raise CheckpointError(
            f"{path}: checkpoint hash_bits {config.hash_bits} does not match "
            f"required hash_bits {expected_hash_bits}"
        )
    arrays = []
    for what in ("params", "m", "v"):
        arrays.append(np.frombuffer(take(8 * param_len, what), dtype="<f8").astype(np.float64))
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing byte(s)")
    try:
        return ScorerState(
            backend=backend,
            params=arrays[0], m=arrays[1], v=arrays[2],
            step=step, config=config,
            doc_ids=tuple(doc_ids) if doc_ids is not None else None,
        )
    except ValidationError as exc:
        raise CheckpointError(f"{path}: inconsistent state ({exc})") from exc
