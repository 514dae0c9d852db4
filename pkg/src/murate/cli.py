"""Command-line pipeline: aggregate -> build-pairs -> train -> score -> select -> diagnose.

Every stage reads and writes files, so each step is independently
inspectable and reproducible. Settings come from flags, falling back to a
flat `key = value` config file, then the MURATE_SEED environment variable
(seed only), then defaults; every effective value is echoed to the run log.
Outputs are staged and renamed at the end of a command, so a failed run
leaves no partial outputs behind.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Iterator

from . import corpus as corpus_mod
from . import diagnostics, pairgen, raters, scorer, select
from .errors import MurateError, ValidationError

logger = logging.getLogger("murate")

_ENV_SEED = "MURATE_SEED"


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


def _parse_langs(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


# Every key a config file may define, with its converter.
CONFIG_KEYS: dict[str, Callable[[str], object]] = {
    "pairs": str, "scores": str, "judgments": str, "corpus": str, "out": str,
    "out_pairs": str, "out_corpus": str, "checkpoint": str, "scored": str,
    "log": str, "held_in": str, "held_out": str, "csv": str,
    "provider": str, "languages": _parse_langs, "ratio": str, "scale": float,
    "n_english": int, "n_monolingual": int, "n_crosslingual": int, "n_parallel": int,
    "fraction": float, "by_language": _parse_bool, "workers": int, "seed": int,
    "backend": str, "parallel_weight": float, "learning_rate": float,
    "epochs": int, "batch_size": int, "margin": float, "hash_bits": int,
    "max_tokens_per_doc": int, "beta1": float, "beta2": float, "epsilon": float,
}


def load_config_file(path: str | Path) -> dict[str, object]:
    """Parse a flat `key = value` config file; unknown keys are rejected."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(f"{path}: line {lineno}: expected `key = value`")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ValidationError(f"{path}: line {lineno}: unknown config key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](value.strip())
        except (ValueError, ValidationError) as exc:
            raise ValidationError(f"{path}: line {lineno}: bad value for {key!r}: {exc}") from exc
    return values


class Settings:
    """Flag > config file > environment (seed) > default, with a run-log echo."""

    def __init__(self, args: argparse.Namespace):
        self._flags = vars(args)
        self._config = load_config_file(args.config) if getattr(args, "config", None) else {}
        self.parser: argparse.ArgumentParser = args.parser

    def get(self, key: str, default: object = None) -> object:
        flag = self._flags.get(key)
        if flag is not None:
            return flag
        if key in self._config:
            return self._config[key]
        if key == "seed" and os.environ.get(_ENV_SEED):
            try:
                return int(os.environ[_ENV_SEED])
            except ValueError:
                raise ValidationError(f"{_ENV_SEED} must be an integer") from None
        return default

    def require(self, key: str) -> object:
        value = self.get(key)
        if value is None:
            self.parser.error(f"missing required setting '{key}' (flag or config file)")
        return value

    def echo(self, effective: dict[str, object]) -> None:
        for key in sorted(effective):
            logger.info("config %s = %s", key, effective[key])


@contextlib.contextmanager
def atomic_outputs() -> Iterator[Callable[[Path], Path]]:
    """Stage output files; rename them into place only if the command succeeds."""
    staged: list[tuple[Path, Path]] = []

    def stage(final: str | Path) -> Path:
        final = Path(final)
        tmp = final.with_name(final.name + ".part")
        staged.append((tmp, final))
        return tmp

    try:
        yield stage
    except BaseException:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def _load_corpora(paths: list[str]) -> corpus_mod.Corpus:
    merged = corpus_mod.load_corpus(paths[0])
    for extra in paths[1:]:
        merged = merged.merged_with(corpus_mod.load_corpus(extra))
    return merged


def _read_pair_list(path: str | Path) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValidationError(f"{path}: line {lineno}: expected two document ids")
        if fields[0] == fields[1]:
            raise ValidationError(f"{path}: line {lineno}: pair members must differ")
        pairs.append((fields[0], fields[1]))
    return pairs


def _file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _training_config(settings: Settings) -> tuple[scorer.TrainingConfig, dict[str, object]]:
    fields = {
        "backend": settings.get("backend", "hashed_linear"),
        "parallel_weight": settings.get("parallel_weight", 0.5),
        "learning_rate": settings.get("learning_rate"),
        "epochs": settings.get("epochs", 30),
        "batch_size": settings.get("batch_size", 64),
        "margin": settings.get("margin", 0.5),
        "seed": settings.get("seed", 0),
        "hash_bits": settings.get("hash_bits", 18),
        "max_tokens_per_doc": settings.get("max_tokens_per_doc", 512),
        "beta1": settings.get("beta1", 0.9),
        "beta2": settings.get("beta2", 0.999),
        "epsilon": settings.get("epsilon", 1e-8),
    }
    return scorer.TrainingConfig(**fields), fields


# -- commands ----------------------------------------------------------------

def cmd_aggregate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    pair_path = settings.require("pairs")
    score_paths = settings.require("scores")
    out = settings.require("out")
    settings.echo({"pairs": pair_path, "scores": score_paths, "out": out})

    merged: dict[str, dict[str, float]] = {}
    for path in score_paths:
        for rater, docs in raters.load_rater_scores(path).items():
            bucket = merged.setdefault(rater, {})
            for doc_id, value in docs.items():
                if doc_id in bucket:
                    raise ValidationError(
                        f"duplicate score for rater {rater!r}, doc {doc_id!r} across files"
                    )
                bucket[doc_id] = value
    if not merged:
        raise MurateError("no rater scores found")

    judgments = []
    rater_ids = sorted(merged)
    for a, b in _read_pair_list(pair_path):
        for rater in rater_ids:
            for doc_id in (a, b):
                if doc_id not in merged[rater]:
                    raise MurateError(
                        f"pair ({a!r}, {b!r}): rater {rater!r} has no score for {doc_id!r}"
                    )
        judgments.append(raters.aggregate_pair(
            a, b,
            {r: merged[r][a] for r in rater_ids},
            {r: merged[r][b] for r in rater_ids},
        ))
    with atomic_outputs() as stage:
        raters.save_judgments(judgments, stage(out))
    logger.info("wrote %d judgments to %s", len(judgments), out)
    return 0


def cmd_build_pairs(args: argparse.Namespace) -> int:
    settings = Settings(args)
    judgment_path = settings.require("judgments")
    corpus_path = settings.require("corpus")
    out_pairs = settings.require("out_pairs")
    out_corpus = settings.require("out_corpus")
    languages = settings.require("languages")
    seed = int(settings.get("seed", 0))

    counts = {k: settings.get(k) for k in
              ("n_english", "n_monolingual", "n_crosslingual", "n_parallel")}
    ratio = settings.get("ratio")
    explicit = any(v is not None for v in counts.values())
    if ratio is not None and explicit:
        settings.parser.error("give either --ratio/--scale or explicit --n-* counts, not both")
    if ratio is not None:
        if ratio != "default":
            settings.parser.error(f"unknown ratio {ratio!r}; only 'default' is supported")
        scale = settings.get("scale")
        if scale is None:
            settings.parser.error("--ratio requires --scale")
        mix = pairgen.PairMixSpec.from_scale(float(scale), tuple(languages), seed=seed)
    elif explicit:
        mix = pairgen.PairMixSpec(
            n_english=int(counts["n_english"] or 0),
            n_monolingual=int(counts["n_monolingual"] or 0),
            n_crosslingual=int(counts["n_crosslingual"] or 0),
            n_parallel=int(counts["n_parallel"] or 0),
            languages=tuple(languages), seed=seed,
        )
    else:
        settings.parser.error("no pair counts: give --ratio default --scale S or --n-* counts")
    if mix.total == 0:
        raise MurateError("empty mix: requested zero pairs of every kind")

    provider_spec = str(settings.get("provider") or f"pseudo:{seed}")
    provider = pairgen.make_provider(provider_spec)
    settings.echo({
        "judgments": judgment_path, "corpus": corpus_path, "out_pairs": out_pairs,
        "out_corpus": out_corpus, "languages": ",".join(mix.languages), "seed": seed,
        "provider": provider_spec, "n_english": mix.n_english,
        "n_monolingual": mix.n_monolingual, "n_crosslingual": mix.n_crosslingual,
        "n_parallel": mix.n_parallel,
    })

    judgments = raters.load_judgments(judgment_path)
    docs = _load_corpora(corpus_path if isinstance(corpus_path, list) else [corpus_path])
    result = pairgen.build_mix(judgments, docs, mix, provider)
    with atomic_outputs() as stage:
        raters.save_judgments(list(result.pairs), stage(out_pairs))
        corpus_mod.save_corpus(corpus_mod.Corpus(list(result.documents)), stage(out_corpus))
    logger.info("wrote %d pairs and %d translated documents", len(result.pairs),
                len(result.documents))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    settings = Settings(args)
    pair_path = settings.require("pairs")
    corpus_paths = settings.require("corpus")
    out = settings.require("out")
    log_path = settings.get("log")
    config, fields = _training_config(settings)
    settings.echo({"pairs": pair_path, "corpus": corpus_paths, "out": out,
                   "log": log_path, **fields})

    judgments = raters.load_judgments(pair_path)
    kept = raters.margin_filter(judgments, config.margin)
    if not kept:
        raise MurateError(
            f"margin filter at {config.margin} left no training pairs "
            f"(started with {len(judgments)})"
        )
    logger.info("margin filter kept %d of %d pairs", len(kept), len(judgments))
    docs = _load_corpora(corpus_paths)
    with atomic_outputs() as stage:
        staged_log = stage(log_path) if log_path else None
        state = scorer.train(kept, docs, config, log_path=staged_log)
        scorer.save_checkpoint(state, stage(out))
    logger.info("trained %s scorer for %d steps -> %s", config.backend, state.step, out)
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    settings = Settings(args)
    ckpt = settings.require("checkpoint")
    corpus_paths = settings.require("corpus")
    out = settings.require("out")
    workers = int(settings.get("workers", 1))
    settings.echo({"checkpoint": ckpt, "corpus": corpus_paths, "out": out, "workers": workers})

    state = scorer.load_checkpoint(ckpt)
    docs = _load_corpora(corpus_paths)
    scored = select.score_corpus(state, docs, workers=workers)
    with atomic_outputs() as stage:
        select.save_scored(scored, stage(out))
    logger.info("scored %d documents -> %s", len(scored), out)
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    settings = Settings(args)
    scored_path = settings.require("scored")
    out = settings.require("out")
    fraction = float(settings.get("fraction", 0.10))
    if not 0.0 < fraction <= 1.0:
        settings.parser.error(f"--fraction must lie in (0, 1], got {fraction}")
    by_language = bool(settings.get("by_language", True))
    ckpt = settings.get("checkpoint")
    settings.echo({"scored": scored_path, "out": out, "fraction": fraction,
                   "by_language": by_language, "checkpoint": ckpt})

    scored = select.load_scored(scored_path)
    manifest = select.select_top_fraction(
        scored, fraction, by_language=by_language,
        checkpoint_hash=_file_sha256(ckpt) if ckpt else "",
    )
    with atomic_outputs() as stage:
        stage(out).write_text(manifest.to_json(), encoding="utf-8")
    total_selected = sum(len(e.selected) for e in manifest.entries)
    logger.info("selected %d documents across %d pool(s) -> %s",
                total_selected, len(manifest.entries), out)
    return 0


def _write_report(report: dict, out: str, csv_path: str | None) -> None:
    with atomic_outputs() as stage:
        stage(out).write_text(diagnostics.report_to_json(report), encoding="utf-8")
        if csv_path:
            stage(csv_path).write_text(diagnostics.report_to_csv(report), encoding="utf-8")


def _scores_by_source(scored: list[select.ScoredDocument], lang: str) -> dict[str, float]:
    suffix = ":" + lang
    return {
        sd.doc_id[:-len(suffix)]: sd.score
        for sd in scored
        if sd.lang == lang and sd.doc_id.endswith(suffix)
    }


def cmd_diagnose_parallel(args: argparse.Namespace) -> int:
    settings = Settings(args)
    scored_path = settings.require("scored")
    lang_x, lang_y = settings.require("lang_x"), settings.require("lang_y")
    out = settings.require("out")
    csv_path = settings.get("csv")
    settings.echo({"scored": scored_path, "lang_x": lang_x, "lang_y": lang_y,
                   "out": out, "csv": csv_path})

    scored = select.load_scored(scored_path)
    xs = _scores_by_source(scored, str(lang_x))
    ys = _scores_by_source(scored, str(lang_y))
    shared = sorted(set(xs) & set(ys))
    if len(shared) < 2:
        raise MurateError(
            f"need at least two documents scored in both {lang_x} and {lang_y}, "
            f"found {len(shared)}"
        )
    evaluation = diagnostics.parallel_eval(
        str(lang_x), str(lang_y), [(xs[s], ys[s]) for s in shared]
    )
    _write_report(evaluation.to_report(), str(out), csv_path)
    logger.info("parallel report over %d documents: slope=%.4f mse=%.6f",
                len(shared), evaluation.slope, evaluation.mse)
    return 0


def cmd_diagnose_tau(args: argparse.Namespace) -> int:
    settings = Settings(args)
    scored_paths = settings.require("scored")
    out = settings.require("out")
    csv_path = settings.get("csv")
    labels = settings.get("labels")
    if labels is not None:
        labels = [part.strip() for part in str(labels).split(",")]
        if len(labels) != len(scored_paths):
            settings.parser.error("--labels must name each --scored file once")
    else:
        labels = [Path(p).stem for p in scored_paths]
    if len(set(labels)) != len(labels):
        settings.parser.error(f"labels are not unique: {labels}")
    settings.echo({"scored": scored_paths, "labels": ",".join(labels),
                   "out": out, "csv": csv_path})

    by_label: dict[str, dict[str, float]] = {}
    for label, path in zip(labels, scored_paths):
        by_label[label] = {sd.doc_id: sd.score for sd in select.load_scored(path)}
    id_sets = {label: set(scores) for label, scores in by_label.items()}
    base = id_sets[labels[0]]
    for label, ids in id_sets.items():
        if ids != base:
            raise MurateError(
                f"scored files are not aligned: {labels[0]!r} and {label!r} "
                "cover different documents"
            )
    order = sorted(base)
    matrix = diagnostics.tau_matrix(
        {label: [by_label[label][i] for i in order] for label in labels}
    )
    _write_report(matrix.to_report(), str(out), csv_path)
    return 0


def cmd_diagnose_accuracy(args: argparse.Namespace) -> int:
    settings = Settings(args)
    ckpt = settings.require("checkpoint")
    held_in = settings.require("held_in")
    held_out = settings.require("held_out")
    corpus_paths = settings.require("corpus")
    out = settings.require("out")
    csv_path = settings.get("csv")
    settings.echo({"checkpoint": ckpt, "held_in": held_in, "held_out": held_out,
                   "corpus": corpus_paths, "out": out, "csv": csv_path})

    state = scorer.load_checkpoint(ckpt)
    docs = _load_corpora(corpus_paths)
    report = diagnostics.margin_accuracy_report(
        state,
        raters.load_judgments(held_in),
        raters.load_judgments(held_out),
        docs,
    )
    _write_report(report, str(out), csv_path)
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="murate",
        description="Pairwise quality rating, multilingual pair construction, "
                    "scorer training, and token-budget corpus selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func: Callable, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat `key = value` config file")
        p.set_defaults(func=func, parser=p)
        return p

    p = add("aggregate", cmd_aggregate, "combine rater score files into pair judgments")
    p.add_argument("--pairs", help="pair list file: two document ids per line")
    p.add_argument("--scores", action="append", help="rater score JSONL (repeatable)")
    p.add_argument("--out", help="output judgment JSONL")

    p = add("build-pairs", cmd_build_pairs, "project judgments into a multilingual pair mix")
    p.add_argument("--judgments", help="English judgment JSONL")
    p.add_argument("--corpus", action="append", help="source corpus JSONL (repeatable)")
    p.add_argument("--languages", type=_parse_langs, help="comma-separated target languages")
    p.add_argument("--ratio", help="named count ratio; only 'default' (1:2:2:1)")
    p.add_argument("--scale", type=float, help="scale factor applied to the ratio counts")
    p.add_argument("--n-english", dest="n_english", type=int)
    p.add_argument("--n-monolingual", dest="n_monolingual", type=int)
    p.add_argument("--n-crosslingual", dest="n_crosslingual", type=int)
    p.add_argument("--n-parallel", dest="n_parallel", type=int)
    p.add_argument("--provider", help="translation provider: pseudo:<seed> or file:<path>")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-pairs", dest="out_pairs", help="output pair JSONL")
    p.add_argument("--out-corpus", dest="out_corpus", help="output translated-corpus JSONL")

    p = add("train", cmd_train, "margin-filter pairs and fit a scorer")
    p.add_argument("--pairs", help="training pair JSONL")
    p.add_argument("--corpus", action="append", help="corpus JSONL (repeatable)")
    p.add_argument("--out", help="output checkpoint")
    p.add_argument("--log", help="per-epoch JSONL training log")
    p.add_argument("--backend", choices=scorer.BACKENDS)
    p.add_argument("--parallel-weight", dest="parallel_weight", type=float,
                   help="weight on the parallel-pair score-gap penalty")
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--margin", type=float, help="confidence-margin filter threshold")
    p.add_argument("--seed", type=int)
    p.add_argument("--hash-bits", dest="hash_bits", type=int)
    p.add_argument("--max-tokens-per-doc", dest="max_tokens_per_doc", type=int)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--epsilon", type=float)

    p = add("score", cmd_score, "score a corpus with a trained checkpoint")
    p.add_argument("--checkpoint", help="scorer checkpoint")
    p.add_argument("--corpus", action="append", help="corpus JSONL (repeatable)")
    p.add_argument("--out", help="output scored JSONL")
    p.add_argument("--workers", type=int, help="scoring shards; output is worker-independent")

    p = add("select", cmd_select, "select the top fraction of tokens per language")
    p.add_argument("--scored", help="scored JSONL")
    p.add_argument("--fraction", type=float, help="token fraction to keep (default 0.10)")
    p.add_argument("--global", dest="by_language", action="store_false", default=None,
                   help="select over one global pool instead of per language")
    p.add_argument("--checkpoint", help="checkpoint to fingerprint in the manifest")
    p.add_argument("--out", help="output manifest JSON")

    p = add("diagnose", lambda args: args.parser.error("choose a report"),
            "consistency reports")
    dsub = p.add_subparsers(dest="report", required=True)

    def add_report(name: str, func: Callable, help_text: str) -> argparse.ArgumentParser:
        rp = dsub.add_parser(name, help=help_text)
        rp.add_argument("--config", help="flat `key = value` config file")
        rp.add_argument("--out", help="output report JSON")
        rp.add_argument("--csv", help="also write a flat CSV here")
        rp.set_defaults(func=func, parser=rp)
        return rp

    rp = add_report("parallel", cmd_diagnose_parallel,
                    "slope/intercept/MSE over documents scored in two languages")
    rp.add_argument("--scored", help="scored JSONL with translated document ids")
    rp.add_argument("--lang-x", dest="lang_x")
    rp.add_argument("--lang-y", dest="lang_y")

    rp = add_report("tau", cmd_diagnose_tau,
                    "rank-correlation matrix across scored files")
    rp.add_argument("--scored", action="append", help="scored JSONL (repeat per sequence)")
    rp.add_argument("--labels", help="comma-separated labels, one per --scored file")

    rp = add_report("accuracy", cmd_diagnose_accuracy,
                    "margin-stratified accuracy on held-in/held-out judgments")
    rp.add_argument("--checkpoint")
    rp.add_argument("--held-in", dest="held_in")
    rp.add_argument("--held-out", dest="held_out")
    rp.add_argument("--corpus", action="append", help="corpus JSONL (repeatable)")

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MurateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
