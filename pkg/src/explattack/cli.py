"""Command-line surface: attack campaigns, victim training, explanation
scoring, and report rendering.

Settings resolve in three layers: command-line flags beat config-file
entries, which beat built-in defaults (the seed alone has a fourth source,
the EXPLATTACK_SEED environment variable, between file and default).  The
config file is flat `key = value` lines with # comments; keys are the flag
names with underscores.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, TypeVar

from . import evaluate, report
from .attack import AttackConfig, AttackResources, Recipe, TargetField
from .corpus import (
    ColumnMap,
    EmbeddingTable,
    PosLexicon,
    load_embeddings,
    load_esnli,
    load_pos_lexicon,
    load_word_list,
    tokenize,
)
from .errors import ConfigError, ExplattackError, ReportError
from .victim import (
    ConstantExplainer,
    ExplainThenPredict,
    KeywordExpl2Label,
    LinearVictim,
    RemoteEncoder,
    RemoteExplainer,
    RemoteExplanationClassifier,
    RemoteMlmProvider,
    RemotePairClassifier,
    RulePairClassifier,
    TemplateExplainer,
    ce_loss_and_grad,
    featurize,
    linear_classify,
    load_linear_model,
    save_linear_model,
    train_linear,
)

SEED_ENV_VAR = "EXPLATTACK_SEED"

T = TypeVar("T")


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected key = value")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _convert(cfg: dict[str, str], key: str, convert: Callable[[str], T]) -> T:
    try:
        return convert(cfg[key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config key {key}: {exc}") from exc


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


class Resolver:
    """Flag > config file > (env for the seed) > default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.cfg = parse_config_file(args.config) if args.config else {}

    def get(self, key: str, default: T, convert: Callable[[str], T]) -> T:
        flag = getattr(self.args, key, None)
        if flag is not None:
            return flag
        if key in self.cfg:
            return _convert(self.cfg, key, convert)
        return default

    def seed(self) -> int:
        flag = getattr(self.args, "seed", None)
        if flag is not None:
            return flag
        if "seed" in self.cfg:
            return _convert(self.cfg, "seed", int)
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None:
            try:
                return int(env)
            except ValueError as exc:
                raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
        return 0

    def path(self, key: str, *, required: bool = True) -> Path | None:
        value = self.get(key, None, str)
        if value is None:
            if required:
                raise ConfigError(f"missing --{key.replace('_', '-')} (or {key}= in config)")
            return None
        p = Path(value)
        if not p.exists():
            raise ConfigError(f"--{key.replace('_', '-')}: no such file: {p}")
        return p

    def columns(self) -> ColumnMap:
        base = ColumnMap()
        expl = self.get("explanation_columns", None, str)
        return ColumnMap(
            premise=self.get("premise_column", base.premise, str),
            hypothesis=self.get("hypothesis_column", base.hypothesis, str),
            label=self.get("label_column", base.label, str),
            explanations=(
                tuple(c.strip() for c in expl.split(",") if c.strip())
                if expl is not None
                else base.explanations
            ),
            id=self.get("id_column", base.id, str),
        )


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Fully resolved settings for one attack campaign."""

    attack: AttackConfig
    dataset: Path
    embeddings: Path
    stopwords: Path
    pos_lexicon: Path | None
    victim_spec: str
    encoder_spec: str
    mlm_provider_spec: str
    out_dir: Path
    workers: int
    columns: ColumnMap
    timestamp: str | None

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


# ---------------------------------------------------------------------------
# Victim spec grammar


def build_explainer(spec: str, table: EmbeddingTable, stopwords: frozenset[str]):
    if spec == "template":
        return TemplateExplainer(table, stopwords)
    if spec.startswith("constant:"):
        return ConstantExplainer(spec[len("constant:") :])
    if spec.startswith("remote:"):
        return RemoteExplainer(spec[len("remote:") :])
    raise ConfigError(
        f"unknown explainer spec {spec!r}; expected template | constant:<text> | remote:<URL>"
    )


def build_expl2label(spec: str):
    if spec == "keyword":
        return KeywordExpl2Label()
    if spec.startswith("remote:"):
        return RemoteExplanationClassifier(spec[len("remote:") :])
    raise ConfigError(
        f"unknown expl2label spec {spec!r}; expected keyword | remote:<URL>"
    )


def build_victim(spec: str, table: EmbeddingTable, stopwords: frozenset[str]):
    """rule | linear:<model path> | pipeline:<explainer>,<expl2label> | remote:<URL>"""
    if spec == "rule":
        return RulePairClassifier(table, stopwords)
    if spec.startswith("linear:"):
        path = Path(spec[len("linear:") :])
        if not path.exists():
            raise ConfigError(f"linear victim model file not found: {path}")
        return LinearVictim(load_linear_model(path), table)
    if spec.startswith("pipeline:"):
        rest = spec[len("pipeline:") :]
        if "," not in rest:
            raise ConfigError(
                "pipeline spec needs two comma-separated parts: "
                "pipeline:<explainer>,<expl2label>"
            )
        explainer_spec, expl2label_spec = rest.rsplit(",", 1)
        return ExplainThenPredict(
            build_explainer(explainer_spec, table, stopwords),
            build_expl2label(expl2label_spec),
        )
    if spec.startswith("remote:"):
        return RemotePairClassifier(spec[len("remote:") :])
    raise ConfigError(
        f"unknown victim spec {spec!r}; expected rule | linear:<path> | "
        "pipeline:<explainer>,<expl2label> | remote:<URL>"
    )


def build_encoder(spec: str, table: EmbeddingTable):
    from .attack import MeanEmbeddingEncoder

    if spec == "mean":
        return MeanEmbeddingEncoder(table)
    if spec.startswith("remote:"):
        return RemoteEncoder(spec[len("remote:") :])
    raise ConfigError(f"unknown encoder spec {spec!r}; expected mean | remote:<URL>")


def build_mlm_provider(spec: str):
    if spec == "neighbors":
        return None
    if spec.startswith("remote:"):
        return RemoteMlmProvider(spec[len("remote:") :])
    raise ConfigError(
        f"unknown mlm provider spec {spec!r}; expected neighbors | remote:<URL>"
    )


# ---------------------------------------------------------------------------
# Argument parsing


def _add_config_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file (default: none)")


def _add_column_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--premise-column", dest="premise_column",
                   help="dataset premise column (default: premise)")
    p.add_argument("--hypothesis-column", dest="hypothesis_column",
                   help="dataset hypothesis column (default: hypothesis)")
    p.add_argument("--label-column", dest="label_column",
                   help="dataset label column (default: label)")
    p.add_argument("--id-column", dest="id_column",
                   help="dataset id column (default: id)")
    p.add_argument("--explanation-columns", dest="explanation_columns",
                   help="comma-separated explanation columns "
                        "(default: explanation_1,explanation_2,explanation_3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="explattack",
        description="Word-substitution robustness harness for NLI victims "
                    "and explain-then-predict pipelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="run an attack campaign")
    _add_config_flag(p)
    p.add_argument("--dataset", help="NLI CSV file (default: none, required)")
    p.add_argument("--embeddings", help="word embedding text file (default: none, required)")
    p.add_argument("--stopwords", help="stopword list, one per line (default: none, required)")
    p.add_argument("--pos-lexicon", dest="pos_lexicon",
                   help="word TAB tag[,tag...] lexicon (default: none)")
    p.add_argument("--victim",
                   help="rule | linear:<path> | pipeline:<explainer>,<expl2label> | "
                        "remote:<URL> (default: rule)")
    p.add_argument("--recipe", choices=["textfooler", "bertattack"],
                   help="candidate recipe (default: textfooler)")
    p.add_argument("--target", choices=["premise", "hypothesis"],
                   help="field to perturb (default: hypothesis)")
    p.add_argument("--delta", type=float,
                   help="sentence similarity threshold in [0, 1] (default: 0.7)")
    p.add_argument("--max-candidates", dest="max_candidates", type=int,
                   help="embedding-recipe candidates per word (default: 50)")
    p.add_argument("--mlm-top-k", dest="mlm_top_k", type=int,
                   help="masked-LM recipe candidates per word (default: 6)")
    p.add_argument("--word-sim-floor", dest="word_sim_floor", type=float,
                   help="minimum word-level cosine for neighbor candidates (default: 0.7)")
    p.add_argument("--max-perturb-fraction", dest="max_perturb_fraction", type=float,
                   help="maximum fraction of tokens substituted, in (0, 1] (default: 1.0)")
    p.add_argument("--encoder", help="sentence encoder: mean | remote:<URL> (default: mean)")
    p.add_argument("--mlm-provider", dest="mlm_provider",
                   help="masked-LM candidates: neighbors | remote:<URL> (default: neighbors)")
    p.add_argument("--seed", type=int,
                   help=f"campaign seed; env {SEED_ENV_VAR} applies when neither flag "
                        "nor config sets it (default: 0)")
    p.add_argument("--workers", type=int, help="parallel attack workers (default: 1)")
    p.add_argument("--out", help="output directory (default: none, required)")
    p.add_argument("--timestamp",
                   help="ISO-8601 timestamp stored in the summary; SOURCE_DATE_EPOCH "
                        "is honored when unset (default: current UTC time)")
    _add_column_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("train", help="train the linear victim")
    _add_config_flag(p)
    p.add_argument("--dataset", help="NLI CSV file (default: none, required)")
    p.add_argument("--embeddings", help="word embedding text file (default: none, required)")
    p.add_argument("--out", help="model file to write (default: none, required)")
    p.add_argument("--epochs", type=int, help="training epochs (default: 50)")
    p.add_argument("--learning-rate", dest="learning_rate", type=float,
                   help="gradient step size (default: 0.5)")
    p.add_argument("--batch-size", dest="batch_size", type=int,
                   help="minibatch size (default: 32)")
    p.add_argument("--seed", type=int,
                   help=f"shuffling seed; env {SEED_ENV_VAR} applies when neither flag "
                        "nor config sets it (default: 0)")
    _add_column_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score-explanations",
                       help="score generated explanations against references")
    _add_config_flag(p)
    p.add_argument("--dataset", help="NLI CSV file with references (default: none, required)")
    p.add_argument("--generated",
                   help="CSV of generated explanations with columns id,explanation "
                        "(default: none, required)")
    p.add_argument("--embeddings",
                   help="word embedding text file for token matching (default: none, required)")
    p.add_argument("--out", help="output directory (default: none, required)")
    _add_column_flags(p)
    p.set_defaults(func=cmd_score_explanations)

    p = sub.add_parser("report", help="render comparison tables from summaries")
    _add_config_flag(p)
    p.add_argument("--summary", action="append",
                   help="label=path of a summary JSON; repeatable (default: none, required)")
    p.add_argument("--baseline",
                   help="label the decrease table compares against (default: none)")
    p.add_argument("--out", help="output directory (default: none, required)")
    p.add_argument("--no-figures", dest="no_figures", action="store_true", default=None,
                   help="skip PNG figures, tables only (default: figures on)")
    p.set_defaults(func=cmd_report)

    return parser


# ---------------------------------------------------------------------------
# Commands


def cmd_attack(args: argparse.Namespace) -> int:
    r = Resolver(args)
    config = AttackConfig(
        recipe=Recipe(r.get("recipe", "textfooler", str)),
        target_field=TargetField(r.get("target", "hypothesis", str)),
        max_candidates=r.get("max_candidates", 50, int),
        sentence_sim_threshold=r.get("delta", 0.7, float),
        mlm_top_k=r.get("mlm_top_k", 6, int),
        word_sim_floor=r.get("word_sim_floor", 0.7, float),
        max_perturb_fraction=r.get("max_perturb_fraction", 1.0, float),
        seed=r.seed(),
    )
    out_value = r.get("out", None, str)
    if out_value is None:
        raise ConfigError("missing --out (or out= in config)")
    run = RunConfig(
        attack=config,
        dataset=r.path("dataset"),
        embeddings=r.path("embeddings"),
        stopwords=r.path("stopwords"),
        pos_lexicon=r.path("pos_lexicon", required=False),
        victim_spec=r.get("victim", "rule", str),
        encoder_spec=r.get("encoder", "mean", str),
        mlm_provider_spec=r.get("mlm_provider", "neighbors", str),
        out_dir=Path(out_value),
        workers=r.get("workers", 1, int),
        columns=r.columns(),
        timestamp=r.get("timestamp", None, str),
    )

    examples = load_esnli(run.dataset, run.columns)
    table = load_embeddings(run.embeddings)
    stopwords = load_word_list(run.stopwords)
    pos_lexicon = (
        load_pos_lexicon(run.pos_lexicon) if run.pos_lexicon else PosLexicon()
    )
    victim = build_victim(run.victim_spec, table, stopwords)
    resources = AttackResources(
        embeddings=table,
        stopwords=stopwords,
        pos_lexicon=pos_lexicon,
        encoder=build_encoder(run.encoder_spec, table),
        mlm_provider=build_mlm_provider(run.mlm_provider_spec),
    )

    summary = evaluate.run_campaign(
        examples,
        victim,
        run.attack,
        resources,
        run.out_dir,
        workers=run.workers,
        victim_label=run.victim_spec,
        timestamp=run.timestamp,
    )
    print(
        f"total={summary.total} attempted={summary.attempted} "
        f"skipped={summary.skipped} errored={summary.errored} "
        f"successes={summary.successes}"
    )
    print(
        f"original_accuracy={summary.original_accuracy * 100:.2f}% "
        f"after_attack_accuracy={summary.after_attack_accuracy * 100:.2f}% "
        f"attack_success_rate={summary.attack_success_rate * 100:.2f}%"
    )
    print(
        f"avg_queries_all={summary.avg_queries_all:.2f} "
        f"avg_queries_attempted={summary.avg_queries_attempted:.2f}"
    )
    print(f"records: {run.out_dir / evaluate.RECORDS_FILENAME}")
    print(f"summary: {run.out_dir / evaluate.SUMMARY_FILENAME}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    r = Resolver(args)
    dataset = r.path("dataset")
    embeddings = r.path("embeddings")
    out_value = r.get("out", None, str)
    if out_value is None:
        raise ConfigError("missing --out (or out= in config)")
    epochs = r.get("epochs", 50, int)
    learning_rate = r.get("learning_rate", 0.5, float)
    batch_size = r.get("batch_size", 32, int)
    seed = r.seed()

    examples = load_esnli(dataset, r.columns())
    table = load_embeddings(embeddings)
    result = train_linear(
        examples, table, epochs=epochs, learning_rate=learning_rate,
        seed=seed, batch_size=batch_size,
    )

    import numpy as np

    from .corpus import LABEL_ORDER

    feats, golds = [], []
    for example in examples:
        try:
            feats.append(featurize(
                tokenize(example.premise), tokenize(example.hypothesis), table
            ))
            golds.append(LABEL_ORDER.index(example.gold_label))
        except ExplattackError:
            continue
    if feats:
        x = np.stack(feats)
        y = np.array(golds)
        loss, _, _ = ce_loss_and_grad(result.model.weights, result.model.bias, x, y)
        correct = sum(
            1 for row, g in zip(x, y)
            if linear_classify(result.model, row).label is LABEL_ORDER[g]
        )
        accuracy = correct / len(golds)
    else:
        loss, accuracy = float("nan"), 0.0

    out_path = Path(out_value)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_linear_model(result.model, out_path)
    print(f"final_loss={loss:.6f} train_accuracy={accuracy:.4f}")
    print(f"model: {out_path}")
    return 0


def _load_generated(path: Path) -> dict[str, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return {}
        try:
            id_idx = header.index("id")
            expl_idx = header.index("explanation")
        except ValueError as exc:
            raise ConfigError(
                f"{path}: generated explanations need columns id,explanation"
            ) from exc
        out: dict[str, str] = {}
        for row in reader:
            if not row:
                continue
            out[row[id_idx]] = row[expl_idx]
        return out


def cmd_score_explanations(args: argparse.Namespace) -> int:
    r = Resolver(args)
    dataset = r.path("dataset")
    generated_path = r.path("generated")
    embeddings = r.path("embeddings")
    out_value = r.get("out", None, str)
    if out_value is None:
        raise ConfigError("missing --out (or out= in config)")

    examples = load_esnli(dataset, r.columns())
    table = load_embeddings(embeddings)
    generated = _load_generated(generated_path)
    scores = evaluate.score_explanations(
        generated, examples, evaluate.table_token_embedder(table)
    )

    out_dir = Path(out_value)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_text = evaluate.scores_to_csv(scores, [e.id for e in examples])
    (out_dir / "scores.csv").write_text(csv_text, encoding="utf-8")
    import json

    summary = evaluate.scores_to_summary_dict(scores)
    (out_dir / "scores.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    for name in evaluate.METRIC_NAMES:
        print(f"{name} {scores[name].corpus:.4f}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    r = Resolver(args)
    entries: list[str]
    if args.summary is not None:
        entries = list(args.summary)
    elif "summaries" in r.cfg:
        entries = [e.strip() for e in r.cfg["summaries"].split(",") if e.strip()]
    else:
        raise ConfigError("missing --summary label=path (or summaries= in config)")
    baseline = r.get("baseline", None, str)
    out_value = r.get("out", None, str)
    if out_value is None:
        raise ConfigError("missing --out (or out= in config)")
    if args.no_figures is not None:
        figures = not args.no_figures
    else:
        figures = r.get("figures", True, _bool)

    labels: list[str] = []
    summaries: list[evaluate.RunSummary] = []
    for entry in entries:
        if "=" not in entry:
            raise ConfigError(f"summary entry must be label=path, got {entry!r}")
        label, _, path_text = entry.partition("=")
        path = Path(path_text)
        if not path.exists():
            raise ConfigError(f"summary file not found: {path}")
        labels.append(label)
        summaries.append(evaluate.load_summary(path))

    markdown, csv_text = report.render_report(summaries, labels, baseline=baseline)
    out_dir = Path(out_value)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.md").write_text(markdown, encoding="utf-8")
    (out_dir / "report.csv").write_text(csv_text, encoding="utf-8")
    if figures:
        report.render_figures(summaries, labels, out_dir, baseline=baseline)
    print(markdown, end="")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExplattackError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
