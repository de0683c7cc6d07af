"""Campaign orchestration, aggregation, explanation scoring, persistence.

A campaign runs the greedy attack over a dataset (optionally across worker
threads), writes one AttackRecord per line to records.jsonl in dataset
order, and writes an aggregate summary JSON next to it.  Output bytes are a
pure function of dataset, victim, config, and the supplied timestamp, which
is parameterized (argument, or SOURCE_DATE_EPOCH) precisely so reruns can
be compared byte for byte.
"""
from __future__ import annotations

import datetime as _dt
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .attack import (
    AttackConfig,
    AttackRecord,
    AttackResources,
    AttackStatus,
    attack_explain_then_predict,
    greedy_attack,
)
from .corpus import EmbeddingTable, NliExample
from .errors import ScoringError
from .nlgmetrics import MetricScore, bertscore, bleu, meteor, rouge_l
from .victim import PairClassifier

log = logging.getLogger(__name__)

RECORDS_FILENAME = "records.jsonl"
SUMMARY_FILENAME = "summary.json"

IDENTITY_TOL = 1e-12

# Caveats that travel with every explanation-score summary: the upstream
# results do not pin these two choices down, so downstream readers get told
# which reading this harness uses.
SCORE_NOTES = (
    "rouge is ROUGE-L; the specific ROUGE variant being mirrored is assumed",
    "bleu is the mean of sentence-level scores; corpus-level BLEU is assumed equivalent",
)


@dataclass(frozen=True, slots=True)
class RunSummary:
    total: int
    attempted: int
    skipped: int
    errored: int
    successes: int
    original_accuracy: float
    after_attack_accuracy: float
    attack_success_rate: float
    avg_queries_all: float
    avg_queries_attempted: float
    config_echo: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        counts = (self.total, self.attempted, self.skipped, self.errored, self.successes)
        if any(c < 0 for c in counts):
            raise ValueError(f"negative count in summary: {counts}")
        if self.attempted + self.skipped + self.errored != self.total:
            raise ValueError(
                f"attempted {self.attempted} + skipped {self.skipped} + errored "
                f"{self.errored} != total {self.total}"
            )
        if self.successes > self.attempted:
            raise ValueError(
                f"successes {self.successes} exceed attempted {self.attempted}"
            )
        for name in (
            "original_accuracy",
            "after_attack_accuracy",
            "attack_success_rate",
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    def identity_gap(self) -> float:
        """Signed gap (as a fraction) between the stored after-attack
        accuracy and the one implied by original_accuracy*(1 - ASR).
        Zero (to 1e-12) on every summary this harness aggregates itself;
        hand-entered summaries may carry a gap worth reporting."""
        return self.after_attack_accuracy - implied_after_attack(
            self.original_accuracy, self.attack_success_rate
        )

    def to_json_dict(self) -> dict:
        return {
            "total": self.total,
            "attempted": self.attempted,
            "skipped": self.skipped,
            "errored": self.errored,
            "successes": self.successes,
            "original_accuracy": self.original_accuracy,
            "after_attack_accuracy": self.after_attack_accuracy,
            "attack_success_rate": self.attack_success_rate,
            "avg_queries_all": self.avg_queries_all,
            "avg_queries_attempted": self.avg_queries_attempted,
            "config": dict(self.config_echo),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "RunSummary":
        return cls(
            total=data["total"],
            attempted=data["attempted"],
            skipped=data["skipped"],
            errored=data["errored"],
            successes=data["successes"],
            original_accuracy=data["original_accuracy"],
            after_attack_accuracy=data["after_attack_accuracy"],
            attack_success_rate=data["attack_success_rate"],
            avg_queries_all=data["avg_queries_all"],
            avg_queries_attempted=data["avg_queries_attempted"],
            config_echo=dict(data.get("config", {})),
        )


def implied_after_attack(original_accuracy: float, attack_success_rate: float) -> float:
    return original_accuracy * (1.0 - attack_success_rate)


def pct_decrease(baseline_asr: float, variant_asr: float) -> float:
    """Percentage drop of the variant's attack success rate relative to the
    baseline's; scale-free, so fractions and percentages both work."""
    if baseline_asr <= 0:
        raise ValueError(f"baseline ASR must be positive, got {baseline_asr}")
    return 100.0 * (baseline_asr - variant_asr) / baseline_asr


def aggregate(
    records: Sequence[AttackRecord], config_echo: Mapping[str, object] | None = None
) -> RunSummary:
    """Fold per-example records into the campaign summary.

    Errored records are excluded from attempted (and so from the success
    rate); query averages run over non-errored records and over attempted
    records respectively.
    """
    total = len(records)
    skipped = sum(1 for r in records if r.status is AttackStatus.SKIPPED)
    errored = sum(1 for r in records if r.status is AttackStatus.ERRORED)
    successes = sum(1 for r in records if r.status is AttackStatus.SUCCESS)
    attempted = total - skipped - errored

    original_accuracy = attempted / total if total else 0.0
    attack_success_rate = successes / attempted if attempted else 0.0
    after_attack_accuracy = (attempted - successes) / total if total else 0.0

    non_errored = [r.queries for r in records if r.status is not AttackStatus.ERRORED]
    attempted_queries = [
        r.queries
        for r in records
        if r.status in (AttackStatus.SUCCESS, AttackStatus.FAILED)
    ]
    summary = RunSummary(
        total=total,
        attempted=attempted,
        skipped=skipped,
        errored=errored,
        successes=successes,
        original_accuracy=original_accuracy,
        after_attack_accuracy=after_attack_accuracy,
        attack_success_rate=attack_success_rate,
        avg_queries_all=sum(non_errored) / len(non_errored) if non_errored else 0.0,
        avg_queries_attempted=(
            sum(attempted_queries) / len(attempted_queries) if attempted_queries else 0.0
        ),
        config_echo=dict(config_echo or {}),
    )
    assert abs(summary.identity_gap()) <= IDENTITY_TOL
    return summary


def resolve_timestamp(timestamp: str | None = None) -> str:
    """ISO-8601 timestamp for the summary: the explicit argument wins, then
    SOURCE_DATE_EPOCH, then the current UTC time."""
    if timestamp is not None:
        return timestamp
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc).isoformat()
    return _dt.datetime.now(tz=_dt.timezone.utc).isoformat()


def run_campaign(
    examples: Sequence[NliExample],
    victim: PairClassifier,
    config: AttackConfig,
    resources: AttackResources,
    out_dir: str | Path,
    *,
    workers: int = 1,
    victim_label: str | None = None,
    timestamp: str | None = None,
) -> RunSummary:
    """Attack every example and persist records.jsonl plus summary.json.

    Records land in dataset order regardless of worker interleaving, and
    each attack carries its own query counter, so the file bytes do not
    depend on the worker count.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    run = (
        attack_explain_then_predict
        if hasattr(victim, "explain_and_classify")
        else greedy_attack
    )

    def one(example: NliExample) -> AttackRecord:
        return run(example, victim, config, resources)

    records: list[AttackRecord] = []
    if workers == 1:
        for i, example in enumerate(examples, start=1):
            records.append(one(example))
            if i % 100 == 0:
                log.info("attacked %d/%d examples", i, len(examples))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, record in enumerate(pool.map(one, examples), start=1):
                records.append(record)
                if i % 100 == 0:
                    log.info("attacked %d/%d examples", i, len(examples))

    echo = config.echo()
    echo["workers"] = workers
    if victim_label is not None:
        echo["victim"] = victim_label
    summary = aggregate(records, config_echo=echo)

    with open(out / RECORDS_FILENAME, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json_dict(), sort_keys=True))
            fh.write("\n")
    payload = summary.to_json_dict()
    payload["timestamp"] = resolve_timestamp(timestamp)
    with open(out / SUMMARY_FILENAME, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return summary


def load_records(path: str | Path) -> list[AttackRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(AttackRecord.from_json_dict(json.loads(line)))
    return records


def load_summary(path: str | Path) -> RunSummary:
    with open(path, encoding="utf-8") as fh:
        return RunSummary.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Explanation scoring

METRIC_NAMES = ("meteor", "bert-score", "rouge", "bleu")


def score_explanations(
    generated: Mapping[str, str],
    examples: Sequence[NliExample],
    token_embedder: Callable[[str], Sequence[float] | None],
) -> dict[str, MetricScore]:
    """Score one generated explanation per example against its references.

    The generated mapping must cover the dataset ids exactly; anything
    missing or unexpected aborts with the full list of offenders.
    """
    dataset_ids = [e.id for e in examples]
    missing = sorted(set(dataset_ids) - set(generated))
    extra = sorted(set(generated) - set(dataset_ids))
    if missing or extra:
        raise ScoringError(_mismatch_message(missing, extra))

    per: dict[str, list[float]] = {name: [] for name in METRIC_NAMES}
    for example in examples:
        cand = generated[example.id]
        refs = list(example.reference_explanations)
        per["bleu"].append(bleu(cand, refs))
        per["rouge"].append(rouge_l(cand, refs))
        per["meteor"].append(meteor(cand, refs))
        per["bert-score"].append(bertscore(cand, refs, token_embedder)[2])
    return {name: MetricScore.from_samples(name, per[name]) for name in METRIC_NAMES}


def _mismatch_message(missing: Sequence[str], extra: Sequence[str]) -> str:
    parts = []
    if missing:
        parts.append(f"ids without a generated explanation: {', '.join(missing)}")
    if extra:
        parts.append(f"generated ids not in the dataset: {', '.join(extra)}")
    return "; ".join(parts)


def table_token_embedder(
    table: EmbeddingTable,
) -> Callable[[str], Sequence[float] | None]:
    def embed(token: str) -> Sequence[float] | None:
        vec = table.lookup(token)
        return None if vec is None else vec

    return embed


def scores_to_csv(scores: Mapping[str, MetricScore], example_ids: Sequence[str]) -> str:
    """CSV body (metric, example_id, value) at full precision, metrics in
    their summary order, examples in dataset order."""
    lines = ["metric,example_id,value"]
    for name in METRIC_NAMES:
        ms = scores[name]
        if len(ms.per_sample) != len(example_ids):
            raise ScoringError(
                f"{name}: {len(ms.per_sample)} samples for {len(example_ids)} ids"
            )
        for ex_id, value in zip(example_ids, ms.per_sample):
            lines.append(f"{name},{ex_id},{value!r}")
    return "\n".join(lines) + "\n"


def scores_to_summary_dict(scores: Mapping[str, MetricScore]) -> dict:
    """JSON summary mirroring the four corpus rows, with a manual-entry slot
    for human explanation correctness and the caveat notes attached."""
    out: dict[str, object] = {name: scores[name].corpus for name in METRIC_NAMES}
    out["pct_correct_explanations"] = None
    out["notes"] = list(SCORE_NOTES)
    return out
