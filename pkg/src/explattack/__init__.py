"""Word-substitution robustness harness for NLI classifiers and
explain-then-predict pipelines."""

from .attack import (
    AttackConfig,
    AttackRecord,
    AttackResources,
    AttackStatus,
    Recipe,
    Substitution,
    TargetField,
    attack_explain_then_predict,
    greedy_attack,
    rank_word_importance,
    sentence_similarity,
)
from .corpus import (
    ColumnMap,
    EmbeddingTable,
    Label,
    NliExample,
    PosLexicon,
    load_embeddings,
    load_esnli,
    load_pos_lexicon,
    load_word_list,
    tokenize,
)
from .errors import (
    ConfigError,
    CorpusError,
    DivergenceError,
    ExplattackError,
    FeaturizationError,
    ReportError,
    ScoringError,
    SimilarityError,
    VictimError,
)
from .evaluate import (
    RunSummary,
    aggregate,
    implied_after_attack,
    pct_decrease,
    run_campaign,
    score_explanations,
)
from .nlgmetrics import MetricScore, bertscore, bleu, meteor, porter_stem, rouge_l
from .report import render_figures, render_report
from .victim import (
    ClassifierOutput,
    ConstantExplainer,
    ExplainThenPredict,
    KeywordExpl2Label,
    LinearModel,
    LinearVictim,
    QueryCounter,
    RemoteEncoder,
    RemoteExplainer,
    RemoteExplanationClassifier,
    RemoteMlmProvider,
    RemotePairClassifier,
    RulePairClassifier,
    TemplateExplainer,
    train_linear,
    with_query_counter,
)

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackRecord",
    "AttackResources",
    "AttackStatus",
    "ClassifierOutput",
    "ColumnMap",
    "ConfigError",
    "ConstantExplainer",
    "CorpusError",
    "DivergenceError",
    "EmbeddingTable",
    "ExplainThenPredict",
    "ExplattackError",
    "FeaturizationError",
    "KeywordExpl2Label",
    "Label",
    "LinearModel",
    "LinearVictim",
    "MetricScore",
    "NliExample",
    "PosLexicon",
    "QueryCounter",
    "Recipe",
    "RemoteEncoder",
    "RemoteExplainer",
    "RemoteExplanationClassifier",
    "RemoteMlmProvider",
    "RemotePairClassifier",
    "ReportError",
    "RulePairClassifier",
    "RunSummary",
    "ScoringError",
    "SimilarityError",
    "Substitution",
    "TargetField",
    "TemplateExplainer",
    "VictimError",
    "aggregate",
    "attack_explain_then_predict",
    "bertscore",
    "bleu",
    "greedy_attack",
    "implied_after_attack",
    "load_embeddings",
    "load_esnli",
    "load_pos_lexicon",
    "load_word_list",
    "meteor",
    "pct_decrease",
    "porter_stem",
    "rank_word_importance",
    "render_figures",
    "render_report",
    "rouge_l",
    "run_campaign",
    "score_explanations",
    "sentence_similarity",
    "tokenize",
    "train_linear",
    "with_query_counter",
]
