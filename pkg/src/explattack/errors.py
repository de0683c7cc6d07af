"""Exception hierarchy shared across the package."""
from __future__ import annotations


class ExplattackError(Exception):
    """Base class for all errors raised by this package."""


class CorpusError(ExplattackError):
    """Malformed dataset, embedding, or lexicon input."""


class FeaturizationError(ExplattackError):
    """A sentence could not be featurized (e.g. every token out of vocabulary)."""


class DivergenceError(ExplattackError):
    """Training produced a non-finite loss."""


class VictimError(ExplattackError):
    """A victim model failed: network trouble, bad payload, internal fault."""


class SimilarityError(ExplattackError):
    """Sentence similarity is undefined for the given pair (fully OOV side)."""


class ConfigError(ExplattackError):
    """Invalid configuration value or unusable command-line input."""


class ReportError(ExplattackError):
    """Report rendering cannot proceed (duplicate labels, missing baseline)."""


class ScoringError(ExplattackError):
    """Explanation scoring input mismatch (unmatched example ids)."""
