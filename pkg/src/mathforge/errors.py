"""Exception types raised across the package.

Every error callers are expected to catch derives from ForgeError so that
the service layer and CLI can map failures to exit codes uniformly.
"""


class ForgeError(Exception):
    """Base class for all mathforge errors."""


# --- backends ---------------------------------------------------------------


class AuthError(ForgeError):
    """API key environment variable missing or empty."""


class TransportError(ForgeError):
    """Network-level failure after the retry budget was exhausted."""


class ProviderError(ForgeError):
    """Provider returned a non-2xx response or an unusable payload."""


class DimensionMismatch(ForgeError):
    """Embedding provider returned vectors of unequal dimension."""


class ScriptMiss(ForgeError):
    """Strict scripted mock received a prompt with no table entry."""


# --- committee --------------------------------------------------------------


class TooFewMembers(ForgeError):
    """A committee needs at least two members."""


class EmptyGrid(ForgeError):
    """Generation grid has an empty temperature or top-p axis."""


# --- synthesis --------------------------------------------------------------


class NoProblemsFound(ForgeError):
    """A generation completion produced zero parseable problems."""


# --- filtering --------------------------------------------------------------


class VerdictParseError(ForgeError):
    """A judge's quality verdict could not be parsed."""


class InsufficientRollouts(ForgeError):
    """Fewer rollouts than requested were obtained after retries."""


# --- selection --------------------------------------------------------------


class EmptyCorpus(ForgeError):
    """An operation that needs a non-empty corpus got an empty one."""


# --- rating -----------------------------------------------------------------


class VoteParseError(ForgeError):
    """A judge ballot did not contain a valid [[n]] score."""


class NoValidBallots(ForgeError):
    """Every ballot of a battle failed to parse."""


class NoVotes(ForgeError):
    """Local score requested for a battle with zero total votes."""


class UnknownMember(ForgeError):
    """Member id not present in the rating state."""


class OpponentMismatch(ForgeError):
    """Local scores and rating expectations cover different opponents."""


class NoAnswers(ForgeError):
    """Gold selection over an empty answer list."""


class NoBoxedAnswer(ForgeError):
    """No candidate answer with a parseable boxed value remains."""


# --- pairbuilder ------------------------------------------------------------


class UnlabeledRollout(ForgeError):
    """A rollout is missing its reward label."""


class GoldMismatch(ForgeError):
    """Gold answer does not belong to the problem being paired."""


# --- losskernel -------------------------------------------------------------


class NonFiniteInput(ForgeError):
    """Loss inputs contain NaN or infinity."""


class UnknownToken(ForgeError):
    """Token outside the toy policy's vocabulary."""


# --- pipeline ---------------------------------------------------------------


class ConfigError(ForgeError):
    """Invalid pipeline configuration; message names the field path."""


class UpstreamIncomplete(ForgeError):
    """A stage was requested before its upstream stages completed."""


class StageFailed(ForgeError):
    """A stage aborted; partial output was discarded."""
