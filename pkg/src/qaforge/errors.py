"""Exception types shared across the pipeline stages."""


class QaForgeError(Exception):
    """Base class for all qaforge errors."""


# catalog / fetch
class MissingColumn(QaForgeError):
    pass


class DuplicateId(QaForgeError):
    pass


class UnknownContentType(QaForgeError):
    pass


class NoFetcherForType(QaForgeError):
    pass


class OrphanResult(QaForgeError):
    pass


# extraction
class ConverterUnavailable(QaForgeError):
    pass


class EmptyExtraction(QaForgeError):
    pass


class MalformedNotebook(QaForgeError):
    pass


class AllFilesUnreadable(QaForgeError):
    pass


class NoMatchingFiles(QaForgeError):
    pass


class MissingTitle(QaForgeError):
    pass


# generation
class DocumentEmpty(QaForgeError):
    pass


class UnparseableResponse(QaForgeError):
    pass


class GatewayExhausted(QaForgeError):
    pass


# curation
class EmbedderFailure(QaForgeError):
    pass


class ProviderFailure(QaForgeError):
    pass


class NonMonotoneCounts(QaForgeError):
    pass


# split
class KTooLarge(QaForgeError):
    pass


class InfeasibleConfig(QaForgeError):
    pass


class DegenerateVariance(QaForgeError):
    pass


# metrics
class NoEmbeddableTokens(QaForgeError):
    pass


class EmptyTokens(QaForgeError):
    pass


class MetricSetMismatch(QaForgeError):
    pass


class LengthMismatch(QaForgeError):
    pass


# analytics
class ZeroVariance(QaForgeError):
    pass


class InsufficientVocabulary(QaForgeError):
    pass


# pipeline / service
class UpstreamStale(QaForgeError):
    pass


class StageFailure(QaForgeError):
    pass


class UnknownKey(QaForgeError):
    pass


class UnknownQaId(QaForgeError):
    pass


class RevisionConflict(QaForgeError):
    pass


class UnreviewedItemsRemain(QaForgeError):
    pass


class WorkspaceLocked(QaForgeError):
    pass
