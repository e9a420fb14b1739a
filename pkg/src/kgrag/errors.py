"""Exception hierarchy shared across the engine."""


class KgragError(Exception):
    """Base class for all engine errors."""


# --- triplet datastore ---

class MalformedRecord(KgragError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class EmptyField(MalformedRecord):
    pass


# --- vector index ---

class DimensionMismatch(KgragError):
    pass


class ZeroVector(KgragError):
    pass


class DuplicateId(KgragError):
    pass


class InsufficientVectors(KgragError):
    pass


class CorruptIndex(KgragError):
    def __init__(self, reason: str, offset: int | None = None):
        self.reason = reason
        self.offset = offset
        loc = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{reason}{loc}")


# --- pathology head ---

class ShapeMismatch(KgragError):
    pass


class NonFiniteInput(KgragError):
    pass


class OutOfRangeScore(KgragError):
    pass


class DegenerateLabels(KgragError):
    pass


# --- prompt assembly / generation ---

class NoQualifyingPathology(KgragError):
    pass


class UnresolvedHitId(KgragError):
    pass


class BackendTimeout(KgragError):
    pass


class BackendUnavailable(KgragError):
    pass


class BackendRefusal(KgragError):
    def __init__(self, message: str, partial_text: str = ""):
        self.partial_text = partial_text
        super().__init__(message)


# --- metrics / evaluation ---

class EmptyCorpus(KgragError):
    pass


class DegenerateCorpus(KgragError):
    pass


class EmptyAfterFilter(KgragError):
    pass


class MissingImageIndex(KgragError):
    pass


# --- interface ---

class IdMismatch(KgragError):
    pass


class ConfigError(KgragError):
    pass
