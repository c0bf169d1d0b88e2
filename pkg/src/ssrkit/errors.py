"""Exception types shared across the toolkit."""


class SsrkitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(SsrkitError):
    """Raised when an SSR document cannot be parsed.

    ``kind`` is one of ``malformed_document``, ``missing_key``, ``bad_type``,
    ``invariant_violation``; ``path`` points at the offending key when known.
    """

    def __init__(self, kind: str, detail: str, path: str | None = None):
        self.kind = kind
        self.detail = detail
        self.path = path
        where = f" at {path}" if path else ""
        super().__init__(f"{kind}{where}: {detail}")


class IndexOutOfRange(SsrkitError):
    pass


class NotRectilinear(SsrkitError):
    pass


class OpenBoundary(SsrkitError):
    pass


class MultipleLoops(SsrkitError):
    pass


class LatticeMismatch(SsrkitError):
    pass


class MissingMesh(SsrkitError):
    def __init__(self, jid: str):
        self.jid = jid
        super().__init__(f"no mesh available for asset {jid!r}")


class NotSingleAddition(SsrkitError):
    pass


class DimensionMismatch(SsrkitError):
    pass


class BadFormat(SsrkitError):
    pass


class BadNorm(SsrkitError):
    pass


class InconsistentDimension(SsrkitError):
    pass


class EmptyPrompt(SsrkitError):
    pass


class TooFewSamples(SsrkitError):
    pass


class AllInvalid(SsrkitError):
    pass


class IllegalEdit(SsrkitError):
    pass


class NoCommands(SsrkitError):
    pass


class MalformedTag(SsrkitError):
    def __init__(self, index: int, entry: str):
        self.index = index
        self.entry = entry
        super().__init__(f"command entry {index} is not a well-formed tag: {entry!r}")


class MissingPromptBankEntry(SsrkitError):
    def __init__(self, jid: str):
        self.jid = jid
        super().__init__(f"prompt bank has no entry for {jid!r}")
