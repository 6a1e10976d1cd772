"""Exception hierarchy for the engine.

Every engine-raised error derives from CodmError so callers (and the REPL)
can catch one type. Subclasses carry whatever context the message needs.
"""


class CodmError(Exception):
    """Base class for all engine errors."""


# --- schema errors ---------------------------------------------------------

class DuplicateName(CodmError):
    pass


class UnknownConcept(CodmError):
    pass


class UnknownDomain(CodmError):
    pass


class UnknownDimension(CodmError):
    pass


class CycleDetected(CodmError):
    """Carries the offending edge chain in the message."""


class NotDirectSuper(CodmError):
    pass


class PrimitiveDomain(CodmError):
    pass


class BadDimensionSubset(CodmError):
    pass


# --- store errors ----------------------------------------------------------

class ArityMismatch(CodmError):
    pass


class DomainViolation(CodmError):
    pass


class NullForbidden(CodmError):
    pass


class ConstraintViolation(CodmError):
    pass


class UnknownItem(CodmError):
    pass


class InvalidPath(CodmError):
    pass


class DanglingReference(CodmError):
    """A stored reference points at a dead item: store corruption."""


# --- canonical semantics ---------------------------------------------------

class IncomparableSchemas(CodmError):
    """Canonical path-name sets of the two databases differ."""


# --- query language --------------------------------------------------------

class QuerySyntaxError(CodmError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class EvalTypeError(CodmError):
    """Type error while evaluating an expression."""


class UnknownParameter(CodmError):
    pass


class UnknownProperty(CodmError):
    pass


class UnboundBlockVariable(CodmError):
    pass


class ViewImmutable(CodmError):
    pass


class UnknownLink(CodmError):
    pass


class DuplicateLink(CodmError):
    pass


# --- analytics -------------------------------------------------------------

class InvalidAxisPath(CodmError):
    pass


class NoSuchLevel(CodmError):
    pass


class NoCommonSubconcept(CodmError):
    pass


class InvalidTreeSpec(CodmError):
    pass


# --- persistence / cli -----------------------------------------------------

class ParseError(CodmError):
    """Snapshot or script line failed to parse; message carries the line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
