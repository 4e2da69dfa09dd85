"""Exception hierarchy shared by every raevolve module."""

from __future__ import annotations


class RaevolveError(Exception):
    """Base class for all errors raised by raevolve."""


class ParseError(RaevolveError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


# -- description model ------------------------------------------------------


class EmptyName(RaevolveError, ValueError):
    pass


class UnknownKind(RaevolveError, LookupError):
    pass


class ParentNotFound(RaevolveError, LookupError):
    pass


class ElementNotFound(RaevolveError, LookupError):
    pass


class SectionExists(RaevolveError, ValueError):
    pass


class SectionNotFound(RaevolveError, LookupError):
    pass


class DanglingRef(RaevolveError, LookupError):
    pass


class SelfTrace(RaevolveError, ValueError):
    pass


# -- assessment registry ----------------------------------------------------


class UnknownCategory(RaevolveError, LookupError):
    pass


class DuplicateRef(RaevolveError, ValueError):
    pass


class UnknownQuestion(RaevolveError, LookupError):
    pass


class UnknownRole(RaevolveError, LookupError):
    pass


# -- catalog ----------------------------------------------------------------


class CatalogError(RaevolveError):
    """Raised by ``load_catalog`` when validation finds violations.

    ``violations`` holds every problem found, not only the first one.
    """

    def __init__(self, message: str, violations=()):
        self.violations = list(violations)
        super().__init__(message)


class BrokenRuleRef(CatalogError, LookupError):
    pass


class IdFormatError(CatalogError, ValueError):
    pass


class UnknownGuideline(RaevolveError, LookupError):
    pass


class ConditionSyntaxError(RaevolveError, ValueError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} at offset {position}")


class ConditionEvalError(RaevolveError):
    pass


# -- engine -----------------------------------------------------------------


class EngineError(RaevolveError):
    step_index: int | None = None


class MissingInput(EngineError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class InvalidInput(EngineError, ValueError):
    pass


class QueryAmbiguous(EngineError, LookupError):
    pass


class TargetNotFound(EngineError, LookupError):
    pass


class StepFailure(EngineError):
    def __init__(self, step_index: int, cause: BaseException, step: str = ""):
        self.step_index = step_index
        self.cause = cause
        self.step = step
        label = f" ({step})" if step else ""
        super().__init__(f"step {step_index}{label} failed: {type(cause).__name__}: {cause}")


class InjectedFault(RaevolveError):
    """Deliberate failure used to exercise rollback."""


class HashMismatch(RaevolveError):
    pass


# -- advisor / workspace ----------------------------------------------------


class NoGuideline(RaevolveError, LookupError):
    def __init__(self, question: str, element: str):
        self.question = question
        self.element = element
        super().__init__(f"question {question} maps to {element} but no guideline covers it")


class AlreadyInitialized(RaevolveError):
    pass


class ConditionNotMet(EngineError):
    pass


class EventMismatch(EngineError):
    pass
