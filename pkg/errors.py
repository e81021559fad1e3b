"""
Exception hierarchy for the relational verifier.

Stuck executions, counterexamples and proof-check failures are ordinary
result values; exceptions are reserved for malformed input and for
results that cannot be determined.
"""
from typing import Optional


class VerifierError(Exception):
    """Base class for every error raised by the toolkit."""


class ParseError(VerifierError):
    """Syntax or sort error in a program, formula or input file."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            super().__init__(f"{message} (line {line}, column {column})")
        else:
            super().__init__(message)


class WellFormednessError(VerifierError):
    """Structurally invalid input that parsed fine."""


class AnnotationError(VerifierError):
    """An annotation is missing for a cutpoint or a reachable cutpoint pair."""


class UnknownResult(VerifierError):
    """Evaluation could not decide a result (budget, cutoff, out-of-domain symbol arguments)."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)
