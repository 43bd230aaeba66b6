"""Exception types raised across the package.

Every error carries a short upper-case ``code`` so that callers (and the CLI)
can dispatch without string matching on messages.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence


class DcaError(Exception):
    code = "ERROR"


class Violation(NamedTuple):
    field: str
    rule: str

    def __str__(self) -> str:
        return f"VALIDATION({self.field}, {self.rule!r})"


class ValidationError(DcaError, ValueError):
    code = "VALIDATION"

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class ParseError(DcaError, ValueError):
    """Malformed scenario file. ``code`` is PARSE, UNKNOWN_KEY or MISSING_SECTION."""

    code = "PARSE"

    def __init__(self, line: int | None, reason: str, code: str = "PARSE"):
        self.line = line
        self.reason = reason
        self.code = code
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{code}: {where}{reason}")


class NonPositiveRtt(DcaError, ValueError):
    code = "NONPOSITIVE_RTT"


class ZeroQueueDelay(DcaError, ValueError):
    code = "ZERO_QUEUE_DELAY"


class NegativeCorrectedRtt(DcaError, ValueError):
    code = "NEGATIVE_CORRECTED_RTT"


class UnreliableSignal(DcaError, ValueError):
    code = "UNRELIABLE_SIGNAL"


class ProbeLoss(DcaError, RuntimeError):
    code = "PROBE_LOSS"


class QueueDrained(DcaError, RuntimeError):
    code = "QUEUE_DRAINED"


class Degenerate(DcaError, ValueError):
    code = "DEGENERATE"


class NonPositiveRate(DcaError, ValueError):
    code = "NONPOSITIVE_RATE"


class EmptyWindow(DcaError, ValueError):
    code = "EMPTY_WINDOW"
