# -*- coding: utf-8 -*-
"""Exception hierarchy shared by the compiler, the simulator and the CLI."""

from typing import Any, List, Optional, Tuple


class BenchError(Exception):
    """Base class for every error raised by this package"""


class ConfigError(BenchError, ValueError):
    """Invalid configuration document or flag value"""


class CircuitFormatError(BenchError, ValueError):
    """Malformed circuit text or invalid gate operand"""


class ProgramSyntaxError(BenchError, ValueError):
    """Malformed instruction program text"""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class GraphRewriteError(BenchError, ValueError):
    """A graph-state rewrite was called outside its precondition"""


class UnsupportedBasisError(BenchError, ValueError):
    """A basis or fusion basis cannot be pushed through the given word"""


class OracleError(BenchError):
    """Stabilizer oracle misuse (size limit, contradicting forced outcome)"""


class InvalidIRError(BenchError, ValueError):
    """An IR failed validation where a valid one is required"""

    def __init__(self, violations: List[Any]) -> None:
        shown = "; ".join(str(v) for v in violations[:3])
        super().__init__(f"{len(violations)} IR violation(s): {shown}")
        self.violations = list(violations)


class MappingError(BenchError, RuntimeError):
    """The offline mapper could not produce an IR"""


class UnroutableEdgeError(MappingError):
    """A program edge cannot be routed within the routing budget"""

    def __init__(self, edge: Tuple[int, int], message: str) -> None:
        super().__init__(f"edge {edge}: {message}")
        self.edge = edge


class OccupancyDeadlockError(MappingError):
    """Scheduling stopped making progress"""

    def __init__(self, layer: int, message: str) -> None:
        super().__init__(f"layer {layer}: {message}")
        self.layer = layer


class ExecutionAborted(BenchError, RuntimeError):
    """The online pass stopped before realizing every program layer"""

    reason = "aborted"

    def __init__(self, message: str, report: Optional[Any] = None) -> None:
        super().__init__(message)
        self.report = report


class DelayBudgetExceeded(ExecutionAborted):
    """A stored bundle outlived the photon lifetime"""

    reason = "delay-budget"


class RslCapExceeded(ExecutionAborted):
    """The configured RSL cap was reached"""

    reason = "rsl-cap"


class VerificationFailed(BenchError):
    """One or more verification suites reported disagreements"""
