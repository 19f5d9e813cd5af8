from typing import List, Optional


class StackSenseError(Exception):
    """
    Base class for every error raised by stacksense.
    """


class DimensionMismatch(StackSenseError, ValueError):
    def __init__(self, what: str, expected: int, got: int) -> None:
        super().__init__(f"{what}: expected dimension {expected}, got {got}")
        self.expected = expected
        self.got = got


class CycleDetected(StackSenseError):
    """
    The graph is not feed-forward.

    Attributes:
        cycle: one directed cycle found in the graph, first node repeated at the end
    """

    def __init__(self, cycle: List[int]) -> None:
        super().__init__(f"directed cycle: {' -> '.join(str(c) for c in cycle)}")
        self.cycle = cycle


class NonDifferentiableActivation(StackSenseError):
    def __init__(self, layer: int, kind: str) -> None:
        super().__init__(f"layer {layer} uses {kind}, which has no derivative")
        self.layer = layer
        self.kind = kind


class Diverged(StackSenseError):
    """
    Training error became NaN or infinite.
    """

    def __init__(self, generation: int, error: float) -> None:
        super().__init__(f"training diverged at generation {generation} (error={error})")
        self.generation = generation
        self.error = error


class EigenError(StackSenseError):
    pass


class EmptyInput(StackSenseError, ValueError):
    pass


class NotConcrete(StackSenseError, ValueError):
    def __init__(self, test: str, field: str, value: str, lineno: int) -> None:
        super().__init__(
            f"line {lineno}: {test}.{field}={value} has alternatives, responses must be concrete"
        )
        self.test = test
        self.field = field
        self.value = value
        self.lineno = lineno


class DistributionError(StackSenseError, ValueError):
    pass


class EndpointMapError(StackSenseError, ValueError):
    pass


class SchemaMismatch(StackSenseError):
    def __init__(self, expected: str, got: str) -> None:
        super().__init__(f"schema version mismatch: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class ModelFileError(StackSenseError):
    pass


class ChecksumError(ModelFileError):
    pass


class TrainingError(StackSenseError):
    """
    Wraps any failure while building one of the hierarchy's nets.

    Attributes:
        net: name of the net being built, i.e., ``relevance`` or ``version:Linux``
    """

    def __init__(self, net: str, cause: Optional[BaseException] = None) -> None:
        super().__init__(f"{net}: {cause}")
        self.net = net
        self.cause = cause
