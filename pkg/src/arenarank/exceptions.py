"""Exception hierarchy.

Two families matter to callers: :class:`InputError` (bad data or arguments,
CLI exit code 2) and :class:`NumericalError` (the math has no answer for the
given data, CLI exit code 3).
"""


class ArenaError(Exception):
    """Base class for all package errors."""


class InputError(ArenaError, ValueError):
    pass


class NumericalError(ArenaError, ArithmeticError):
    pass


class UnknownModel(InputError):
    def __init__(self, index, model_id):
        super().__init__(f"record {index} references unknown model {model_id!r}")
        self.index = index
        self.model_id = model_id


class SelfBattle(InputError):
    def __init__(self, index, model_id):
        super().__init__(f"record {index} pits {model_id!r} against itself")
        self.index = index
        self.model_id = model_id


class RosterMismatch(InputError):
    pass


class RosterTooSmall(InputError):
    pass


class RosterNotSorted(InputError):
    pass


class EmptyProximitySet(InputError):
    pass


class AlreadyFinished(InputError):
    pass


class BadRoundTotal(InputError):
    pass


class SchemaVersionUnsupported(InputError):
    pass


class CorruptSnapshot(InputError):
    pass


class DatasetUnavailable(InputError):
    pass


class DisconnectedGraph(NumericalError):
    """The comparison graph splits into several components."""

    def __init__(self, components):
        self.components = [list(c) for c in components]
        sizes = ", ".join(str(len(c)) for c in self.components)
        super().__init__(
            f"comparison graph has {len(self.components)} components (sizes {sizes})"
        )


# Alias kept for the bootstrap API, where the original data must be connected.
DisconnectedOriginal = DisconnectedGraph


class NoFiniteMaximizer(NumericalError):
    def __init__(self, models):
        self.models = list(models)
        super().__init__(
            "likelihood has no finite maximizer; models without a win/loss path "
            f"back to the rest: {self.models}"
        )


class ConvergenceFailure(NumericalError):
    pass


class DisconnectedBelowBreakpoint(NumericalError):
    def __init__(self, breakpoint, phi_above):
        self.breakpoint = breakpoint
        self.phi_above = phi_above
        super().__init__(
            f"graph below breakpoint {breakpoint:g} is disconnected "
            f"(phi below = inf, phi above = {phi_above:g})"
        )
