"""Exception hierarchy shared by every layer of the toolkit"""


class LTAError(Exception):
    """Base class for all toolkit errors"""


class TermError(LTAError, ValueError):
    """Malformed term or invalid term operation"""


class ArityError(TermError):
    """Symbol applied to the wrong number of arguments"""


class MixedTermError(TermError):
    """Term mixes concrete integers and abstract lattice constants"""


class InvalidPosition(TermError):
    """Position does not address a subterm"""


class UnknownSymbol(LTAError):
    """Symbol or state not declared in the automaton alphabet"""


class PartitionError(LTAError, ValueError):
    """Partition blocks overlap or leave atoms uncovered"""


class NonDeterministicInput(LTAError):
    """Operation requires a deterministic automaton"""


class NotARefinement(LTAError):
    """Partition does not refine the automaton's current partition"""


class NonLinearConstraint(LTAError):
    """Condition cannot be written as a linear constraint"""


class InvalidRule(LTAError, ValueError):
    """Rewrite rule or equation violates its well-formedness conditions"""


class StepBudgetExhausted(LTAError):
    """Completion stopped at max_steps without reaching a fixpoint"""

    def __init__(self, steps: int):
        super().__init__(f"completion did not converge within {steps} steps")
        self.steps = steps


class SpecSyntaxError(LTAError):
    """Spec file could not be parsed; carries the offending location"""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


class UnknownDeclaration(LTAError):
    """Spec file has no automaton, rule set or equation set under that name"""
