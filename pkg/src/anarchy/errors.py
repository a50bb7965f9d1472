"""Shared exception types.

Three failure classes are kept distinct so callers can tell malformed data
apart from legitimate "no solution" answers:

* StructuralError: the input object itself is malformed (dimension mismatch,
  bad domain tag, value out of range).
* PreconditionError: the object is well formed but violates a documented
  precondition of the operation (infeasible fractional point, set that is
  not a basis, missing grid multiplier).
* SizeGuardError: the input is too large for an exhaustive routine.
* InfeasibleMatchingError: no perfect matching avoiding the forbidden cells.

LP infeasibility and unboundedness are reported through LPSolution.status,
not through exceptions, because both are ordinary answers for a solver.
"""


class StructuralError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class SizeGuardError(ValueError):
    pass


class InfeasibleMatchingError(RuntimeError):
    pass
