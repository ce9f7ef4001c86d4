from typing import Optional


class IntegrableError(Exception):
    # Base class for every error raised by the library.

    def __reduce__(self):
        # Subclasses take custom constructor arguments; pickle by state
        return _rebuild, (type(self), self.args, self.__dict__)


def _rebuild(cls, args, state):
    error = Exception.__new__(cls)
    error.args = args
    error.__dict__.update(state)
    return error


class EigenNonConvergence(IntegrableError):
    def __init__(self, residual: float, message: str = ""):
        self.residual = residual
        super().__init__(message or f"Eigen-solver did not converge (off-diagonal residual {residual:.3e})")


class PositiveDefinitenessViolation(IntegrableError):
    def __init__(self, min_eigenvalue: float, time: Optional[float] = None):
        self.min_eigenvalue = min_eigenvalue
        self.time = time
        where = f" at t={time:.17g}" if time is not None else ""
        super().__init__(f"Matrix left the positive definite cone{where} (min eigenvalue {min_eigenvalue:.3e})")


class StepBudgetExceeded(IntegrableError):
    def __init__(self, max_steps: int, time: float):
        self.max_steps = max_steps
        self.time = time
        super().__init__(f"Integrator exceeded {max_steps} steps (reached t={time:.17g})")


class NumericalBlowup(IntegrableError):
    def __init__(self, last_time: float):
        self.last_time = last_time
        super().__init__(f"Non-finite value in vector field after t={last_time:.17g}")


class ProjectionFailure(IntegrableError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"Constraint projection failed after {iterations} iterations (residual {residual:.3e})")


class InvalidSampling(IntegrableError):
    pass


class SingularInertia(IntegrableError):
    pass


class UnsupportedDegree(IntegrableError):
    pass


class BudgetExceeded(IntegrableError):
    def __init__(self, bits: int, budget: int):
        self.bits = bits
        self.budget = budget
        super().__init__(f"Coefficient size {bits} bits exceeds the budget of {budget} bits")


class DegeneratePoint(IntegrableError):
    pass


class KnoerrerUndefined(IntegrableError):
    pass


class ChartSwitchError(IntegrableError):
    pass


class DegenerateChartPoint(IntegrableError):
    pass


class ConfigError(IntegrableError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")


class ExperimentError(IntegrableError):
    def __init__(self, experiment: str, cause: Exception):
        self.experiment = experiment
        self.cause = cause
        super().__init__(f"[{experiment}] {cause}")
