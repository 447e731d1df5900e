"""Exception hierarchy shared across the toolkit.

Everything raised on bad physics, bad configuration or a failed numerical
procedure derives from DomainError so the CLI can map it to exit code 1.
Programming errors (TypeError, ValueError from misuse) are left alone.
"""


class DomainError(Exception):
    """Base class for all domain-level failures."""


class PoleEvaluationError(DomainError):
    """Transfer function evaluated exactly on one of its poles."""

    def __init__(self, f_hz: float):
        self.f_hz = f_hz
        super().__init__(f"evaluation at f = {f_hz:g} Hz hits a pole")


class NoCrossoverError(DomainError):
    """Loop magnitude never crosses unity inside the search band."""


class UntunableError(DomainError):
    """Controller synthesis impossible for the given plant and target."""


class InfeasibleOperatingPointError(DomainError):
    """Requested power exceeds what the source can deliver."""


class SimulationDivergedError(DomainError):
    """Integration produced a non-finite state.

    A legitimate outcome for unstable constant-power-load scenarios; the
    divergence time is preserved so callers can report it.
    """

    def __init__(self, t: float):
        self.t = t
        super().__init__(f"simulation diverged at t = {t:.6g} s")


class FitError(DomainError):
    """Base class for identification failures."""


class NoStepError(FitError):
    """Signal contains no detectable step at the requested time."""


class NonFirstOrderError(FitError):
    """63.2 % crossing not found; response is not first-order-like."""


class DegenerateDataError(FitError):
    """Regression input is rank deficient (e.g. all x values identical)."""


class ConfigError(DomainError):
    """Scenario/parameter file rejected, with the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
