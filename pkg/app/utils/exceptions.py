"""
Domain exceptions.

Every failure the toolkit raises derives from DispatchError and carries an
upper-snake `code` that the HTTP layer copies into ErrorBody.code and the CLI
maps onto its exit status.
"""
from typing import Optional


class DispatchError(Exception):
    """Base class for all toolkit errors."""
    code: str = "DISPATCH_ERROR"

    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        self.message = message
        if code is not None:
            self.code = code


class InvalidArgumentError(DispatchError):
    code = "INVALID_ARGUMENT"


class InvalidModelError(DispatchError):
    code = "INVALID_MODEL"


class InvalidWeightsError(DispatchError):
    code = "INVALID_WEIGHTS"


class KeyGenerationError(DispatchError):
    code = "KEY_GENERATION_FAILURE"


class InvalidKeyError(DispatchError):
    code = "INVALID_KEY"


class InvalidPlacementError(DispatchError):
    code = "INVALID_PLACEMENT"


class SolverError(DispatchError):
    code = "SOLVER_ERROR"


class UnavailableError(DispatchError):
    code = "UNAVAILABLE"


class UndefinedReferenceError(DispatchError):
    code = "UNDEFINED_REFERENCE"


class ScenarioError(DispatchError):
    """Scenario file failed to parse or validate; `findings` lists each problem."""
    code = "SCENARIO_INVALID"

    def __init__(self, message: str, findings: Optional[list[str]] = None):
        super().__init__(message)
        self.findings = findings or []

    def __str__(self) -> str:
        if not self.findings:
            return self.message
        return self.message + "\n" + "\n".join(f"  - {item}" for item in self.findings)


class ProtocolAbortedError(DispatchError):
    code = "PROTOCOL_ABORTED"
