"""Exception hierarchy for the pded package.

Every error raised deliberately by this package derives from PdedError so
the CLI can map them to a stable exit code and message prefix.
"""


class PdedError(Exception):
    """Base class for all pded errors."""


# --- expression parsing / printing ---

class MalformedEquation(PdedError):
    """Candidate equation text does not conform to the accepted grammar."""


class CoefficientLengthMismatch(PdedError):
    """Coefficient vector length differs from the number of terms."""


# --- numerics / regression assembly ---

class UnsupportedOrder(PdedError):
    """Requested derivative order/axis combination is not available."""


class SingularFactor(PdedError):
    """A term cannot be evaluated on this dataset (e.g. 1/x across x=0)."""


class EmptySplit(PdedError):
    """The requested train/test split contains no usable interior samples."""


# --- fitting ---

class DegenerateProblem(PdedError):
    """Regression problem has too few samples for its column count."""


class ZeroVariance(PdedError):
    """Target vector has zero variance; normalized metrics are undefined."""


# --- Gaussian process surrogate ---

class InsufficientData(PdedError):
    """Not enough observations to fit the surrogate."""


# --- strategy bank ---

class BankFormatError(PdedError):
    """Bank file is missing, unparseable, or structurally invalid."""


class DuplicateId(BankFormatError):
    """Two strategies share an id."""


class EmptyText(BankFormatError):
    """A strategy has empty instruction text."""


# --- proposer backends ---

class ProposerError(PdedError):
    """Base class for proposer backend failures."""


class Timeout(ProposerError):
    """Backend did not answer within the configured deadline."""


class HttpError(ProposerError):
    """Non-retryable HTTP failure from the completion endpoint."""

    def __init__(self, status: int, message: str = ""):
        self.status = status
        super().__init__(f"HTTP {status}" + (f": {message}" if message else ""))


class RateLimited(ProposerError):
    """HTTP 429 persisted through all retries."""


class ReplayMiss(ProposerError):
    """No recorded response remains for the requested prompt digest."""


# --- solver / dataset persistence ---

class SolverDiverged(PdedError):
    """Time integration produced non-finite state or failed to converge."""


class StepSizeUnderflow(SolverDiverged):
    """Adaptive stepper shrank the step below the resolvable minimum."""


class FormatError(PdedError):
    """Dataset file is truncated or structurally invalid."""


class ChecksumMismatch(FormatError):
    """Dataset payload does not match its stored CRC32."""


# --- engine persistence ---

class CheckpointFormatError(PdedError):
    """Checkpoint file is unreadable or missing required fields."""


class BackendMismatch(PdedError):
    """Checkpoint does not match the current config/dataset."""


class NoRuns(PdedError):
    """Report requested over a directory with no completed run logs."""
