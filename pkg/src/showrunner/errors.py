"""Error types shared across the service.

Every error carries a stable ``code`` so the HTTP layer and the CLI can map
failures to {error_code, message} payloads without string matching.
"""


class ShowError(Exception):
    code = "ShowError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


def _error(name: str, base=ShowError):
    return type(name, (base,), {"code": name})


# ingest
RoundClosed = _error("RoundClosed")
MalformedPayload = _error("MalformedPayload")
ImageTooLarge = _error("ImageTooLarge")
ShowFull = _error("ShowFull")

# orchestrator
UnknownTask = _error("UnknownTask")
QueueClosed = _error("QueueClosed")
UnknownJob = _error("UnknownJob")
NoCompletedJobs = _error("NoCompletedJobs")

# pipelines
MissingStyleRef = _error("MissingStyleRef")
FriezeTooLarge = _error("FriezeTooLarge")
DegeneratePose = _error("DegeneratePose")
TooFewSteps = _error("TooFewSteps")


class BackendFailure(ShowError):
    """A model backend failed at a named stage; retryability is carried along."""

    code = "BackendFailure"

    def __init__(self, stage: str, message: str = "", transient: bool = True):
        super().__init__(message or f"backend failure at stage {stage}")
        self.stage = stage
        self.transient = transient


# moderation
DuplicateAsset = _error("DuplicateAsset")
AlreadyDecided = _error("AlreadyDecided")
UnknownTicket = _error("UnknownTicket")

# oracle
InsufficientMoves = _error("InsufficientMoves")
NoVisibleKeypoints = _error("NoVisibleKeypoints")
EmptySequence = _error("EmptySequence")
TooFewFrames = _error("TooFewFrames")

# stage sink
GateViolation = _error("GateViolation")
ShowClosed = _error("ShowClosed")
ShowOpen = _error("ShowOpen")

# showctl
MalformedRecording = _error("MalformedRecording")
BadConfig = _error("BadConfig")
UnknownShow = _error("UnknownShow")
