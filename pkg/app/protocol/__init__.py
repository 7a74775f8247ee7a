from app.protocol.leakage import BlaSecrets, inspect_transcript
from app.protocol.messages import ABORT, DISPATCH_COMMAND, DSO, MASKED_STATE_RESULT, UPLOAD_MASKED_MODEL
from app.protocol.runner import ProtocolOutcome, run_protocol, run_protocol_async
from app.protocol.transcript import ProtocolTranscript, TranscriptRecord

__all__ = [
    "BlaSecrets",
    "inspect_transcript",
    "ABORT",
    "DISPATCH_COMMAND",
    "DSO",
    "MASKED_STATE_RESULT",
    "UPLOAD_MASKED_MODEL",
    "ProtocolOutcome",
    "run_protocol",
    "run_protocol_async",
    "ProtocolTranscript",
    "TranscriptRecord",
]
