"""Exception hierarchy. Every error carries a stable ``code`` string."""


class PushGraspError(Exception):
    code = "ERROR"


class PlacementExhausted(PushGraspError):
    code = "PLACEMENT-EXHAUSTED"


class SceneParseError(PushGraspError):
    code = "PARSE-ERROR"

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class NonSquareGrid(PushGraspError):
    code = "NON-SQUARE-GRID"


class EmptyMask(PushGraspError):
    code = "EMPTY-MASK"


class ShapeMismatch(PushGraspError):
    code = "SHAPE-MISMATCH"


class NonFiniteLoss(PushGraspError):
    code = "NON-FINITE-LOSS"


class VersionMismatch(PushGraspError):
    code = "VERSION-MISMATCH"


class CorruptFile(PushGraspError):
    code = "CORRUPT-FILE"


class CheckpointNotFound(PushGraspError):
    code = "CHECKPOINT-NOT-FOUND"


class RelabelOnGoal(PushGraspError):
    code = "RELABEL-ON-GOAL"


class EpisodeNotFound(PushGraspError):
    code = "EPISODE-NOT-FOUND"


class EmptyBuffer(PushGraspError):
    code = "EMPTY-BUFFER"


class ConfigError(PushGraspError):
    code = "CONFIG-ERROR"
