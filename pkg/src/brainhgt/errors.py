"""Exception hierarchy. Each class carries the process exit code the CLI uses."""


class BrainHGTError(Exception):
    exit_code = 1


class BadConfig(BrainHGTError):
    exit_code = 2


class IoError(BrainHGTError):
    exit_code = 3


class ConstantRow(BrainHGTError):
    exit_code = 10

    def __init__(self, row):
        super().__init__(f"ROI {row} has zero variance")
        self.row = row


class EmptyGraph(BrainHGTError):
    exit_code = 11


class DenseWeightZero(BrainHGTError):
    exit_code = 12


class DisconnectedInput(BrainHGTError):
    exit_code = 13


class BadShape(BrainHGTError):
    exit_code = 20


class RankDeficient(BrainHGTError):
    exit_code = 21

    def __init__(self, row):
        super().__init__(f"row {row} is linearly dependent on the previous rows")
        self.row = row


class ShapeMismatch(BrainHGTError):
    exit_code = 22


class NotScalar(BrainHGTError):
    exit_code = 23


class EmptySet(BrainHGTError):
    exit_code = 30


class EmptyGroup(BrainHGTError):
    exit_code = 31


class Diverged(BrainHGTError):
    exit_code = 40


class SingleClassSplit(BrainHGTError):
    exit_code = 41


class ChecksumMismatch(BrainHGTError):
    exit_code = 50


class MissingArtifact(BrainHGTError):
    exit_code = 51


EXIT_CODES = {
    cls.__name__: cls.exit_code
    for cls in (
        BrainHGTError, BadConfig, IoError, ConstantRow, EmptyGraph, DenseWeightZero,
        DisconnectedInput, BadShape, RankDeficient, ShapeMismatch, NotScalar, EmptySet,
        EmptyGroup, Diverged, SingleClassSplit, ChecksumMismatch, MissingArtifact,
    )
}
