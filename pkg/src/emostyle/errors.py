"""Exception types raised across the toolkit."""


class EmostyleError(Exception):
    """Base class for all toolkit errors."""


# dsp
class ClipTooShort(EmostyleError, ValueError):
    pass


class ParamMismatch(EmostyleError, ValueError):
    pass


class NegativeFrequency(EmostyleError, ValueError):
    pass


class BadBand(EmostyleError, ValueError):
    pass


class TooManyCoeffs(EmostyleError, ValueError):
    pass


# autograd
class ShapeMismatch(EmostyleError, ValueError):
    pass


class BadLabel(EmostyleError, ValueError):
    pass


class NonScalarLoss(EmostyleError, ValueError):
    pass


class GraphConsumed(EmostyleError, RuntimeError):
    pass


class NonFiniteError(EmostyleError, FloatingPointError):
    """A forward or backward pass produced NaN or Inf."""


# models
class EmptySpectrogram(EmostyleError, ValueError):
    pass


class BatchTooSmall(EmostyleError, ValueError):
    pass


class EmptyManifest(EmostyleError, ValueError):
    pass


class SingleClass(EmostyleError, ValueError):
    pass


class EmptyInput(EmostyleError, ValueError):
    pass


class EmptyFeatures(EmostyleError, ValueError):
    pass


class BandMismatch(EmostyleError, ValueError):
    pass


class NanLoss(EmostyleError, FloatingPointError):
    """Training produced a non-finite loss; ``step`` names the offending update."""

    def __init__(self, step, losses):
        self.step = step
        self.losses = losses
        super().__init__(f"non-finite loss at step {step}: {losses}")


# corpus
class Unparseable(EmostyleError, ValueError):
    pass


class Excluded(EmostyleError, ValueError):
    """Filename is well formed but carries an emotion outside the six-way taxonomy."""


class NoFilesFound(EmostyleError, FileNotFoundError):
    pass


class UnsupportedCodec(EmostyleError, ValueError):
    pass


class CorruptFile(EmostyleError, ValueError):
    pass


# checkpoints
class CorruptCheckpoint(EmostyleError, ValueError):
    pass


class VersionMismatch(EmostyleError, ValueError):
    pass
