"""Exception types raised across the package."""


class HerdsigError(Exception):
    """Base class for every error raised by herdsig."""


# audio_io
class MalformedContainer(HerdsigError, ValueError):
    pass


class UnsupportedEncoding(HerdsigError, ValueError):
    pass


class EmptyAudio(HerdsigError, ValueError):
    pass


class ClipTooShort(HerdsigError, ValueError):
    pass


# dsp
class NonPowerOfTwoSize(HerdsigError, ValueError):
    pass


class ZeroEnergyFrame(HerdsigError, ValueError):
    pass


class TooManyFilters(HerdsigError, ValueError):
    pass


# features
class NoVoicedFrames(HerdsigError):
    pass


class FormantsUnresolved(HerdsigError):
    pass


# ontology
class MissingCoreFeature(HerdsigError, ValueError):
    pass


# synth
class NyquistViolation(HerdsigError, ValueError):
    pass


# classifiers
class ClassTooSmall(HerdsigError, ValueError):
    pass


class EmptyTrainingSet(HerdsigError, ValueError):
    pass


class DimensionMismatch(HerdsigError, ValueError):
    pass


class NotStandardized(HerdsigError, ValueError):
    pass


class EmptySequence(HerdsigError, ValueError):
    pass


class SchemaMismatch(HerdsigError, ValueError):
    pass


# evaluation
class LengthMismatch(HerdsigError, ValueError):
    pass


class SingleClassInput(HerdsigError, ValueError):
    pass


class IoFailure(HerdsigError, OSError):
    pass
