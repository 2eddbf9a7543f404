"""Exception hierarchy shared by every stage of the transform."""


class TeggError(Exception):
    """Base class for all errors raised by this package."""


class WavFormatError(TeggError):
    """The file is not a RIFF/WAVE container we can parse."""


class ChannelCountError(WavFormatError):
    def __init__(self, expected, found):
        self.expected = expected
        self.found = found
        super().__init__(f"expected {expected} channels, found {found}")


class UnsupportedEncodingError(WavFormatError):
    """PCM width or sample format outside 16/24/32-bit int and float32."""


class NoVoicedFramesError(TeggError):
    def __init__(self, msg="no voiced frames"):
        super().__init__(msg)


class SilentEggError(TeggError):
    def __init__(self, msg="EGG channel is silent: every modulation frame was guarded"):
        super().__init__(msg)


class F0EstimationError(TeggError):
    def __init__(self, msg="cannot estimate f0"):
        super().__init__(msg)


class UnstableFilterError(TeggError):
    """All-pole denominator vanishes on the evaluation grid."""


class DegenerateFrameError(TeggError):
    """Frame has no energy or its autocorrelation cannot be solved."""
