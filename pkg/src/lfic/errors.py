"""Exception hierarchy shared by every stage of the codec."""


class LficError(Exception):
    """Base class for all errors raised by this package."""


class PnmError(LficError, ValueError):
    pass


class PnmUnsupportedFormat(PnmError):
    pass


class PnmHeaderError(PnmError):
    pass


class PnmMaxvalError(PnmError):
    pass


class PnmTruncatedError(PnmError):
    pass


class ContainerError(LficError, ValueError):
    pass


class BadMagicError(ContainerError):
    pass


class UnsupportedVersionError(ContainerError):
    pass


class ChecksumMismatchError(ContainerError):
    pass


class TruncatedContainerError(ContainerError):
    pass


class ContainerParamError(ContainerError):
    """Header field outside the encodable range."""


class CoderError(LficError, ValueError):
    pass


class TruncatedStreamError(CoderError):
    pass


class MosaicMaskMismatch(LficError, ValueError):
    """Quantized mosaic is not constant over the tiles implied by the mask."""


class WeightsFormatError(LficError, ValueError):
    pass


class NothingRefinable(LficError):
    pass
