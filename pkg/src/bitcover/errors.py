"""Exception types shared across the toolkit."""


class BitcoverError(Exception):
    """Base class for all errors raised by this package."""


# bitstream parsing

class NoStartCode(BitcoverError):
    """No Annex B start code in the first 64 KiB.

    Usually means the input is a container (MP4/MKV) rather than a raw
    elementary stream; demux first, e.g.
    ``ffmpeg -i input.mp4 -c:v copy -bsf:v h264_mp4toannexb out.264``.
    """


class OutOfBits(BitcoverError):
    """A bit-level read ran past the end of the buffer."""


# series / tensors

class ShapeMismatch(BitcoverError):
    """Window lengths, channel counts or label shapes disagree."""


# stats

class EmptyInput(BitcoverError):
    """An operation that needs at least one sample got none."""


class BinMismatch(BitcoverError):
    """Histograms being compared do not share bin edges."""


class InsufficientClips(BitcoverError):
    """A class has too few clips for pairwise divergence estimates."""


# dtw

class EmptySeries(BitcoverError):
    """DTW requires non-empty series on both sides."""


class BandTooNarrow(BitcoverError):
    """The Sakoe-Chiba band excludes the final alignment cell."""


class EmptyTrainSet(BitcoverError):
    """k-NN classification needs at least k training examples."""


# model

class EmptyDataset(BitcoverError):
    """Training requires non-empty train and validation sets."""


class DivergedLoss(BitcoverError):
    """A non-finite loss or parameter was detected during training."""


class CorruptCheckpoint(BitcoverError):
    """Checkpoint failed checksum, magic or manifest validation."""


class VersionMismatch(BitcoverError):
    """Checkpoint format version or model configuration is incompatible."""


# dataset / manifests

class ParseError(BitcoverError):
    """Malformed manifest file; message carries the line number."""


class UnknownLabel(BitcoverError):
    """A label occurs fewer times than the strict-mode minimum."""


class ClassTooSmall(BitcoverError):
    """Stratified splitting needs at least two clips per class."""


class LengthMismatch(BitcoverError):
    """Prediction and label sequences differ in length."""
