class LidepthError(Exception):
    """Base error; exit_code is what the CLI exits with"""
    exit_code = 1


class ParseError(LidepthError):
    exit_code = 3


class MalformedScanError(ParseError):
    """Velodyne scan whose size is not a whole number of records"""


class CalibrationParseError(ParseError):
    """Missing key, wrong value count or non-rigid extrinsic in calib.txt"""


class PoseParseError(ParseError):
    """Pose or timestamp line that cannot be parsed"""


class DepthDecodeError(ParseError):
    """PNG that is not a single-channel 16-bit depth image"""


class ShapeError(LidepthError):
    exit_code = 4


class EmptyEvaluationError(LidepthError):
    exit_code = 5


class DataIOError(LidepthError):
    exit_code = 6


class DepthEncodeError(DataIOError):
    """Depth that does not fit the 16-bit PNG encoding"""
