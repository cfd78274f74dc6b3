"""Binary RTCM-style framing and message codecs."""

from .bits import BitReader, BitWriter
from .frame import FrameReader, crc24q, decode_frame, encode_frame, message_number
from .msm import MSM_MESSAGES, DecodedMsm, DecodedObservation, decode_msm4, encode_msm4
from .station import STATION_MESSAGE, StationMessage, decode_station, encode_station

__all__ = [
    "BitReader", "BitWriter", "FrameReader", "crc24q", "decode_frame", "encode_frame",
    "message_number", "MSM_MESSAGES", "DecodedMsm", "DecodedObservation", "decode_msm4",
    "encode_msm4", "STATION_MESSAGE", "StationMessage", "decode_station", "encode_station",
]
