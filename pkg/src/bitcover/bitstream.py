"""H.264 Annex B parsing: per-frame compressed sizes without decoding.

Splits an elementary stream into NAL units, groups them into access units
(coded pictures), tags each picture I/P/B from its first slice header, and
emits the per-picture size series in decode order.  Only start codes, NAL
headers and the first two Exp-Golomb fields of slice headers are ever
inspected; no entropy decoding of picture data takes place.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import NoStartCode, OutOfBits

START_CODE = b"\x00\x00\x01"
# A start code must begin within this prefix or the input is presumed to be
# a container format rather than a raw stream.
START_CODE_SEARCH_WINDOW = 64 * 1024

NAL_SLICE_NON_IDR = 1
NAL_SLICE_IDR = 5
NAL_SEI = 6
NAL_SPS = 7
NAL_PPS = 8
NAL_AUD = 9

# Coded slice types 1..5 carry picture data and delimit pictures.
VCL_TYPES = frozenset(range(1, 6))

# Emulation-prevention removal is bounded: two ue(v) fields never need more.
SLICE_HEADER_PROBE_BYTES = 32


class FrameType(enum.Enum):
    I = "I"
    P = "P"
    B = "B"
    UNKNOWN = "U"

    def __str__(self) -> str:
        return self.value


# slice_type (mod-5 family) to picture type; SP maps to P, SI maps to I.
_SLICE_TYPE_MAP = {
    0: FrameType.P, 5: FrameType.P,
    1: FrameType.B, 6: FrameType.B,
    2: FrameType.I, 7: FrameType.I,
    3: FrameType.P, 8: FrameType.P,   # SP
    4: FrameType.I, 9: FrameType.I,   # SI
}


@dataclass(frozen=True)
class NalUnit:
    """One NAL unit located in the stream.

    ``payload_size_bytes`` excludes the start code but includes any trailing
    zero padding up to the next unit's start code, so start codes plus
    payloads tile the stream exactly from the first start code onward.
    """

    byte_offset: int
    payload_size_bytes: int
    nal_unit_type: int
    nal_ref_idc: int
    start_code_len: int
    forbidden_zero_violation: bool = False
    truncated: bool = False

    @property
    def total_size_bytes(self) -> int:
        return self.start_code_len + self.payload_size_bytes

    @property
    def payload_offset(self) -> int:
        return self.byte_offset + self.start_code_len

    @property
    def is_vcl(self) -> bool:
        return self.nal_unit_type in VCL_TYPES


@dataclass(frozen=True)
class AccessUnit:
    """One coded picture: its decode-order index, total coded size and type."""

    index: int
    size_bits: int
    frame_type: FrameType
    nal_count: int


@dataclass
class FrameSizeSeries:
    """Per-picture compressed sizes (bits) in decode order, with I/P/B tags."""

    values: list[int]
    frame_types: list[FrameType]
    source_id: str
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.values)

    def frame_type_string(self) -> str:
        return "".join(t.value for t in self.frame_types)


class BitReader:
    """MSB-first bit cursor over a byte buffer (emulation bytes pre-removed)."""

    __slots__ = ("_data", "_pos", "_end")

    def __init__(self, data: bytes, bit_pos: int = 0):
        self._data = data
        self._pos = bit_pos
        self._end = len(data) * 8

    @property
    def bit_position(self) -> int:
        return self._pos

    def bits_remaining(self) -> int:
        return self._end - self._pos

    def read_bit(self) -> int:
        if self._pos >= self._end:
            raise OutOfBits("bit read past end of buffer")
        p = self._pos
        self._pos = p + 1
        return (self._data[p >> 3] >> (7 - (p & 7))) & 1

    def read_bits(self, count: int) -> int:
        value = 0
        for _ in range(count):
            value = (value << 1) | self.read_bit()
        return value

    def read_ue(self) -> int:
        """Read one unsigned Exp-Golomb codeword (ue(v))."""
        zeros = 0
        while self.read_bit() == 0:
            zeros += 1
        return (1 << zeros | self.read_bits(zeros)) - 1


def read_exp_golomb(data: bytes, bit_pos: int = 0) -> tuple[int, int]:
    """Decode one ue(v) starting at ``bit_pos``; returns (value, new position).

    Raises OutOfBits when the codeword runs past the buffer (a run of 2z+1
    bits is required once z leading zeros have been seen).
    """
    reader = BitReader(data, bit_pos)
    value = reader.read_ue()
    return value, reader.bit_position


def strip_emulation_prevention(payload: bytes, limit: int | None = None) -> bytes:
    """Remove 0x000003 emulation-prevention bytes from a NAL payload prefix."""
    if limit is not None:
        payload = payload[:limit]
    if b"\x00\x00\x03" not in payload:
        return payload
    out = bytearray()
    zeros = 0
    for byte in payload:
        if zeros >= 2 and byte == 3:
            zeros = 0
            continue
        out.append(byte)
        zeros = zeros + 1 if byte == 0 else 0
    return bytes(out)


def scan_nal_units(stream: bytes) -> list[NalUnit]:
    """Locate every NAL unit in an Annex B stream.

    A 0x000001 match preceded by a zero byte is treated as a 4-byte start
    code; zeros beyond that single zero_byte count as trailing padding of the
    previous unit.  Returns [] for empty input; raises NoStartCode when a
    non-empty prefix of 64 KiB contains no start code.
    """
    if not stream:
        return []
    first = stream.find(START_CODE, 0, START_CODE_SEARCH_WINDOW + 2)
    if first == -1:
        raise NoStartCode(
            "no Annex B start code in the first 64 KiB; "
            "MP4/MKV input must be demuxed to a raw .264 stream first"
        )

    # Collect (start, header_pos) for every start code, folding one zero_byte
    # into a 4-byte code.
    starts: list[tuple[int, int]] = []
    pos = first
    n = len(stream)
    while pos != -1:
        begin = pos - 1 if pos > 0 and stream[pos - 1] == 0 else pos
        starts.append((begin, pos + 3))
        pos = stream.find(START_CODE, pos + 3)

    units: list[NalUnit] = []
    for i, (begin, header_pos) in enumerate(starts):
        payload_end = starts[i + 1][0] if i + 1 < len(starts) else n
        payload_size = payload_end - header_pos
        if payload_size > 0:
            header = stream[header_pos]
            unit = NalUnit(
                byte_offset=begin,
                payload_size_bytes=payload_size,
                nal_unit_type=header & 0x1F,
                nal_ref_idc=(header >> 5) & 0x3,
                start_code_len=header_pos - begin,
                forbidden_zero_violation=bool(header & 0x80),
            )
        else:
            # Bare start code at EOF or two adjacent codes: header unreadable.
            unit = NalUnit(
                byte_offset=begin,
                payload_size_bytes=0,
                nal_unit_type=0,
                nal_ref_idc=0,
                start_code_len=header_pos - begin,
                truncated=True,
            )
        units.append(unit)
    return units


def _slice_header_fields(unit: NalUnit, stream: bytes) -> tuple[int, int] | None:
    """Return (first_mb_in_slice, slice_type) of a VCL unit, or None."""
    start = unit.payload_offset + 1  # skip the NAL header byte
    raw = stream[start:start + SLICE_HEADER_PROBE_BYTES]
    rbsp = strip_emulation_prevention(raw)
    try:
        reader = BitReader(rbsp)
        first_mb = reader.read_ue()
        slice_type = reader.read_ue()
    except OutOfBits:
        return None
    return first_mb, slice_type


def classify_frame_type(au_nals: Sequence[NalUnit], stream: bytes) -> FrameType:
    """Picture type from the first VCL unit's slice header; IDR forces I."""
    for unit in au_nals:
        if not unit.is_vcl:
            continue
        if unit.nal_unit_type == NAL_SLICE_IDR:
            return FrameType.I
        fields = _slice_header_fields(unit, stream)
        if fields is None:
            return FrameType.UNKNOWN
        return _SLICE_TYPE_MAP.get(fields[1], FrameType.UNKNOWN)
    return FrameType.UNKNOWN


def group_access_units(
    nals: Sequence[NalUnit], stream: bytes
) -> tuple[list[AccessUnit], list[str]]:
    """Group NAL units into access units (coded pictures).

    A new AU starts at an access unit delimiter, or at a VCL unit whose
    slice header has first_mb_in_slice == 0 while the AU in progress already
    holds a VCL unit.  Non-VCL units (SPS/PPS/SEI) belong to the following
    picture; trailing non-VCL units fold into the last AU so that the sum of
    AU sizes equals the stream size exactly.  Bytes before the first start
    code are counted into the first AU for the same reason.

    Returns the AU list plus human-readable warnings (no-VCL streams yield
    an empty list and a warning rather than an error).
    """
    warnings: list[str] = []
    if not nals:
        return [], warnings

    groups: list[list[NalUnit]] = []
    current: list[NalUnit] = []
    current_has_vcl = False

    def close_at_last_vcl() -> None:
        nonlocal current, current_has_vcl
        split = max(i for i, u in enumerate(current) if u.is_vcl) + 1
        groups.append(current[:split])
        current = current[split:]
        current_has_vcl = False

    for unit in nals:
        if unit.nal_unit_type == NAL_AUD:
            if current_has_vcl:
                close_at_last_vcl()
            current.append(unit)
        elif unit.is_vcl:
            fields = _slice_header_fields(unit, stream)
            first_mb = fields[0] if fields is not None else 0
            if current_has_vcl and first_mb == 0:
                close_at_last_vcl()
            current.append(unit)
            current_has_vcl = True
        else:
            current.append(unit)

    if current:
        if current_has_vcl:
            groups.append(current)
        elif groups:
            groups[-1].extend(current)
        else:
            warnings.append("stream contains no VCL NAL units; no access units")
            return [], warnings

    lead_in = nals[0].byte_offset
    if lead_in:
        warnings.append(f"{lead_in} byte(s) before first start code counted into first AU")

    aus = []
    for index, members in enumerate(groups):
        size_bytes = sum(u.total_size_bytes for u in members)
        if index == 0:
            size_bytes += lead_in
        aus.append(
            AccessUnit(
                index=index,
                size_bits=8 * size_bytes,
                frame_type=classify_frame_type(members, stream),
                nal_count=len(members),
            )
        )
    return aus, warnings


def extract_frame_sizes_from_bytes(stream: bytes, source_id: str) -> FrameSizeSeries:
    """Scan, group and classify a stream held in memory."""
    nals = scan_nal_units(stream)
    if not nals:
        raise NoStartCode("empty stream")
    aus, warnings = group_access_units(nals, stream)
    if any(u.truncated for u in nals):
        warnings.append("final NAL unit truncated (bare start code)")
    if any(u.forbidden_zero_violation for u in nals):
        warnings.append("forbidden_zero_bit violation in at least one NAL header")
    return FrameSizeSeries(
        values=[au.size_bits for au in aus],
        frame_types=[au.frame_type for au in aus],
        source_id=source_id,
        warnings=warnings,
    )


def extract_frame_sizes(path: str | Path) -> FrameSizeSeries:
    """Extract the frame-size series from an Annex B file in one pass."""
    path = Path(path)
    data = path.read_bytes()
    return extract_frame_sizes_from_bytes(data, source_id=str(path))


# serialization: one JSON object per stream, integers only

def series_to_json(series: FrameSizeSeries) -> str:
    return json.dumps(
        {
            "source_id": series.source_id,
            "sizes_bits": series.values,
            "frame_types": series.frame_type_string(),
        },
        sort_keys=True,
    )


def series_from_json(line: str) -> FrameSizeSeries:
    obj = json.loads(line)
    return FrameSizeSeries(
        values=[int(v) for v in obj["sizes_bits"]],
        frame_types=[FrameType(c) for c in obj["frame_types"]],
        source_id=obj["source_id"],
    )


def write_series_jsonl(series_list: Iterable[FrameSizeSeries], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for series in series_list:
            fh.write(series_to_json(series) + "\n")


def read_series_jsonl(path: str | Path) -> list[FrameSizeSeries]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(series_from_json(line))
    return out


def write_series_csv(series: FrameSizeSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "size_bits", "frame_type"])
        for i, (size, ftype) in enumerate(zip(series.values, series.frame_types)):
            writer.writerow([i, size, ftype.value])
