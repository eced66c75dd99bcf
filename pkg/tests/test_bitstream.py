import json

import pytest

from bitcover.bitstream import (
    BitReader,
    FrameType,
    extract_frame_sizes,
    extract_frame_sizes_from_bytes,
    group_access_units,
    read_exp_golomb,
    read_series_jsonl,
    scan_nal_units,
    series_from_json,
    series_to_json,
    strip_emulation_prevention,
    write_series_csv,
    write_series_jsonl,
)
from bitcover.errors import NoStartCode, OutOfBits

from conftest import FIXTURE_DIR, FIXTURE_STEMS, BitWriter, make_nal, make_slice_nal


class TestScan:
    def test_two_units_hand_stream(self):
        # 4-byte code + SPS payload (2 bytes), 3-byte code + PPS payload (2 bytes)
        stream = bytes.fromhex("00000001" "6742" "000001" "68ce")
        units = scan_nal_units(stream)
        assert len(units) == 2
        sps, pps = units
        assert (sps.byte_offset, sps.start_code_len, sps.payload_size_bytes) == (0, 4, 2)
        assert sps.nal_unit_type == 7
        assert (pps.byte_offset, pps.start_code_len, pps.payload_size_bytes) == (6, 3, 2)
        assert pps.nal_unit_type == 8
        # every byte accounted for
        assert sum(u.total_size_bytes for u in units) == len(stream)

    def test_empty_input(self):
        assert scan_nal_units(b"") == []

    def test_no_start_code_raises(self):
        with pytest.raises(NoStartCode):
            scan_nal_units(b"\xde\xad\xbe\xef" * 10)

    def test_trailing_padding_assigned_to_previous_unit(self):
        # two zero pad bytes then a 3-byte start code: pads stay with unit 0
        stream = make_nal(7, b"\x42") + b"\x00\x00" + b"\x00\x00\x01" + b"\x68"
        units = scan_nal_units(stream)
        assert len(units) == 2
        # one of the pad zeros merges into the next unit's 4-byte start code
        assert units[0].payload_size_bytes == 3
        assert units[1].start_code_len == 4
        assert sum(u.total_size_bytes for u in units) == len(stream)

    def test_bare_trailing_start_code_flagged_truncated(self):
        stream = make_nal(7, b"\x42") + b"\x00\x00\x01"
        units = scan_nal_units(stream)
        assert units[-1].truncated
        assert units[-1].payload_size_bytes == 0

    def test_forbidden_zero_bit_recorded_not_fatal(self):
        stream = b"\x00\x00\x01" + bytes([0x80 | 7]) + b"\x11"
        units = scan_nal_units(stream)
        assert units[0].forbidden_zero_violation

    def test_offsets_strictly_increase_and_spans_contiguous(self, fixture_streams):
        for stream in fixture_streams.values():
            units = scan_nal_units(stream)
            assert all(b.byte_offset > a.byte_offset for a, b in zip(units, units[1:]))
            for a, b in zip(units, units[1:]):
                assert a.byte_offset + a.total_size_bytes == b.byte_offset
            last = units[-1]
            assert last.byte_offset + last.total_size_bytes == len(stream)

    def test_fixture_unit_count_nonzero(self, fixture_streams):
        for stream in fixture_streams.values():
            assert len(scan_nal_units(stream)) > 10


class TestExpGolomb:
    def test_shortest_codeword(self):
        value, pos = read_exp_golomb(b"\x80")  # bits 1...
        assert (value, pos) == (0, 1)

    def test_hand_values(self):
        # 010... -> 1
        assert read_exp_golomb(b"\x40")[0] == 1
        # 00111... -> z=2, read 111 = 7, result 6
        assert read_exp_golomb(b"\x38")[0] == 6

    def test_out_of_bits_on_zero_run(self):
        with pytest.raises(OutOfBits):
            read_exp_golomb(b"\x00\x00")

    def test_out_of_bits_mid_codeword(self):
        # 15 zeros then 1: needs 16 more bits that are not there
        with pytest.raises(OutOfBits):
            read_exp_golomb(b"\x00\x01")

    def test_round_trip_all_16_bit_values(self):
        # oracle: independent encoder in conftest
        writer = BitWriter()
        values = list(range(0, 1 << 16, 7)) + [0, 1, 2, 65534, 65535]
        for v in values:
            writer.write_ue(v)
        data = writer.to_bytes()
        reader = BitReader(data)
        for v in values:
            assert reader.read_ue() == v

    def test_sequential_reads_advance_cursor(self):
        data = BitWriter().write_ue(3).write_ue(0).write_ue(9).to_bytes()
        v1, p1 = read_exp_golomb(data, 0)
        v2, p2 = read_exp_golomb(data, p1)
        v3, _ = read_exp_golomb(data, p2)
        assert (v1, v2, v3) == (3, 0, 9)


class TestEmulationPrevention:
    def test_single_removal(self):
        assert strip_emulation_prevention(b"\x00\x00\x03\x01") == b"\x00\x00\x01"

    def test_cascade(self):
        stripped = strip_emulation_prevention(b"\x00\x00\x03\x00\x00\x03\x01")
        assert stripped == b"\x00\x00\x00\x00\x01"

    def test_plain_passthrough(self):
        assert strip_emulation_prevention(b"\x12\x34\x56") == b"\x12\x34\x56"

    def test_limit(self):
        data = b"\xaa" * 40
        assert strip_emulation_prevention(data, limit=32) == data[:32]


class TestGrouping:
    def test_sps_pps_attach_to_first_au(self):
        stream = (
            make_nal(7, b"\x42\x00\x1e")
            + make_nal(8, b"\xce")
            + make_slice_nal(5, first_mb=0, slice_type=7)
            + make_slice_nal(1, first_mb=0, slice_type=0)
            + make_slice_nal(1, first_mb=0, slice_type=0)
        )
        aus, warnings = group_access_units(scan_nal_units(stream), stream)
        assert len(aus) == 3
        assert aus[0].nal_count == 3  # SPS + PPS + IDR
        assert [au.frame_type for au in aus] == [FrameType.I, FrameType.P, FrameType.P]
        assert sum(au.size_bits for au in aus) == 8 * len(stream)
        assert warnings == []

    def test_two_slices_per_picture_group_into_one_au(self):
        stream = (
            make_slice_nal(5, first_mb=0, slice_type=7)
            + make_slice_nal(5, first_mb=40, slice_type=7)
            + make_slice_nal(1, first_mb=0, slice_type=0)
            + make_slice_nal(1, first_mb=40, slice_type=0)
        )
        aus, _ = group_access_units(scan_nal_units(stream), stream)
        assert len(aus) == 2
        assert aus[0].nal_count == 2
        assert aus[1].nal_count == 2

    def test_aud_starts_new_au(self):
        stream = (
            make_nal(9, b"\x10")
            + make_slice_nal(1, first_mb=0, slice_type=0)
            + make_nal(9, b"\x10")
            + make_slice_nal(1, first_mb=0, slice_type=1)
        )
        aus, _ = group_access_units(scan_nal_units(stream), stream)
        assert len(aus) == 2
        assert aus[0].nal_count == 2
        assert [au.frame_type for au in aus] == [FrameType.P, FrameType.B]

    def test_empty_nal_list(self):
        aus, warnings = group_access_units([], b"")
        assert aus == []

    def test_no_vcl_units_returns_empty_plus_warning(self):
        stream = make_nal(7, b"\x42") + make_nal(8, b"\xce")
        aus, warnings = group_access_units(scan_nal_units(stream), stream)
        assert aus == []
        assert any("no VCL" in w for w in warnings)

    def test_trailing_non_vcl_folds_into_last_au(self):
        stream = (
            make_slice_nal(1, first_mb=0, slice_type=0)
            + make_nal(12, b"\x00\x00\x00\x80")  # filler at end of stream
        )
        aus, _ = group_access_units(scan_nal_units(stream), stream)
        assert len(aus) == 1
        assert aus[0].nal_count == 2
        assert sum(au.size_bits for au in aus) == 8 * len(stream)

    def test_au_sizes_byte_granular(self, fixture_streams):
        for stream in fixture_streams.values():
            aus, _ = group_access_units(scan_nal_units(stream), stream)
            assert all(au.size_bits % 8 == 0 for au in aus)


class TestClassify:
    @pytest.mark.parametrize(
        "slice_type,expected",
        [
            (0, FrameType.P), (5, FrameType.P),
            (1, FrameType.B), (6, FrameType.B),
            (2, FrameType.I), (7, FrameType.I),
            (3, FrameType.P), (8, FrameType.P),   # SP
            (4, FrameType.I), (9, FrameType.I),   # SI
        ],
    )
    def test_slice_type_mapping(self, slice_type, expected):
        stream = make_slice_nal(1, first_mb=0, slice_type=slice_type)
        aus, _ = group_access_units(scan_nal_units(stream), stream)
        assert aus[0].frame_type == expected

    def test_idr_forces_i_regardless_of_slice_type(self):
        stream = make_slice_nal(5, first_mb=0, slice_type=0)
        aus, _ = group_access_units(scan_nal_units(stream), stream)
        assert aus[0].frame_type == FrameType.I

    def test_corrupt_header_gives_unknown(self):
        # slice payload of all zero bits: ue() runs out -> Unknown, not an error
        stream = make_nal(1, b"\x00\x00")
        aus, _ = group_access_units(scan_nal_units(stream), stream)
        assert aus[0].frame_type == FrameType.UNKNOWN

    def test_emulation_prevention_inside_slice_header(self):
        # first_mb encoded with 16 leading zeros produces two zero bytes, so
        # a conforming encoder inserts 0x03; the parser must remove it before
        # reading slice_type.  ue bits: 16 zeros + 1 0000 0000 0000 0111 -> 65542
        writer = BitWriter().write_ue(65542).write_ue(7)
        rbsp = writer.to_bytes()
        assert rbsp[:2] == b"\x00\x00"
        escaped = rbsp[:2] + b"\x03" + rbsp[2:]
        stream = make_nal(1, escaped)
        aus, _ = group_access_units(scan_nal_units(stream), stream)
        assert aus[0].frame_type == FrameType.I


class TestExtract:
    def test_against_independent_analyzer_dumps(self, fixture_streams):
        for stem in FIXTURE_STEMS:
            series = extract_frame_sizes(FIXTURE_DIR / f"{stem}.264")
            dump = json.loads((FIXTURE_DIR / f"{stem}.dump.json").read_text())
            assert [v // 8 for v in series.values] == dump["au_sizes_bytes"]
            assert series.frame_type_string() == dump["pict_types"]

    def test_conservation_on_fixtures(self, fixture_streams):
        for stem, stream in fixture_streams.items():
            series = extract_frame_sizes(FIXTURE_DIR / f"{stem}.264")
            assert sum(series.values) == 8 * len(stream)
            assert all(v > 0 for v in series.values)

    def test_all_intra_fixture_is_all_i(self):
        series = extract_frame_sizes(FIXTURE_DIR / "intra_only.264")
        assert set(series.frame_types) == {FrameType.I}

    def test_idempotent(self):
        path = FIXTURE_DIR / "ipp_gop12.264"
        a = extract_frame_sizes(path)
        b = extract_frame_sizes(path)
        assert a.values == b.values and a.frame_types == b.frame_types

    def test_zero_byte_file(self, tmp_path):
        empty = tmp_path / "empty.264"
        empty.write_bytes(b"")
        with pytest.raises(NoStartCode):
            extract_frame_sizes(empty)

    def test_missing_file_raises_oserror(self, tmp_path):
        with pytest.raises(OSError):
            extract_frame_sizes(tmp_path / "nope.264")

    def test_lead_in_bytes_counted_into_first_au(self):
        stream = b"\x00\x00" + make_slice_nal(5, first_mb=0, slice_type=7,
                                              start_code=b"\x00\x00\x00\x01")
        series = extract_frame_sizes_from_bytes(stream, "lead-in")
        assert sum(series.values) == 8 * len(stream)


class TestFuzzSmoke:
    def test_random_bytes_never_crash(self):
        import numpy as np

        rng = np.random.default_rng(123)
        for _ in range(300):
            size = int(rng.integers(0, 4096))
            blob = rng.bytes(size)
            try:
                series = extract_frame_sizes_from_bytes(blob, "fuzz")
                assert all(v >= 0 for v in series.values)
            except NoStartCode:
                pass

    def test_mutated_fixture_never_crashes(self, fixture_streams):
        import numpy as np

        rng = np.random.default_rng(7)
        base = bytearray(fixture_streams["ipp_gop12"][:8192])
        for _ in range(100):
            mutated = bytearray(base)
            for _ in range(8):
                mutated[int(rng.integers(0, len(mutated)))] = int(rng.integers(0, 256))
            try:
                extract_frame_sizes_from_bytes(bytes(mutated), "mut")
            except NoStartCode:
                pass


class TestSerialization:
    def test_jsonl_round_trip(self, tmp_path):
        series = extract_frame_sizes(FIXTURE_DIR / "ibbp_aud_slices.264")
        path = tmp_path / "out.jsonl"
        write_series_jsonl([series], path)
        loaded = read_series_jsonl(path)[0]
        assert loaded.values == series.values
        assert loaded.frame_types == series.frame_types
        assert loaded.source_id == series.source_id

    def test_json_is_integer_only(self):
        series = extract_frame_sizes(FIXTURE_DIR / "intra_only.264")
        line = series_to_json(series)
        assert "." not in json.dumps(json.loads(line)["sizes_bits"])

    def test_json_schema_fields(self):
        series = extract_frame_sizes(FIXTURE_DIR / "intra_only.264")
        obj = json.loads(series_to_json(series))
        assert set(obj) == {"source_id", "sizes_bits", "frame_types"}
        assert isinstance(obj["frame_types"], str)
        roundtrip = series_from_json(json.dumps(obj))
        assert roundtrip.values == series.values

    def test_csv_output(self, tmp_path):
        series = extract_frame_sizes(FIXTURE_DIR / "intra_only.264")
        path = tmp_path / "out.csv"
        write_series_csv(series, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "frame_index,size_bits,frame_type"
        assert len(lines) == len(series) + 1
        assert lines[1].endswith(",I")
