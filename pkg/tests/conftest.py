"""Shared test helpers: a bit writer for hand-built NAL units and small
dataset builders."""

from pathlib import Path

import numpy as np
import pytest

from bitcover.dataset import generate_preset_clips

FIXTURE_DIR = Path(__file__).parent / "fixtures"
FIXTURE_STEMS = ["intra_only", "ipp_gop12", "ibbp_aud_slices"]


class BitWriter:
    """MSB-first bit assembly; the inverse of the package's BitReader,
    written independently so round-trip tests have two implementations."""

    def __init__(self):
        self._bits: list[int] = []

    def write_bit(self, bit: int) -> "BitWriter":
        self._bits.append(bit & 1)
        return self

    def write_bits(self, value: int, count: int) -> "BitWriter":
        for shift in range(count - 1, -1, -1):
            self.write_bit((value >> shift) & 1)
        return self

    def write_ue(self, value: int) -> "BitWriter":
        # Exp-Golomb: v maps to (v+1) written with bit_length(v+1)-1 leading zeros.
        code = value + 1
        length = code.bit_length()
        self.write_bits(0, length - 1)
        self.write_bits(code, length)
        return self

    def to_bytes(self) -> bytes:
        # rbsp-style close: stop bit then zero fill to a byte boundary
        bits = self._bits + [1]
        while len(bits) % 8:
            bits.append(0)
        out = bytearray()
        for i in range(0, len(bits), 8):
            byte = 0
            for b in bits[i:i + 8]:
                byte = (byte << 1) | b
            out.append(byte)
        return bytes(out)


def make_nal(nal_type: int, body: bytes = b"", ref_idc: int = 1,
             start_code: bytes = b"\x00\x00\x01") -> bytes:
    header = ((ref_idc & 3) << 5) | (nal_type & 0x1F)
    return start_code + bytes([header]) + body


def make_slice_nal(nal_type: int, first_mb: int, slice_type: int,
                   extra: bytes = b"\xff\xff",
                   start_code: bytes = b"\x00\x00\x01") -> bytes:
    body = BitWriter().write_ue(first_mb).write_ue(slice_type).to_bytes()
    return make_nal(nal_type, body + extra, start_code=start_code)


@pytest.fixture(scope="session")
def fixture_streams():
    return {stem: (FIXTURE_DIR / f"{stem}.264").read_bytes() for stem in FIXTURE_STEMS}


def small_synth_suite(presets=("sports", "concert", "vlog", "gaming"),
                      clips=6, frames=240, base_seed=0, target_bitrate=None):
    """{preset: [series...]} for quick multi-class tests."""
    return {
        name: generate_preset_clips(name, clips, frames, base_seed=base_seed,
                                    target_bitrate=target_bitrate)
        for name in presets
    }


def tiny_model_cfg(**overrides):
    from bitcover.model import ModelConfig

    base = dict(
        input_len=16,
        num_classes=3,
        channels=1,
        block_filters=(4, 8, 8),
        kernel_sizes=(8, 5, 3),
        seed=5,
    )
    base.update(overrides)
    return ModelConfig(**base)


def random_batch(cfg, batch=4, seed=10, dtype=np.float64):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(batch, cfg.input_len, cfg.channels)).astype(dtype)
    y = np.eye(cfg.num_classes, dtype=dtype)[rng.integers(0, cfg.num_classes, batch)]
    return x, y
