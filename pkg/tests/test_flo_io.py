"""Middlebury .flo serialization."""

import struct

import numpy as np
import pytest

from flowgate.flow import FloFormatError, FlowField, read_flo, write_flo


class TestFloRoundTrip:
    def test_write_read_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        f = FlowField(rng.standard_normal((7, 5)).astype(np.float32),
                      rng.standard_normal((7, 5)).astype(np.float32))
        path = tmp_path / "f.flo"
        write_flo(f, path)
        back = read_flo(path)
        assert np.array_equal(back.u, f.u)
        assert np.array_equal(back.v, f.v)

    def test_bytes_round_trip(self):
        f = FlowField(np.ones((2, 3), np.float32), -np.ones((2, 3), np.float32))
        assert np.array_equal(read_flo(write_flo(f)).u, f.u)

    def test_2x1_zero_flow_byte_count(self):
        # header 4 + 4 + 4, then 2*1 pixels * 2 channels * 4 bytes
        payload = write_flo(FlowField.zeros(2, 1))
        assert len(payload) == 4 + 4 + 4 + 16

    def test_interleaving_layout(self):
        f = FlowField(np.array([[1.0, 2.0]], np.float32),
                      np.array([[3.0, 4.0]], np.float32))
        payload = write_flo(f)
        vals = struct.unpack("<4f", payload[12:])
        assert vals == (1.0, 3.0, 2.0, 4.0)


class TestFloErrors:
    def test_bad_sentinel_rejected(self):
        payload = struct.pack("<fii", 0.0, 1, 1) + b"\x00" * 8
        with pytest.raises(FloFormatError):
            read_flo(payload)

    def test_truncated_payload_rejected(self):
        payload = write_flo(FlowField.zeros(4, 4))
        with pytest.raises(FloFormatError):
            read_flo(payload[:-3])

    def test_truncated_header_rejected(self):
        with pytest.raises(FloFormatError):
            read_flo(b"\x01\x02")

    def test_bad_dims_rejected(self):
        payload = struct.pack("<fii", 202021.25, -1, 4)
        with pytest.raises(FloFormatError):
            read_flo(payload)
