"""Telemetry datagram encode/decode, quantization, and fuzz resilience."""

import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from admf.wire import (
    MAX_WIRE_CONFIDENCE,
    STALE_GNSS_FLAG,
    ConfidenceRangeError,
    TelemetryPacket,
    WireFormatError,
    WireLengthError,
    WireMagicError,
    WireTruncatedError,
    decode_packet,
    encode_packet,
    packet_size,
    quantize_confidence,
)


def make_packet(fc=8, **kw):
    defaults = dict(
        device_id=7,
        seq=42,
        timestamp_ms=1_700_000_000_000,
        flags=0,
        features=np.linspace(-1.0, 1.0, fc),
        edge_is_anomaly=True,
        edge_confidence=0.875,
    )
    defaults.update(kw)
    return TelemetryPacket(**defaults)


class TestSize:
    def test_eight_features_is_57_bytes(self):
        assert packet_size(8) == 57
        assert len(encode_packet(make_packet(8))) == 57

    def test_formula(self):
        for fc in (1, 2, 13, 64):
            assert packet_size(fc) == 25 + 4 * fc
            assert len(encode_packet(make_packet(fc))) == packet_size(fc)


class TestQuantizeConfidence:
    def test_clamps_low(self):
        assert quantize_confidence(0.2) == 0.5
        assert quantize_confidence(float("nan")) == 0.5

    def test_clamps_high(self):
        assert quantize_confidence(1.0) == MAX_WIRE_CONFIDENCE
        assert quantize_confidence(0.999999999) == MAX_WIRE_CONFIDENCE

    def test_interior_value_survives_f32(self):
        q = quantize_confidence(0.75)
        assert q == np.float32(0.75)
        assert 0.5 <= q < 1.0

    @given(st.floats(allow_nan=True, allow_infinity=True))
    @settings(max_examples=200)
    def test_always_in_wire_range(self, c):
        q = quantize_confidence(c)
        assert 0.5 <= q < 1.0
        # must survive the f32 trip inside the datagram
        assert 0.5 <= float(np.float32(q)) < 1.0


class TestRoundTrip:
    def test_identity(self):
        p = make_packet()
        assert decode_packet(encode_packet(p)) == p

    def test_stale_flag(self):
        p = make_packet(flags=STALE_GNSS_FLAG)
        out = decode_packet(encode_packet(p))
        assert out.flags & STALE_GNSS_FLAG

    @given(
        device_id=st.integers(0, 2**32 - 1),
        seq=st.integers(0, 2**32 - 1),
        timestamp_ms=st.integers(0, 2**64 - 1),
        flags=st.integers(0, 255),
        fc=st.integers(1, 64),
        anomaly=st.booleans(),
        conf=st.floats(0.5, 0.9999),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=100, deadline=None)
    def test_round_trip_property(self, device_id, seq, timestamp_ms, flags, fc, anomaly, conf, seed):
        rng = np.random.default_rng(seed)
        p = TelemetryPacket(
            device_id=device_id,
            seq=seq,
            timestamp_ms=timestamp_ms,
            flags=flags,
            features=rng.normal(0, 100, size=fc),
            edge_is_anomaly=anomaly,
            edge_confidence=quantize_confidence(conf),
        )
        assert decode_packet(encode_packet(p)) == p


class TestValidation:
    def test_too_many_features(self):
        with pytest.raises(WireLengthError):
            make_packet(65)

    def test_nonfinite_feature(self):
        with pytest.raises(WireFormatError):
            make_packet(features=np.array([1.0, math.inf]))

    def test_confidence_out_of_range(self):
        for bad in (0.4999, 1.0, float("nan")):
            with pytest.raises(ConfidenceRangeError):
                make_packet(edge_confidence=bad)

    def test_device_id_range(self):
        with pytest.raises(WireFormatError):
            make_packet(device_id=2**32)


class TestDecodeErrors:
    def test_bad_magic(self):
        blob = encode_packet(make_packet())
        with pytest.raises(WireMagicError):
            decode_packet(b"\x00\x00" + blob[2:])

    def test_truncated(self):
        blob = encode_packet(make_packet())
        for cut in (0, 1, 5, 24, len(blob) - 1):
            with pytest.raises((WireTruncatedError, WireLengthError)):
                decode_packet(blob[:cut])

    def test_trailing_bytes(self):
        blob = encode_packet(make_packet())
        with pytest.raises(WireLengthError):
            decode_packet(blob + b"\x00")

    def test_bad_anomaly_byte(self):
        blob = bytearray(encode_packet(make_packet(fc=1)))
        blob[-5] = 2
        with pytest.raises(WireFormatError):
            decode_packet(bytes(blob))

    def test_confidence_rejected_on_decode(self):
        blob = bytearray(encode_packet(make_packet(fc=1)))
        struct.pack_into("<f", blob, len(blob) - 4, 0.1)
        with pytest.raises(ConfidenceRangeError):
            decode_packet(bytes(blob))

    def test_fuzz_random_bytes_raise_typed_errors_only(self):
        rng = np.random.default_rng(2024)
        for _ in range(2000):
            n = int(rng.integers(0, 120))
            blob = rng.integers(0, 256, size=n, dtype=np.uint8).tobytes()
            try:
                decode_packet(blob)
            except WireFormatError:
                pass

    def test_fuzz_corrupted_valid_packets(self):
        # flip bytes of a well-formed datagram; decode either succeeds or
        # raises a member of the wire error family
        rng = np.random.default_rng(7)
        base = bytearray(encode_packet(make_packet()))
        for _ in range(2000):
            blob = bytearray(base)
            i = int(rng.integers(0, len(blob)))
            blob[i] ^= int(rng.integers(1, 256))
            try:
                decode_packet(bytes(blob))
            except WireFormatError:
                pass
