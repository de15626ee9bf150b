import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flightbench import protocol as proto

f32 = st.floats(allow_nan=False, width=32)
names = st.text("ABCDEFGHIJKLMNOPQRSTUVWXYZ_0123456789", min_size=1, max_size=24)
messages = st.one_of(
    st.builds(lambda u, m: proto.OffboardCommand(tuple(u), m),
              st.lists(f32, min_size=6, max_size=6), st.sampled_from(["passthrough", "setpoint"])),
    st.just(proto.Heartbeat()),
    st.builds(proto.ParamRequest, names),
    st.builds(proto.ParamValue, names, st.one_of(
        st.integers(-(2**63), 2**63 - 1), st.floats(allow_nan=False), st.text("abcxyz_", max_size=20))),
    st.builds(lambda t, a, g: proto.ImuData(t, tuple(a), tuple(g)), st.floats(allow_nan=False),
              st.lists(f32, min_size=3, max_size=3), st.lists(f32, min_size=3, max_size=3)),
    st.builds(proto.EchoRequest, st.binary(max_size=255)),
    st.builds(proto.EchoReply, st.binary(max_size=255)),
    st.builds(proto.Ack, st.integers(0, 255), st.integers(0, 255)),
)


def test_crc_check_value():
    # CRC-16/CCITT-FALSE catalogue check value
    assert proto.crc16(b"123456789") == 0x29B1


def test_zero_offboard_frame_layout():
    frame = proto.encode(proto.OffboardCommand((0.0,) * 6), seq=5)
    assert len(frame) == 30 == proto.OVERHEAD + 24
    assert frame[0] == 0xFE and frame[1] == 0x10 and frame[2] == 24 and frame[3] == 5
    assert frame[4:28] == bytes(24)
    assert int.from_bytes(frame[28:], "little") == proto.crc16(frame[1:28])


def test_offboard_payload_is_six_le_float32():
    c = proto.OffboardCommand((1.0, -2.0, 0.5, 0.0, 3.0, -0.25), "setpoint")
    assert c.payload() == struct.pack("<6f", 1.0, -2.0, 0.5, 0.0, 3.0, -0.25)
    assert proto.encode(c)[1] == 0x11


def test_heartbeat_frame():
    frame = proto.encode(proto.Heartbeat())
    assert len(frame) == 6 and frame[2] == 0


@settings(max_examples=500)
@given(messages, st.integers(0, 255))
def test_round_trip(msg, seq):
    msgs, rest, dec = proto.decode_stream(proto.encode(msg, seq))
    assert msgs == [msg] and rest == b"" and dec.last_seq == seq


@settings(max_examples=300)
@given(st.lists(messages, max_size=8), st.binary(max_size=20), st.data())
def test_chunking_invariance(msgs, noise, data):
    stream = noise.replace(b"\xfe", b"") + b"".join(proto.encode(m, i) for i, m in enumerate(msgs))
    cuts = sorted(data.draw(st.lists(st.integers(0, len(stream)), max_size=10)))
    dec = proto.StreamDecoder()
    out = []
    prev = 0
    for c in cuts + [len(stream)]:
        out += dec.feed(stream[prev:c])
        prev = c
    assert out == msgs


def test_garbage_prefix():
    msgs, _, dec = proto.decode_stream(b"\x01\x02\x03" + proto.encode(proto.Heartbeat()))
    assert msgs == [proto.Heartbeat()] and dec.garbage == 3


def test_flipped_payload_bit():
    frame = bytearray(proto.encode(proto.OffboardCommand((1, 2, 3, 4, 5, 6))))
    frame[10] ^= 0x04
    msgs, _, dec = proto.decode_stream(bytes(frame))
    assert msgs == [] and dec.crc_fail == 1


def test_resync_after_corrupted_frame():
    bad = bytearray(proto.encode(proto.Heartbeat()))
    bad[-1] ^= 0xFF
    good = proto.encode(proto.Ack(1, 0))
    msgs, _, dec = proto.decode_stream(bytes(bad) + good)
    assert msgs == [proto.Ack(1, 0)] and dec.crc_fail == 1


def test_partial_frame_stays_in_residual():
    frame = proto.encode(proto.EchoRequest(b"abc"))
    msgs, rest, _ = proto.decode_stream(frame[:-1])
    assert msgs == [] and rest == frame[:-1]
    msgs, rest, _ = proto.decode_stream(frame[-1:], rest)
    assert msgs == [proto.EchoRequest(b"abc")] and rest == b""


def test_valid_crc_with_bad_layout_is_counted_malformed():
    body = bytes([0x10, 3, 0]) + b"xyz"
    frame = b"\xfe" + body + proto.crc16(body).to_bytes(2, "little")
    msgs, _, dec = proto.decode_stream(frame + proto.encode(proto.Heartbeat()))
    assert msgs == [proto.Heartbeat()] and dec.malformed == 1


@settings(max_examples=300)
@given(st.binary(max_size=600))
def test_decoder_never_raises(blob):
    dec = proto.StreamDecoder()
    dec.feed(blob)
    dec.feed(blob[::-1])


def test_random_corruption_fuzz():
    rng = random.Random(1)
    for _ in range(200):
        frames = [proto.encode(proto.OffboardCommand(tuple(rng.uniform(-5, 5) for _ in range(6))), i)
                  for i in range(5)]
        blob = bytearray(b"".join(frames))
        for _ in range(rng.randint(0, 3)):
            blob[rng.randrange(len(blob))] = rng.randrange(256)
        msgs, _, dec = proto.decode_stream(bytes(blob))
        assert len(msgs) <= 5
        assert all(isinstance(m, proto.OffboardCommand) for m in msgs)


def test_encode_errors():
    with pytest.raises(proto.ProtocolError):
        proto.encode(proto.EchoRequest(bytes(256)))
    with pytest.raises(proto.ProtocolError):
        proto.OffboardCommand((1, 2, 3))
    with pytest.raises(proto.ProtocolError):
        proto.OffboardCommand((0,) * 6, "turbo")
    with pytest.raises(proto.ProtocolError):
        proto.encode(proto.ParamRequest("X" * 25))
