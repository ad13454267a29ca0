"""Wire-protocol server: framing, validation, fuzz, and a model round trip."""

import json
import random
import socket
import struct

import pytest

from ewtoolkit import CATEGORIES
from ewtoolkit.server import EchoPredictor, InferenceServer, MAGIC


def framed(payload: bytes) -> bytes:
    return struct.pack(">I", len(payload)) + payload


def request_bytes(width, height, pixels=None) -> bytes:
    if pixels is None:
        pixels = bytes(width * height * 3)
    return framed(MAGIC + struct.pack(">II", width, height) + pixels)


def read_reply(sock) -> dict:
    header = _read_exact(sock, 4)
    (length,) = struct.unpack(">I", header)
    return json.loads(_read_exact(sock, length))


def _read_exact(sock, count):
    data = b""
    while len(data) < count:
        chunk = sock.recv(count - len(data))
        if not chunk:
            raise ConnectionError("server closed early")
        data += chunk
    return data


@pytest.fixture
def echo_server():
    with InferenceServer(EchoPredictor((32, 24))) as server:
        yield server


@pytest.fixture
def client(echo_server):
    sock = socket.create_connection(("127.0.0.1", echo_server.port), timeout=10)
    yield sock
    sock.close()


class TestValidRequests:
    def test_reply_schema(self, client):
        client.sendall(request_bytes(32, 24))
        reply = read_reply(client)
        assert set(reply) == {"label", "confidence", "duration_ms"}
        assert reply["label"] in CATEGORIES
        assert 0.0 <= reply["confidence"] <= 1.0
        assert reply["duration_ms"] > 0

    def test_deterministic_for_same_pixels(self, client):
        pixels = bytes(range(256)) * 9  # 32*24*3 = 2304 bytes
        client.sendall(request_bytes(32, 24, pixels))
        first = read_reply(client)
        client.sendall(request_bytes(32, 24, pixels))
        second = read_reply(client)
        assert first["label"] == second["label"]
        assert first["confidence"] == second["confidence"]

    def test_many_requests_one_connection(self, client):
        for i in range(25):
            client.sendall(request_bytes(32, 24, bytes([i % 256]) * 2304))
            assert "label" in read_reply(client)


class TestMalformedRequests:
    def test_bad_magic(self, client):
        payload = b"NOTMAGIC" + struct.pack(">II", 32, 24) + bytes(2304)
        client.sendall(framed(payload))
        assert "bad magic" in read_reply(client)["error"]

    def test_wrong_dimensions(self, client):
        client.sendall(request_bytes(16, 16))
        assert "expects 32x24" in read_reply(client)["error"]

    def test_short_pixel_buffer(self, client):
        payload = MAGIC + struct.pack(">II", 32, 24) + bytes(100)
        client.sendall(framed(payload))
        assert "truncated" in read_reply(client)["error"]

    def test_payload_shorter_than_header(self, client):
        client.sendall(framed(b"EW"))
        assert "too short" in read_reply(client)["error"]

    def test_connection_survives_errors(self, client):
        client.sendall(framed(b"garbage!"))
        assert "error" in read_reply(client)
        client.sendall(request_bytes(32, 24))
        assert "label" in read_reply(client)

    def test_oversized_length_refused(self, client):
        client.sendall(struct.pack(">I", 1 << 30))
        assert "exceeds limit" in read_reply(client)["error"]


class TestFuzz:
    def test_random_framed_garbage_never_kills_server(self, echo_server):
        rng = random.Random(99)
        for _ in range(60):
            sock = socket.create_connection(
                ("127.0.0.1", echo_server.port), timeout=10
            )
            try:
                body = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 64)))
                sock.sendall(framed(body))
                reply = read_reply(sock)
                assert "error" in reply
            finally:
                sock.close()
        # server still answers a good request afterwards
        sock = socket.create_connection(("127.0.0.1", echo_server.port), timeout=10)
        try:
            sock.sendall(request_bytes(32, 24))
            assert "label" in read_reply(sock)
        finally:
            sock.close()

    def test_truncated_stream_closes_quietly(self, echo_server):
        sock = socket.create_connection(("127.0.0.1", echo_server.port), timeout=10)
        sock.sendall(struct.pack(">I", 5000) + b"only a little")
        sock.close()
        # and the listener still accepts new work
        again = socket.create_connection(("127.0.0.1", echo_server.port), timeout=10)
        try:
            again.sendall(request_bytes(32, 24))
            assert "label" in read_reply(again)
        finally:
            again.close()


class TestKerasPredictorServing:
    def test_exported_model_round_trip(self, tmp_path, smoke_config):
        from ewtoolkit.server import KerasPredictor
        from ewtoolkit.training import build_model, export_model

        model = build_model(smoke_config)
        path = export_model(model, tmp_path / "untrained.h5")
        predictor = KerasPredictor(path)
        assert predictor.input_size == (64, 48)
        with InferenceServer(predictor) as server:
            sock = socket.create_connection(("127.0.0.1", server.port), timeout=10)
            try:
                sock.sendall(request_bytes(64, 48, bytes(64 * 48 * 3)))
                reply = read_reply(sock)
                assert reply["label"] in CATEGORIES
                assert 0.0 <= reply["confidence"] <= 1.0
            finally:
                sock.close()
