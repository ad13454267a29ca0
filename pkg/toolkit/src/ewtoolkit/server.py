"""Wire-protocol inference server.

Framing (bit-exact with the pipeline client): requests are a u32 big-endian
payload length, then payload = 8-byte ASCII magic "EWINFER1", u32 BE width,
u32 BE height, and width*height*3 raw RGB8 bytes. Responses are a u32 BE
length plus UTF-8 JSON {"label", "confidence", "duration_ms"}; malformed
frames get {"error": "..."} instead and the connection stays open.

Connections are served concurrently, but all inference is serialised onto
one executor (batch size 1), so a loaded model never sees two requests at
once.
"""

from __future__ import annotations

import hashlib
import json
import socket
import struct
import threading
import time

import numpy as np

from .datasets import CATEGORIES

MAGIC = b"EWINFER1"
HEADER_BYTES = len(MAGIC) + 8
MAX_REQUEST_BYTES = 1 << 26


class EchoPredictor:
    """Model-free stand-in: a deterministic hash of the pixels picks the
    label. Useful for protocol tests and as a serving smoke target."""

    def __init__(self, input_size=(512, 384)):
        self.input_size = tuple(input_size)

    def predict(self, pixels: bytes):
        digest = hashlib.sha256(pixels).digest()
        label = CATEGORIES[digest[0] % len(CATEGORIES)]
        confidence = 0.5 + digest[1] / 510.0
        return label, confidence


class KerasPredictor:
    """Serves an exported classifier; input size is read off the model."""

    def __init__(self, model_path):
        from .training import load_exported

        self.model = load_exported(model_path)
        shape = self.model.input_shape  # (batch, height, width, channels)
        self.input_size = (int(shape[2]), int(shape[1]))

    def predict(self, pixels: bytes):
        width, height = self.input_size
        array = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3)
        batch = array.astype(np.float32)[np.newaxis, ...]
        probs = self.model.predict(batch, verbose=0)[0]
        index = int(np.argmax(probs))
        return CATEGORIES[index], float(probs[index])


class InferenceServer:
    """Threaded acceptor with per-connection serial request handling."""

    def __init__(self, predictor, host: str = "127.0.0.1", port: int = 0,
                 idle_timeout_s: float = 30.0):
        self.predictor = predictor
        self.host = host
        self.idle_timeout_s = idle_timeout_s
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen()
        self.port = self._listener.getsockname()[1]
        self._inference_lock = threading.Lock()
        self._connections: set = set()
        self._connections_lock = threading.Lock()
        self._stopping = threading.Event()
        self._acceptor = threading.Thread(target=self._accept_loop, daemon=True)

    def start(self) -> "InferenceServer":
        self._acceptor.start()
        return self

    def stop(self) -> None:
        self._stopping.set()
        self._listener.close()
        with self._connections_lock:
            for conn in list(self._connections):
                try:
                    conn.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
                conn.close()
        self._acceptor.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc_info):
        self.stop()

    def serve_forever(self) -> None:
        self.start()
        try:
            while not self._stopping.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            with self._connections_lock:
                self._connections.add(conn)
            worker = threading.Thread(
                target=self._serve_connection, args=(conn,), daemon=True
            )
            worker.start()

    def _serve_connection(self, conn: socket.socket) -> None:
        conn.settimeout(self.idle_timeout_s)
        try:
            while not self._stopping.is_set():
                header = self._read_exact(conn, 4)
                if header is None:
                    return
                (length,) = struct.unpack(">I", header)
                if length > MAX_REQUEST_BYTES:
                    # can't trust the stream after refusing to read it
                    self._send_error(conn, f"request length {length} exceeds limit")
                    return
                payload = self._read_exact(conn, length)
                if payload is None:
                    return
                self._handle_request(conn, payload)
        except (OSError, ValueError):
            pass
        finally:
            with self._connections_lock:
                self._connections.discard(conn)
            conn.close()

    def _handle_request(self, conn: socket.socket, payload: bytes) -> None:
        error = self._validate(payload)
        if error is not None:
            self._send_error(conn, error)
            return
        width, height = struct.unpack(">II", payload[8:16])
        pixels = payload[16:]
        try:
            with self._inference_lock:
                started = time.perf_counter()
                label, confidence = self.predictor.predict(pixels)
                duration_ms = (time.perf_counter() - started) * 1000.0
        except Exception as exc:  # a broken model must not kill the server
            self._send_error(conn, f"inference failed: {exc}")
            return
        self._send(
            conn,
            {
                "label": label,
                "confidence": float(confidence),
                "duration_ms": max(duration_ms, 1e-6),
            },
        )

    def _validate(self, payload: bytes):
        if len(payload) < HEADER_BYTES:
            return f"payload too short for header ({len(payload)} bytes)"
        if payload[:8] != MAGIC:
            return f"bad magic {payload[:8]!r}"
        width, height = struct.unpack(">II", payload[8:16])
        if width < 1 or height < 1:
            return f"bad dimensions {width}x{height}"
        expected = HEADER_BYTES + width * height * 3
        if len(payload) != expected:
            return (
                f"truncated or oversized pixel buffer: got {len(payload)} "
                f"bytes, expected {expected} for {width}x{height}"
            )
        if (width, height) != tuple(self.predictor.input_size):
            want = self.predictor.input_size
            return f"model expects {want[0]}x{want[1]}, got {width}x{height}"
        return None

    def _send(self, conn: socket.socket, obj: dict) -> None:
        body = json.dumps(obj).encode("utf-8")
        try:
            conn.sendall(struct.pack(">I", len(body)) + body)
        except OSError:
            pass

    def _send_error(self, conn: socket.socket, message: str) -> None:
        self._send(conn, {"error": message})

    @staticmethod
    def _read_exact(conn: socket.socket, count: int):
        data = b""
        while len(data) < count:
            chunk = conn.recv(count - len(data))
            if not chunk:
                return None
            data += chunk
        return data


def serve(predictor, host: str = "127.0.0.1", port: int = 5577) -> None:
    """Blocking convenience wrapper used by the CLI."""
    server = InferenceServer(predictor, host=host, port=port)
    print(f"serving on {server.host}:{server.port} "
          f"(input {predictor.input_size[0]}x{predictor.input_size[1]})")
    server.serve_forever()
