"""TCP client for an external denoising-posterior prior server.

Wire protocol (little-endian throughout, one slice per request):

* frame: u32 payload length, then payload (max 256 MiB)
* request payload: magic ``PDP1`` | op u8 (1 sample, 2 ping, 3 shutdown)
  | rho f64 | H u32 | W u32 | seed u64 | H*W float32 slice values
* response payload: magic ``PDP1`` | status u8 (0 ok, 1 error)
  | float32 slice values on success, UTF-8 message on error

The seed travels with the request so the server draws the noise; a chain
is then reproducible regardless of which side hosts the prior.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading

import numpy as np

from ..exceptions import PriorStepError
from .base import PriorSampler

log = logging.getLogger("sg3d.priors.remote")

MAGIC = b"PDP1"
OP_SAMPLE = 1
OP_PING = 2
OP_SHUTDOWN = 3
STATUS_OK = 0
STATUS_ERROR = 1
MAX_FRAME = 256 * 1024 * 1024

_REQ_HEAD = struct.Struct("<4sBdIIQ")
_RESP_HEAD = struct.Struct("<4sB")
_LEN = struct.Struct("<I")


def encode_request(op: int, rho: float = 0.0, seed: int = 0,
                   slice_data: np.ndarray | None = None) -> bytes:
    if slice_data is None:
        h = w = 0
        body = b""
    else:
        arr = np.ascontiguousarray(slice_data, dtype="<f4")
        if arr.ndim != 2:
            raise PriorStepError("slice payload must be 2D")
        h, w = arr.shape
        body = arr.tobytes()
    payload = _REQ_HEAD.pack(MAGIC, op, float(rho), h, w, seed & 0xFFFFFFFFFFFFFFFF) + body
    return _LEN.pack(len(payload)) + payload


def decode_request(payload: bytes):
    """(op, rho, h, w, seed, slice or None); raises PriorStepError when malformed."""
    if len(payload) < _REQ_HEAD.size:
        raise PriorStepError(f"request too short: {len(payload)} bytes")
    magic, op, rho, h, w, seed = _REQ_HEAD.unpack_from(payload)
    if magic != MAGIC:
        raise PriorStepError(f"bad magic {magic!r}")
    body = payload[_REQ_HEAD.size:]
    if op == OP_SAMPLE:
        expected = 4 * h * w
        if len(body) != expected:
            raise PriorStepError(
                f"sample body holds {len(body)} bytes, header says {expected}")
        data = np.frombuffer(body, dtype="<f4").reshape(h, w)
        return op, rho, h, w, seed, data
    if body:
        raise PriorStepError(f"op {op} carries an unexpected body")
    return op, rho, h, w, seed, None


def encode_response(status: int, slice_data: np.ndarray | None = None,
                    message: str = "") -> bytes:
    if status == STATUS_OK and slice_data is not None:
        body = np.ascontiguousarray(slice_data, dtype="<f4").tobytes()
    elif status == STATUS_OK:
        body = b""
    else:
        body = message.encode("utf-8")
    payload = _RESP_HEAD.pack(MAGIC, status) + body
    return _LEN.pack(len(payload)) + payload


def decode_response(payload: bytes, shape: tuple[int, int] | None):
    if len(payload) < _RESP_HEAD.size:
        raise PriorStepError(f"response too short: {len(payload)} bytes")
    magic, status = _RESP_HEAD.unpack_from(payload)
    if magic != MAGIC:
        raise PriorStepError(f"bad response magic {magic!r}")
    body = payload[_RESP_HEAD.size:]
    if status != STATUS_OK:
        raise PriorStepError(f"server error: {body.decode('utf-8', 'replace')}")
    if shape is None:
        return None
    expected = 4 * shape[0] * shape[1]
    if len(body) != expected:
        raise PriorStepError(
            f"response body holds {len(body)} bytes for shape {shape} "
            f"({expected} expected)")
    return np.frombuffer(body, dtype="<f4").reshape(shape).copy()


def read_frame(sock: socket.socket) -> bytes:
    head = _recv_exact(sock, 4)
    (length,) = _LEN.unpack(head)
    if length > MAX_FRAME:
        raise PriorStepError(f"frame of {length} bytes exceeds the {MAX_FRAME} cap")
    return _recv_exact(sock, length)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(min(n - got, 1 << 20))
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


class RemotePrior(PriorSampler):
    """PriorSampler that round-trips slices to a prior server.

    Connections are per-thread (requests on one connection are ordered);
    transient failures are retried with a fresh connection before the
    chain is aborted.
    """

    def __init__(self, host: str, port: int, timeout: float = 30.0, retries: int = 2):
        self.host = host
        self.port = int(port)
        self.timeout = timeout
        self.retries = retries
        self._local = threading.local()

    @classmethod
    def from_address(cls, address: str, **kwargs):
        """Parse 'host:port'."""
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise PriorStepError(f"remote prior address must be host:port, got {address!r}")
        return cls(host, int(port), **kwargs)

    def _connection(self) -> socket.socket:
        sock = getattr(self._local, "sock", None)
        if sock is None:
            sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self._local.sock = sock
        return sock

    def _drop_connection(self):
        sock = getattr(self._local, "sock", None)
        if sock is not None:
            try:
                sock.close()
            finally:
                self._local.sock = None

    def _roundtrip(self, frame: bytes) -> bytes:
        last_err = None
        for attempt in range(self.retries + 1):
            try:
                sock = self._connection()
                sock.sendall(frame)
                return read_frame(sock)
            except (OSError, ConnectionError) as err:
                last_err = err
                self._drop_connection()
                if attempt < self.retries:
                    log.warning("remote prior I/O failed (%s), retrying "
                                "(%d/%d)", err, attempt + 1, self.retries)
        raise PriorStepError(
            f"remote prior at {self.host}:{self.port} unreachable: {last_err}")

    def sample(self, x: np.ndarray, rho: float, seed: int) -> np.ndarray:
        x = np.asarray(x, dtype=np.float32)
        payload = self._roundtrip(encode_request(OP_SAMPLE, rho, seed, x))
        return decode_response(payload, x.shape)

    def ping(self) -> bool:
        payload = self._roundtrip(encode_request(OP_PING))
        decode_response(payload, None)
        return True

    def shutdown_server(self):
        try:
            self._roundtrip(encode_request(OP_SHUTDOWN))
        except PriorStepError:
            pass
        finally:
            self._drop_connection()

    def close(self):
        self._drop_connection()
