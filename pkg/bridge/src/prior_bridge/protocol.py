"""PDP1 wire protocol: length-prefixed binary frames, little-endian.

* frame: u32 payload length, then payload (hard cap 256 MiB)
* request: magic ``PDP1`` | op u8 (1 sample, 2 ping, 3 shutdown) | rho f64
  | H u32 | W u32 | seed u64 | H*W float32 slice values
* response: magic ``PDP1`` | status u8 (0 ok, 1 error)
  | float32 slice on success, UTF-8 message on error

The request carries the seed: the server draws all noise, so identical
(slice, rho, seed) requests return identical bytes across restarts.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"PDP1"
OP_SAMPLE = 1
OP_PING = 2
OP_SHUTDOWN = 3
STATUS_OK = 0
STATUS_ERROR = 1
MAX_FRAME = 256 * 1024 * 1024

REQ_HEAD = struct.Struct("<4sBdIIQ")
RESP_HEAD = struct.Struct("<4sB")
LEN = struct.Struct("<I")


class ProtocolError(Exception):
    pass


def decode_request(payload: bytes):
    """(op, rho, h, w, seed, slice|None); ProtocolError on malformed input."""
    if len(payload) < REQ_HEAD.size:
        raise ProtocolError(f"request too short ({len(payload)} bytes)")
    magic, op, rho, h, w, seed = REQ_HEAD.unpack_from(payload)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if op not in (OP_SAMPLE, OP_PING, OP_SHUTDOWN):
        raise ProtocolError(f"unknown op {op}")
    body = payload[REQ_HEAD.size:]
    if op == OP_SAMPLE:
        if h == 0 or w == 0:
            raise ProtocolError("sample request with empty dims")
        expected = 4 * h * w
        if len(body) != expected:
            raise ProtocolError(f"body is {len(body)} bytes, dims say {expected}")
        data = np.frombuffer(body, dtype="<f4").reshape(h, w)
        if not np.isfinite(data).all():
            raise ProtocolError("slice contains non-finite values")
        return op, rho, h, w, seed, data
    if body:
        raise ProtocolError(f"op {op} carries an unexpected body")
    return op, rho, h, w, seed, None


def encode_response(status: int, slice_data: np.ndarray | None = None,
                    message: str = "") -> bytes:
    if status == STATUS_OK and slice_data is not None:
        body = np.ascontiguousarray(slice_data, dtype="<f4").tobytes()
    elif status == STATUS_OK:
        body = b""
    else:
        body = message.encode("utf-8")
    payload = RESP_HEAD.pack(MAGIC, status) + body
    return LEN.pack(len(payload)) + payload


def encode_request(op: int, rho: float = 0.0, seed: int = 0,
                   slice_data: np.ndarray | None = None) -> bytes:
    """Client-side encoder (used by the test suite)."""
    if slice_data is None:
        h = w = 0
        body = b""
    else:
        arr = np.ascontiguousarray(slice_data, dtype="<f4")
        h, w = arr.shape
        body = arr.tobytes()
    payload = REQ_HEAD.pack(MAGIC, op, float(rho), h, w,
                            seed & 0xFFFFFFFFFFFFFFFF) + body
    return LEN.pack(len(payload)) + payload


def decode_response(payload: bytes, shape=None):
    if len(payload) < RESP_HEAD.size:
        raise ProtocolError("response too short")
    magic, status = RESP_HEAD.unpack_from(payload)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    body = payload[RESP_HEAD.size:]
    if status != STATUS_OK:
        raise ProtocolError(body.decode("utf-8", "replace"))
    if shape is None:
        return None
    return np.frombuffer(body, dtype="<f4").reshape(shape).copy()
