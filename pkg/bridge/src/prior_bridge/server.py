"""Threaded TCP server answering PDP1 prior requests.

One thread per connection; requests on a connection are answered in
order. Malformed frames get a status-1 response (when a length prefix
could be read) and the connection is closed; nothing a client sends can
bring the server down. A shutdown request stops the listener after the
response is flushed.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading

from . import protocol as p

log = logging.getLogger("prior_bridge.server")


class PriorServer:
    def __init__(self, prior, host: str = "127.0.0.1", port: int = 0):
        self.prior = prior
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(16)
        # finite accept timeout so stop() can be observed promptly
        self._listener.settimeout(0.25)
        self.host, self.port = self._listener.getsockname()
        self._stop = threading.Event()
        self._accept_thread: threading.Thread | None = None

    # ---- lifecycle -----------------------------------------------------

    def start(self):
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               daemon=True)
        self._accept_thread.start()
        return self

    def serve_forever(self):
        self.start()
        self._stop.wait()

    def stop(self):
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass

    def join(self, timeout=None):
        if self._accept_thread is not None:
            self._accept_thread.join(timeout)

    # ---- internals -----------------------------------------------------

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            conn.settimeout(None)
            threading.Thread(target=self._serve_connection, args=(conn, addr),
                             daemon=True).start()
        try:
            self._listener.close()
        except OSError:
            pass

    def _serve_connection(self, conn: socket.socket, addr):
        with conn:
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            while not self._stop.is_set():
                try:
                    payload = self._read_frame(conn)
                except ConnectionError:
                    return
                except p.ProtocolError as err:
                    self._reply_error(conn, str(err))
                    return
                try:
                    op, rho, h, w, seed, data = p.decode_request(payload)
                except p.ProtocolError as err:
                    self._reply_error(conn, str(err))
                    return
                if op == p.OP_PING:
                    self._send(conn, p.encode_response(p.STATUS_OK))
                elif op == p.OP_SHUTDOWN:
                    self._send(conn, p.encode_response(p.STATUS_OK))
                    log.info("shutdown requested by %s", addr)
                    self.stop()
                    return
                else:
                    try:
                        out = self.prior.sample(data, rho, seed)
                    except Exception as err:  # noqa: BLE001 - surface to client
                        self._reply_error(conn, f"prior failed: {err}")
                        continue
                    if out.shape != (h, w):
                        self._reply_error(conn,
                                          f"prior returned shape {out.shape}")
                        continue
                    self._send(conn, p.encode_response(p.STATUS_OK, out))

    def _read_frame(self, conn) -> bytes:
        head = self._recv_exact(conn, 4)
        (length,) = p.LEN.unpack(head)
        if length > p.MAX_FRAME:
            raise p.ProtocolError(f"frame of {length} bytes exceeds cap")
        return self._recv_exact(conn, length)

    @staticmethod
    def _recv_exact(conn, n) -> bytes:
        chunks = []
        got = 0
        while got < n:
            chunk = conn.recv(min(n - got, 1 << 20))
            if not chunk:
                raise ConnectionError("peer closed mid-frame")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    @staticmethod
    def _send(conn, frame: bytes):
        try:
            conn.sendall(frame)
        except OSError:
            raise ConnectionError("peer went away during send")

    def _reply_error(self, conn, message: str):
        log.warning("protocol error from client: %s", message)
        try:
            conn.sendall(p.encode_response(p.STATUS_ERROR, message=message))
        except OSError:
            pass
