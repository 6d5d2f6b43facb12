import socket
import struct

import numpy as np
import pytest

from prior_bridge import GaussianMixturePrior, PriorServer, ReferenceGaussianPrior
from prior_bridge import protocol as p


@pytest.fixture
def server():
    srv = PriorServer(ReferenceGaussianPrior(mean=0.0, precision=1.0)).start()
    yield srv
    srv.stop()


def roundtrip(port, frame, expect_reply=True):
    with socket.create_connection(("127.0.0.1", port), timeout=5) as s:
        s.sendall(frame)
        head = s.recv(4)
        if not expect_reply and not head:
            return None
        (ln,) = struct.unpack("<I", head)
        buf = b""
        while len(buf) < ln:
            buf += s.recv(ln - len(buf))
        return buf


class TestOps:
    def test_ping(self, server):
        payload = roundtrip(server.port, p.encode_request(p.OP_PING))
        assert p.decode_response(payload, None) is None

    def test_sample_reference_recipe(self, server):
        x = np.full((4, 4), 2.0, np.float32)
        payload = roundtrip(server.port,
                            p.encode_request(p.OP_SAMPLE, 1.0, 123, x))
        out = p.decode_response(payload, (4, 4))
        rng = np.random.default_rng(123)
        pp = 1.0 + 1.0
        pm = (0.0 + x.astype(np.float64) / 1.0) / pp
        want = (pm + rng.standard_normal((4, 4)) / np.sqrt(pp)).astype(np.float32)
        np.testing.assert_array_equal(out, want)

    def test_sample_deterministic_across_connections(self, server):
        x = np.random.default_rng(5).uniform(0, 1, (8, 8)).astype(np.float32)
        frame = p.encode_request(p.OP_SAMPLE, 0.7, 999, x)
        a = roundtrip(server.port, frame)
        b = roundtrip(server.port, frame)
        assert a == b  # identical response bytes

    def test_scalar_conjugate_mean_over_seeds(self, server):
        # m=0, P=1, rho=1, x=2: posterior mean 1.0; average over 1e4 seeds
        x = np.full((1, 1), 2.0, np.float32)
        total = 0.0
        n = 10_000
        with socket.create_connection(("127.0.0.1", server.port), timeout=10) as s:
            for seed in range(n):
                s.sendall(p.encode_request(p.OP_SAMPLE, 1.0, seed, x))
                head = s.recv(4)
                (ln,) = struct.unpack("<I", head)
                buf = b""
                while len(buf) < ln:
                    buf += s.recv(ln - len(buf))
                total += float(p.decode_response(buf, (1, 1))[0, 0])
        assert abs(total / n - 1.0) < 0.03

    def test_shutdown_clean(self):
        srv = PriorServer(ReferenceGaussianPrior()).start()
        payload = roundtrip(srv.port, p.encode_request(p.OP_SHUTDOWN))
        assert p.decode_response(payload, None) is None
        srv.join(timeout=5)
        with pytest.raises(OSError):
            socket.create_connection(("127.0.0.1", srv.port), timeout=0.5)


class TestRobustness:
    def test_malformed_frame_gets_error_response(self, server):
        bad = struct.pack("<I", 8) + b"GARBAGE!"
        payload = roundtrip(server.port, bad)
        with pytest.raises(p.ProtocolError):
            p.decode_response(payload, None)

    def test_oversize_frame_rejected(self, server):
        huge = struct.pack("<I", p.MAX_FRAME + 1)
        payload = roundtrip(server.port, huge + b"x")
        with pytest.raises(p.ProtocolError, match="cap"):
            p.decode_response(payload, None)

    def test_server_survives_abrupt_disconnects(self, server):
        for _ in range(20):
            s = socket.create_connection(("127.0.0.1", server.port), timeout=2)
            s.sendall(b"\x10\x00\x00")  # partial length prefix
            s.close()
        assert p.decode_response(
            roundtrip(server.port, p.encode_request(p.OP_PING)), None) is None


class TestMixturePrior:
    def test_posterior_moments_match_analytic(self):
        prior = GaussianMixturePrior([0.5, 0.5], [0.2, 0.8], [0.05, 0.05])
        x = np.full((100, 100), 0.75, np.float32)
        draws = np.concatenate([prior.sample(x, 0.3, seed=s).ravel()
                                for s in range(20)]).astype(np.float64)
        # analytic posterior: responsibilities over the two components
        tau2, rho2 = 0.05**2, 0.3**2
        mv = tau2 + rho2
        logr = -0.5 * (0.75 - np.array([0.2, 0.8])) ** 2 / mv
        r = np.exp(logr - logr.max())
        r /= r.sum()
        pp = 1 / tau2 + 1 / rho2
        pm = (np.array([0.2, 0.8]) / tau2 + 0.75 / rho2) / pp
        want_mean = float(r @ pm)
        want_var = float(r @ (1 / pp + pm**2) - want_mean**2)
        assert abs(draws.mean() - want_mean) < 4 * np.sqrt(want_var / draws.size)
        assert abs(draws.var() / want_var - 1) < 0.05

    def test_served_mixture(self):
        srv = PriorServer(GaussianMixturePrior([0.5, 0.5], [0.2, 0.8],
                                               [0.05, 0.05])).start()
        try:
            x = np.full((4, 4), 0.21, np.float32)
            payload = roundtrip(srv.port, p.encode_request(p.OP_SAMPLE, 0.1, 7, x))
            out = p.decode_response(payload, (4, 4))
            assert np.isfinite(out).all()
            assert abs(out.mean() - 0.21) < 0.1  # rho small: posterior near x
        finally:
            srv.stop()
