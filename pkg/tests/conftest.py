"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from csi_sentry.wire import NUM_SUBCARRIERS, CsiHeader, CsiPacket


def make_packet(
    rng: np.random.Generator,
    ntx: int | None = None,
    nrx: int | None = None,
    timestamp: int | None = None,
) -> CsiPacket:
    """A random packet whose matrix entries are int8-valued, as on the wire."""
    ntx = int(rng.integers(1, 4)) if ntx is None else ntx
    nrx = int(rng.integers(1, 4)) if nrx is None else nrx
    header = CsiHeader(
        timestamp=int(rng.integers(0, 2**32)) if timestamp is None else timestamp,
        bfee_count=int(rng.integers(0, 2**16)),
        nrx=nrx,
        ntx=ntx,
        rssi_a=int(rng.integers(0, 61)),
        rssi_b=int(rng.integers(0, 61)),
        rssi_c=int(rng.integers(0, 61)),
        noise=int(rng.integers(-100, 0)),
        agc=int(rng.integers(0, 50)),
        antenna_sel=int(rng.integers(0, 64)),
        length=2 * NUM_SUBCARRIERS * ntx * nrx,
        rate=int(rng.integers(0, 2**16)),
    )
    parts = rng.integers(-127, 128, size=(NUM_SUBCARRIERS, ntx, nrx, 2))
    csi = parts[..., 0].astype(np.complex128) + 1j * parts[..., 1]
    return CsiPacket(header=header, csi=csi)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
