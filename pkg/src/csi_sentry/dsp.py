"""Signal path from decoded packets to amplitude/variance records.

Per packet: rescale the raw CSI to absolute power using RSSI and AGC,
take the Frobenius norm of the configured subcarrier slice in dB, then
run the 5-point moving average and the sliding-window population
variance over the resulting amplitude stream.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .exceptions import BadWindow, InvalidScale, ZeroPower
from .wire import NUM_SUBCARRIERS, CsiHeader, CsiPacket, extract_subcarrier

# Conversion constant from the RSSI/AGC combination convention of the
# source measurement tool: total RSSI in dB, minus 44, minus AGC, is the
# received power in dBm.
RSS_OFFSET_DB = 44.0


@dataclass
class DspConfig:
    variance_window: int = 20
    smoothing_window: int = 5
    subcarrier: int = 0
    db_floor: float = -100.0

    def __post_init__(self):
        if self.variance_window < 2:
            raise BadWindow(f"variance window {self.variance_window} < 2")
        if self.smoothing_window < 1:
            raise ValueError("smoothing window must be >= 1")


@dataclass
class AmplitudeRecord:
    """One processed packet: the stored and plotted row."""

    packet_id: int
    timestamp: int
    amplitude_db: float
    amplitude_smoothed: float
    variance: float


def compute_scale(header: CsiHeader, csi: np.ndarray) -> float:
    """Linear power scale factor taking raw CSI to absolute units.

    total_rss_dbm = 10*log10(sum of 10^(rssi_i/10) over nonzero rssi)
                    - 44 - agc
    scale = 10^(total_rss_dbm / 10) / (csi_pwr / 30)

    where csi_pwr sums |entry|^2 over all 30 subcarriers.  Scaled entries
    are raw * sqrt(scale).
    """
    rssi = [r for r in (header.rssi_a, header.rssi_b, header.rssi_c) if r != 0]
    if not rssi:
        raise InvalidScale("all RSSI fields are zero")
    csi_pwr = float(np.sum(csi.real**2 + csi.imag**2))
    if csi_pwr == 0.0:
        raise ZeroPower("CSI matrix has zero total power")
    total_rss_dbm = (
        10.0 * math.log10(sum(10.0 ** (r / 10.0) for r in rssi))
        - RSS_OFFSET_DB
        - header.agc
    )
    return 10.0 ** (total_rss_dbm / 10.0) / (csi_pwr / NUM_SUBCARRIERS)


def scaled_norm_db(slice_: np.ndarray, scale: float, db_floor: float = -100.0) -> float:
    """20*log10 of the Frobenius norm of ``sqrt(scale) * slice_``, clamped."""
    power = scale * float(np.sum(slice_.real**2 + slice_.imag**2))
    amplitude = math.sqrt(power)
    if amplitude <= 10.0 ** (db_floor / 20.0):
        return db_floor
    return 20.0 * math.log10(amplitude)


def amplitude_db(packet: CsiPacket, cfg: DspConfig | None = None) -> float:
    """Scaled subcarrier amplitude of one packet, in dB."""
    cfg = cfg or DspConfig()
    scale = compute_scale(packet.header, packet.csi)
    return scaled_norm_db(extract_subcarrier(packet, cfg.subcarrier), scale,
                          cfg.db_floor)


class MovingAverage:
    """Causal moving average with prefix-mean warmup."""

    def __init__(self, window: int = 5):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self._buf: deque[float] = deque(maxlen=window)

    def push(self, x: float) -> float:
        self._buf.append(float(x))
        return sum(self._buf) / len(self._buf)


class SlidingVariance:
    """Population variance over a trailing window.

    Recomputed two-pass per sample: exact on constant input and immune to
    the cancellation that kills the naive sum-of-squares form at dB
    magnitudes.  O(window) per push, negligible at telemetry rates.
    """

    def __init__(self, window: int = 20):
        if window < 2:
            raise BadWindow(f"variance window {window} < 2")
        self.window = window
        self._buf: deque[float] = deque(maxlen=window)

    def push(self, x: float) -> float:
        self._buf.append(float(x))
        buf = self._buf
        n = len(buf)
        if n == 1 or min(buf) == max(buf):
            return 0.0
        mean = sum(buf) / n
        var = sum((v - mean) ** 2 for v in buf) / n
        return max(var, 0.0)


def moving_average(stream, window: int = 5) -> np.ndarray:
    """Batch form of MovingAverage; output length equals input length."""
    acc = MovingAverage(window)
    return np.array([acc.push(x) for x in np.asarray(stream, dtype=np.float64)])


def windowed_variance(stream, window: int = 20) -> np.ndarray:
    """Batch form of SlidingVariance; out[0] is 0 by construction."""
    acc = SlidingVariance(window)
    return np.array([acc.push(x) for x in np.asarray(stream, dtype=np.float64)])


@dataclass
class AmplitudePipeline:
    """Stateful packet -> AmplitudeRecord stage.

    Single consumer; packet ids are assigned in arrival order starting
    at 1 unless the caller supplies its own.
    """

    cfg: DspConfig = field(default_factory=DspConfig)

    def __post_init__(self):
        self._smoother = MovingAverage(self.cfg.smoothing_window)
        self._variance = SlidingVariance(self.cfg.variance_window)
        self._next_id = 1

    def process(self, packet: CsiPacket, packet_id: int | None = None) -> AmplitudeRecord:
        if packet_id is None:
            packet_id = self._next_id
        self._next_id = packet_id + 1
        amp = amplitude_db(packet, self.cfg)
        return AmplitudeRecord(
            packet_id=packet_id,
            timestamp=packet.header.timestamp,
            amplitude_db=amp,
            amplitude_smoothed=self._smoother.push(amp),
            variance=self._variance.push(amp),
        )
