"""Framed TCP ingest: length-prefixed packets, bounded FIFO, zero loss.

The wire is [u16 big-endian length][encoded packet], repeated.  The
server runs two stages, a socket reader and a sink consumer, joined by a
bounded FIFO queue; by default a full queue blocks the reader
(backpressure) so nothing is dropped.
"""

from __future__ import annotations

import logging
import os
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

from .exceptions import (
    BindFailure,
    Closed,
    ConnectFailure,
    ConnectionLost,
    Truncated,
)
from .exceptions import CsiSentryError
from .wire import HEADER_SIZE, CsiPacket, decode_packet, encode_packet

log = logging.getLogger(__name__)

DEFAULT_PORT = 5501
PORT_ENV_VAR = "CSI_SENTRY_PORT"

_PREFIX = struct.Struct(">H")


def default_port() -> int:
    """Port 5501 unless CSI_SENTRY_PORT overrides it."""
    return int(os.environ.get(PORT_ENV_VAR, DEFAULT_PORT))


def frame(body: bytes) -> bytes:
    if len(body) > 0xFFFF:
        raise ValueError(f"frame body of {len(body)} bytes exceeds u16 prefix")
    return _PREFIX.pack(len(body)) + body


@dataclass
class IngestStats:
    received: int = 0
    decoded: int = 0
    decode_errors: int = 0
    dropped: int = 0


class FifoQueue:
    """Bounded FIFO for one producer and one consumer.

    push blocks while full (backpressure); pop blocks while empty.  After
    close(), push raises Closed immediately and pop drains the remaining
    items before raising Closed.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity {capacity} < 1")
        self.capacity = capacity
        self._items: deque = deque()
        self._lock = threading.Lock()
        self._not_full = threading.Condition(self._lock)
        self._not_empty = threading.Condition(self._lock)
        self._closed = False

    def push(self, item) -> None:
        with self._not_full:
            while len(self._items) >= self.capacity and not self._closed:
                self._not_full.wait()
            if self._closed:
                raise Closed("queue is shut down")
            self._items.append(item)
            self._not_empty.notify()

    def try_push(self, item) -> bool:
        """Non-blocking push; False when full (caller counts the drop)."""
        with self._not_full:
            if self._closed:
                raise Closed("queue is shut down")
            if len(self._items) >= self.capacity:
                return False
            self._items.append(item)
            self._not_empty.notify()
            return True

    def pop(self):
        with self._not_empty:
            while not self._items and not self._closed:
                self._not_empty.wait()
            if self._items:
                item = self._items.popleft()
                self._not_full.notify()
                return item
            raise Closed("queue is shut down")

    def close(self) -> None:
        with self._lock:
            self._closed = True
            self._not_full.notify_all()
            self._not_empty.notify_all()

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


def fifo_queue(capacity: int) -> FifoQueue:
    return FifoQueue(capacity)


class IngestServer:
    """Single-client TCP server feeding decoded packets to a sink.

    The reader thread accepts one connection at a time, decodes frames,
    and enqueues packets; the consumer thread drains the queue in FIFO
    order into ``sink``.  stop() drains whatever is queued, then returns
    the final stats.
    """

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        queue_capacity: int = 256,
        sink: Callable[[CsiPacket], None] | None = None,
        block_on_full: bool = True,
    ):
        if queue_capacity < 1:
            raise ValueError(f"queue capacity {queue_capacity} < 1")
        self.host = host
        self.port = port
        self.sink = sink or (lambda packet: None)
        self.block_on_full = block_on_full
        self.stats = IngestStats()
        self._queue = FifoQueue(queue_capacity)
        self._shutdown = threading.Event()
        self._listener: socket.socket | None = None
        self._conn: socket.socket | None = None
        self._conn_lock = threading.Lock()
        self._reader: threading.Thread | None = None
        self._consumer: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------

    def start(self) -> "IngestServer":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((self.host, self.port))
        except OSError as exc:
            listener.close()
            raise BindFailure(f"cannot bind {self.host}:{self.port}: {exc}") from exc
        listener.listen(1)
        listener.settimeout(0.2)
        self._listener = listener
        self.port = listener.getsockname()[1]
        self._reader = threading.Thread(target=self._accept_loop, daemon=True)
        self._consumer = threading.Thread(target=self._consume_loop, daemon=True)
        self._reader.start()
        self._consumer.start()
        return self

    def stop(self) -> IngestStats:
        """Shut down, drain the queue through the sink, return stats."""
        self._shutdown.set()
        with self._conn_lock:
            if self._conn is not None:
                try:
                    self._conn.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
        if self._reader is not None:
            self._reader.join()
        if self._listener is not None:
            self._listener.close()
        self._queue.close()
        if self._consumer is not None:
            self._consumer.join()
        return self.stats

    def __enter__(self) -> "IngestServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- internals -----------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._shutdown.is_set():
            try:
                conn, _addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with self._conn_lock:
                self._conn = conn
            try:
                self._read_frames(conn)
            finally:
                with self._conn_lock:
                    self._conn = None
                conn.close()

    def _read_frames(self, conn: socket.socket) -> None:
        conn.settimeout(0.2)
        while not self._shutdown.is_set():
            try:
                prefix = self._recv_body(conn, _PREFIX.size, eof_ok=True)
            except (Truncated, OSError):
                return
            if prefix is None:
                return
            (length,) = _PREFIX.unpack(prefix)
            if length < HEADER_SIZE:
                # framing garbage: this connection can no longer be trusted
                log.warning("malformed length prefix %d; dropping connection", length)
                return
            try:
                body = self._recv_body(conn, length)
            except (Truncated, OSError):
                return
            if body is None:
                return
            self.stats.received += 1
            try:
                packet = decode_packet(body)
            except CsiSentryError:
                self.stats.decode_errors += 1
                continue
            self.stats.decoded += 1
            try:
                if self.block_on_full:
                    self._push_with_shutdown(packet)
                elif not self._queue.try_push(packet):
                    self.stats.dropped += 1
            except Closed:
                return

    def _recv_body(
        self, conn: socket.socket, length: int, eof_ok: bool = False
    ) -> bytes | None:
        """Exact read that tolerates timeouts without losing position.

        Returns None on shutdown, or on clean EOF at a frame boundary
        when eof_ok is set; raises Truncated on EOF mid-read.
        """
        chunks = []
        got = 0
        while got < length:
            if self._shutdown.is_set():
                return None
            try:
                chunk = conn.recv(length - got)
            except socket.timeout:
                continue
            if not chunk:
                if eof_ok and got == 0:
                    return None
                raise Truncated(f"connection closed mid-frame ({got}/{length})")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def _push_with_shutdown(self, packet: CsiPacket) -> None:
        # bounded wait so shutdown can interrupt a backpressured reader
        while not self._shutdown.is_set():
            if self._queue.try_push(packet):
                return
            time.sleep(0.001)
        raise Closed("server shutting down")

    def _consume_loop(self) -> None:
        while True:
            try:
                packet = self._queue.pop()
            except Closed:
                return
            try:
                self.sink(packet)
            except Exception:
                log.exception("sink failed; packet skipped")


def run_ingest_server(
    host: str,
    port: int,
    queue_capacity: int,
    sink: Callable[[CsiPacket], None],
    shutdown: threading.Event,
    block_on_full: bool = True,
) -> IngestStats:
    """Serve until ``shutdown`` is set, then drain and return stats."""
    server = IngestServer(host, port, queue_capacity, sink, block_on_full)
    server.start()
    try:
        shutdown.wait()
    finally:
        stats = server.stop()
    return stats


def stream_packets(
    host: str,
    port: int,
    source: Iterable[CsiPacket],
    rate_hz: float | None = None,
) -> int:
    """Encode and send packets as frames, paced at rate_hz; returns count.

    Pacing follows an absolute schedule (packet i goes out at t0 + i/rate)
    so the long-run rate stays within 1% regardless of per-send jitter.
    """
    try:
        conn = socket.create_connection((host, port), timeout=10.0)
    except OSError as exc:
        raise ConnectFailure(f"cannot connect to {host}:{port}: {exc}") from exc
    sent = 0
    t0 = time.monotonic()
    try:
        with conn:
            for packet in source:
                data = frame(encode_packet(packet))
                if rate_hz:
                    target = t0 + sent / rate_hz
                    delay = target - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
                try:
                    conn.sendall(data)
                except OSError as exc:
                    raise ConnectionLost(
                        f"connection lost after {sent} packets: {exc}", sent=sent
                    ) from exc
                sent += 1
    except ConnectionLost:
        raise
    except OSError as exc:
        raise ConnectionLost(f"connection lost after {sent} packets: {exc}",
                             sent=sent) from exc
    return sent


# -- framed capture files ----------------------------------------------


def write_capture(path, packets: Iterable[CsiPacket]) -> int:
    """Write packets to a file in the wire framing; returns count."""
    count = 0
    with open(path, "wb") as fh:
        for packet in packets:
            fh.write(frame(encode_packet(packet)))
            count += 1
    return count


def read_capture(path) -> Iterator[CsiPacket]:
    """Yield packets from a framed capture file."""
    with open(path, "rb") as fh:
        while True:
            prefix = fh.read(_PREFIX.size)
            if not prefix:
                return
            if len(prefix) < _PREFIX.size:
                raise Truncated("capture ends inside a frame prefix")
            (length,) = _PREFIX.unpack(prefix)
            body = fh.read(length)
            if len(body) < length:
                raise Truncated("capture ends inside a frame body")
            yield decode_packet(body)
