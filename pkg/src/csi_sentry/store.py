"""Durable append-only log of amplitude records.

Single CSV-formatted text file, one row per record, fsync'd before each
append is acknowledged.  Log rows use shortest round-trip float
formatting so persisted rows read back bit-identical; the CSV export
rounds to 6 significant digits for plotting.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterator

from .dsp import AmplitudeRecord
from .exceptions import BadRange, IoFailure, OutOfOrder

CSV_HEADER = "packet_id,timestamp_us,amplitude_db,amplitude_smoothed,variance"


def _format_row(rec: AmplitudeRecord) -> str:
    # repr of a builtin float is the shortest lossless decimal form
    return (
        f"{int(rec.packet_id)},{int(rec.timestamp)},{float(rec.amplitude_db)!r},"
        f"{float(rec.amplitude_smoothed)!r},{float(rec.variance)!r}"
    )


def _parse_row(line: str) -> AmplitudeRecord:
    parts = line.split(",")
    if len(parts) != 5:
        raise ValueError(f"expected 5 fields, got {len(parts)}")
    return AmplitudeRecord(
        packet_id=int(parts[0]),
        timestamp=int(parts[1]),
        amplitude_db=float(parts[2]),
        amplitude_smoothed=float(parts[3]),
        variance=float(parts[4]),
    )


def _scan(data: bytes, path) -> tuple[list[AmplitudeRecord], int]:
    """Parse raw log bytes, tolerating one truncated tail line.

    Returns (records, byte offset just past the last complete row).
    Corruption anywhere but the tail raises IoFailure.
    """
    records: list[AmplitudeRecord] = []
    if not data:
        return records, 0
    lines = data.split(b"\n")
    # split leaves a trailing b"" when data ends with a newline; anything
    # else there is an unterminated fragment from a torn write
    fragment = lines.pop()
    offset = 0
    for i, raw in enumerate(lines):
        line_end = offset + len(raw) + 1
        line = raw.decode("utf-8", errors="replace")
        if i == 0:
            if line != CSV_HEADER:
                raise IoFailure(f"{path}: bad header line")
        else:
            try:
                rec = _parse_row(line)
            except ValueError as exc:
                if i == len(lines) - 1 and not fragment:
                    # damaged final line: treat as the truncated tail
                    return records, offset
                raise IoFailure(f"{path}: corrupt row at line {i + 1}: {exc}") from exc
            if records and rec.packet_id <= records[-1].packet_id:
                raise IoFailure(
                    f"{path}: non-increasing packet_id at line {i + 1}"
                )
            records.append(rec)
        offset = line_end
    return records, offset


class RecordLog:
    """Append-only record store; one writer, any number of readers."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            existing = self.path.read_bytes() if self.path.exists() else b""
        except OSError as exc:
            raise IoFailure(f"cannot read {self.path}: {exc}") from exc
        records, keep = _scan(existing, self.path)
        self._count = len(records)
        self._last_id = records[-1].packet_id if records else 0
        try:
            self._fh = open(self.path, "a+", encoding="utf-8", newline="")
            if keep < len(existing):
                # drop the torn tail left by a crashed writer
                self._fh.truncate(keep)
            if keep == 0:
                self._fh.write(CSV_HEADER + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
        except OSError as exc:
            raise IoFailure(f"cannot open {self.path}: {exc}") from exc

    # -- writing ------------------------------------------------------

    def append(self, rec: AmplitudeRecord) -> None:
        """Durably append one record; returns only after fsync."""
        if rec.packet_id <= self._last_id:
            raise OutOfOrder(
                f"packet_id {rec.packet_id} <= last persisted {self._last_id}"
            )
        try:
            self._fh.write(_format_row(rec) + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except OSError as exc:
            raise IoFailure(f"append to {self.path} failed: {exc}") from exc
        self._last_id = rec.packet_id
        self._count += 1

    # -- reading ------------------------------------------------------

    def records(self) -> list[AmplitudeRecord]:
        """Snapshot of all complete rows (fresh read, safe while writing)."""
        try:
            data = self.path.read_bytes()
        except OSError as exc:
            raise IoFailure(f"cannot read {self.path}: {exc}") from exc
        return _scan(data, self.path)[0]

    def query_range(self, t0: int, t1: int) -> list[AmplitudeRecord]:
        """Records with t0 <= timestamp <= t1, in packet_id order."""
        if t0 > t1:
            raise BadRange(f"t0 {t0} > t1 {t1}")
        return [r for r in self.records() if t0 <= r.timestamp <= t1]

    def export_csv(self, out) -> int:
        """Write header plus one row per record at 6 significant digits."""
        rows = self.records()
        try:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(CSV_HEADER + "\n")
                for r in rows:
                    fh.write(
                        f"{r.packet_id},{r.timestamp},{r.amplitude_db:.6g},"
                        f"{r.amplitude_smoothed:.6g},{r.variance:.6g}\n"
                    )
        except OSError as exc:
            raise IoFailure(f"export to {out} failed: {exc}") from exc
        return len(rows)

    # -- bookkeeping ---------------------------------------------------

    def __len__(self) -> int:
        return self._count

    @property
    def last_packet_id(self) -> int:
        return self._last_id

    def __iter__(self) -> Iterator[AmplitudeRecord]:
        return iter(self.records())

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "RecordLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
