"""Portable event files and binning onto the simulation grid.

Event file layout (little-endian):

    magic          4 bytes  b"SPK1"
    version        u16      currently 1
    channel_count  u16
    event_count    u32
    duration_us    u32
    records        event_count * (time_us u32, channel u16)

Times are integer microseconds so that write/load round-trips are exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, ChannelOutOfRange, TruncatedFile

MAGIC = b"SPK1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHII")
_RECORD_DTYPE = np.dtype([("time_us", "<u4"), ("channel", "<u2")])


@dataclass
class EventStream:
    """A single sample's events: parallel time/channel arrays plus metadata.

    times_us is sorted non-decreasing; every channel is < channel_count;
    duration_us >= the last event time.
    """

    times_us: np.ndarray
    channels: np.ndarray
    channel_count: int
    duration_us: int

    def __post_init__(self):
        self.times_us = np.asarray(self.times_us, dtype=np.uint32)
        self.channels = np.asarray(self.channels, dtype=np.uint16)
        if self.times_us.shape != self.channels.shape:
            raise ValueError("times_us and channels must have equal length")
        if self.times_us.size:
            order = np.argsort(self.times_us, kind="stable")
            self.times_us = self.times_us[order]
            self.channels = self.channels[order]
            if int(self.channels.max()) >= self.channel_count:
                raise ChannelOutOfRange(
                    f"channel {int(self.channels.max())} >= "
                    f"channel_count {self.channel_count}"
                )
            self.duration_us = max(int(self.duration_us), int(self.times_us[-1]))

    def __len__(self) -> int:
        return int(self.times_us.size)


@dataclass
class SpikeTensor:
    """Dense per-channel, per-step spike counts on the simulation grid."""

    values: np.ndarray  # (channels, timesteps), non-negative integer counts
    dt_ms: float

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("values must be a (channels, timesteps) matrix")
        if self.dt_ms <= 0:
            raise ValueError("dt_ms must be positive")
        if self.values.size and self.values.min() < 0:
            raise ValueError("spike counts must be non-negative")

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def timesteps(self) -> int:
        return self.values.shape[1]


def load_events(path) -> EventStream:
    """Read an event file. Events come back sorted by time."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size or raw[:4] != MAGIC:
        raise BadMagic(f"{path}: not an event file")
    magic, version, channel_count, event_count, duration_us = _HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise BadMagic(f"{path}: unsupported event-file version {version}")
    payload = raw[_HEADER.size:]
    if len(payload) < event_count * _RECORD_DTYPE.itemsize:
        raise TruncatedFile(
            f"{path}: header declares {event_count} events, payload holds "
            f"{len(payload) // _RECORD_DTYPE.itemsize}"
        )
    records = np.frombuffer(payload, dtype=_RECORD_DTYPE, count=event_count)
    return EventStream(
        times_us=records["time_us"].copy(),
        channels=records["channel"].copy(),
        channel_count=channel_count,
        duration_us=duration_us,
    )


def write_events(stream: EventStream, path) -> None:
    """Write an event file; load_events(write_events(s)) is the identity."""
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, stream.channel_count, len(stream), stream.duration_us
    )
    records = np.empty(len(stream), dtype=_RECORD_DTYPE)
    records["time_us"] = stream.times_us
    records["channel"] = stream.channels
    Path(path).write_bytes(header + records.tobytes())


def bin_events(
    stream: EventStream, dt_ms: float, timesteps: int, binary: bool = False
) -> SpikeTensor:
    """Accumulate events into per-channel spike counts.

    An event at time t lands in bin floor(t_us / (1000*dt_ms)); events at
    or beyond timesteps*dt_ms are dropped. With ``binary`` the counts are
    clamped to {0, 1}.
    """
    if dt_ms <= 0:
        raise ValueError("dt_ms must be positive")
    if timesteps <= 0:
        raise ValueError("timesteps must be positive")
    values = np.zeros((stream.channel_count, timesteps), dtype=np.int32)
    if len(stream):
        bins = np.floor(stream.times_us / (1000.0 * dt_ms)).astype(np.int64)
        keep = bins < timesteps
        np.add.at(values, (stream.channels[keep].astype(np.int64), bins[keep]), 1)
    if binary:
        np.minimum(values, 1, out=values)
    return SpikeTensor(values=values, dt_ms=dt_ms)
