import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikedelays.errors import BadMagic, ChannelOutOfRange, TruncatedFile
from spikedelays.events import (
    EventStream,
    bin_events,
    load_events,
    write_events,
)


def make_stream(times, channels, channel_count=4, duration_us=10_000):
    return EventStream(
        times_us=np.asarray(times, dtype=np.uint32),
        channels=np.asarray(channels, dtype=np.uint16),
        channel_count=channel_count,
        duration_us=duration_us,
    )


class TestEventFile:
    def test_empty_round_trip(self, tmp_path):
        f = tmp_path / "empty.spk"
        write_events(make_stream([], [], channel_count=3), f)
        back = load_events(f)
        assert len(back) == 0
        assert back.channel_count == 3

    def test_round_trip_bytes_identical(self, tmp_path):
        f = tmp_path / "a.spk"
        g = tmp_path / "b.spk"
        stream = make_stream([0, 400, 600, 600, 9_999], [2, 0, 0, 3, 1])
        write_events(stream, f)
        write_events(load_events(f), g)
        assert f.read_bytes() == g.read_bytes()

    def test_bad_magic(self, tmp_path):
        f = tmp_path / "bad.spk"
        f.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(BadMagic):
            load_events(f)

    def test_truncated_payload(self, tmp_path):
        f = tmp_path / "trunc.spk"
        header = struct.pack("<4sHHII", b"SPK1", 1, 4, 3, 1000)
        two_records = struct.pack("<IH", 10, 0) + struct.pack("<IH", 20, 1)
        f.write_bytes(header + two_records)
        with pytest.raises(TruncatedFile):
            load_events(f)

    def test_channel_out_of_range(self, tmp_path):
        f = tmp_path / "chan.spk"
        header = struct.pack("<4sHHII", b"SPK1", 1, 2, 1, 1000)
        f.write_bytes(header + struct.pack("<IH", 10, 5))
        with pytest.raises(ChannelOutOfRange):
            load_events(f)

    def test_load_sorts_by_time(self, tmp_path):
        stream = make_stream([500, 100, 300], [0, 1, 2])
        assert list(stream.times_us) == [100, 300, 500]
        assert list(stream.channels) == [1, 2, 0]


class TestBinning:
    def test_single_event_boundary_bin(self):
        s = make_stream([0], [2], channel_count=4)
        t = bin_events(s, dt_ms=1.0, timesteps=10)
        assert t.values[2, 0] == 1
        assert t.values.sum() == 1
        assert t.dt_ms == 1.0
        assert t.values.shape == (4, 10)

    def test_two_events_same_bin(self):
        s = make_stream([400, 600], [0, 0], channel_count=1)
        t = bin_events(s, dt_ms=1.0, timesteps=10)
        assert t.values[0, 0] == 2

    def test_event_at_horizon_dropped(self):
        s = make_stream([10_000], [0], channel_count=1, duration_us=20_000)
        t = bin_events(s, dt_ms=1.0, timesteps=10)
        assert t.values.sum() == 0

    def test_binary_mode_clamps(self):
        s = make_stream([100, 200, 300], [0, 0, 0], channel_count=1)
        t = bin_events(s, dt_ms=1.0, timesteps=5, binary=True)
        assert t.values[0, 0] == 1

    @settings(deadline=None, max_examples=30)
    @given(seed=st.integers(0, 10_000), n=st.integers(0, 200))
    def test_mass_conservation_and_order_independence(self, seed, n):
        rng = np.random.default_rng(seed)
        times = rng.integers(0, 50_000, size=n)
        chans = rng.integers(0, 8, size=n)
        s1 = make_stream(times, chans, channel_count=8, duration_us=60_000)
        perm = rng.permutation(n)
        s2 = make_stream(times[perm], chans[perm], channel_count=8, duration_us=60_000)
        t1 = bin_events(s1, dt_ms=1.0, timesteps=30)
        t2 = bin_events(s2, dt_ms=1.0, timesteps=30)
        assert t1.values.sum() == np.sum(times < 30_000)
        np.testing.assert_array_equal(t1.values, t2.values)
