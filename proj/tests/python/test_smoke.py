import numpy as np
import pytest

import evstream


def test_rates():
    assert evstream.track_rate(250) == 640_000.0
    assert evstream.track_rate(2500) == 6_400_000.0
    assert evstream.budget_events(1.0) == 390
    assert evstream.budget_events(100.0) == 39_062


def test_evst_round_trip(tmp_path):
    events = evstream.generate([100, 0, 50], seed=3, width=64, height=48)
    assert events.dtype == evstream.event_dtype()
    assert len(events) == 150
    path = tmp_path / "s.evst"
    evstream.write_evst(path, events, 64, 48)
    back, geometry = evstream.read_evst(path)
    assert geometry == (64, 48)
    np.testing.assert_array_equal(back, events)
    assert [len(w) for w in evstream.window_split(back)] == [100, 0, 50]


def test_bucket_prefix():
    window = evstream.window_split(evstream.generate([1000], seed=5))[0]
    tracks, dropped = evstream.partition_bucket(window, 5, 150)
    assert dropped == 250
    for k in range(1, 6):
        np.testing.assert_array_equal(evstream.reconstruct_bucket(tracks[:k]), window[: 150 * k])


def test_reduction_and_tensor():
    window = evstream.window_split(evstream.generate([2000], seed=7, width=32, height=16))[0]
    np.testing.assert_array_equal(evstream.truncate_tail(window, 390), window[:390])
    kept = evstream.sample_even(window, 390)
    assert len(kept) == 390
    grid = evstream.build_tensor(kept, 32, 16)
    assert grid.shape == (20, 16, 32)
    assert grid.sum() == 390


def test_simulate_is_deterministic():
    a, rows = evstream.simulate(duration=2, bandwidth=5)
    b, _ = evstream.simulate(duration=2, bandwidth=5)
    assert a == b
    assert a["windows"] == len(rows) == 40
    assert all(1 <= r["subscribed_tracks"] <= 5 for r in rows)


def test_errors():
    bad = np.zeros(2, dtype=evstream.event_dtype())
    bad["t"] = [20, 10]
    with pytest.raises(evstream.EvstreamError, match="ordering"):
        evstream.window_split(bad)
    with pytest.raises(TypeError):
        evstream.simulate(bogus=1)
