import pytest
from hypothesis import given, settings, strategies as st

from streamsched.workload import (
    ProfileKind,
    RateProfile,
    TraceError,
    constant,
    load_trace,
    rate_at,
    spike,
    synthetic_diurnal,
    write_trace,
)


def test_constant():
    assert rate_at(constant(42.0), 0) == 42.0
    assert rate_at(constant(42.0), 1e6) == 42.0


def test_spike_window_is_half_open():
    p = spike(100.0, 3600, 7200, 2.0)
    assert rate_at(p, 3599.9) == 100.0
    assert rate_at(p, 3600) == 200.0
    assert rate_at(p, 3601) == 200.0
    assert rate_at(p, 7200) == 100.0


def test_step_to_three_times():
    p = RateProfile(ProfileKind.TRACE, 100.0, trace=((0, 1.0), (4000, 3.0)))
    assert rate_at(p, 3999) == 100.0
    assert rate_at(p, 4000) == 300.0


def test_before_first_breakpoint_uses_base():
    p = RateProfile(ProfileKind.TRACE, 50.0, trace=((100, 2.0),))
    assert rate_at(p, 99.99) == 50.0
    assert rate_at(p, 100) == 100.0


def test_invalid_profiles():
    with pytest.raises(ValueError):
        RateProfile(ProfileKind.TRACE, 1.0, trace=((10, 1.0), (10, 2.0)))
    with pytest.raises(ValueError):
        RateProfile(ProfileKind.CONSTANT, -1.0)
    with pytest.raises(ValueError):
        RateProfile(ProfileKind.SPIKE, 1.0)


def test_load_48_hour_trace(tmp_path):
    path = tmp_path / "day.csv"
    points = synthetic_diurnal(48)
    write_trace(path, points)
    p = load_trace(path, base_rate=100.0)
    assert len(p.trace) == 48
    assert p.duration == 28_800
    assert [m for _, m in p.trace] == [m for _, m in points]
    assert rate_at(p, 13 * 600 + 1) == pytest.approx(100.0 * points[13][1])


def test_synthetic_diurnal_shape():
    mults = [m for _, m in synthetic_diurnal(24)]
    peak = max(range(24), key=mults.__getitem__)
    assert 12 <= peak <= 14
    assert mults[0] == mults[23] == min(mults)


def test_identity_trace(tmp_path):
    path = tmp_path / "flat.csv"
    write_trace(path, [(h, 1.0) for h in range(5)])
    p = load_trace(path, base_rate=7.0)
    assert all(rate_at(p, t) == 7.0 for t in range(0, 4000, 37))


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("", "empty"),
        ("offset_hours,multiplier\n", "no rows"),
        ("hours,mult\n0,1\n", ":1:"),
        ("offset_hours,multiplier\n0,1\n1,x\n", ":3: non-numeric"),
        ("offset_hours,multiplier\n0,1\n1,2,3\n", ":3: expected 2 columns"),
        ("offset_hours,multiplier\n0,1\n2,1\n1,1\n", ":4: offsets must be strictly increasing"),
        ("offset_hours,multiplier\n0,-1\n", ":2: invalid value"),
    ],
)
def test_malformed_traces(tmp_path, text, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(TraceError, match=fragment):
        load_trace(path)


@pytest.mark.parametrize("compression", [1.0, 60.0, 600.0, 3600.0])
def test_compression_scales_time_only(tmp_path, compression):
    points = synthetic_diurnal(30)
    path = tmp_path / "t.csv"
    write_trace(path, points)
    p = load_trace(path, 10.0, compression)
    assert [m for _, m in p.trace] == [m for _, m in points]
    assert [o for o, _ in p.trace] == [h * compression for h, _ in points]
    for h, m in points:
        assert rate_at(p, (h + 0.5) * compression) == pytest.approx(10.0 * m)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=1, max_size=20), st.floats(0, 2e4))
def test_right_continuous_steps(mults, t):
    p = RateProfile(ProfileKind.TRACE, 1.0, trace=tuple((600.0 * i, m) for i, m in enumerate(mults)))
    i = min(int(t // 600), len(mults) - 1)
    assert rate_at(p, t) == mults[i]
    assert rate_at(p, 600.0 * i) == mults[i]
