import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from musicid.errors import EmptySession, MissingColumn, NonMonotonicTime
from musicid.ingest import (
    CANONICAL_HEADER,
    CHANNELS,
    REDUCED_SIGNALS,
    SIGNALS,
    BAND_RANGES_HZ,
    ChannelId,
    Session,
    SignalKind,
    drop_delta,
    load_dataset,
    parse_session,
    serialize_session,
    validate_session,
    write_dataset,
)

from conftest import edit_csv, session_csv


def test_channel_and_signal_enums():
    assert [c.value for c in CHANNELS] == ["TP9", "AF7", "AF8", "TP10"]
    assert [c.rank for c in CHANNELS] == [0, 1, 2, 3]
    assert len(SIGNALS) == 6
    assert BAND_RANGES_HZ[SignalKind.Alpha] == (7.5, 12.0)
    assert SignalKind.Raw.band_hz is None
    assert len(CANONICAL_HEADER) == 25


def test_parse_300_rows():
    s = parse_session(session_csv(), "u1", "SameSong", 1)
    assert s.sample_count == 300
    assert s.values.shape == (300, 6, 4)
    assert s.dropped_rows == 0


def test_missing_gamma_tp10():
    def drop(header, rows):
        j = header.index("Gamma_TP10")
        return header[:j] + header[j + 1:], [r[:j] + r[j + 1:] for r in rows]

    with pytest.raises(MissingColumn) as info:
        parse_session(edit_csv(session_csv(), drop), "u1", "SameSong", 1)
    assert "Gamma_TP10" in str(info.value)


def test_blank_cells_dropped():
    data = session_csv(n_samples=305)

    def blank(header, rows):
        j = header.index("Alpha_AF7")
        for i in (3, 50, 51, 200, 304):
            rows[i][j] = ""
        return header, rows

    s = parse_session(edit_csv(data, blank), "u1", "SameSong", 1)
    assert s.sample_count == 300
    assert s.dropped_rows == 5
    # survivors keep their order
    assert np.all(np.diff(s.timestamps) > 0)
    full = parse_session(data, "u1", "SameSong", 1)
    keep = [i for i in range(305) if i not in (3, 50, 51, 200, 304)]
    assert np.array_equal(s.values, full.values[keep])


def test_non_monotonic_timestamps():
    def swap(header, rows):
        rows[10][0], rows[11][0] = rows[11][0], rows[10][0]
        return header, rows

    with pytest.raises(NonMonotonicTime):
        parse_session(edit_csv(session_csv(), swap), "u1", "SameSong", 1)


def test_header_only_is_empty():
    with pytest.raises(EmptySession):
        parse_session(",".join(CANONICAL_HEADER) + "\n", "u1", "SameSong", 1)


def test_column_mapping():
    def rename(header, rows):
        return [h.replace("RAW_", "Raw-") for h in header], rows

    mapping = {f"RAW_{c.value}": f"Raw-{c.value}" for c in CHANNELS}
    a = parse_session(edit_csv(session_csv(), rename), "u1", "SameSong", 1, mapping)
    b = parse_session(session_csv(), "u1", "SameSong", 1)
    assert np.array_equal(a.values, b.values)


def test_extra_columns_and_order_ignored():
    def shuffle(header, rows):
        order = list(reversed(range(len(header))))
        return [header[i] for i in order] + ["Battery"], [[r[i] for i in order] + ["97"] for r in rows]

    a = parse_session(edit_csv(session_csv(), shuffle), "u1", "SameSong", 1)
    b = parse_session(session_csv(), "u1", "SameSong", 1)
    assert np.array_equal(a.values, b.values)


def test_roundtrip_idempotent():
    data = session_csv(seed=3)
    s1 = parse_session(data, "u1", "FavoriteSong", 2)
    out = serialize_session(s1)
    s2 = parse_session(out, "u1", "FavoriteSong", 2)
    assert np.array_equal(s1.values, s2.values)
    assert serialize_session(s2) == out


@settings(max_examples=30, deadline=None)
@given(st.lists(st.decimals(min_value=-1000, max_value=1000, places=3, allow_nan=False), min_size=24, max_size=24))
def test_roundtrip_decimal_text(cells):
    row = ",".join(str(c) for c in cells)
    text = ",".join(CANONICAL_HEADER) + "\n" + "\n".join(f"{t}.5,{row}" for t in range(3)) + "\n"
    s1 = parse_session(text, "u", "SameSong", 1)
    assert np.array_equal(s1.values[0].ravel(), np.array([float(c) for c in cells]))
    s2 = parse_session(serialize_session(s1), "u", "SameSong", 1)
    assert np.array_equal(s1.values, s2.values)
    assert np.array_equal(s1.timestamps, s2.timestamps)


def test_drop_delta():
    s = parse_session(session_csv(), "u1", "SameSong", 1)
    r = drop_delta(s)
    assert r.values.shape == (300, 5, 4)
    assert r.signals == REDUCED_SIGNALS
    assert SignalKind.Delta not in r.signals
    for sig in REDUCED_SIGNALS:
        for ch in CHANNELS:
            assert np.array_equal(r.series(sig, ch), s.series(sig, ch))


def test_drop_delta_zero_delta_is_projection():
    s = parse_session(session_csv(), "u1", "SameSong", 1)
    v = s.values.copy()
    v[:, 0, :] = 0.0
    z = Session(s.user_id, s.condition, 1, s.timestamps, v)
    assert np.array_equal(drop_delta(z).values, v[:, 1:, :])


def test_validate_ok_and_count_mismatch():
    assert validate_session(parse_session(session_csv(), "u", "SameSong", 1)).ok
    short = validate_session(parse_session(session_csv(n_samples=298), "u", "SameSong", 1))
    assert not short.ok and short.count_mismatch


def test_validate_reports_nan_location():
    s = parse_session(session_csv(), "u", "SameSong", 1)
    v = s.values.copy()
    v[17, SIGNALS.index(SignalKind.Beta), ChannelId.AF8.rank] = np.nan
    rep = validate_session(Session("u", "SameSong", 1, s.timestamps, v))
    assert rep.non_finite == [(17, "Beta", "AF8")]
    assert not rep.ok


def test_validate_irregular_interval():
    s = parse_session(session_csv(), "u", "SameSong", 1)
    t = s.timestamps.copy()
    t[100:] += 2.0
    rep = validate_session(Session("u", "SameSong", 1, t, s.values))
    assert rep.irregular_intervals == [100]


def test_session_arrays_are_read_only():
    s = parse_session(session_csv(), "u", "SameSong", 1)
    with pytest.raises(ValueError):
        s.values[0, 0, 0] = 1.0


def test_dataset_roundtrip(tmp_path, small_cohort):
    write_dataset(tmp_path, small_cohort)
    loaded = load_dataset(tmp_path)
    assert sorted(s.key for s in loaded) == sorted(s.key for s in small_cohort)
    by_key = {s.key: s for s in small_cohort}
    for s in loaded:
        assert np.array_equal(s.values, by_key[s.key].values)
