from __future__ import annotations

import base64
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from streamov.errors import EmptySession, ParseError, ValidationError
from streamov.harness.synthetic import SynthConfig, gen_synthetic_session
from streamov.ingest import (
    ObservationRecord,
    QueryEvent,
    SessionMeta,
    SessionScript,
    parse_session,
    read_session,
    session_lines,
    sliding_windows,
    validate_session,
    write_session,
)

from .conftest import emb_script

META = json.dumps({"kind": "meta", "id": "m", "emb_dim": 2, "sample_rate": 4})


def obs_line(i: int, t: float, **extra) -> str:
    rec = {"kind": "obs", "id": i, "t": t, "dur": 1.0, "visual": None, "audio": None,
           "v_emb": [1.0, 0.0], "a_emb": [0.0, 1.0]}
    rec.update(extra)
    return json.dumps(rec)


def test_minimal_file(tmp_path):
    q = json.dumps({"kind": "query", "t": 0.5, "text": "x", "gold_label": "respond",
                    "gold_answer": None, "category": None})
    path = tmp_path / "s.jsonl"
    path.write_text("\n".join([META, obs_line(0, 0.0), obs_line(1, 1.0), q]) + "\n")
    script = read_session(path)
    assert len(script.observations) == 2
    assert len(script.queries) == 1
    assert script.queries[0].gold_label == "respond"


def test_empty_file(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text("")
    with pytest.raises(EmptySession):
        read_session(path)


def test_meta_only_is_empty():
    with pytest.raises(EmptySession):
        parse_session([META])


def test_decreasing_t():
    with pytest.raises(ValidationError, match="t strictly increasing"):
        parse_session([META, obs_line(0, 1.0), obs_line(1, 0.5)])


def test_parse_error_carries_line():
    with pytest.raises(ParseError) as info:
        parse_session([META, obs_line(0, 0.0), "{not json"])
    assert info.value.line == 3
    with pytest.raises(ParseError) as info:
        parse_session([META, json.dumps({"kind": "obs", "id": 0})])
    assert info.value.line == 2


@pytest.mark.parametrize(
    "extra, message",
    [
        ({"dur": 0.0}, "dur > 0"),
        ({"v_emb": None}, "visual"),
        ({"a_emb": None}, "audio"),
        ({"v_emb": [1.0, 1.0]}, "unit-norm"),
        ({"a_emb": [1.0, 0.0, 0.0]}, "dimension"),
    ],
)
def test_invariant_violations(extra, message):
    with pytest.raises(ValidationError, match=message):
        parse_session([META, obs_line(0, 0.0, **extra)])


def test_query_outside_span():
    q = json.dumps({"kind": "query", "t": 9.0, "text": "x"})
    with pytest.raises(ValidationError, match="span"):
        parse_session([META, obs_line(0, 0.0), q])


def test_pcm_and_luma_decoding():
    pcm = np.array([0, 16384, -32768, 32767], dtype="<i2")
    luma = bytes([0, 10, 200, 255, 1, 2])
    rec = obs_line(
        0, 0.0,
        visual={"w": 3, "h": 2, "luma_b64": base64.b64encode(luma).decode()},
        audio={"pcm16_b64": base64.b64encode(pcm.tobytes()).decode()},
    )
    ob = parse_session([META, rec]).observations[0]
    assert ob.visual_pixels.shape == (2, 3)
    assert ob.visual_pixels.dtype == np.uint8
    assert ob.visual_pixels.tolist() == [[0, 10, 200], [255, 1, 2]]
    np.testing.assert_array_equal(ob.audio_pcm, [0.0, 0.5, -1.0, 32767 / 32768])


@pytest.mark.parametrize("n, w, sizes", [(3, 2, [1, 2, 2]), (1, 8, [1]), (5, 1, [1] * 5)])
def test_sliding_window_sizes(n, w, sizes):
    assert [len(win) for win in sliding_windows(emb_script(n), w)] == sizes


@given(n=st.integers(1, 30), w=st.integers(1, 10))
def test_window_membership(n, w):
    script = emb_script(n)
    seen = {i: 0 for i in range(n)}
    for win in sliding_windows(script, w):
        ids = [o.id for o in win.observations]
        assert ids == list(range(win.index - len(ids) + 1, win.index + 1))
        assert win.prev is None or win.prev.id == ids[0] - 1
        for i in ids:
            seen[i] += 1
    # full residency for everything that can still be followed by w-1 steps
    for i in range(n - w + 1):
        assert seen[i] == w
    assert all(c == min(w, n - i) for i, c in seen.items())


def test_round_trip_is_byte_identical(tmp_path):
    syn = gen_synthetic_session(11, SynthConfig(n_obs=30, n_queries=4, emb_dim=8))
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    write_session(syn.script, a)
    write_session(read_session(a), b)
    assert a.read_bytes() == b.read_bytes()


@given(
    ts=st.lists(st.floats(0.0, 1e6, allow_nan=False), min_size=1, max_size=8, unique=True),
    amp=st.floats(0.0, 1.0),
)
def test_round_trip_values(ts, amp):
    rng = np.random.default_rng(0)
    obs = []
    for i, t in enumerate(sorted(ts)):
        pcm = np.clip(rng.uniform(-amp, amp, 5), -1, 1)
        v = rng.standard_normal(4)
        obs.append(ObservationRecord(i, t, 0.5, rng.integers(0, 256, (2, 2)).astype(np.uint8), pcm, 8, v / np.linalg.norm(v), None))
    script = validate_session(SessionScript(SessionMeta("r", 4, 8), tuple(obs), (QueryEvent(obs[0].t, "q"),)))
    back = parse_session(session_lines(script))
    for x, y in zip(script.observations, back.observations):
        assert y.t == pytest.approx(x.t, rel=1e-8, abs=1e-12)
        np.testing.assert_array_equal(x.visual_pixels, y.visual_pixels)
        assert np.max(np.abs(x.audio_pcm - y.audio_pcm)) <= 0.5 / 32768 + 1e-12
        np.testing.assert_allclose(y.v_emb, x.v_emb, rtol=1e-8, atol=1e-9)
    assert session_lines(back) == session_lines(parse_session(session_lines(back)))
