import json

import pytest

from glyphscreen.glyphs import ALL_GLYPHS, NUM_CLASSES, glyph_code, glyph_index
from glyphscreen.recording import (GlyphRecording, RecordingError, SamplePoint,
                                   parse_recording_file, serialize_recordings)


def make_line(t_values, glyph="a", child="c1"):
    samples = [[t, 1.0 + i, 2.0 + i, 1, None] for i, t in enumerate(t_values)]
    return json.dumps({"child_id": child, "group": "TD", "glyph": glyph,
                       "sampling_hz": 200, "resolution_mm": 0.25,
                       "samples": samples})


class TestGlyphClasses:
    def test_exactly_37_classes(self):
        assert NUM_CLASSES == 37
        assert len(set(ALL_GLYPHS)) == 37

    def test_index_code_bijection(self):
        for i in range(37):
            assert glyph_index(glyph_code(i)) == i
        assert glyph_index("a") == 0
        assert glyph_index("z") == 25
        assert glyph_index("0") == 26
        assert glyph_index("9") == 35
        assert glyph_index("*") == 36


class TestParse:
    def test_empty_file(self):
        assert parse_recording_file(b"") == []

    def test_single_line_three_samples(self):
        recs = parse_recording_file((make_line([0, 5, 10]) + "\n").encode())
        assert len(recs) == 1
        assert len(recs[0].samples) == 3
        assert recs[0].samples[1].t == 5.0

    def test_non_monotone_t_cites_line(self):
        data = (make_line([0, 5, 3]) + "\n").encode()
        with pytest.raises(RecordingError, match="non-monotone t at line 1"):
            parse_recording_file(data)

    def test_malformed_json_cites_line(self):
        data = (make_line([0, 5]) + "\n{not json\n").encode()
        with pytest.raises(RecordingError, match="line 2"):
            parse_recording_file(data)

    def test_order_preserved(self):
        data = "\n".join(make_line([0, 5], glyph=g) for g in "abc").encode()
        recs = parse_recording_file(data)
        assert [r.requested for r in recs] == ["a", "b", "c"]


class TestRoundTrip:
    def test_parse_serialize_identity(self):
        rec = GlyphRecording(
            child_id="kid-7", group="D", requested="q",
            samples=[SamplePoint(0.0, 1.25, -3.5, True, 0.75),
                     SamplePoint(5.0, 1.5, -3.25, True, None),
                     SamplePoint(60.0, 9.0, 0.125, False)],
            meta={"sampling_hz": 200.0, "resolution_mm": 0.25},
        )
        blob = serialize_recordings([rec])
        back = parse_recording_file(blob)
        assert len(back) == 1
        got = back[0]
        assert got.child_id == rec.child_id
        assert got.group == rec.group
        assert got.requested == rec.requested
        assert got.meta == rec.meta
        assert got.samples == rec.samples
        # bit-exact through a second round trip
        assert serialize_recordings(back) == blob


class TestInvariants:
    def test_requires_pen_down(self):
        with pytest.raises(RecordingError):
            GlyphRecording("c", "TD", "a", [SamplePoint(0, 0, 0, False)])

    def test_requires_samples(self):
        with pytest.raises(RecordingError):
            GlyphRecording("c", "TD", "a", [])

    def test_rejects_unknown_glyph(self):
        with pytest.raises(RecordingError):
            GlyphRecording("c", "TD", "A", [SamplePoint(0, 0, 0, True)])

    def test_strokes_split_on_pen_up(self):
        rec = GlyphRecording("c", "TD", "i", [
            SamplePoint(0, 0, 0, True), SamplePoint(5, 1, 0, True),
            SamplePoint(50, 2, 2, False),
            SamplePoint(100, 3, 3, True), SamplePoint(105, 3.5, 3, True),
        ])
        strokes = rec.strokes()
        assert [len(s) for s in strokes] == [2, 2]
