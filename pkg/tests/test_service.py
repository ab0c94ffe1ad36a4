import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from glyphscreen.glyphs import REAL_GLYPHS, glyph_index
from glyphscreen.recognizer import predict_proba, save_model
from glyphscreen.diagnosis import Calibration, diagnose, score_session, \
    sessions_from_recordings
from glyphscreen.service import create_app
from glyphscreen.synthesis import synthesize_glyph

from conftest import clean_profile


@pytest.fixture(scope="module")
def service_env(tmp_path_factory, desk_rnn):
    root = tmp_path_factory.mktemp("service")
    model_dir = root / "models"
    model_dir.mkdir()
    desk_rnn.extras.setdefault("calibration",
                               {"threshold": 0.8, "rate": 0.086, "source": "fold0"})
    desk_rnn.extras.setdefault("discriminative", {
        "subset": list(REAL_GLYPHS[:15]),
        "ranking": [[g, 0.9, 0.4, 0.5] for g in REAL_GLYPHS],
    })
    save_model(model_dir / "rnn_fold0.gsmodel", desk_rnn)
    data_dir = root / "sessions"
    return model_dir, data_dir


@pytest.fixture()
def client(service_env):
    model_dir, data_dir = service_env
    app = create_app(str(model_dir), str(data_dir))
    return TestClient(app)


def sample_rows(rec):
    return [[s.t, s.x, s.y, 1 if s.pen_down else 0, s.pressure] for s in rec.samples]


def write_glyph(client, sid, glyph, seed=50):
    rec = synthesize_glyph(clean_profile(seed=seed), glyph, glyph_index(glyph))
    return client.post(f"/sessions/{sid}/glyphs",
                       json={"glyph": glyph, "samples": sample_rows(rec)}), rec


class TestModels:
    def test_list_models(self, client):
        out = client.get("/models").json()
        assert out["models"][0]["model_id"] == "rnn_fold0"
        assert out["models"][0]["kind"] == "rnn"
        assert out["models"][0]["calibration"]["threshold"] == 0.8

    def test_discriminative_endpoint(self, client):
        out = client.get("/models/rnn_fold0/discriminative")
        assert out.status_code == 200
        assert len(out.json()["subset"]) == 15

    def test_unknown_model_404(self, client):
        out = client.post("/sessions", json={"model_id": "nope", "mode": "full36"})
        assert out.status_code == 404
        assert out.json()["error"]["code"] == "model_not_found"


class TestSessions:
    def test_create_full36_permutation(self, client):
        out = client.post("/sessions", json={"model_id": "rnn_fold0",
                                             "mode": "full36", "seed": 4}).json()
        assert sorted(out["dictation_order"]) == sorted(REAL_GLYPHS)
        assert out["status"] == "open"

    def test_same_seed_same_order(self, client):
        a = client.post("/sessions", json={"model_id": "rnn_fold0", "seed": 9}).json()
        b = client.post("/sessions", json={"model_id": "rnn_fold0", "seed": 9}).json()
        assert a["dictation_order"] == b["dictation_order"]

    def test_discriminative_mode_order(self, client):
        out = client.post("/sessions", json={"model_id": "rnn_fold0",
                                             "mode": "discriminative15", "seed": 1}).json()
        assert sorted(out["dictation_order"]) == sorted(REAL_GLYPHS[:15])

    def test_invalid_mode_422(self, client):
        out = client.post("/sessions", json={"model_id": "rnn_fold0", "mode": "full99"})
        assert out.status_code == 422
        assert out.json()["error"]["code"] == "invalid_mode"


class TestSubmit:
    def test_first_submission_running_d(self, client, desk_rnn):
        sid = client.post("/sessions", json={"model_id": "rnn_fold0", "seed": 2}).json()["session_id"]
        glyph = "e"
        out, rec = write_glyph(client, sid, glyph)
        body = out.json()
        assert out.status_code == 200
        assert body["running_d"] == body["requested_score"]
        # bit-identical to offline scoring
        offline = float(predict_proba(desk_rnn, rec)[glyph_index(glyph)])
        assert body["requested_score"] == offline
        assert len(body["probabilities"]) == 5

    def test_duplicate_conflict(self, client):
        sid = client.post("/sessions", json={"model_id": "rnn_fold0", "seed": 3}).json()["session_id"]
        first, _ = write_glyph(client, sid, "a")
        assert first.status_code == 200
        before = client.get(f"/sessions/{sid}").json()
        dup, _ = write_glyph(client, sid, "a")
        assert dup.status_code == 409
        assert dup.json()["error"]["code"] == "duplicate_glyph"
        after = client.get(f"/sessions/{sid}").json()
        assert before == after    # state unchanged

    def test_unknown_session_404(self, client):
        out = client.post("/sessions/deadbeef/glyphs",
                          json={"glyph": "a", "samples": [[0, 0, 0, 1, None]]})
        assert out.status_code == 404

    def test_invalid_samples_422(self, client):
        sid = client.post("/sessions", json={"model_id": "rnn_fold0", "seed": 5}).json()["session_id"]
        out = client.post(f"/sessions/{sid}/glyphs",
                          json={"glyph": "b", "samples": [[0, 0, "x", 1, None]]})
        assert out.status_code == 422
        assert out.json()["error"]["code"] == "invalid_samples"

    def test_non_monotone_timestamps_422(self, client):
        sid = client.post("/sessions", json={"model_id": "rnn_fold0", "seed": 6}).json()["session_id"]
        rows = [[0, 0, 0, 1, None], [5, 1, 0, 1, None], [3, 2, 0, 1, None]]
        out = client.post(f"/sessions/{sid}/glyphs", json={"glyph": "c", "samples": rows})
        assert out.status_code == 422

    def test_degenerate_flagged_uniform(self, client):
        sid = client.post("/sessions", json={"model_id": "rnn_fold0", "seed": 7}).json()["session_id"]
        rows = [[i * 5.0, 1.0, 1.0, 1, None] for i in range(10)]
        out = client.post(f"/sessions/{sid}/glyphs", json={"glyph": "d", "samples": rows})
        body = out.json()
        assert body["degenerate"] is True
        assert body["requested_score"] == pytest.approx(1 / 37)


class TestReportAndPersistence:
    def run_full_session(self, client, seed=11):
        created = client.post("/sessions",
                              json={"model_id": "rnn_fold0", "seed": seed}).json()
        sid = created["session_id"]
        recs = {}
        for glyph in created["dictation_order"]:
            out, rec = write_glyph(client, sid, glyph, seed=60)
            assert out.status_code == 200
            recs[glyph] = rec
        return sid, recs

    def test_incomplete_report_409(self, client):
        sid = client.post("/sessions", json={"model_id": "rnn_fold0", "seed": 8}).json()["session_id"]
        write_glyph(client, sid, "a")
        out = client.get(f"/sessions/{sid}/report")
        assert out.status_code == 409
        assert "missing glyphs" in out.json()["error"]["detail"]

    def test_full_session_report_matches_offline(self, client, desk_rnn):
        sid, recs = self.run_full_session(client)
        report = client.get(f"/sessions/{sid}/report").json()
        again = client.get(f"/sessions/{sid}/report").json()
        assert report == again   # idempotent

        # offline equivalence on the same recordings
        from glyphscreen.recording import serialize_recordings, parse_recording_file
        blob = serialize_recordings([recs[g] for g in REAL_GLYPHS])
        session = sessions_from_recordings(parse_recording_file(blob))[0]
        score_session(desk_rnn, session)
        cal_info = desk_rnn.extras["calibration"]
        offline = diagnose(session, Calibration(threshold=cal_info["threshold"],
                                                rate=cal_info["rate"]))
        assert report["d_statistic"] == offline.d_value
        assert report["verdict"] == offline.verdict
        for g in REAL_GLYPHS:
            assert report["per_glyph_scores"][g] == offline.scores[g]

        # running D after all 36 equals the D statistic exactly
        state = client.get(f"/sessions/{sid}").json()
        running = np.mean([state["scores"][g] for g in REAL_GLYPHS])
        assert report["d_statistic"] == pytest.approx(float(running), abs=1e-15)

    def test_sessions_survive_restart(self, service_env, client):
        sid, _ = self.run_full_session(client, seed=12)
        report_before = client.get(f"/sessions/{sid}/report").json()

        model_dir, data_dir = service_env
        fresh = TestClient(create_app(str(model_dir), str(data_dir)))
        report_after = fresh.get(f"/sessions/{sid}/report").json()
        assert report_before == report_after


class TestEcho:
    def test_round_trip_bit_exact(self, client):
        rec = synthesize_glyph(clean_profile(seed=77, tremor_amp=0.2), "w", 3)
        rows = sample_rows(rec)
        out = client.post("/echo", json={"samples": rows}).json()
        assert out["samples"] == json.loads(json.dumps(rows))
