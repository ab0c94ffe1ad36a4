import numpy as np
import pytest

from glyphscreen.nn.serialize import ModelFormatError, load_container, save_container
from glyphscreen.recognizer import TrainingHyper, load_model, save_model, train
from glyphscreen.synthesis import synthesize_glyph
from glyphscreen.recognizer import predict_proba

from conftest import clean_profile


def test_container_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {"a.w": rng.normal(size=(3, 4)), "b": rng.normal(size=(7,))}
    header = {"container": "glyphscreen-model", "kind": "test", "note": 1}
    path = tmp_path / "m.gsmodel"
    save_container(path, header, tensors)
    got_header, got_tensors = load_container(path)
    assert got_header["kind"] == "test"
    assert got_header["byte_order"] == "little"
    for name, arr in tensors.items():
        assert np.array_equal(got_tensors[name], arr)


def test_bad_magic(tmp_path):
    path = tmp_path / "junk.gsmodel"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ModelFormatError):
        load_container(path)


def test_model_round_trip_preserves_predictions(tmp_path, small_corpus):
    train_set = [r for r in small_corpus if r.child_id != "td0000"]
    valid_set = [r for r in small_corpus if r.child_id == "td0000"]
    model = train("rnn", train_set, valid_set, TrainingHyper(max_epochs=1, seed=3))
    model.extras["calibration"] = {"threshold": 0.5, "rate": 0.086, "source": "fold0"}
    path = tmp_path / "rnn.gsmodel"
    save_model(path, model)
    loaded = load_model(path)

    assert loaded.kind == "rnn"
    assert loaded.best_epoch == model.best_epoch
    assert loaded.history == model.history
    assert loaded.hyper == model.hyper
    assert loaded.extras["calibration"]["threshold"] == 0.5
    assert loaded.preprocessing == model.preprocessing

    rec = synthesize_glyph(clean_profile(seed=5), "e", 0)
    assert np.array_equal(predict_proba(model, rec), predict_proba(loaded, rec))


def test_cnn_model_round_trip(tmp_path, small_corpus):
    train_set = [r for r in small_corpus if r.child_id != "td0000"]
    valid_set = [r for r in small_corpus if r.child_id == "td0000"]
    model = train("cnn", train_set, valid_set, TrainingHyper(max_epochs=1, seed=3))
    path = tmp_path / "cnn.gsmodel"
    save_model(path, model)
    loaded = load_model(path)
    rec = synthesize_glyph(clean_profile(seed=6), "4", 1)
    assert np.array_equal(predict_proba(model, rec), predict_proba(loaded, rec))
