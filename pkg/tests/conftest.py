import numpy as np
import pytest

from glyphscreen.synthesis import CorpusConfig, WriterProfile, generate_corpus
from glyphscreen.recognizer import TrainingHyper, train
from glyphscreen.augment import augment_training_set
from glyphscreen.splits import split_dataset
from glyphscreen.evaluation import corpus_children


def clean_profile(writer_id="w0", seed=7, group="TD", **overrides):
    """A noise-free TD writer; overrides may switch on single impairments."""
    base = dict(writer_id=writer_id, group=group, tremor_amp=0.0, wobble_hz=5.0,
                segment_drop_prob=0.0, direction_reversal_prob=0.0,
                speed_jitter=0.0, seed=seed)
    base.update(overrides)
    return WriterProfile(**base)


@pytest.fixture(scope="session")
def small_corpus():
    """12 TD + 2 dysgraphic writers; enough for structural tests."""
    return generate_corpus(CorpusConfig(td_count=12, dysgraphic_count=2, master_seed=101))


@pytest.fixture(scope="session")
def desk_corpus():
    """60 TD + 6 dysgraphic writers; the desk-scale experiment corpus."""
    return generate_corpus(CorpusConfig(td_count=60, dysgraphic_count=6, master_seed=21))


@pytest.fixture(scope="session")
def desk_split(desk_corpus):
    split = split_dataset(corpus_children(desk_corpus), 5, 0, seed=2)
    train_recs = [r for r in desk_corpus if r.child_id in split.training_children]
    valid_recs = [r for r in desk_corpus if r.child_id in split.validation_children]
    dys_recs = [r for r in desk_corpus if r.child_id in split.dysgraphic_children]
    return split, train_recs, valid_recs, dys_recs


@pytest.fixture(scope="session")
def desk_rnn(desk_split):
    """A usefully-accurate sequence model trained once per test session."""
    _, train_recs, valid_recs, _ = desk_split
    augmented = augment_training_set(train_recs, 1.0, seed=4)
    return train("rnn", augmented, valid_recs, TrainingHyper(max_epochs=8, seed=5))


@pytest.fixture(scope="session")
def desk_cnn(desk_split):
    _, train_recs, valid_recs, _ = desk_split
    augmented = augment_training_set(train_recs, 1.0, seed=4)
    return train("cnn", augmented, valid_recs, TrainingHyper(max_epochs=8, seed=5))
