import pytest

from glyphscreen.splits import split_dataset


def make_children(n_td, n_dys):
    return ([(f"td{i}", "TD") for i in range(n_td)]
            + [(f"dys{i}", "D") for i in range(n_dys)])


def test_ten_children_five_folds_blocks_of_two():
    children = make_children(10, 0)
    for f in range(5):
        split = split_dataset(children, 5, f, seed=3)
        assert len(split.validation_children) == 2
        assert len(split.training_children) == 8


def test_validation_blocks_tile_td_exactly_once():
    children = make_children(23, 4)
    seen = []
    for f in range(5):
        split = split_dataset(children, 5, f, seed=9)
        seen.extend(split.validation_children)
        assert split.training_children | split.validation_children == {
            c for c, g in children if g == "TD"}
        assert not (split.training_children & split.validation_children)
    assert sorted(seen) == sorted(c for c, g in children if g == "TD")


def test_dysgraphic_never_in_training_or_validation():
    children = make_children(15, 5)
    for f in range(5):
        split = split_dataset(children, 5, f, seed=1)
        dys = {c for c, g in children if g == "D"}
        assert split.dysgraphic_children == dys
        assert not (split.training_children & dys)
        assert not (split.validation_children & dys)


def test_same_seed_same_split():
    children = make_children(17, 2)
    a = split_dataset(children, 5, 2, seed=42)
    b = split_dataset(children, 5, 2, seed=42)
    assert a == b


def test_validation_share_close_to_20_percent():
    children = make_children(101, 0)
    for f in range(5):
        split = split_dataset(children, 5, f, seed=0)
        share = len(split.validation_children) / 101
        assert abs(share - 0.2) <= 1.5 / 101


def test_too_few_children():
    with pytest.raises(ValueError):
        split_dataset(make_children(4, 1), 5, 0, seed=0)


def test_bad_fold_index():
    with pytest.raises(ValueError):
        split_dataset(make_children(10, 0), 5, 5, seed=0)
