"""Child-level dataset splits for k-fold cross-validation.

Splits are always by child, never by glyph: the recognizer must be
evaluated on writers it has never seen. Dysgraphic children are never
part of training or validation; they form their own evaluation set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_FOLDS = 5


@dataclass
class DatasetSplit:
    training_children: frozenset
    validation_children: frozenset
    dysgraphic_children: frozenset


def split_dataset(children, fold_count: int = DEFAULT_FOLDS, fold_index: int = 0,
                  seed: int = 0) -> DatasetSplit:
    """Partition (child_id, group) pairs for one cross-validation fold.

    TD children are shuffled once by ``seed`` (the shuffle does not depend
    on fold_index, so the folds of one seed tile the TD set exactly) and cut
    into fold_count near-equal blocks; block ``fold_index`` is the
    validation set. All group "D" children go to dysgraphic_children.
    """
    if not 0 <= fold_index < fold_count:
        raise ValueError(f"fold_index {fold_index} outside 0..{fold_count - 1}")
    td = [cid for cid, group in children if group == "TD"]
    dys = [cid for cid, group in children if group != "TD"]
    if len(td) < fold_count:
        raise ValueError(f"need at least {fold_count} TD children, have {len(td)}")

    order = np.random.Generator(np.random.PCG64(seed)).permutation(len(td))
    shuffled = [td[i] for i in order]
    blocks = np.array_split(np.arange(len(td)), fold_count)
    valid_idx = set(blocks[fold_index].tolist())
    validation = frozenset(shuffled[i] for i in valid_idx)
    training = frozenset(c for i, c in enumerate(shuffled) if i not in valid_idx)
    return DatasetSplit(
        training_children=training,
        validation_children=validation,
        dysgraphic_children=frozenset(dys),
    )
