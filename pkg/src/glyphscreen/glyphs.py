"""The 37-class glyph alphabet: lowercase letters, digits, and the star class.

Class indices are fixed: letters 'a'-'z' map to 0-25 in alphabetical
order, digits '0'-'9' to 26-35 in numeric order, and the synthetic
non-glyph class '*' to 36. Real recordings never carry '*'; it only
exists as a training-time rejection class built from hybrid trajectories.
"""

import string

LETTERS = tuple(string.ascii_lowercase)
DIGITS = tuple(string.digits)
STAR = "*"

REAL_GLYPHS = LETTERS + DIGITS          # the 36 glyphs a child is asked to write
ALL_GLYPHS = REAL_GLYPHS + (STAR,)      # model output classes
NUM_CLASSES = len(ALL_GLYPHS)

_INDEX = {code: i for i, code in enumerate(ALL_GLYPHS)}


def glyph_index(code: str) -> int:
    """Class index of a glyph code; raises KeyError for unknown codes."""
    return _INDEX[code]


def glyph_code(index: int) -> str:
    """Glyph code for a class index 0-36."""
    return ALL_GLYPHS[index]


def is_real_glyph(code: str) -> bool:
    return code in _INDEX and code != STAR
