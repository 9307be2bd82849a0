"""Iterated commutator words in the free group <a, b>.

Letters are encoded as nonzero ints: a = 1, b = 2, a^-1 = -1, b^-1 = -2, and
printed as ``a``, ``b``, ``A``, ``B``. Enumeration order is a < b < A < B.

W_0 = {a, b, A, B} and W_i = {[x, y] : x, y in W_{i-1}, x != y, x != y^-1}
with [x, y] = x y x^-1 y^-1, all as formal (unreduced) words.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

LEVEL_CEILING = 3

_LETTER_NAMES = {1: "a", 2: "b", -1: "A", -2: "B"}
_NAME_LETTERS = {v: k for k, v in _LETTER_NAMES.items()}
_ORDER = {1: 0, 2: 1, -1: 2, -2: 3}


class ResourceCeilingError(RuntimeError):
    """The requested level or size is past the desk-scale ceiling."""


class FreeWord(tuple):
    """A word over {a, b, A, B}; a tuple of nonzero ints in {+-1, +-2}."""

    __slots__ = ()

    def __new__(cls, letters=()):
        if isinstance(letters, str):
            try:
                letters = [_NAME_LETTERS[ch] for ch in letters]
            except KeyError as exc:
                raise ValueError(f"bad letter {exc.args[0]!r} in {letters!r}") from None
        w = super().__new__(cls, letters)
        for x in w:
            if x not in _LETTER_NAMES:
                raise ValueError(f"bad letter {x!r}")
        return w

    def inverse(self) -> "FreeWord":
        return FreeWord(-x for x in reversed(self))

    def __add__(self, other):
        return FreeWord(tuple(self) + tuple(other))

    def __str__(self):
        return "".join(_LETTER_NAMES[x] for x in self) or "1"

    def __repr__(self):
        return f"FreeWord({str(self)!r})"


def commutator(x: Sequence[int], y: Sequence[int]) -> FreeWord:
    x, y = FreeWord(x), FreeWord(y)
    return x + y + x.inverse() + y.inverse()


def reduce(w: Sequence[int]) -> FreeWord:
    out: List[int] = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return FreeWord(out)


def is_reduced(w: Sequence[int]) -> bool:
    return all(w[k] != -w[k + 1] for k in range(len(w) - 1))


def _blocks(w: Sequence, block_len: int) -> List[tuple]:
    return [tuple(w[k:k + block_len]) for k in range(0, len(w), block_len)]


def _inverse_block(block: tuple) -> tuple:
    return tuple(-x for x in reversed(block))


def block_reduce_step(w: Sequence[int], block_len: int) -> FreeWord:
    """One left-to-right pass cancelling a block followed by its inverse.

    After a cancellation scanning resumes at the block after the cancelled
    pair, so a cancellation never exposes a new pair within the same pass.
    """
    if block_len < 1 or len(w) % block_len:
        raise ValueError(f"length {len(w)} is not a multiple of block length {block_len}")
    blocks = _blocks(w, block_len)
    out: List[int] = []
    k = 0
    while k < len(blocks):
        if k + 1 < len(blocks) and blocks[k + 1] == _inverse_block(blocks[k]):
            k += 2
        else:
            out.extend(blocks[k])
            k += 1
    return FreeWord(out)


def staged_reduce(w: Sequence[int], level: int) -> FreeWord:
    """Block passes with lengths 4^(level-1), ..., 4, 1 applied in turn."""
    w = FreeWord(w)
    for j in range(level - 1, -1, -1):
        w = block_reduce_step(w, 4**j)
    return w


@dataclass(frozen=True)
class CommLevelSet:
    level: int
    words: Tuple[FreeWord, ...]

    def __len__(self):
        return len(self.words)

    def __iter__(self):
        return iter(self.words)


def _check_level(i: int, allow_large: bool):
    if i < 0:
        raise ValueError(f"level must be nonnegative, got {i}")
    if i > LEVEL_CEILING and not allow_large:
        raise ResourceCeilingError(
            f"level {i} exceeds the ceiling {LEVEL_CEILING}; pass allow_large=True to run it"
        )


@lru_cache(maxsize=None)
def _level_words(i: int) -> Tuple[FreeWord, ...]:
    if i == 0:
        return tuple(FreeWord((x,)) for x in sorted(_LETTER_NAMES, key=_ORDER.get))
    prev = _level_words(i - 1)
    return tuple(
        commutator(x, y)
        for x in prev
        for y in prev
        if x != y and x != y.inverse()
    )


def gen_comm_level(i: int, allow_large: bool = False) -> CommLevelSet:
    _check_level(i, allow_large)
    return CommLevelSet(i, _level_words(i))


def comm_count(i: int) -> int:
    """c_i from the recurrence c_i = c_{i-1} (c_{i-1} - 2), c_0 = 4."""
    c = 4
    for _ in range(i):
        c = c * (c - 2)
    return c


def count_levels(i_max: int, allow_large: bool = False) -> List[Tuple[int, int, int, int]]:
    """Rows (i, c_i, 2^(2^i), 2^(2^i + 1)), with c_i counted by enumeration."""
    _check_level(i_max, allow_large)
    return [(i, len(gen_comm_level(i, allow_large)), 2 ** (2**i), 2 ** (2**i + 1)) for i in range(i_max + 1)]


class NotInW(ValueError):
    """Reconstruction failed: the reduced word is not the image of any word in W."""

    def __init__(self, level: int, reason: str):
        super().__init__(f"not in W (failed expanding level {level}): {reason}")
        self.level = level
        self.reason = reason


def _atom_pass(atoms: Sequence[tuple]) -> List[tuple]:
    """:func:`block_reduce_step` on a sequence of atoms (one atom per block)."""
    out = []
    k = 0
    while k < len(atoms):
        if k + 1 < len(atoms) and atoms[k + 1] == _inverse_block(atoms[k]):
            k += 2
        else:
            out.append(atoms[k])
            k += 1
    return out


def _expand(atoms: List[tuple], level: int) -> List[tuple]:
    """Invert one block pass: regroup level-``level`` atoms into commutator blocks.

    ``atoms`` is the result of a pass over blocks [x, y] = x y X Y of atoms.
    Only the last atom Y of a block can cancel, against the first atom x' of
    the next block, which forces x' = y. Reading x, y, X fixes the block, and
    the following atom is Y exactly when Y survived (x' = y^-1 would make the
    next block degenerate), so the expansion is unique.
    """
    m = len(atoms)
    blocks: List[tuple] = []
    p = 0
    carried: Optional[tuple] = None  # first atom of the current block, if it cancelled
    while True:
        if carried is None:
            if p == m:
                break
            x = atoms[p]
            p += 1
        else:
            x, carried = carried, None
        if p + 2 > m:
            raise NotInW(level, "word ends inside a commutator block")
        y, x_inv = atoms[p], atoms[p + 1]
        p += 2
        if x_inv != _inverse_block(x):
            raise NotInW(level, f"third atom of block {len(blocks)} is not the inverse of the first")
        if x == y or x == _inverse_block(y):
            raise NotInW(level, f"block {len(blocks)} pairs an atom with itself or its inverse")
        y_inv = _inverse_block(y)
        blocks.append((x, y, x_inv, y_inv))
        if p == m:
            raise NotInW(level, "last block lost its final atom")
        if atoms[p] == y_inv:
            p += 1
        else:
            carried = y
    # the regrouping must be admissible and reproduce the atoms under one pass
    for k in range(len(blocks) - 1):
        if blocks[k + 1] == tuple(_inverse_block(t) for t in reversed(blocks[k])):
            raise NotInW(level, f"blocks {k} and {k + 1} are inverse")
    if _atom_pass([t for blk in blocks for t in blk]) != list(atoms):
        raise NotInW(level, "regrouped blocks do not pass back to the given word")
    return [sum(blk, ()) for blk in blocks]


def reconstruct(reduced: Sequence[int]) -> Tuple[int, FreeWord]:
    """Recover the unique w in W whose free reduction is ``reduced``.

    Works level by level: letters are regrouped into W_1 blocks, those into
    W_2 blocks, and so on until a single block remains. Raises
    :class:`NotInW` naming the level at which expansion failed.
    """
    reduced = FreeWord(reduced)
    if not is_reduced(reduced):
        raise ValueError(f"{reduced} is not reduced")
    if not reduced:
        raise NotInW(0, "empty word")
    atoms = [(x,) for x in reduced]
    level = 0
    while len(atoms) > 1:
        atoms = _expand(atoms, level)
        level += 1
    w = FreeWord(atoms[0])
    if reduce(w) != reduced:
        raise NotInW(level, "reconstruction does not reduce to the input")
    return level, w


def reduced_images(i: int, allow_large: bool = False) -> List[FreeWord]:
    return [reduce(w) for w in gen_comm_level(i, allow_large)]


def verify_injectivity(i: int, allow_large: bool = False) -> bool:
    """Reduced forms of W_i are pairwise distinct and miss every lower level."""
    _check_level(i, allow_large)
    lower = set()
    for j in range(i):
        lower.update(reduced_images(j, allow_large))
    mine = reduced_images(i, allow_large)
    return len(set(mine)) == len(mine) and not lower.intersection(mine)


def level_stats(i: int, allow_large: bool = False) -> Dict[str, int]:
    images = reduced_images(i, allow_large)
    lengths = [len(w) for w in images]
    return {
        "i": i,
        "c_i": len(images),
        "distinct_reduced": len(set(images)),
        "min_reduced_length": min(lengths),
        "max_reduced_length": max(lengths),
    }


def growth_floor(n: float) -> float:
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    return 2.0 ** (math.sqrt(n) / 4.0)
