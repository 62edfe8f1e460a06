import dataclasses as dc
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .rng import make_rng

__all__ = [
    "PermutationBlock",
    "PermutationDescriptor",
    "compose",
    "equivalent_permutation",
]


BLOCK_KINDS = {"identity", "uniform-random", "explicit"}
DESCRIPTOR_KINDS = {"identity", "uniform-random", "block-diagonal", "anti-diagonal-block", "block"}


@dc.dataclass(frozen=True)
class PermutationBlock:
    """A square block of a permutation matrix.

    The block maps positions ``col .. col+size-1`` of the input sequence to
    positions ``row .. row+size-1`` of the output sequence.
    """

    row: int
    col: int
    size: int
    kind: str = "identity"
    seed: Optional[int] = None
    array: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"{self.kind!r} is not a valid block kind")
        if self.size < 0 or self.row < 0 or self.col < 0:
            raise ValueError("block offsets and size must be non-negative")
        if self.kind == "explicit":
            if self.array is None or len(self.array) != self.size:
                raise ValueError("explicit block needs an array of its size")

    def instantiate(self, seed, index) -> np.ndarray:
        if self.kind == "identity":
            return np.arange(self.size)
        if self.kind == "explicit":
            return np.asarray(self.array, dtype=np.int64)
        if self.seed is not None:
            return make_rng(self.seed, "permutation").permutation(self.size)
        if seed is None:
            raise ValueError("a seed is required to instantiate a random permutation")
        return make_rng(seed, "permutation", index).permutation(self.size)


def _as_block(value, row, col, size=None):
    if isinstance(value, PermutationDescriptor):
        if len(value.blocks) != 1 or value.blocks[0].row or value.blocks[0].col:
            raise ValueError("only single-block descriptors can be nested")
        block = value.blocks[0]
        return dc.replace(block, row=row, col=col)
    if value is None:
        return PermutationBlock(row, col, size, "uniform-random")
    array = tuple(int(i) for i in value)
    return PermutationBlock(row, col, len(array), "explicit", array=array)


@dc.dataclass(frozen=True)
class PermutationDescriptor:
    """A bijection of ``range(size)`` described by square blocks.

    Applying the permutation to a sequence *x* gives the sequence *y* with
    ``y[i] == x[p[i]]``, where *p* is the array returned by
    :meth:`instantiate`. In matrix notation, *y* = Π *x*.
    """

    kind: str
    size: int
    blocks: Tuple[PermutationBlock, ...]

    def __post_init__(self):
        if self.kind not in DESCRIPTOR_KINDS:
            raise ValueError(f"{self.kind!r} is not a valid permutation kind")
        rows = sorted((b.row, b.size) for b in self.blocks)
        cols = sorted((b.col, b.size) for b in self.blocks)
        for spans in (rows, cols):
            pos = 0
            for start, size in spans:
                if start != pos:
                    raise ValueError("permutation blocks must tile the index range")
                pos += size
            if pos != self.size:
                raise ValueError("permutation blocks must tile the index range")

    @classmethod
    def identity(cls, size) -> "PermutationDescriptor":
        return cls("identity", size, (PermutationBlock(0, 0, size),))

    @classmethod
    def uniform(cls, size, seed=None) -> "PermutationDescriptor":
        return cls("uniform-random", size, (PermutationBlock(0, 0, size, "uniform-random", seed=seed),))

    @classmethod
    def explicit(cls, array) -> "PermutationDescriptor":
        block = _as_block(array, 0, 0)
        return cls("block", block.size, (block,))

    @classmethod
    def block_diagonal(cls, *parts: Union["PermutationDescriptor", Sequence[int]]) -> "PermutationDescriptor":
        """Stack the given permutations along the diagonal. An ``int`` part
        stands for an identity block of that size."""
        blocks = []
        pos = 0
        for part in parts:
            if isinstance(part, (int, np.integer)):
                block = PermutationBlock(pos, pos, int(part))
            else:
                block = _as_block(part, pos, pos)
            blocks.append(block)
            pos += block.size
        return cls("block-diagonal", pos, tuple(blocks))

    @classmethod
    def anti_diagonal(cls, upper, lower) -> "PermutationDescriptor":
        """Return ``[[0, upper], [lower, 0]]`` for two blocks of equal size."""
        up = _as_block(upper, 0, 0)
        size = up.size
        low = _as_block(lower, 0, 0)
        if low.size != size:
            raise ValueError("anti-diagonal blocks must have the same size")
        return cls(
            "anti-diagonal-block",
            2 * size,
            (dc.replace(up, row=0, col=size), dc.replace(low, row=size, col=0)),
        )

    @classmethod
    def from_blocks(cls, size, blocks) -> "PermutationDescriptor":
        return cls("block", size, tuple(blocks))

    @property
    def is_random(self) -> bool:
        return any(b.kind == "uniform-random" for b in self.blocks)

    def instantiate(self, seed=None) -> np.ndarray:
        """Return the permutation array. Random blocks without their own seed
        draw from *seed*."""
        perm = np.empty(self.size, dtype=np.int64)
        for index, block in enumerate(self.blocks):
            perm[block.row:block.row + block.size] = block.col + block.instantiate(seed, index)
        if not np.array_equal(np.sort(perm), np.arange(self.size)):
            raise ValueError("permutation descriptor does not describe a bijection")
        return perm

    def apply(self, seq, seed=None) -> np.ndarray:
        seq = np.asarray(seq)
        if len(seq) != self.size:
            raise ValueError(f"sequence length {len(seq)} does not match permutation size {self.size}")
        return seq[self.instantiate(seed)]


def compose(a, b) -> np.ndarray:
    """Return the array of the matrix product Π_a Π_b (apply *b* first)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if len(a) != len(b):
        raise ValueError("permutations must have the same size")
    return b[a]


def _size(perm):
    return perm.size if isinstance(perm, PermutationDescriptor) else len(perm)


def equivalent_permutation(cls: str, perms: Mapping[str, object], which=1) -> PermutationDescriptor:
    """Return the reordering Π̃ of the self-concatenated encoder that makes it
    bit-exact equivalent to the original encoder of class *cls*.

    *perms* holds the component permutations of the original encoder (arrays
    or descriptors):

    - PCC: ``pi`` (N) → ``diag(I, pi)``
    - SCC: ``inner`` (2N) → ``diag(I, inner)``
    - HCC: ``lower`` (N) and ``inner`` (2N) → ``diag(I, lower, inner)``
    - BCC: ``pi``, ``upper`` and ``lower`` (N each); *which* = 1 gives
      ``diag(I, pi)`` for the first input, *which* = 2 gives
      ``[[0, upper], [lower, 0]]`` for the second input.
    """
    cls = cls.upper()
    try:
        if cls == "PCC":
            n = _size(perms["pi"])
            return PermutationDescriptor.block_diagonal(n, perms["pi"])
        if cls == "SCC":
            inner = _size(perms["inner"])
            if inner % 2:
                raise ValueError("inner permutation must have an even size 2N")
            return PermutationDescriptor.block_diagonal(inner // 2, perms["inner"])
        if cls == "HCC":
            n = _size(perms["lower"])
            if _size(perms["inner"]) != 2 * n:
                raise ValueError("inner permutation must be twice the size of the lower one")
            return PermutationDescriptor.block_diagonal(n, perms["lower"], perms["inner"])
        if cls == "BCC":
            n = _size(perms["pi"])
            if which == 1:
                return PermutationDescriptor.block_diagonal(n, perms["pi"])
            if which == 2:
                if _size(perms["upper"]) != n or _size(perms["lower"]) != n:
                    raise ValueError("BCC permutations must have the same size")
                return PermutationDescriptor.anti_diagonal(perms["upper"], perms["lower"])
            raise ValueError("which must be 1 or 2")
    except KeyError as err:
        raise ValueError(f"{cls} needs the component permutation {err.args[0]!r}") from None
    raise ValueError(f"{cls!r} is not a valid ensemble class")
