"""Product state spaces, state encoding, and elementary jump operators.

Three kinds of space are supported:

* ``rw``     -- cyclic products {0..m-1}^d; coordinates wrap modulo m;
* ``masked`` -- mask-augmented products {0..m}^d where the extra index m is
  the MASK symbol;
* ``brw``    -- truncated counting products {0..cap}^d (birth/death
  coordinates; the cap bounds an otherwise infinite space).

States are encoded to flat indices in mixed-radix positional order with
coordinate 0 most significant, so the full enumeration is lexicographic.
That order is fixed: CSV output and frozen test vectors rely on it.

All functions here are pure; spaces are frozen and hashable so derived
tables can be cached per space.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

RW = "rw"
MASKED = "masked"
BRW = "brw"

_MAX_SIZE = 2**62  # enumeration must fit a signed 64-bit index with headroom


@dataclass(frozen=True)
class Space:
    """A product state space descriptor.

    ``m`` is the alphabet size (unused for ``brw``); ``cap`` is the
    per-coordinate truncation bound (``brw`` only). For masked spaces the
    MASK symbol is the extra index ``m``.
    """

    kind: str
    d: int
    m: int = 0
    cap: int = 0

    def __post_init__(self):
        if self.kind not in (RW, MASKED, BRW):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.d < 1:
            raise ValueError("dimension d must be >= 1")
        if self.kind in (RW, MASKED) and self.m < 2:
            raise ValueError("alphabet size m must be >= 2")
        if self.kind == BRW and self.cap < 1:
            raise ValueError("truncation cap must be >= 1")
        if self.radix**self.d > _MAX_SIZE:
            raise ValueError("enumerated space does not fit a 64-bit index")

    @classmethod
    def rw(cls, m: int, d: int) -> "Space":
        return cls(RW, d=d, m=m)

    @classmethod
    def masked(cls, m: int, d: int) -> "Space":
        return cls(MASKED, d=d, m=m)

    @classmethod
    def brw(cls, d: int, cap: int) -> "Space":
        return cls(BRW, d=d, cap=cap)

    @property
    def radix(self) -> int:
        """Per-coordinate domain size."""
        if self.kind == RW:
            return self.m
        if self.kind == MASKED:
            return self.m + 1
        return self.cap + 1

    @property
    def size(self) -> int:
        return self.radix**self.d

    @property
    def mask_value(self) -> int:
        if self.kind != MASKED:
            raise ValueError("mask_value only exists for masked spaces")
        return self.m


# frozen dataclasses (not NamedTuples) so that Plus(0) != Minus(0): named
# tuples compare as bare tuples, which would collide as dict keys


@dataclass(frozen=True)
class Plus:
    """Increment coordinate ``axis`` (mod m for rw; +1 for brw)."""

    axis: int


@dataclass(frozen=True)
class Minus:
    """Decrement coordinate ``axis`` (mod m for rw; -1 for brw)."""

    axis: int


@dataclass(frozen=True)
class Mask:
    """Set coordinate ``axis`` to the MASK symbol (masked spaces)."""

    axis: int


@dataclass(frozen=True)
class Unmask:
    """Restore coordinate ``axis`` from MASK to alphabet ``value``."""

    axis: int
    value: int


def _check_coords(space: Space, x) -> Tuple[int, ...]:
    xt = tuple(int(c) for c in x)
    if len(xt) != space.d:
        raise ValueError(f"state has {len(xt)} coordinates, expected {space.d}")
    r = space.radix
    for c in xt:
        if not 0 <= c < r:
            raise ValueError(f"coordinate {c} outside domain [0, {r - 1}]")
    return xt


def encode(space: Space, x) -> int:
    """Flat index of state ``x`` (mixed radix, coordinate 0 most significant)."""
    xt = _check_coords(space, x)
    idx = 0
    for c in xt:
        idx = idx * space.radix + c
    return idx


def decode(space: Space, index: int) -> Tuple[int, ...]:
    """Inverse of :func:`encode`."""
    if not 0 <= index < space.size:
        raise ValueError(f"index {index} outside [0, {space.size})")
    out = []
    r = space.radix
    for _ in range(space.d):
        out.append(index % r)
        index //= r
    return tuple(reversed(out))


@functools.lru_cache(maxsize=None)
def all_coords(space: Space) -> np.ndarray:
    """(size, d) array of all states in encode order. Cached per space."""
    grids = np.indices((space.radix,) * space.d)
    arr = grids.reshape(space.d, space.size).T
    arr.setflags(write=False)
    return arr


def apply_op(space: Space, x, op) -> Optional[Tuple[int, ...]]:
    """Apply a jump operator to a state; ``None`` when the jump is disallowed.

    rw coordinates wrap modulo m. brw returns None for Minus at 0 and for
    Plus at the cap (the truncation boundary). Masked requires the target
    coordinate to be unmasked for Mask and masked for Unmask.
    """
    xt = _check_coords(space, x)
    if isinstance(op, (Plus, Minus)):
        if space.kind == MASKED:
            raise ValueError("Plus/Minus are not defined on masked spaces")
        step = 1 if isinstance(op, Plus) else -1
        c = xt[op.axis] + step
        if space.kind == RW:
            c %= space.m
        elif not 0 <= c <= space.cap:
            return None
        return xt[: op.axis] + (c,) + xt[op.axis + 1 :]
    if isinstance(op, Mask):
        if space.kind != MASKED:
            raise ValueError("Mask is only defined on masked spaces")
        if xt[op.axis] == space.mask_value:
            return None
        return xt[: op.axis] + (space.mask_value,) + xt[op.axis + 1 :]
    if isinstance(op, Unmask):
        if space.kind != MASKED:
            raise ValueError("Unmask is only defined on masked spaces")
        if not 0 <= op.value < space.m:
            raise ValueError(f"unmask value {op.value} outside alphabet")
        if xt[op.axis] != space.mask_value:
            return None
        return xt[: op.axis] + (op.value,) + xt[op.axis + 1 :]
    raise TypeError(f"unknown jump operator {op!r}")


def masked_sets(space: Space, x):
    """Masked and non-masked coordinate index sets ``(M_x, M_x_complement)``."""
    if space.kind != MASKED:
        raise ValueError("masked_sets requires a masked space")
    xt = _check_coords(space, x)
    masked = {i for i, c in enumerate(xt) if c == space.mask_value}
    return masked, set(range(space.d)) - masked


@functools.lru_cache(maxsize=None)
def op_catalog(space: Space) -> Tuple:
    """Canonical ordered tuple of the jump operators of a space.

    rw/brw: Plus(0), Minus(0), Plus(1), Minus(1), ...
    masked: Mask(0..d-1), then Unmask(i, j) for i major, j minor.
    """
    if space.kind in (RW, BRW):
        ops = []
        for ax in range(space.d):
            ops.append(Plus(ax))
            ops.append(Minus(ax))
        return tuple(ops)
    ops = [Mask(ax) for ax in range(space.d)]
    ops += [Unmask(ax, j) for ax in range(space.d) for j in range(space.m)]
    return tuple(ops)


@functools.lru_cache(maxsize=None)
def neighbor_table(space: Space) -> np.ndarray:
    """(n_ops, size) int64 array of target indices; -1 where the op is disallowed.

    Row order follows :func:`op_catalog`. Cached per space.
    """
    coords = all_coords(space)
    r = space.radix
    weights = r ** np.arange(space.d - 1, -1, -1, dtype=np.int64)
    base = coords @ weights
    rows = []
    for op in op_catalog(space):
        if isinstance(op, (Plus, Minus)):
            step = 1 if isinstance(op, Plus) else -1
            c = coords[:, op.axis] + step
            if space.kind == RW:
                c = c % space.m
                ok = np.ones(space.size, dtype=bool)
            else:
                ok = (c >= 0) & (c <= space.cap)
            tgt = base + (np.clip(c, 0, r - 1) - coords[:, op.axis]) * weights[op.axis]
        elif isinstance(op, Mask):
            ok = coords[:, op.axis] != space.mask_value
            tgt = base + (space.mask_value - coords[:, op.axis]) * weights[op.axis]
        else:  # Unmask
            ok = coords[:, op.axis] == space.mask_value
            tgt = base + (op.value - coords[:, op.axis]) * weights[op.axis]
        rows.append(np.where(ok, tgt, -1))
    table = np.stack(rows).astype(np.int64)
    table.setflags(write=False)
    return table


@functools.lru_cache(maxsize=None)
def mask_count(space: Space) -> np.ndarray:
    """Number of masked coordinates of every state, in encode order."""
    if space.kind != MASKED:
        raise ValueError("mask_count requires a masked space")
    counts = (all_coords(space) == space.mask_value).sum(axis=1)
    counts.setflags(write=False)
    return counts
