"""Shared numerical helpers."""

from __future__ import annotations

import hashlib
import math
import struct

import numpy as np


def h(a):
    """Pointwise KL integrand ``a*log(a) - a + 1`` with ``0*log(0) = 0``.

    Nonnegative and convex, zero exactly at ``a == 1``; ``h(0) == 1``.
    Accepts scalars or arrays and returns the matching shape.
    """
    arr = np.asarray(a, dtype=float)
    out = np.ones_like(arr)
    pos = arr > 0
    ap = arr[pos]
    out[pos] = ap * np.log(ap) - ap + 1.0
    if out.ndim == 0:
        return float(out)
    return out


def logsumexp(terms) -> float:
    """Stable log(sum(exp(t) for t in terms)) for a 1-d iterable."""
    ts = [t for t in terms if t != -math.inf]
    if not ts:
        return -math.inf
    m = max(ts)
    return m + math.log(math.fsum(math.exp(t - m) for t in ts))


def hash_unit(seed: int, *parts) -> float:
    """Deterministic pseudo-random value in [-1, 1).

    The value depends only on ``seed`` and ``parts`` (ints or floats keyed by
    their exact bits), via BLAKE2b, so it is reproducible across runs and
    platforms without storing noise tables.
    """
    payload = bytearray(struct.pack("<q", int(seed)))
    for p in parts:
        if isinstance(p, float):
            payload += b"f" + struct.pack("<d", p)
        else:
            payload += b"i" + struct.pack("<q", int(p))
    digest = hashlib.blake2b(bytes(payload), digest_size=8).digest()
    u = int.from_bytes(digest, "little") / 2.0**64
    return 2.0 * u - 1.0


def poisson_log_weight(n) -> np.ndarray:
    """Unnormalized log Poisson(1) weights ``-1 - log(n!)`` for integer n >= 0."""
    ns = np.asarray(n)
    return -1.0 - np.vectorize(math.lgamma)(ns + 1.0)
