"""Counter-based, splittable random numbers addressed by tree position.

Every vertex of a simulated tree owns a 64-bit key.  A root key is a hash of
``(seed, salt, replica)``; the key of child ``j`` is a hash of its parent's key
and ``j``.  The Gaussian attached to a vertex is a pure function of its key,
so any batching of replicas or vertices reproduces the same numbers, and two
runs that differ only in the barrier see exactly the same field.

The mixer is the SplitMix64 finaliser (Steele, Lea & Flood 2014), run on
numpy ``uint64`` arrays, where wrap-around arithmetic is the intended mod 2^64.
"""
from __future__ import annotations

import numpy as np
from scipy import special

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_DRAW = np.uint64(0xD1B54A32D192ED03)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))

SALT_FRONT = 0x46524F4E54  # "FRONT"
SALT_PATH = 0x50415448  # "PATH"


def mix64(x):
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x ^ (x >> _S30)
        z = z * _M1
        z = z ^ (z >> _S27)
        z = z * _M2
    return z ^ (z >> _S31)


def root_keys(seed: int, replicas, salt: int = SALT_FRONT):
    """Keys of the roots of replicas ``replicas`` (array of ids)."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    base = mix64(np.uint64(int(seed)) ^ mix64(np.uint64(salt)))
    r = np.asarray(replicas, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(base + (r + np.uint64(1)) * _GOLDEN)


def child_keys(parent, j):
    """Key of child ``j`` (0-based) of each parent key."""
    parent = np.asarray(parent, dtype=np.uint64)
    j = np.asarray(j, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(parent + (j + np.uint64(1)) * _GOLDEN)


def uniforms(keys):
    """Uniforms in the open interval (0, 1) with 53 random bits."""
    bits = mix64(np.asarray(keys, dtype=np.uint64) ^ _DRAW) >> _S11
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def normals(keys):
    """Standard Gaussians by inversion of :func:`uniforms`."""
    return special.ndtri(uniforms(keys))
