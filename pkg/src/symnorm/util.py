"""Small shared helpers: deterministic RNG streams and atomic file writes."""

import os
import zlib

import numpy as np


def derive_rng(seed, *tags):
    """Deterministic generator for a (seed, tags...) stream.

    Tags keep independent stages of a pipeline from sharing one stream while
    staying reproducible for a fixed root seed.
    """
    entropy = [int(seed) % (1 << 63)]
    entropy.extend(zlib.crc32(str(t).encode("utf-8")) for t in tags)
    return np.random.default_rng(entropy)


def derive_seed(seed, *tags):
    """Single integer seed derived from a (seed, tags...) stream."""
    return int(derive_rng(seed, *tags).integers(0, 1 << 63))


def atomic_write_bytes(path, data):
    """Write via a temp file in the same directory, then rename."""
    path = os.fspath(path)
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def readonly(array):
    array.flags.writeable = False
    return array
