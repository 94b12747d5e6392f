"""Deterministic random substreams and chunked parallel evaluation.

Every random quantity in glab is drawn from a substream named by the root
seed plus a tuple of keys.  Work over many draws is cut into fixed-size
chunks, each chunk with its own substream, so results are bit-identical for
any number of worker threads.
"""

import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 8192


def _key_int(key):
    if isinstance(key, (int, np.integer)):
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def substream(seed, *keys):
    """Return a Generator for the substream ``(seed, *keys)``.

    String keys are hashed with CRC32 so that streams can be named.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_int(k) for k in keys))
    return np.random.default_rng(ss)


def thread_count():
    raw = os.environ.get("GLAB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def chunked(n, seed, keys, fn, chunk=CHUNK):
    """Evaluate ``fn(rng, start, count)`` over chunks covering ``range(n)``.

    Results are returned as a list in chunk order.  ``keys`` names the
    substream family; chunk ``i`` uses ``substream(seed, *keys, i)``.
    """
    starts = list(range(0, n, chunk))

    def job(i):
        s = starts[i]
        return fn(substream(seed, *keys, i), s, min(chunk, n - s))

    workers = min(thread_count(), len(starts)) or 1
    if workers == 1:
        return [job(i) for i in range(len(starts))]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(job, range(len(starts))))
