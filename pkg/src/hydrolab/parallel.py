"""Thread pool and keyed random streams shared by all solvers."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

logger = logging.getLogger(__name__)

THREADS_ENV = "HYDROLAB_THREADS"


def task_rng(root_seed, *key):
    """An independent Generator for the task identified by ``key``.

    Streams are keyed, not drawn in sequence, so results do not depend on
    the order in which tasks run.
    """
    spawn_key = tuple(int(k) for k in key)
    seq = np.random.SeedSequence(int(root_seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(seq))


def resolve_threads(threads=None):
    """Explicit value, else ``$HYDROLAB_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else 1
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"thread count must be positive, got {threads}")
    return threads


def map_tasks(fn, items, threads=None):
    """``[fn(item) for item in items]``, possibly on a thread pool.

    Results come back in input order whatever the thread count.
    """
    items = list(items)
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug("Running %i tasks on %i threads", len(items), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
