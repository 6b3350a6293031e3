"""Deterministic thread-pool helper for per-timepoint work.

Tasks are pure functions of their item; results are returned in submission
order, so output is bit-identical for any worker count.
"""

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, threads=1):
    """Map ``fn`` over ``items``, optionally with a thread pool.

    ``threads <= 1`` runs sequentially. Results always come back in the
    order of ``items``.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, items))
