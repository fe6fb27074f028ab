import os
from concurrent.futures import ProcessPoolExecutor


def default_threads() -> int:
    return os.cpu_count() or 1


def parallel_map(func, items, threads: int | None = 1):
    """Ordered map; uses worker processes when ``threads > 1``.

    ``func`` and the items must be picklable. Output order always follows
    ``items`` so reductions do not depend on completion order.
    """
    items = list(items)
    if threads is None:
        threads = default_threads()
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items, chunksize=1))
