"""Ordered thread-pool map used for ray chunks, render tiles and gradient chunks."""

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, threads=1):
    """Apply fn to every item, returning results in item order.

    The reduction order is the item order whatever the thread count, so callers
    that sum the results get identical floating point output for any ``threads``.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def chunk_ranges(total, chunk):
    """Half-open index ranges covering [0, total) in steps of ``chunk``."""
    return [(start, min(start + chunk, total)) for start in range(0, total, chunk)]
