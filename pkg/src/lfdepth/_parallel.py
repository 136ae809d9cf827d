"""Ordered thread-pool map.

Work items write into disjoint outputs or return partial results that the
caller reduces in item order, so results never depend on the worker count.
"""
from concurrent.futures import ThreadPoolExecutor
import os

_threads = 1


def set_threads(n):
    global _threads
    if n is None or n < 1:
        n = os.cpu_count() or 1
    _threads = int(n)


def get_threads():
    return _threads


def ordered_map(fn, items, threads=None):
    items = list(items)
    n = get_threads() if threads is None else threads
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
