import numpy as np

from abvortex.quadrature import SizedCache


def test_sized_cache_evicts_least_recent():
    cache = SizedCache(250)
    built = []

    def make(k):
        built.append(k)
        return np.zeros(100, dtype=np.uint8)

    for k in "abc":
        cache.get(k, lambda k=k: make(k), lambda v: v.nbytes)
    assert cache.nbytes == 200 and built == ["a", "b", "c"]
    cache.get("b", lambda: make("b"), lambda v: v.nbytes)
    assert built == ["a", "b", "c"]
    cache.get("a", lambda: make("a"), lambda v: v.nbytes)
    assert built == ["a", "b", "c", "a"]


def test_sized_cache_keeps_oversized_latest():
    cache = SizedCache(10)
    v = cache.get("big", lambda: np.zeros(100, dtype=np.uint8), lambda v: v.nbytes)
    assert cache.get("big", lambda: None, lambda v: 0) is v
    cache.clear()
    assert cache.nbytes == 0
