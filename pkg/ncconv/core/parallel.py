from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, TypeVar

T = TypeVar('T')

_max_workers = 1


def set_num_threads(max_workers: int) -> None:
    global _max_workers
    _max_workers = max(1, int(max_workers))


def get_num_threads() -> int:
    return _max_workers


def map_samples(fn: Callable[[int], T], count: int) -> List[T]:
    """
    Apply fn to 0..count-1 with at most `max_workers` calls in flight.
    Results come back in index order regardless of worker count.
    """
    if _max_workers == 1 or count < 2:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=min(_max_workers, count)) as pool:
        return list(pool.map(fn, range(count)))
