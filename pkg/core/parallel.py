import concurrent.futures
import logging
from typing import Callable, List, Optional, Sequence, TypeVar

from config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(func: Callable[[T], R], items: Sequence[T], jobs: Optional[int] = None,
                min_batch: Optional[int] = None) -> List[R]:
    """
    Maps func over items on a thread pool, returning results in input order.

    Batches shorter than min_batch and jobs <= 1 run on the calling thread, so
    results never depend on the worker count.
    """
    workers = settings.DEFAULT_JOBS if jobs is None else jobs
    threshold = settings.PARALLEL_MIN_BATCH if min_batch is None else min_batch
    if workers <= 1 or len(items) < threshold:
        return [func(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(func, item) for item in items]
        results: List[R] = []
        for future in futures:
            results.append(future.result())
    logger.debug(f"ordered_map: {len(items)} items on {workers} workers")
    return results


def chunked(items: Sequence[T], parts: int) -> List[Sequence[T]]:
    """Splits items into at most `parts` contiguous chunks."""
    if parts <= 1 or len(items) <= 1:
        return [items]
    size = -(-len(items) // parts)
    return [items[i:i + size] for i in range(0, len(items), size)]
