import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


class ExperimentExecutor:
    """Fans independent jobs out over a worker pool; results come back in submission order."""

    def __init__(self, workers: int = 1) -> None:
        if workers < 1:
            raise ValueError('workers must be at least 1, got {}'.format(workers))
        self._workers = workers

    async def map(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        items = list(items)
        if self._workers == 1:
            return [func(item) for item in items]
        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=self._workers) as pool:
            jobs = [loop.run_in_executor(pool, func, item) for item in items]
            results = await asyncio.gather(*jobs)
        logger.debug('ran %d jobs on %d workers', len(items), self._workers)
        return list(results)

    def run(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        return asyncio.run(self.map(func, items))


def run_ordered(func: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    return ExperimentExecutor(workers).run(func, items)
