from __future__ import annotations
from typing import (
    Callable,
    List,
    Sequence,
    TypeVar,
)

import asyncio
import concurrent.futures

from . import errors


T = TypeVar("T")
R = TypeVar("R")


def run_jobs(
    fn: Callable[[T], R],
    items: Sequence[T],
    jobs: int = 1,
) -> List[R]:
    """Map ``fn`` over ``items``; results come back in input order.

    With more than one job, ``fn`` and the items must be picklable.
    """
    if jobs < 1:
        raise errors.BadConfigError(f"jobs must be at least 1, got {jobs}")
    if jobs == 1 or len(items) < 2:
        return [fn(item) for item in items]
    return asyncio.run(_gather(fn, items, jobs))


async def _gather(
    fn: Callable[[T], R], items: Sequence[T], jobs: int
) -> List[R]:
    loop = asyncio.get_running_loop()
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [loop.run_in_executor(pool, fn, item) for item in items]
        return list(await asyncio.gather(*futures))
