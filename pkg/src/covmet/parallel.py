"""Order-preserving task mapping with an optional thread pool.

Results always come back in submission order, so callers that pair task
i with child stream i get identical output at any thread count.  The
heavy kernels release the GIL, which is what makes threads worthwhile.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

from .errors import DomainError

_T = TypeVar("_T")
_R = TypeVar("_R")

__all__ = ["ordered_map"]


def ordered_map(fn: Callable[[_T], _R], items: Iterable[_T], threads: int = 1) -> list[_R]:
    """Apply ``fn`` to every item, returning results in input order.

    ``threads <= 1`` runs sequentially in the calling thread; anything
    larger uses a thread pool capped at ``threads`` workers.  The result
    list is identical either way.
    """
    seq: Sequence[_T] = list(items)
    if threads < 1:
        raise DomainError(f"threads must be >= 1, got {threads}")
    if threads == 1 or len(seq) <= 1:
        return [fn(item) for item in seq]
    with ThreadPoolExecutor(max_workers=min(threads, len(seq))) as pool:
        return list(pool.map(fn, seq))
