"""
Ordered parallel map for sweep cells, replicates and stability pairs
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor

from errors import ConfigError

logger = logging.getLogger(__name__)

WORKERS_ENV = "DPMINIMAX_WORKERS"


def resolve_workers(flag=None, configured=None) -> int:
    """--workers flag, then the environment variable, then the config value, then 1"""
    for source, value in (("--workers", flag), (WORKERS_ENV, os.environ.get(WORKERS_ENV)),
                          ("workers", configured)):
        if value is None or value == "":
            continue
        try:
            count = int(value)
        except (TypeError, ValueError):
            raise ConfigError(source, f"must be a positive integer, got {value!r}")
        if count < 1:
            raise ConfigError(source, f"must be a positive integer, got {count}")
        return count
    return 1


def parallel_map(fn, tasks, workers: int = 1) -> list:
    """
    fn applied to every task; results come back in task order whatever the
    completion order. fn and tasks must be picklable when workers > 1.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    logger.debug("[Workers] %d tasks on %d processes", len(tasks), workers)
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))
