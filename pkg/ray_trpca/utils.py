from contextlib import AbstractContextManager
from typing import (TYPE_CHECKING, Any, Callable, Iterable, List, Optional,
                    TypeVar)
import hashlib
import json
import logging

import ray

if TYPE_CHECKING:
    from ray_trpca.callbacks.solver import SolverCallback  # noqa: F401

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def insert_before_substring(base_string: str, string_to_insert: str,
                            substring: str) -> str:
    idx = base_string.index(substring)
    return (base_string[:idx] + string_to_insert + base_string[idx:])


def add_callback_if_not_already_in(callback_name: str,
                                   callback: "SolverCallback",
                                   callback_list: list) -> bool:
    """Add a callback to the list if there isn't one with the same
    name or type.
    """
    if not any(name == callback_name or isinstance(callback, type(c))
               for name, c in callback_list):
        callback_list.append((callback_name, callback))
        return True
    return False


class ray_start_shutdown(AbstractContextManager):
    """Context manager to start and shutdown Ray.

    Ray is only started if it is not running yet, and only shut down on exit
    if it was started here.

    Args:
        num_cpus (Optional[int]): CPUs for a locally started Ray instance.
        **init_kwargs: Passed to ``ray.init()``.
    """

    def __init__(self, num_cpus: Optional[int] = None, **init_kwargs) -> None:
        self.num_cpus = num_cpus
        self.init_kwargs = init_kwargs
        self.started_ = False

    def __enter__(self):
        if not ray.is_initialized():
            ray.init(num_cpus=self.num_cpus, **self.init_kwargs)
            self.started_ = True
            logger.info("Started Ray with num_cpus=%s", self.num_cpus)
        return self

    def __exit__(self, __exc_type, __exc_value, __traceback) -> None:
        if self.started_:
            ray.shutdown()
            self.started_ = False


def _call(func: Callable[[Any], Any], item: Any) -> Any:
    return func(item)


def parallel_map(func: Callable[[T], R],
                 items: Iterable[T],
                 num_workers: Optional[int] = 1) -> List[R]:
    """Apply ``func`` to every item, in input order.

    Runs serially when ``num_workers <= 1``, otherwise as Ray tasks with
    one CPU each.
    """
    items = list(items)
    if not num_workers or num_workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ray_start_shutdown(num_cpus=num_workers):
        remote_call = ray.remote(num_cpus=1)(_call)
        func_ref = ray.put(func)
        refs = [remote_call.remote(func_ref, item) for item in items]
        return ray.get(refs)


def config_hash(config: dict) -> str:
    """Short, stable hash of a JSON-serializable configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
