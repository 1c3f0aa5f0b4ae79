from itertools import cycle
from numbers import Number
from typing import Any, Callable, Dict, Iterable, List, Set
import sys

from skorch.utils import Ansi
from tabulate import tabulate

from ray_trpca.callbacks.solver import SolverCallback
from ray_trpca.callbacks.utils import SortedKeysMixin

# per-step timings are summed into dur_s already
DEFAULT_KEYS_TO_NOT_PRINT = {"svt_dur_s", "shrink_dur_s"}

_HIGHLIGHTS = [color.value for color in Ansi if color is not Ansi.ENDC]


class TableHistoryPrintCallback(SortedKeysMixin, SolverCallback):
    """Prints one table line per solver iteration.

    The column header and rule are printed before the first iteration of
    every solve. A value is highlighted when the history row flags it with
    ``<key>_best``, e.g. a new lowest ``residual``.

    Args:
        keys_to_not_print (Set[str]): History keys left out of the table.
        sink (Callable): Receives every output line (default ``print``).
        tablefmt, floatfmt, stralign: Passed to ``tabulate``.
    """

    def __init__(
            self,
            *,
            keys_to_not_print: Set[str] = DEFAULT_KEYS_TO_NOT_PRINT,
            sink: Callable[[Any], None] = print,
            tablefmt="simple",
            floatfmt=".4g",
            stralign="right",
    ) -> None:
        self.keys_to_not_print = keys_to_not_print
        self.sink = sink
        self.tablefmt = tablefmt
        self.floatfmt = floatfmt
        self.stralign = stralign

    def initialize(self):
        self.header_pending_ = True
        return self

    def on_solve_begin(self, net, A=None, **kwargs):
        self.header_pending_ = True

    def on_iteration_end(self, net, iteration=None, **kwargs):
        self.display(net.history_[-1])

    def columns(self, row: Dict[str, Any]) -> List[str]:
        return self._sorted_keys(row.keys(), set(self.keys_to_not_print or ()))

    def format_value(self, row: Dict[str, Any], key: str,
                     highlight: str) -> str:
        value = row[key]
        if value is None or isinstance(value, bool):
            return "+" if value else ""
        if not isinstance(value, Number):
            return str(value)
        if float(value).is_integer():
            text = str(value)
        else:
            text = format(value, self.floatfmt)
        if row.get(key + "_best"):
            text = highlight + text + Ansi.ENDC.value
        return text

    def table(self, row: Dict[str, Any]) -> str:
        keys = self.columns(row)
        values = [
            self.format_value(row, key, highlight)
            for key, highlight in zip(keys, cycle(_HIGHLIGHTS))
        ]
        return tabulate([values],
                        headers=keys,
                        tablefmt=self.tablefmt,
                        floatfmt=self.floatfmt,
                        stralign=self.stralign)

    def display(self, row: Dict[str, Any]):
        lines = self.table(row).split("\n")
        if self.header_pending_:
            self._emit(lines[:-1])
            self.header_pending_ = False
        self._emit(lines[-1:])

    def _emit(self, lines: Iterable[str]):
        for line in lines:
            self.sink(line)
        if self.sink is print:
            sys.stdout.flush()
