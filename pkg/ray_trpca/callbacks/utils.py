from skorch.callbacks.logging import filter_log_keys

from ray_trpca.callbacks.constants import DURATION_KEY, ITERATION_KEY


class SortedKeysMixin:
    def _sorted_keys(self, keys, keys_ignored=None, filter_keys=True):
        """Sort history keys for display.

        Keys in ``keys_ignored`` are dropped, and so are keys ending on
        '_best' when ``filter_keys`` is set. Among the remaining keys:
          * 'iteration' is put first;
          * 'dur_s' is put last;
          * keys ending on '_dur_s' are put just before 'dur_s';
          * all remaining keys are sorted alphabetically.
        """
        sorted_keys = []
        keys_ignored = keys_ignored or set()

        if (ITERATION_KEY in keys) and (ITERATION_KEY not in keys_ignored):
            sorted_keys.append(ITERATION_KEY)

        if filter_keys:
            candidates = filter_log_keys(sorted(keys), keys_ignored=keys_ignored)
        else:
            candidates = [key for key in sorted(keys) if key not in keys_ignored]
        timings = []
        for key in candidates:
            if key in (ITERATION_KEY, DURATION_KEY):
                continue
            if key.endswith("_" + DURATION_KEY):
                timings.append(key)
            else:
                sorted_keys.append(key)
        sorted_keys.extend(timings)

        if (DURATION_KEY in keys) and (DURATION_KEY not in keys_ignored):
            sorted_keys.append(DURATION_KEY)

        return sorted_keys
