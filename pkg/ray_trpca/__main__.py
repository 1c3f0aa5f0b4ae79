from ray_trpca.cli import _entry_point

_entry_point()
