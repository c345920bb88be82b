"""Numerical laboratory for bosonic many-body chaos on Bose-Hubbard lattices.

Subpackages are imported lazily so the command-line entry point can configure
threading before any numerical library loads.
"""

__version__ = "0.1.0"

_SUBMODULES = ("fock", "hamiltonian", "dynamics", "spectral", "meanfield",
               "twa", "otoc", "harness", "cli")


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
