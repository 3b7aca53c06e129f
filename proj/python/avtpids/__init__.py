"""AVTP intrusion detection: windowed autoencoders, calibration, detectors.

Thin Python face over the C++ core.  The extension module ``_avtpids`` lives
inside this package in an installed tree; during in-tree development it may
instead sit on ``PYTHONPATH`` (the CMake build directory), so both import
forms are tried.
"""

try:
    from ._avtpids import *  # noqa: F401,F403
    from ._avtpids import __version__  # noqa: F401
except ImportError:  # pragma: no cover - build-tree layout
    from _avtpids import *  # noqa: F401,F403
    from _avtpids import __version__  # noqa: F401
