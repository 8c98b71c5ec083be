"""Two-stage sparse DOA estimation for distributed sources on partly
calibrated uniform linear arrays."""

try:
    from ._tsdoa import *  # noqa: F401,F403  (installed package layout)
    from ._tsdoa import __version__  # noqa: F401
except ImportError:  # in-tree build: the extension sits on PYTHONPATH
    from _tsdoa import *  # noqa: F401,F403
    from _tsdoa import __version__  # noqa: F401
