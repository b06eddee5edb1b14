"""
Package initialization for hp_nitsche_coupling.

Thread variables for the BLAS backend are exported before numpy is imported
by any submodule.
"""

import logging
from importlib.metadata import PackageNotFoundError, version

from .settings import apply_thread_environment

apply_thread_environment()

from .main import run  # noqa: E402

__all__ = ["run", "__version__"]

SOURCE_VERSION = "0.0.0+source"


def _package_version() -> str:
    """Installed distribution version, or SOURCE_VERSION for a bare source checkout."""
    try:
        return version("hp-nitsche-coupling")
    except PackageNotFoundError:
        return SOURCE_VERSION


__version__ = _package_version()

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())
