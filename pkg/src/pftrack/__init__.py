"""Particle-filter target tracking with colour and edge histograms.

Modules:

- ``filter_core``: particle sets, weight updates, effective sample size and
  the multinomial / classified resampling schemes.
- ``ungm``: the nonlinear growth-model benchmark comparing the two schemes.
- ``features``: HSV and Sobel-orientation binning, kernel-weighted histograms,
  PPM image I/O.
- ``histograms``: integral histograms, Bhattacharyya similarity, likelihoods.
- ``tracker``: the fused colour + edge tracker.
- ``sequences``: sequence loading, synthetic scenes, evaluation, benchmarks.
"""

import logging
import os

from .errors import PFTrackError

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

_LEVELS = {"off": None, "info": logging.INFO, "debug": logging.DEBUG}


def configure_logging(level: str | None = None) -> None:
    """Send package logs to stderr at ``level`` (``off``, ``info`` or ``debug``).

    Defaults to the ``PFTRACK_LOG`` environment variable, or ``off``.
    """
    level = (level or os.environ.get("PFTRACK_LOG", "off")).strip().lower()
    if level not in _LEVELS:
        raise ValueError(f"PFTRACK_LOG must be one of {sorted(_LEVELS)}, got {level!r}")
    logger = logging.getLogger(__name__)
    for h in list(logger.handlers):
        if getattr(h, "_pftrack_stderr", False):
            logger.removeHandler(h)
    if _LEVELS[level] is None:
        logger.setLevel(logging.WARNING)
        return
    handler = logging.StreamHandler()
    handler._pftrack_stderr = True
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(_LEVELS[level])


__all__ = ["PFTrackError", "configure_logging", "__version__"]
