"""Synthetic, fully deterministic task bundles for desk-scale verification."""

from .base import TaskBundle, bundle_by_name, BUNDLE_NAMES
from .constraintsat import make_constraintsat
from .echo import make_echo
from .noisychain import make_noisychain

__all__ = [
    "TaskBundle",
    "BUNDLE_NAMES",
    "bundle_by_name",
    "make_constraintsat",
    "make_echo",
    "make_noisychain",
]
