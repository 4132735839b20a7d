"""Federated learning by sharing summed sufficient statistics.

Clients train local feature extractors ("bodies") and upload only class-wise
feature sums; the server learns a shared linear head by MAP inference on a
conjugate exponential-family posterior. Optional Gaussian noise makes each
upload differentially private. This package re-exports the compiled core.
"""

from ._fedlog import *  # noqa: F401,F403
from ._fedlog import __version__  # noqa: F401
