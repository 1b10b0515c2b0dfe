"""Cumulants, diagram combinatorics and deviation bounds for Wiener chaos elements."""
from .applications import *  # noqa: F401,F403
from .cumulants import *  # noqa: F401,F403
from .deviations import *  # noqa: F401,F403
from .diagrams import *  # noqa: F401,F403
from .estimators import *  # noqa: F401,F403
from .kernels import *  # noqa: F401,F403
from .montecarlo import *  # noqa: F401,F403

from . import applications, cumulants, deviations, diagrams, estimators, kernels, montecarlo

__version__ = "0.1.0"
