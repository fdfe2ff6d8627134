"""Noncontextuality polytopes of prepare-and-measure scenarios.

Subpackages and modules
-----------------------
exactgeom   exact rational vertex/facet enumeration and linear programming
scenario    scenario descriptions, equivalences and the reduced coordinate basis
pipeline    facet enumeration of the noncontextual polytope and membership tests
symmetry    relabelling symmetries and orbit classification of facets
quantum     qubit/qudit strategies, see-saw lower bounds and robustness
sdp         primal-dual interior point solver for block-diagonal SDPs
hierarchy   moment-matrix upper bounds and randomness certification
cli         the ``ncpolytope`` command
"""
from importlib.metadata import PackageNotFoundError, version

from .pipeline import Inequality, nc_membership, run_pipeline
from .scenario import Scenario, get_scenario, load_scenario, parse_scenario

try:
    __version__ = version("artifact")
except PackageNotFoundError:    # running from a source tree
    __version__ = "0.1.0"

__all__ = ["Inequality", "Scenario", "get_scenario", "load_scenario", "nc_membership",
           "parse_scenario", "run_pipeline", "__version__"]
