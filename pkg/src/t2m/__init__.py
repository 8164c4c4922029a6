"""Numerical verification of second-order tangent bundles and connections."""

from .atlas import Atlas, Chart, Curve2, Jet2, change_jet_chart, curve_to_jet, transition_map
from .bundle import FiberChart, FiberPoint, Trivialization, extract_christoffel, transition_function, trivialize, untrivialize
from .calculus import SmoothMap2, compose_map2, fd_check, from_scalar_function
from .config import Fixture, load_fixture, parse_fixture, resolve_fixture
from .connection import ChristoffelField, compat_residual, levi_civita_field, pushforward_christoffel
from .errors import T2MError
from .prolim import Tower, TowerLinearMap, tower_membership
from .report import CheckRecord, SuiteReport
from .suites import Tolerances, run_suite

__version__ = "0.1.0"
