"""Fell bundles over finite étale groupoids, structured C*-algebras, and the
Weyl groupoid/bundle reconstruction that links them, at desk scale."""

from . import bundle, domination, functors, groupoid, instance, numeric, sections, structured, suite, weyl
from .bundle import FellBundle, coricality, generate_bundle, validate_fell_bundle
from .functors import FellMorphism, StructuredMorphism, ab_functor, sp_functor, verify_adjunction
from .groupoid import FiniteGroupoid, GroupoidFunctor, TwoCocycle, pair, validate_cocycle, validate_groupoid
from .instance import ParseError, ValidationError, generate, load_instance
from .numeric import DEFAULT_TOL, Tolerance
from .sections import BundleAlgebra, Section, norm_2, norm_b, norm_inf
from .structured import StructuredAlgebra, classify
from .suite import SuiteReport, run_suite
from .weyl import roundtrip, weyl_bundle

__version__ = "0.1.0"

__all__ = [
    "bundle", "domination", "functors", "groupoid", "instance", "numeric",
    "sections", "structured", "suite", "weyl",
    "FellBundle", "coricality", "generate_bundle", "validate_fell_bundle",
    "FellMorphism", "StructuredMorphism", "ab_functor", "sp_functor", "verify_adjunction",
    "FiniteGroupoid", "GroupoidFunctor", "TwoCocycle", "pair", "validate_cocycle", "validate_groupoid",
    "ParseError", "ValidationError", "generate", "load_instance",
    "DEFAULT_TOL", "Tolerance",
    "BundleAlgebra", "Section", "norm_2", "norm_b", "norm_inf",
    "StructuredAlgebra", "classify",
    "SuiteReport", "run_suite",
    "roundtrip", "weyl_bundle",
]
