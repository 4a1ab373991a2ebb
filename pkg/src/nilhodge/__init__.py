"""Harmonic forms on almost-Hermitian four-dimensional nilmanifolds.

Exact invariant algebra (structure equations, bidegree splitting of d,
Chevalley-Eilenberg cohomology), Hermitian geometry (Hodge star, Lee form,
metric classification) and a lattice solver for the first-order system
characterising harmonic (1,1)-forms on the Kodaira-Thurston manifold.
"""

from .algebra import AcsFrame, InvalidAlgebraError, InvariantForm, NilLieAlgebra, structure_equations
from .cohomology import RiemannianMetric, betti_report, ce_betti
from .config import RunConfig, from_preset, load_config
from .exact import Qi
from .fields import FieldForm
from .grid import TwistedGrid
from .hermitian import MetricSpec, classify_metric, lee_form
from .spectral import analyse, assemble_harmonic_operator, kernel_dimension, smallest_singular_values

__version__ = "0.1.0"

__all__ = [
    "AcsFrame",
    "InvalidAlgebraError",
    "InvariantForm",
    "NilLieAlgebra",
    "structure_equations",
    "RiemannianMetric",
    "betti_report",
    "ce_betti",
    "RunConfig",
    "from_preset",
    "load_config",
    "Qi",
    "FieldForm",
    "TwistedGrid",
    "MetricSpec",
    "classify_metric",
    "lee_form",
    "analyse",
    "assemble_harmonic_operator",
    "kernel_dimension",
    "smallest_singular_values",
]
