"""Lipschitz surrogate properties for strongly orderable discrete targets.

The package turns a discrete, strongly orderable prediction target over a
finite-outcome probability simplex into a Lipschitz-continuous surrogate
property plus a link function back to the discrete reports, and audits
predictors for the associated calibration notions.
"""

from ordelic.simplex import LabeledDataset, as_simplex_point, norm_distance, sample_simplex
from ordelic.piecewise import MaxAffinePieces, PiecewiseAffine, PiecewiseQuadratic
from ordelic.properties import AffineBoundary, CostMatrix, OrderableSpec, OrientedNormals
from ordelic.embedding import EmbeddingInput, SmoothedSurrogate, build_surrogate
from ordelic.normals import NormalsSurrogate, build_from_spec
from ordelic.audit import AuditReport, LinkedProperty

__version__ = "0.1.0"

__all__ = [
    "LabeledDataset",
    "as_simplex_point",
    "norm_distance",
    "sample_simplex",
    "MaxAffinePieces",
    "PiecewiseAffine",
    "PiecewiseQuadratic",
    "AffineBoundary",
    "CostMatrix",
    "OrderableSpec",
    "OrientedNormals",
    "EmbeddingInput",
    "SmoothedSurrogate",
    "build_surrogate",
    "NormalsSurrogate",
    "build_from_spec",
    "AuditReport",
    "LinkedProperty",
    "__version__",
]
