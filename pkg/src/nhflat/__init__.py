"""Invariant nearly half-flat SU(3)-structures on S3 x S3.

The package is organised around a small exterior-algebra engine over the
fixed left-invariant coframe e1..e6 (``exterior``), the matrix
parameterization of the structures (``structure``), torsion extraction and
classification (``torsion``), closed-form solution families (``families``)
and the evolution flow lifting them to nearly parallel G2-structures
(``flow``).
"""

from nhflat.exterior import Form, contract, d, form_inner, hodge, pullback, wedge
from nhflat.structure import (
    InvalidStructureError,
    NhfStructure,
    SingularStructureError,
    StructureError,
    ValidationReport,
    hitchin_j,
    sample_random_structure,
)
from nhflat.torsion import (
    ClassReport,
    TorsionData,
    classify,
    extract_torsion,
    rotate_to_half_flat,
    scalar_curvature,
    w1_plus,
)
from nhflat.flow import FlowSingularityError, Trajectory, g2_residual, integrate
from nhflat import families, flow

__version__ = "0.1.0"

__all__ = [
    "Form",
    "wedge",
    "d",
    "contract",
    "pullback",
    "hodge",
    "form_inner",
    "NhfStructure",
    "ValidationReport",
    "StructureError",
    "InvalidStructureError",
    "SingularStructureError",
    "hitchin_j",
    "sample_random_structure",
    "TorsionData",
    "ClassReport",
    "extract_torsion",
    "classify",
    "scalar_curvature",
    "w1_plus",
    "rotate_to_half_flat",
    "Trajectory",
    "FlowSingularityError",
    "integrate",
    "g2_residual",
    "families",
    "flow",
]
