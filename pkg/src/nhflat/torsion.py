"""Intrinsic torsion of invariant nearly half-flat structures.

The nonvanishing torsion forms are w1+ (scalar), w1- = 3 lambda / 4
(forced by the defining equation), w2- (a primitive (1,1) 2-form) and
w3 (a 3-form in the 12-dimensional module).  They are pinned down by

    d(omega)   = w1+ gamma + (3 lambda / 4) J gamma + w3
    d(J gamma) = -(2/3) w1+ omega^2 + w2- ^ omega

and the module memberships w3 ^ omega = w3 ^ gamma = w3 ^ J gamma = 0,
w2- ^ gamma = 0, w2- ^ omega^2 = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from nhflat.exterior import BASIS, DIMS, Form, d, form_inner, wedge
from nhflat.mat3 import adjugate
from nhflat.structure import NhfStructure, InvalidStructureError, DEFAULT_TOL

CLASSIFY_TOL = 1e-7

CLASS_LABELS = ("W1-", "W1", "W1-+W3", "W1+W3", "W1-+W2-+W3", "W1+W2-+W3")


@dataclass
class TorsionData:
    w1plus: float
    w1minus: float
    w2minus: Form
    w3: Form
    s: float
    class_label: str
    residuals: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "w1plus": self.w1plus,
            "w1minus": self.w1minus,
            "w2minus": self.w2minus.coeffs.tolist(),
            "w3": self.w3.coeffs.tolist(),
            "s": self.s,
            "class": self.class_label,
            "residuals": dict(self.residuals),
        }


def w1_plus(structure: NhfStructure) -> float:
    """w1+ = tr(P^T R) / (2 (det P)^2)."""
    return float(np.trace(structure.P.T @ structure.R)) / (
        2.0 * structure.det_p**2
    )


def w3_form(structure: NhfStructure, tol: float = DEFAULT_TOL) -> Form:
    """w3 = d(omega) - w1+ gamma - (3 lambda/4) J gamma, with membership check."""
    w1p = w1_plus(structure)
    w3 = (
        d(structure.omega)
        - w1p * structure.gamma
        - 0.75 * structure.lam * structure.Jgamma
    )
    scale = max(1.0, w3.max_abs())
    bad = max(
        wedge(w3, structure.omega).max_abs(),
        wedge(w3, structure.gamma).max_abs(),
        wedge(w3, structure.Jgamma).max_abs(),
    )
    if bad > tol * scale * 10:
        raise InvalidStructureError(
            f"w3 membership residual {bad:.3e} exceeds tolerance"
        )
    return w3


def _wedge_operator(fixed: Form, k: int) -> np.ndarray:
    """Matrix of beta |-> beta ^ fixed on degree-k forms, rows indexed by
    the (k + deg fixed)-monomials."""
    rows = DIMS[k + fixed.degree]
    op = np.zeros((rows, DIMS[k]))
    for n, mono in enumerate(BASIS[k]):
        op[:, n] = wedge(Form.monomial(mono), fixed).coeffs
    return op


def w2_minus_form(structure: NhfStructure, tol: float = DEFAULT_TOL) -> Form:
    """Solve w2- ^ omega = dJgamma + (2/3) w1+ omega^2 inside the primitive
    (1,1) module, as an augmented least-squares system."""
    w1p = w1_plus(structure)
    om = structure.omega
    om2 = wedge(om, om)
    target = d(structure.Jgamma) + (2.0 / 3.0) * w1p * om2

    A = np.vstack(
        [
            _wedge_operator(om, 2),       # 15 equations: beta ^ omega = target
            _wedge_operator(structure.gamma, 2),  # 6 equations: beta ^ gamma = 0
            _wedge_operator(om2, 2),      # 1 equation:  beta ^ omega^2 = 0
        ]
    )
    rhs = np.concatenate([target.coeffs, np.zeros(DIMS[5]), np.zeros(DIMS[6])])
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = float(np.max(np.abs(A @ sol - rhs)))
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if resid > tol * scale * 10:
        raise InvalidStructureError(
            f"w2- solve residual {resid:.3e} exceeds tolerance"
        )
    beta = Form(2)
    beta.coeffs[:] = sol
    return beta


def scalar_curvature(structure: NhfStructure, torsion=None) -> float:
    """s = (10/3)(w1+)^2 + 15 lambda^2 / 8 - |w2-|^2 / 2 - |w3|^2 / 2.

    Norms are the tensor norms induced by the structure metric."""
    if torsion is None:
        w1p = w1_plus(structure)
        w2m = w2_minus_form(structure)
        w3 = w3_form(structure)
    else:
        w1p, w2m, w3 = torsion.w1plus, torsion.w2minus, torsion.w3
    g = structure.metric()
    n2 = form_inner(g, w2m, w2m)
    n3 = form_inner(g, w3, w3)
    return (
        (10.0 / 3.0) * w1p * w1p
        + 15.0 * structure.lam**2 / 8.0
        - 0.5 * n2
        - 0.5 * n3
    )


def extract_torsion(structure: NhfStructure, tol: float = DEFAULT_TOL) -> TorsionData:
    """All torsion data plus the reconstruction residuals."""
    w1p = w1_plus(structure)
    w3 = w3_form(structure, tol)
    w2m = w2_minus_form(structure, tol)
    om2 = wedge(structure.omega, structure.omega)
    rec_domega = (
        d(structure.omega)
        - w1p * structure.gamma
        - 0.75 * structure.lam * structure.Jgamma
        - w3
    ).max_abs()
    rec_djgamma = (
        d(structure.Jgamma)
        + (2.0 / 3.0) * w1p * om2
        - wedge(w2m, structure.omega)
    ).max_abs()
    data = TorsionData(
        w1plus=w1p,
        w1minus=0.75 * structure.lam,
        w2minus=w2m,
        w3=w3,
        s=0.0,
        class_label="",
        residuals={"domega": rec_domega, "djgamma": rec_djgamma},
    )
    data.s = scalar_curvature(structure, data)
    data.class_label = classify(structure, tol=max(tol, CLASSIFY_TOL)).label
    return data


@dataclass
class ClassReport:
    label: str
    nearly_kahler: bool
    w1plus_zero: bool
    w3_zero: bool
    w2minus_zero: bool
    predicate_residuals: dict


def _matrix_predicates(structure: NhfStructure):
    """Relative residuals of the closed-form torsion-vanishing conditions.

    Each residual is normalized by the magnitude of the terms being
    compared so the verdict is scale invariant; the w1+ = 0 test is
    simply |w1+| itself, which is already dimensionally a rate."""
    s = structure
    tr_pr = float(np.trace(s.P.T @ s.R))
    lam, dp = s.lam, s.det_p
    adjPT = adjugate(s.P.T)

    def _mag(*xs):
        return max(1e-300, *(float(np.max(np.abs(x))) for x in xs))

    nk = max(
        abs(s.A),
        abs(s.B),
        float(np.max(np.abs(s.R1 - (2.0 * dp / (3.0 * lam)) * s.P))),
        float(np.max(np.abs(s.R2 + (2.0 * dp / (3.0 * lam)) * s.P))),
    ) / _mag(s.R1, s.R2, (2.0 * dp / (3.0 * lam)) * s.P, s.A, s.B)
    w1p_zero = abs(tr_pr) / (2.0 * dp * dp)
    # w2- = 0: R proportional to Adj(P^T) with the w1+ coefficient
    cocoupled = float(
        np.max(np.abs(s.R - (tr_pr / (3.0 * dp)) * adjPT))
    ) / _mag(s.R, (tr_pr / (3.0 * dp)) * adjPT)
    # w3 = 0: the four displayed conditions on A, B, R1, R2
    c = tr_pr / (3.0 * lam * dp)
    t1 = (1.0 / (3.0 * lam)) * (2.0 * dp * s.P - (tr_pr / dp) * s.Q1)
    t2 = (1.0 / (3.0 * lam)) * (2.0 * dp * s.P + (tr_pr / dp) * s.Q2)
    coupled = max(
        abs(s.A + c * s.a),
        abs(s.B + c * s.b),
        float(np.max(np.abs(s.R1 - t1))),
        float(np.max(np.abs(s.R2 + t2))),
    ) / _mag(s.R1, s.R2, t1, t2, s.A, s.B, c * s.a, c * s.b)
    return {
        "nearly_kahler": nk,
        "w1plus_zero": w1p_zero,
        "w2minus_zero": cocoupled,
        "w3_zero": coupled,
    }


def classify(structure: NhfStructure, tol: float = CLASSIFY_TOL) -> ClassReport:
    """Torsion class label from the matrix-level predicates."""
    res = _matrix_predicates(structure)
    w1p0 = res["w1plus_zero"] <= tol
    w30 = res["w3_zero"] <= tol
    w2m0 = res["w2minus_zero"] <= tol
    nk = res["nearly_kahler"] <= tol
    if w30:
        # w3 = 0 forces w2- = 0 for these structures
        label = "W1-" if w1p0 else "W1"
    elif w2m0:
        label = "W1-+W3" if w1p0 else "W1+W3"
    else:
        label = "W1-+W2-+W3" if w1p0 else "W1+W2-+W3"
    return ClassReport(
        label=label,
        nearly_kahler=nk,
        w1plus_zero=w1p0,
        w3_zero=w30,
        w2minus_zero=w2m0,
        predicate_residuals=res,
    )


def rotate_to_half_flat(structure: NhfStructure, tol: float = DEFAULT_TOL):
    """Rotate gamma inside its stable orbit to a closed form.

    Requires w2- = 0.  Returns (theta, gamma_theta, max |d gamma_theta|)
    with theta = arctan(3 lambda / (4 w1+)); theta = pi/2 when w1+ = 0."""
    w2m = w2_minus_form(structure, tol)
    if w2m.max_abs() > max(tol, 1e-8):
        raise InvalidStructureError(
            f"w2- = {w2m.max_abs():.3e} is not zero; no closed rotation exists"
        )
    w1p = w1_plus(structure)
    if abs(w1p) < 1e-12:
        theta = 0.5 * np.pi
    else:
        theta = float(np.arctan(3.0 * structure.lam / (4.0 * w1p)))
    gamma_theta = np.cos(theta) * structure.gamma + np.sin(theta) * structure.Jgamma
    residual = d(gamma_theta).max_abs()
    return theta, gamma_theta, residual
